import os

from django_maxrigid.sequence_io import write_sequence
from django_maxrigid.synthesis import MotionKind, SynthesisConfig, generate
from django_maxrigid.utils import BaseRigidityCommand


class Command(BaseRigidityCommand):

    help = "Generate a synthetic tracked sequence with ground truth"

    def add_arguments(self, parser):
        defaults = SynthesisConfig()
        parser.add_argument(
            '--kind', dest='kind', default=defaults.motion_kind.slug,
            choices=[kind.slug for kind in MotionKind],
            help='Motion of the scene (default: %(default)s)')
        parser.add_argument(
            '--points', type=int, default=defaults.n_points, dest='points',
            help='Number of points (default: %(default)s)')
        parser.add_argument(
            '--frames', type=int, default=defaults.n_frames, dest='frames',
            help='Number of frames (default: %(default)s)')
        parser.add_argument(
            '--noise', type=float, default=defaults.noise_sigma, dest='noise',
            help='Gaussian pixel noise sigma (default: %(default)s)')
        parser.add_argument(
            '--missing', type=float, default=defaults.missing_ratio, dest='missing',
            help='Fraction of observations to hide (default: %(default)s)')
        parser.add_argument(
            '--seed', type=int, default=defaults.rng_seed, dest='seed',
            help='Random seed (default: %(default)s)')
        parser.add_argument(
            '--fov', type=float, default=defaults.fov_degrees, dest='fov',
            help='Horizontal field of view in degrees (default: %(default)s)')
        parser.add_argument(
            '--neighbors', '-k', type=int, default=defaults.k_neighbors, dest='k_neighbors',
            help='Neighbourhood size every frame must support (default: %(default)s)')
        parser.add_argument(
            '--scene-depth', type=float, default=defaults.scene_depth, dest='scene_depth',
            help='Scene distance in scene sizes (default: %(default)s)')
        parser.add_argument(
            '--output', '-o', dest='output', default=None,
            help='Sequence file to write (default: sequence.json in the output directory)')

    def _handle(self, *args, **options):
        config = SynthesisConfig(
            n_points=options['points'],
            n_frames=options['frames'],
            motion_kind=options['kind'],
            noise_sigma=options['noise'],
            missing_ratio=options['missing'],
            rng_seed=options['seed'],
            fov_degrees=options['fov'],
            k_neighbors=options['k_neighbors'],
            scene_depth=options['scene_depth'],
        )
        output = options.get('output') or os.path.join(self.output_dir, 'sequence.json')
        self.section('Generating %s sequence with seed %d' % (config.motion_kind.value,
                                                              config.rng_seed))
        seq = generate(config)
        write_sequence(seq, output)
        self.stdout.write('%d points, %d frames, %.3f masked, written to %s'
                          % (seq.n_points, seq.n_frames, seq.masked_fraction, output))

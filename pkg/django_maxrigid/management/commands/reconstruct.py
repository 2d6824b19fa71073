from django.core.management.base import CommandError

from django_maxrigid.pipeline import DEFAULT_K_NEIGHBORS, RunConfig, run_reconstruct
from django_maxrigid.problem import DEFAULT_LAMBDA1, DEFAULT_LAMBDA2
from django_maxrigid.synthesis import MotionKind, SynthesisConfig
from django_maxrigid.utils import EXIT_OK, BaseRigidityCommand, dumps_json


class Command(BaseRigidityCommand):

    help = ("Reconstruct a tracked point sequence by maximizing rigidity. Reads a "
            "sequence file or synthesizes one, and prints a JSON summary line.")

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument(
            '--input', '-i', dest='input_path', default=None,
            help='Sequence file to reconstruct (default: %(default)s)')
        source.add_argument(
            '--synth', dest='synth', default=None,
            choices=[kind.slug for kind in MotionKind],
            help='Synthesize a sequence of this motion kind instead (default: %(default)s)')
        synth_defaults = SynthesisConfig()
        parser.add_argument(
            '--seed', type=int, default=synth_defaults.rng_seed, dest='seed',
            help='Random seed for --synth (default: %(default)s)')
        parser.add_argument(
            '--points', type=int, default=synth_defaults.n_points, dest='points',
            help='Number of points for --synth (default: %(default)s)')
        parser.add_argument(
            '--frames', type=int, default=synth_defaults.n_frames, dest='frames',
            help='Number of frames for --synth (default: %(default)s)')
        parser.add_argument(
            '--noise', type=float, default=synth_defaults.noise_sigma, dest='noise',
            help='Pixel noise sigma for --synth (default: %(default)s)')
        parser.add_argument(
            '--missing', type=float, default=synth_defaults.missing_ratio, dest='missing',
            help='Fraction of missing observations for --synth (default: %(default)s)')
        parser.add_argument(
            '--scene-depth', type=float, default=synth_defaults.scene_depth, dest='scene_depth',
            help='Scene distance in scene sizes for --synth (default: %(default)s)')
        parser.add_argument(
            '--neighbors', '-k', type=int, default=DEFAULT_K_NEIGHBORS, dest='k_neighbors',
            help='Neighbourhood size of the K-NN graph (default: %(default)s)')
        parser.add_argument(
            '--lambda1', type=float, default=DEFAULT_LAMBDA1, dest='lambda1',
            help='Weight of the leg sum (default: %(default)s)')
        parser.add_argument(
            '--lambda2', type=float, default=DEFAULT_LAMBDA2, dest='lambda2',
            help='Weight of the squared distance sum (default: %(default)s)')
        self.add_solver_arguments(parser)
        parser.add_argument(
            '--output-dir', '-o', dest='output_dir', default=self.output_dir,
            help='Directory for the reports (default: %(default)s)')
        parser.add_argument(
            '--emit-problem', action='store_true', default=False, dest='emit_problem',
            help='Also write the assembled problem (default: %(default)s)')
        parser.add_argument(
            '--emit-trace', action='store_true', default=False, dest='emit_trace',
            help='Also write the per-iteration residual trace (default: %(default)s)')
        parser.add_argument(
            '--emit-per-frame', action='store_true', default=False, dest='emit_per_frame',
            help='Also write per-frame errors as CSV (default: %(default)s)')
        parser.add_argument(
            '--force', action='store_true', default=False, dest='force',
            help='Solve even when the sequence looks degenerate (default: %(default)s)')
        parser.add_argument(
            '--accept-max-iterations', action='store_true', default=False,
            dest='accept_max_iterations',
            help='Reconstruct from an unconverged solution (default: %(default)s)')

    def _handle(self, *args, **options):
        synthesis = None
        if options.get('synth'):
            synthesis = SynthesisConfig(
                n_points=options['points'],
                n_frames=options['frames'],
                motion_kind=options['synth'],
                noise_sigma=options['noise'],
                missing_ratio=options['missing'],
                rng_seed=options['seed'],
                k_neighbors=options['k_neighbors'],
                scene_depth=options['scene_depth'],
            )
        config = RunConfig(
            input_path=options.get('input_path'),
            synthesis=synthesis,
            k_neighbors=options['k_neighbors'],
            lambda1=options['lambda1'],
            lambda2=options['lambda2'],
            solver=self.solver_config(options),
            output_directory=options['output_dir'],
            emit_problem=options['emit_problem'],
            emit_trace=options['emit_trace'],
            emit_per_frame=options['emit_per_frame'],
            force=options['force'],
            accept_max_iterations=options['accept_max_iterations'],
        )

        self.section('Reconstructing %s into %s'
                     % (config.input_path or 'synthetic %s sequence' % options['synth'],
                        config.output_directory))
        result = run_reconstruct(config)
        for name, path in sorted(result.outputs.items()):
            self.stdout.write('%s: %s' % (name, path))
        self.stdout.write('=' * 70)
        self.stdout.write(dumps_json(result.summary, indent=None))
        if result.exit_code != EXIT_OK:
            raise CommandError(result.message, returncode=result.exit_code)

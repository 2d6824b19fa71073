import logging
import os

from django.core.management.base import CommandError

from django_maxrigid.evaluation import (
    Reconstruction,
    align_procrustes,
    align_scale,
    compute_metrics,
    rigidity_diagnostics,
)
from django_maxrigid.exceptions import NoOverlap
from django_maxrigid.graph import build_knn_graph
from django_maxrigid.pipeline import DEFAULT_K_NEIGHBORS, DIAGNOSTICS_FILE, EVALUATION_FILE, PER_FRAME_FILE
from django_maxrigid.sequence_io import read_sequence
from django_maxrigid.utils import BaseRigidityCommand, EXIT_USAGE, read_json, timestamp, write_csv, write_json

logger = logging.getLogger(__name__)

ALIGNMENTS = ('scale', 'procrustes', 'per-frame-procrustes')


class Command(BaseRigidityCommand):

    help = "Evaluate a stored reconstruction against the ground truth of its sequence"

    def add_arguments(self, parser):
        parser.add_argument('sequence', help='Sequence file with ground truth')
        parser.add_argument('reconstruction', help='Reconstruction report to evaluate')
        parser.add_argument(
            '--alignment', dest='alignment', default='scale', choices=ALIGNMENTS,
            help='How to align the reconstruction to the ground truth (default: %(default)s)')
        parser.add_argument(
            '--neighbors', '-k', type=int, default=DEFAULT_K_NEIGHBORS, dest='k_neighbors',
            help='Neighbourhood size for the rigidity diagnostics (default: %(default)s)')
        parser.add_argument(
            '--output-dir', '-o', dest='output_dir', default=self.output_dir,
            help='Directory for the reports (default: %(default)s)')
        parser.add_argument(
            '--emit-per-frame', action='store_true', default=False, dest='emit_per_frame',
            help='Also write per-frame errors as CSV (default: %(default)s)')

    def _handle(self, *args, **options):
        seq = read_sequence(options['sequence'])
        try:
            recon = Reconstruction.from_dict(read_json(options['reconstruction']))
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise CommandError('not a reconstruction report: %s' % exc, returncode=EXIT_USAGE)
        if not seq.has_ground_truth:
            raise NoOverlap('%s has no ground truth' % options['sequence'])
        rows = dict((int(frame), row) for row, frame in enumerate(seq.frame_index))
        if recon.n_points != seq.n_points or any(int(f) not in rows for f in recon.frame_index):
            raise NoOverlap('reconstruction does not belong to %s' % options['sequence'])

        seq = seq.select_frames([rows[int(f)] for f in recon.frame_index])
        truth = seq.ground_truth
        alignment = options['alignment']
        self.section('Evaluating %s with %s alignment' % (options['reconstruction'], alignment))
        if alignment == 'scale':
            aligned, scale = align_scale(recon, truth)
            applied = {'kind': 'scale', 'scale': scale}
        elif alignment == 'procrustes':
            aligned, transform = align_procrustes(recon, truth)
            applied = dict(transform.to_dict(), kind='procrustes')
        else:
            aligned, transforms = align_procrustes(recon, truth, per_frame=True)
            applied = {'kind': 'per-frame-procrustes',
                       'frames': [None if t is None else t.to_dict() for t in transforms]}
        report = compute_metrics(aligned, truth, alignment=applied)

        output_dir = options['output_dir']
        stamp = timestamp()
        path = write_json(os.path.join(output_dir, EVALUATION_FILE),
                          dict(report.to_dict(), masked_fraction=seq.masked_fraction,
                               timestamp=stamp))
        self.stdout.write('RMSE %.6g, R-Err %.4g%%, written to %s' % (report.rmse, report.r_err, path))
        if options['emit_per_frame']:
            write_csv(os.path.join(output_dir, PER_FRAME_FILE), ['frame', 'rmse', 'r_err'],
                      report.per_frame_rows())

        k = self.neighbor_count(seq, options['k_neighbors'])
        graph = build_knn_graph(seq, k)
        diagnostics = rigidity_diagnostics(recon, graph)
        path = write_json(os.path.join(output_dir, DIAGNOSTICS_FILE),
                          dict(diagnostics.to_dict(), timestamp=stamp))
        self.stdout.write('total rigidity deviation %.6g, written to %s'
                          % (diagnostics.total_delta_prime, path))

    def neighbor_count(self, seq, k):
        """Largest usable neighbourhood size: every frame must keep more than k visible points."""
        limit = int(seq.visible.sum(axis=1).min()) - 1
        if k > limit:
            logger.warning('neighbourhood size %d clamped to %d, the fewest visible points '
                           'in a frame minus one', k, limit)
            k = limit
        return k

import os

from django.core.management.base import CommandError

from django_maxrigid.conic import load_problem
from django_maxrigid.solver import SolverStatus, audit_solution, load_solution, solve
from django_maxrigid.utils import EXIT_SOLVER, BaseRigidityCommand, read_json, timestamp, write_json


class Command(BaseRigidityCommand):

    help = "Solve a serialized conic problem and write the solution as JSON"

    def add_arguments(self, parser):
        parser.add_argument('problem', help='Problem file in the CONIC text format')
        self.add_solver_arguments(parser)
        parser.add_argument(
            '--warm-start', dest='warm_start', default=None,
            help='Solution file to start from (default: %(default)s)')
        parser.add_argument(
            '--trace', dest='trace', default=None,
            help='CSV file for the per-iteration residuals (default: %(default)s)')
        parser.add_argument(
            '--output', '-o', dest='output', default=None,
            help='Solution file to write (default: solution.json in the output directory)')

    def _handle(self, *args, **options):
        with open(options['problem']) as stream:
            problem = load_problem(stream)
        warm_start = None
        if options.get('warm_start'):
            warm_start = load_solution(problem, read_json(options['warm_start']))
        config = self.solver_config(options, trace_path=options.get('trace'))

        self.section('Solving %s: %d blocks, %d variables'
                     % (options['problem'], len(problem.block_sizes), problem.n_variables))
        solution = solve(problem, config, warm_start=warm_start)
        audit = audit_solution(problem, solution)
        output = options.get('output') or os.path.join(self.output_dir, 'solution.json')
        write_json(output, dict(solution.to_dict(), audit=audit.to_dict(), timestamp=timestamp()))
        self.stdout.write('%s after %d iterations, objective %r, written to %s'
                          % (solution.status.value, solution.iterations,
                             solution.objective_value, output))
        if solution.status is not SolverStatus.OPTIMAL:
            raise CommandError('solver finished with status %s' % solution.status.value,
                               returncode=EXIT_SOLVER)

import csv
import io
import json
import logging
import os
import tempfile
import time
from contextlib import contextmanager

from django.conf import settings
from django.core.management import BaseCommand, CommandError
from django.core.serializers.json import DjangoJSONEncoder

from django_maxrigid.exceptions import (
    ConfigurationError,
    EmptyProblem,
    GenerationFailed,
    InvalidNeighborCount,
    NumericalError,
    ParseError,
    RigidityError,
    SolutionRejected,
)
from django_maxrigid.solver import SolverConfig

logger = logging.getLogger(__name__)

TIME_FORMAT = '%Y%m%d-%H%M%S'
SEPARATOR = '=' * 70

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DEGENERATE = 3
EXIT_SOLVER = 4

SOLVER_SETTINGS = (
    'eps_primal', 'eps_dual', 'eps_gap', 'max_iterations',
    'over_relaxation', 'scaling_enabled', 'eps_infeasible',
)


def timestamp():
    return time.strftime(TIME_FORMAT)


def exit_code_for(exc):
    """
    Map a library or I/O error onto the command exit codes.
    """
    if isinstance(exc, (ParseError, OSError)):
        return EXIT_IO
    if isinstance(exc, (ConfigurationError, InvalidNeighborCount, GenerationFailed)):
        return EXIT_USAGE
    if isinstance(exc, (SolutionRejected, NumericalError, EmptyProblem)):
        return EXIT_SOLVER
    if isinstance(exc, RigidityError):
        return EXIT_IO
    return EXIT_USAGE


@contextmanager
def atomic_open(path, mode='w'):
    """
    Write to a temporary file next to ``path`` and move it into place on
    success. A failed write leaves ``path`` untouched.
    """
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.exists(directory):
        os.makedirs(directory)
    handle, temporary = tempfile.mkstemp(dir=directory, prefix='.%s.' % os.path.basename(path))
    try:
        with io.open(handle, mode, newline='' if 'b' not in mode else None) as stream:
            yield stream
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.remove(temporary)
        raise


def dumps_json(data, indent=2):
    return json.dumps(data, cls=DjangoJSONEncoder, sort_keys=True, indent=indent) + '\n'


def write_json(path, data):
    with atomic_open(path) as stream:
        stream.write(dumps_json(data))
    return path


def write_csv(path, header, rows):
    with atomic_open(path) as stream:
        writer = csv.writer(stream)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def read_json(path):
    with open(path) as stream:
        return json.load(stream)


def get_output_directory():
    directory = getattr(settings, 'MAXRIGID_OUTPUT_DIRECTORY', None)
    if not directory:
        directory = os.environ.get('MAXRIGID_OUTPUT_DIR') or os.getcwd()
    return directory


def get_solver_defaults():
    """
    SolverConfig field values with the MAXRIGID_SOLVER overrides applied.
    """
    overrides = getattr(settings, 'MAXRIGID_SOLVER', None) or {}
    unknown = set(overrides) - set(SOLVER_SETTINGS)
    if unknown:
        raise ConfigurationError('unknown MAXRIGID_SOLVER keys: %s' % ', '.join(sorted(unknown)))
    defaults = SolverConfig()
    values = dict((name, getattr(defaults, name)) for name in SOLVER_SETTINGS)
    values.update(overrides)
    return values


class BaseRigidityCommand(BaseCommand):
    """
    Shared settings and error translation for the reconstruction commands.
    Subclasses implement ``_handle``; library errors leave ``handle`` as
    ``CommandError`` carrying the matching exit code.
    """

    def __init__(self, *args, **kwargs):
        super(BaseRigidityCommand, self).__init__(*args, **kwargs)
        self.output_dir = get_output_directory()
        self.solver_defaults = get_solver_defaults()

    def add_solver_arguments(self, parser):
        defaults = self.solver_defaults
        parser.add_argument(
            '--eps-primal', type=float, default=defaults['eps_primal'], dest='eps_primal',
            help='Primal residual tolerance (default: %(default)s)')
        parser.add_argument(
            '--eps-dual', type=float, default=defaults['eps_dual'], dest='eps_dual',
            help='Dual residual tolerance (default: %(default)s)')
        parser.add_argument(
            '--eps-gap', type=float, default=defaults['eps_gap'], dest='eps_gap',
            help='Relative duality gap tolerance (default: %(default)s)')
        parser.add_argument(
            '--max-iterations', type=int, default=defaults['max_iterations'],
            dest='max_iterations', help='Iteration limit of the solver (default: %(default)s)')
        parser.add_argument(
            '--over-relaxation', type=float, default=defaults['over_relaxation'],
            dest='over_relaxation', help='Over-relaxation factor in (1, 2) (default: %(default)s)')
        parser.add_argument(
            '--no-scaling', action='store_false', default=defaults['scaling_enabled'],
            dest='scaling_enabled', help='Disable data equilibration (default: %(default)s)')
        parser.add_argument(
            '--eps-infeasible', type=float, default=defaults['eps_infeasible'],
            dest='eps_infeasible', help='Certificate tolerance (default: %(default)s)')

    def solver_config(self, options, **extra):
        values = dict((name, options[name]) for name in SOLVER_SETTINGS)
        values.update(extra)
        return SolverConfig(**values)

    def section(self, message):
        self.stdout.write(SEPARATOR)
        self.stdout.write(message)

    def handle(self, *args, **options):
        try:
            return self._handle(*args, **options)
        except (RigidityError, OSError) as exc:
            logger.debug('command failed', exc_info=True)
            raise CommandError(str(exc), returncode=exit_code_for(exc))

    def _handle(self, *args, **options):
        raise NotImplementedError

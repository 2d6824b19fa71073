import csv

import pytest

from django_maxrigid.exceptions import (
    ConfigurationError,
    EmptyProblem,
    InvalidSequence,
    NoOverlap,
    ParseError,
    SolutionRejected,
)
from django_maxrigid.pipeline import RunConfig, run_reconstruct
from django_maxrigid.synthesis import MotionKind, SynthesisConfig
from django_maxrigid.utils import (
    EXIT_DEGENERATE,
    EXIT_IO,
    EXIT_SOLVER,
    EXIT_USAGE,
    atomic_open,
    exit_code_for,
    read_json,
    write_csv,
    write_json,
)


def test_run_config_needs_one_source():
    with pytest.raises(ConfigurationError):
        RunConfig()
    with pytest.raises(ConfigurationError):
        RunConfig(input_path='sequence.json', synthesis=SynthesisConfig())
    with pytest.raises(ConfigurationError):
        RunConfig(input_path='sequence.json', lambda2=-1.0)
    assert RunConfig(input_path='sequence.json').weights.lambda2 == 20.0


def test_degenerate_run_reports_instead_of_raising(tmpdir):
    synthesis = SynthesisConfig(n_points=8, n_frames=3, motion_kind=MotionKind.PURE_ROTATION)
    result = run_reconstruct(RunConfig(synthesis=synthesis, k_neighbors=4,
                                       output_directory=str(tmpdir)))
    assert result.exit_code == EXIT_DEGENERATE
    assert 'PureRotationSuspected' in result.message
    assert result.summary['exit_code'] == EXIT_DEGENERATE
    assert set(result.outputs) == {'sequence', 'degeneracy'}
    assert 'timestamp' in read_json(result.outputs['degeneracy'])


def test_failed_run_keeps_its_message(tmpdir):
    result = run_reconstruct(RunConfig(input_path=str(tmpdir.join('nothing.json')),
                                       output_directory=str(tmpdir)))
    assert result.exit_code == EXIT_IO
    assert result.summary['message'] == result.message
    assert result.outputs == {}


@pytest.mark.parametrize('exc, code', [
    (ParseError('bad', 'line 1'), EXIT_IO),
    (FileNotFoundError('gone'), EXIT_IO),
    (NoOverlap('none'), EXIT_IO),
    (InvalidSequence('short'), EXIT_IO),
    (ConfigurationError('bad'), EXIT_USAGE),
    (SolutionRejected('negative'), EXIT_SOLVER),
    (EmptyProblem('empty'), EXIT_SOLVER),
])
def test_exit_codes(exc, code):
    assert exit_code_for(exc) == code


def test_atomic_open_discards_failed_writes(tmpdir):
    path = str(tmpdir.join('report.json'))
    with pytest.raises(RuntimeError):
        with atomic_open(path) as stream:
            stream.write('partial')
            raise RuntimeError('interrupted')
    assert tmpdir.listdir() == []

    write_json(path, {'b': 1.0, 'a': [1, 2]})
    assert read_json(path) == {'a': [1, 2], 'b': 1.0}
    assert tmpdir.join('report.json').read().index('"a"') < tmpdir.join('report.json').read().index('"b"')


def test_csv_floats_round_trip(tmpdir):
    path = str(tmpdir.join('per_frame.csv'))
    write_csv(path, ['frame', 'rmse'], [(0, 0.1 + 0.2), (1, 1e-17)])
    with open(path) as stream:
        rows = list(csv.reader(stream))
    assert rows[0] == ['frame', 'rmse']
    assert float(rows[1][1]) == 0.1 + 0.2
    assert float(rows[2][1]) == 1e-17

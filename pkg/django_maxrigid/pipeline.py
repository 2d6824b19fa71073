"""
End-to-end reconstruction run: load or synthesize a sequence, build the
neighbour graph and the SDP, solve, reconstruct, evaluate and write reports.
"""
import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np

from django_maxrigid.conic import dump_problem
from django_maxrigid.evaluation import align_scale, compute_metrics, reconstruct, rigidity_diagnostics
from django_maxrigid.exceptions import ConfigurationError, RigidityError
from django_maxrigid.graph import build_knn_graph
from django_maxrigid.problem import (
    DEFAULT_LAMBDA1,
    DEFAULT_LAMBDA2,
    ProblemWeights,
    assemble_problem,
    detect_degeneracy,
)
from django_maxrigid.sequence import ingest
from django_maxrigid.sequence_io import read_sequence, write_sequence
from django_maxrigid.solver import SolverConfig, SolverStatus, audit_solution, solve
from django_maxrigid.synthesis import SynthesisConfig, generate
from django_maxrigid.utils import (
    EXIT_DEGENERATE,
    EXIT_OK,
    EXIT_SOLVER,
    atomic_open,
    exit_code_for,
    timestamp,
    write_csv,
    write_json,
)

logger = logging.getLogger(__name__)

DEFAULT_K_NEIGHBORS = 20

SEQUENCE_FILE = 'sequence.json'
PROBLEM_FILE = 'problem.txt'
TRACE_FILE = 'trace.csv'
SOLVER_FILE = 'solver.json'
RECONSTRUCTION_FILE = 'reconstruction.json'
EVALUATION_FILE = 'evaluation.json'
DIAGNOSTICS_FILE = 'diagnostics.json'
DEGENERACY_FILE = 'degeneracy.json'
PER_FRAME_FILE = 'per_frame.csv'


@dataclass(frozen=True)
class RunConfig:
    """
    Exactly one of ``input_path`` and ``synthesis`` names the sequence.
    """
    input_path: str = None
    synthesis: SynthesisConfig = None
    k_neighbors: int = DEFAULT_K_NEIGHBORS
    lambda1: float = DEFAULT_LAMBDA1
    lambda2: float = DEFAULT_LAMBDA2
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_directory: str = '.'
    emit_problem: bool = False
    emit_trace: bool = False
    emit_per_frame: bool = False
    force: bool = False
    accept_max_iterations: bool = False

    def __post_init__(self):
        if (self.input_path is None) == (self.synthesis is None):
            raise ConfigurationError('give either an input sequence or a synthesis config')
        if self.k_neighbors < 1:
            raise ConfigurationError('k_neighbors must be at least 1, got %r' % self.k_neighbors)
        ProblemWeights(self.lambda1, self.lambda2)

    @property
    def weights(self):
        return ProblemWeights(self.lambda1, self.lambda2)


@dataclass
class RunResult:
    exit_code: int = EXIT_OK
    message: str = ''
    summary: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)


class ReconstructionRun(object):

    def __init__(self, config):
        self.config = config
        self.result = RunResult()
        self.summary = self.result.summary
        self.stamp = timestamp()

    def path(self, name):
        return os.path.join(self.config.output_directory, name)

    def write_report(self, key, name, data):
        data = dict(data, timestamp=self.stamp)
        self.result.outputs[key] = write_json(self.path(name), data)

    def load(self):
        config = self.config
        if config.input_path is not None:
            seq = read_sequence(config.input_path)
        else:
            seq = generate(config.synthesis)
            self.result.outputs['sequence'] = write_sequence(seq, self.path(SEQUENCE_FILE))
        self.summary.update(
            n_points=seq.n_points,
            n_frames=seq.n_frames,
            masked_fraction=seq.masked_fraction,
        )
        return seq

    def neighbor_count(self, seq):
        k = self.config.k_neighbors
        if k > seq.n_points - 1:
            logger.warning('neighbourhood size %d clamped to %d for %d points',
                           k, seq.n_points - 1, seq.n_points)
            k = seq.n_points - 1
        self.summary['k_neighbors'] = k
        return k

    def solve(self, problem):
        solver_config = self.config.solver
        if self.config.emit_trace:
            solver_config = replace(solver_config, trace_path=self.path(TRACE_FILE))
        solution = solve(problem, solver_config)
        if self.config.emit_trace:
            self.result.outputs['trace'] = self.path(TRACE_FILE)
        self.summary.update(
            status=solution.status.value,
            objective_value=solution.objective_value,
            iterations=solution.iterations,
        )
        audit = audit_solution(problem, solution)
        self.write_report('solver', SOLVER_FILE, {
            'status': solution.status.value,
            'objective_value': solution.objective_value,
            'iterations': solution.iterations,
            'residuals': solution.residuals.to_dict(),
            'audit': audit.to_dict(),
        })
        return solution

    def run(self):
        config = self.config
        seq = self.load()
        k = self.neighbor_count(seq)
        seq = ingest(seq, k)
        graph = build_knn_graph(seq, k)
        self.summary['edges'] = len(graph)

        degeneracy = detect_degeneracy(seq, graph)
        self.write_report('degeneracy', DEGENERACY_FILE, degeneracy.to_dict())
        self.summary['degeneracy'] = degeneracy.kind.value
        if degeneracy.degenerate and not config.force:
            self.result.exit_code = EXIT_DEGENERATE
            self.result.message = ('degenerate sequence: %s (use --force to solve anyway)'
                                   % degeneracy.kind.value)
            return

        problem = assemble_problem(seq, graph, config.weights)
        if config.emit_problem:
            with atomic_open(self.path(PROBLEM_FILE)) as stream:
                dump_problem(problem, stream)
            self.result.outputs['problem'] = self.path(PROBLEM_FILE)

        solution = self.solve(problem)
        accepted = solution.status is SolverStatus.OPTIMAL or (
            config.accept_max_iterations and solution.status is SolverStatus.MAX_ITERATIONS)
        if not accepted:
            self.result.exit_code = EXIT_SOLVER
            self.result.message = 'solver finished with status %s' % solution.status.value
            return

        recon = reconstruct(seq, solution, accept_max_iterations=config.accept_max_iterations)
        self.write_report('reconstruction', RECONSTRUCTION_FILE, recon.to_dict())
        self.summary['max_rank_ratio'] = float(np.nanmax(recon.rank_ratios))

        if seq.has_ground_truth:
            scaled, scale = align_scale(recon, seq.ground_truth)
            report = compute_metrics(scaled, seq.ground_truth,
                                     alignment={'kind': 'scale', 'scale': scale})
            self.write_report('evaluation', EVALUATION_FILE,
                              dict(report.to_dict(), masked_fraction=seq.masked_fraction))
            self.summary.update(rmse=report.rmse, r_err=report.r_err)
            if config.emit_per_frame:
                self.result.outputs['per_frame'] = write_csv(
                    self.path(PER_FRAME_FILE), ['frame', 'rmse', 'r_err'], report.per_frame_rows())

        diagnostics = rigidity_diagnostics(recon, graph, solution=solution)
        self.write_report('diagnostics', DIAGNOSTICS_FILE, diagnostics.to_dict())
        self.summary['total_delta_prime'] = diagnostics.total_delta_prime


def run_reconstruct(config):
    """
    Run the whole pipeline for ``config``. Errors do not propagate: they set
    the exit code and message of the returned ``RunResult``. Reports written
    before a failure stay in place; each file is complete or absent.
    """
    run = ReconstructionRun(config)
    try:
        run.run()
    except (RigidityError, OSError) as exc:
        logger.debug('reconstruction failed', exc_info=True)
        run.result.exit_code = exit_code_for(exc)
        run.result.message = str(exc)
    result = run.result
    result.summary.update(
        exit_code=result.exit_code,
        outputs=dict(result.outputs),
        timestamp=run.stamp,
    )
    if result.message:
        result.summary['message'] = result.message
    return result

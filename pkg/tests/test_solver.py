import csv
import dataclasses
import json
import math
import os

import numpy as np
import pytest
import scipy.sparse as sp

from django_maxrigid.conic import ConicProblem, loads_problem
from django_maxrigid.exceptions import ConfigurationError, EmptyProblem, NumericalError
from django_maxrigid.graph import build_knn_graph
from django_maxrigid.problem import EdgeConstraint, assemble_from_constraints, assemble_problem
from django_maxrigid.solver import (
    ConeForm,
    SolverConfig,
    SolverStatus,
    _svec_pattern,
    audit_solution,
    check_rank_one,
    load_solution,
    project_psd,
    smat,
    solve,
    svec,
)
from django_maxrigid.synthesis import SynthesisConfig, generate

SINGLE_EDGE_OPTIMUM = -19.0 - math.sqrt(2.0)


def single_edge_problem():
    constraint = EdgeConstraint(frame=0, edge=(0, 1), cosine=0.0, n_points=2)
    return assemble_from_constraints([constraint], np.ones((1, 2), dtype=bool))


def scalar_problem(objective, eq_matrix, eq_rhs, nonneg):
    n = len(objective)
    return ConicProblem(block_sizes=(), n_scalars=n, objective=objective,
                        eq_matrix=sp.csr_matrix(np.array(eq_matrix, dtype=float)), eq_rhs=eq_rhs,
                        ineq_matrix=sp.csr_matrix((0, n)), ineq_rhs=[], nonneg=nonneg)


def tiny_reconstruction(seed=1):
    """Five points seen fully in two frames, every pair an edge."""
    seq = generate(SynthesisConfig(n_points=5, n_frames=2, rng_seed=seed, k_neighbors=4))
    graph = build_knn_graph(seq, 4)
    return seq, graph, assemble_problem(seq, graph)


def shuffled(problem, rng):
    """
    The same problem with its equality rows, inequality rows and PSD blocks
    in a random order.
    """
    order = rng.permutation(len(problem.block_sizes))
    variables = np.arange(problem.n_variables)
    columns = np.concatenate([variables[problem.block_slice(b)] for b in order]
                             + [variables[problem.scalar_offset:]])
    eq_rows = rng.permutation(problem.n_equalities)
    ineq_rows = rng.permutation(problem.n_inequalities)
    return ConicProblem(
        block_sizes=tuple(problem.block_sizes[b] for b in order),
        n_scalars=problem.n_scalars,
        objective=problem.objective[columns],
        eq_matrix=problem.eq_matrix[eq_rows][:, columns],
        eq_rhs=problem.eq_rhs[eq_rows],
        ineq_matrix=problem.ineq_matrix[ineq_rows][:, columns],
        ineq_rhs=problem.ineq_rhs[ineq_rows],
        nonneg=np.flatnonzero(np.isin(columns, problem.nonneg)),
    )


def grid_search_optimum(step=1e-4, chunk=1000):
    """
    Smallest objective over rank-one points with legs on a grid of [0, 1]^2:
    tr(Y) = dhat = l1^2 + l2^2 for a right angle, bounded by ghat = 1.
    """
    grid = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    best = math.inf
    for start in range(0, grid.size, chunk):
        l1 = grid[start:start + chunk, None]
        dhat = l1 ** 2 + grid ** 2
        value = dhat - l1 - grid - 20.0 * dhat
        value[dhat > 1.0] = math.inf
        best = min(best, float(value.min()))
    return best


def test_svec_scales_off_diagonal():
    matrix = np.array([[1.0, 2.0], [2.0, 3.0]])
    vector = svec(matrix)
    assert vector.tolist() == [1.0, 2.0 * math.sqrt(2.0), 3.0]
    assert np.allclose(smat(vector, 2), matrix, atol=1e-15)
    assert float(vector @ vector) == pytest.approx(float(np.sum(matrix * matrix)))


def test_project_psd_clips_eigenvalues():
    assert np.allclose(project_psd(np.diag([1.0, -1.0])), np.diag([1.0, 0.0]), atol=1e-12)


def test_project_psd_keeps_psd_input():
    rng = np.random.default_rng(1)
    factor = rng.normal(size=(4, 4))
    matrix = factor @ factor.T + np.eye(4)
    assert np.allclose(project_psd(matrix), matrix, atol=1e-12)


def test_project_psd_random_symmetric():
    rng = np.random.default_rng(2)
    for _ in range(20):
        matrix = rng.normal(size=(5, 5))
        matrix = (matrix + matrix.T) / 2.0
        result = project_psd(matrix)
        assert np.linalg.eigvalsh(result).min() >= -1e-12
        assert abs(np.sum((matrix - result) * result)) <= 1e-9


def test_project_psd_rejects_non_finite():
    with pytest.raises(NumericalError):
        project_psd(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_check_rank_one():
    legs = np.array([3.0, 4.0])
    ratio, leading = check_rank_one(np.outer(legs, legs))
    assert ratio == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(leading, legs, atol=1e-12)

    ratio, _ = check_rank_one(np.eye(3))
    assert ratio == pytest.approx(1.0)


def test_check_rank_one_schur_block():
    legs = np.array([3.0, 4.0])
    block = np.block([[np.ones((1, 1)), -legs[None]], [-legs[:, None], np.outer(legs, legs)]])
    ratio, leading = check_rank_one(block, schur=True)
    assert ratio == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(leading, -legs, atol=1e-12)


def test_check_rank_one_zero_block():
    ratio, leading = check_rank_one(np.zeros((3, 3)), schur=True)
    assert ratio == 0.0
    assert not leading.any()


def test_cone_form_layout():
    problem = single_edge_problem()
    cones = ConeForm(problem)
    assert cones.n_zero == 3
    assert cones.n_nonneg == 1 + 4
    assert cones.m == 3 + 5 + 6
    assert cones.n == problem.n_variables == 8
    assert cones.psd_slices == [slice(8, 14)]


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SolverConfig(eps_primal=0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(over_relaxation=2.5)
    with pytest.raises(ConfigurationError):
        SolverConfig(max_iterations=0)
    with pytest.raises(ConfigurationError):
        SolverConfig(scale=0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(rho_x=-1.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(adapt_scale_ratio=1.0)


def test_smallest_psd_completion(trace_problem_text):
    solution = solve(loads_problem(trace_problem_text))
    assert solution.status is SolverStatus.OPTIMAL
    assert solution.objective_value == pytest.approx(1.0, abs=1e-5)
    assert np.allclose(solution.psd_blocks[0], np.diag([1.0, 0.0]), atol=1e-4)
    assert solution.legs == {}


def test_single_edge_matches_grid_search():
    problem = single_edge_problem()
    solution = solve(problem)
    assert solution.status is SolverStatus.OPTIMAL
    assert solution.objective_value == pytest.approx(grid_search_optimum(), abs=1e-3)
    assert solution.objective_value == pytest.approx(SINGLE_EDGE_OPTIMUM, abs=1e-4)
    assert solution.ghat[(0, 1)] == pytest.approx(1.0, abs=1e-5)
    assert solution.dhat[(0, 0, 1)] == pytest.approx(1.0, abs=1e-4)
    assert np.allclose(solution.legs[0], [math.sqrt(0.5)] * 2, atol=1e-3)
    residuals = solution.residuals
    assert max(residuals.primal, residuals.dual, residuals.gap) <= 1e-6


def test_audit_of_optimal_solution():
    problem = single_edge_problem()
    solution = solve(problem)
    audit = audit_solution(problem, solution)
    assert audit.max_equality_violation <= 1e-5
    assert audit.min_psd_eigenvalue >= -1e-7
    for name in ('primal', 'dual', 'gap'):
        audited, reported = getattr(audit, name), getattr(solution.residuals, name)
        assert audited <= 10.0 * max(reported, 1e-12), name
        assert reported <= 10.0 * max(audited, 1e-12), name
    assert set(audit.to_dict()) == {'primal', 'dual', 'gap', 'max_equality_violation',
                                    'min_psd_eigenvalue'}


def test_warm_start_from_stored_solution():
    problem = single_edge_problem()
    solution = solve(problem)
    stored = json.loads(json.dumps(solution.to_dict()))
    warm = solve(problem, warm_start=load_solution(problem, stored))
    assert warm.status is SolverStatus.OPTIMAL
    assert warm.iterations <= max(1, solution.iterations // 20)
    assert warm.objective_value == pytest.approx(solution.objective_value, abs=1e-6)


def test_load_solution_rejects_other_problem(trace_problem_text):
    solution = solve(single_edge_problem())
    with pytest.raises(ConfigurationError):
        load_solution(loads_problem(trace_problem_text), solution.to_dict())
    with pytest.raises(ConfigurationError):
        load_solution(single_edge_problem(), {'x': []})


def test_iteration_limit():
    solution = solve(single_edge_problem(), SolverConfig(max_iterations=3))
    assert solution.status is SolverStatus.MAX_ITERATIONS
    assert solution.iterations == 3
    assert not solution.optimal


def test_trace_file(tmpdir):
    path = str(tmpdir.join('trace.csv'))
    solution = solve(single_edge_problem(), SolverConfig(trace_path=path))
    with open(path) as stream:
        rows = list(csv.reader(stream))
    assert rows[0] == ['iteration', 'primal', 'dual', 'gap']
    assert int(rows[-1][0]) == solution.iterations
    assert all(float(value) >= 0 for row in rows[1:] for value in row[1:])


def test_without_scaling():
    solution = solve(single_edge_problem(), SolverConfig(scaling_enabled=False))
    assert solution.status is SolverStatus.OPTIMAL
    assert solution.objective_value == pytest.approx(SINGLE_EDGE_OPTIMUM, abs=1e-4)


def test_infeasible_problem():
    problem = scalar_problem([0.0], [[1.0]], [-1.0], nonneg=[0])
    solution = solve(problem, SolverConfig(max_iterations=20000))
    assert solution.status is SolverStatus.INFEASIBLE
    assert solution.objective_value == math.inf


def test_unbounded_problem():
    problem = scalar_problem([-1.0, 0.0], [[0.0, 1.0]], [1.0], nonneg=[0])
    solution = solve(problem, SolverConfig(max_iterations=20000))
    assert solution.status is SolverStatus.UNBOUNDED
    assert solution.objective_value == -math.inf


def test_empty_problem():
    problem = scalar_problem([1.0], np.zeros((0, 1)), [], nonneg=[0])
    with pytest.raises(EmptyProblem):
        solve(problem)


def test_deterministic():
    first = solve(single_edge_problem())
    second = solve(single_edge_problem())
    assert first.iterations == second.iterations
    assert np.array_equal(first.x, second.x)


def test_svec_pattern_is_cached_and_read_only():
    pattern = _svec_pattern(4)
    assert _svec_pattern(4) is pattern
    rows, cols, scale = pattern
    assert not (rows.flags.writeable or cols.flags.writeable or scale.flags.writeable)


def test_audit_recomputes_residuals():
    problem = single_edge_problem()
    solution = solve(problem)
    shifted_dual = audit_solution(problem, dataclasses.replace(solution, y=solution.y + 1.0))
    assert shifted_dual.dual > 1e-3
    shifted_primal = audit_solution(problem, dataclasses.replace(solution, x=solution.x + 0.1))
    assert shifted_primal.primal > 1e-3
    assert shifted_primal.dual <= 10.0 * max(solution.residuals.dual, 1e-12)


def test_audit_matches_standard_form_residuals():
    _, _, problem = tiny_reconstruction()
    solution = solve(problem, SolverConfig(max_iterations=50))
    audit = audit_solution(problem, solution)
    expected = ConeForm(problem).residuals(solution.x, solution.y, solution.s)
    assert audit.primal == pytest.approx(expected.primal, rel=1e-6, abs=1e-12)
    assert audit.dual == pytest.approx(expected.dual, rel=1e-6, abs=1e-12)
    assert audit.gap == pytest.approx(expected.gap, rel=1e-6, abs=1e-12)


def test_failed_solve_leaves_no_trace(tmpdir, trace_problem_text):
    path = str(tmpdir.join('trace.csv'))
    other = solve(loads_problem(trace_problem_text))
    with pytest.raises(ConfigurationError):
        solve(single_edge_problem(), SolverConfig(trace_path=path), warm_start=other)
    assert os.listdir(str(tmpdir)) == []


def test_without_adaptive_scale():
    solution = solve(single_edge_problem(), SolverConfig(adaptive_scale=False))
    assert solution.status is SolverStatus.OPTIMAL
    assert solution.objective_value == pytest.approx(SINGLE_EDGE_OPTIMUM, abs=1e-4)


def test_reconstruction_is_solved():
    _, graph, problem = tiny_reconstruction()
    solution = solve(problem)
    assert solution.status is SolverStatus.OPTIMAL
    assert sum(solution.ghat.values()) == pytest.approx(1.0, abs=1e-5)
    assert set(solution.ghat) == set(graph.edges)


def test_objective_ignores_constraint_and_block_order():
    _, _, problem = tiny_reconstruction()
    expected = solve(problem)
    assert expected.status is SolverStatus.OPTIMAL
    rng = np.random.default_rng(4)
    for _ in range(2):
        solution = solve(shuffled(problem, rng))
        assert solution.status is SolverStatus.OPTIMAL
        assert solution.objective_value == pytest.approx(expected.objective_value, abs=1e-3)


def test_looser_tolerances_never_need_more_iterations():
    _, _, problem = tiny_reconstruction()
    tight = solve(problem)
    loose = solve(problem, SolverConfig(eps_primal=1e-5, eps_dual=1e-5, eps_gap=1e-5))
    assert tight.status is SolverStatus.OPTIMAL
    assert loose.status is SolverStatus.OPTIMAL
    assert loose.iterations <= tight.iterations


def test_warm_start_of_reconstruction():
    _, _, problem = tiny_reconstruction()
    cold = solve(problem)
    warm = solve(problem, warm_start=load_solution(problem, cold.to_dict()))
    assert warm.status is SolverStatus.OPTIMAL
    assert warm.iterations <= 0.05 * cold.iterations
    assert warm.objective_value == pytest.approx(cold.objective_value, abs=1e-6)


def test_removing_an_edge_never_raises_the_remaining_objective():
    seq, graph, problem = tiny_reconstruction()
    full = solve(problem)
    assert full.status is SolverStatus.OPTIMAL
    for edge in graph.edges[:3]:
        # the full optimum without the removed edge's terms stays feasible
        removed_terms = sum(problem.objective[problem.scalar_index(scalar)]
                            * full.x[problem.scalar_index(scalar)]
                            for (frame, i, j), scalar in problem.layout.dhat if (i, j) == edge)
        reduced = solve(assemble_problem(seq, graph.without([edge])))
        assert reduced.status is SolverStatus.OPTIMAL
        assert edge not in reduced.ghat
        assert reduced.objective_value <= full.objective_value - removed_terms + 1e-3

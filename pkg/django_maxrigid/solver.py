"""
First-order conic solver.

A ``ConicProblem`` is rewritten in the standard form

    minimize c^T x   subject to   A x + s = b,   s in K

where K is a product of the zero cone (equalities), the nonnegative orthant
(inequalities and nonnegative variables) and PSD cones in scaled-vector form
(off-diagonal entries multiplied by sqrt(2)). The solver runs a
Douglas-Rachford splitting on the homogeneous self-dual embedding
0 in Q u + N_C(u), u = (x, y, tau), in the diagonal metric R:

    u~ = (R + Q)^-1 R w
    u  = Proj_C(2 u~ - w)
    w  = w + alpha (u - u~)

and the slacks are read off as (0, s, kappa) = R (u - 2 u~ + w). An optimal
point, or a certificate of infeasibility or unboundedness, comes out of the
same iteration.

Data are Ruiz-equilibrated and b, c normalized before iterating. The dual
weight of R is adapted whenever the relative primal and dual residuals drift
apart, which refactorizes the linear system. All reported residuals are
measured on the original data.
"""
import csv
import enum
import logging
import math
from contextlib import ExitStack
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from django_maxrigid.exceptions import ConfigurationError, EmptyProblem, NumericalError

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
MIN_EQUILIBRATION = 1e-4
MAX_EQUILIBRATION = 1e4
MIN_METRIC_SCALE = 1e-6
MAX_METRIC_SCALE = 1e6
# dual weight of the zero-cone rows relative to the other rows
ZERO_CONE_WEIGHT = 1e-3
TAU_WEIGHT = 10.0
RESCALE_MIN_ITERATIONS = 100


class SolverStatus(str, enum.Enum):
    OPTIMAL = 'Optimal'
    MAX_ITERATIONS = 'MaxIterations'
    INFEASIBLE = 'Infeasible'
    UNBOUNDED = 'Unbounded'


@dataclass(frozen=True)
class SolverConfig:
    """
    ``scale`` is the initial dual weight of the metric; with
    ``adaptive_scale`` it is multiplied by the square root of the mean
    primal/dual residual ratio once that ratio leaves
    [1 / adapt_scale_ratio, adapt_scale_ratio]. ``rho_x`` weights the
    primal block. The trace, when requested, is moved into place once the
    solve returns.
    """
    eps_primal: float = 1e-6
    eps_dual: float = 1e-6
    eps_gap: float = 1e-6
    max_iterations: int = 100000
    over_relaxation: float = 1.6
    scaling_enabled: bool = True
    eps_infeasible: float = 1e-10
    equilibration_passes: int = 25
    scale: float = 0.1
    adaptive_scale: bool = True
    adapt_scale_ratio: float = 20.0
    rho_x: float = 1e-6
    trace_path: str = None

    def __post_init__(self):
        for name in ('eps_primal', 'eps_dual', 'eps_gap', 'eps_infeasible', 'scale', 'rho_x'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError('%s must be positive, got %r' % (name, value))
        if int(self.max_iterations) < 1:
            raise ConfigurationError('max_iterations must be at least 1')
        if not 1.0 < self.over_relaxation < 2.0:
            raise ConfigurationError('over_relaxation must lie in (1, 2)')
        if int(self.equilibration_passes) < 0:
            raise ConfigurationError('equilibration_passes must be nonnegative')
        if not (math.isfinite(self.adapt_scale_ratio) and self.adapt_scale_ratio > 1.0):
            raise ConfigurationError('adapt_scale_ratio must be greater than 1')


@dataclass(frozen=True)
class Residuals:
    primal: float
    dual: float
    gap: float

    def within(self, config):
        return (self.primal <= config.eps_primal and self.dual <= config.eps_dual
                and self.gap <= config.eps_gap)

    def to_dict(self):
        return {'primal': self.primal, 'dual': self.dual, 'gap': self.gap}


@dataclass(frozen=True, eq=False)
class SolverSolution:
    """
    ``x``, ``y`` and ``s`` are the primal, dual and slack vectors of the
    standard form. ``psd_blocks`` are the Schur blocks Z^k = [[1, l^T], [l, Y^k]]
    read from the cone slack, so they are exactly PSD. ``legs`` maps a frame
    to its leg vector (ordered like the layout's points), ``dhat`` maps
    (frame, i, j) and ``ghat`` maps (i, j) to scalars; all three are empty for
    problems without a layout.
    """
    status: SolverStatus
    objective_value: float
    residuals: Residuals
    iterations: int
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    psd_blocks: tuple = field(repr=False)
    legs: dict = field(default_factory=dict, repr=False)
    dhat: dict = field(default_factory=dict, repr=False)
    ghat: dict = field(default_factory=dict, repr=False)

    @property
    def optimal(self):
        return self.status is SolverStatus.OPTIMAL

    def to_dict(self):
        return {
            'status': self.status.value,
            'objective_value': self.objective_value,
            'iterations': self.iterations,
            'residuals': self.residuals.to_dict(),
            'x': self.x.tolist(),
            'y': self.y.tolist(),
            's': self.s.tolist(),
            'psd_blocks': [block.tolist() for block in self.psd_blocks],
            'legs': {str(frame): legs.tolist() for frame, legs in sorted(self.legs.items())},
            'dhat': [[frame, i, j, value] for (frame, i, j), value in sorted(self.dhat.items())],
            'ghat': [[i, j, value] for (i, j), value in sorted(self.ghat.items())],
        }


@lru_cache(maxsize=None)
def _svec_pattern(p):
    rows, cols = np.triu_indices(p)
    scale = np.where(rows == cols, 1.0, SQRT2)
    for array in (rows, cols, scale):
        array.setflags(write=False)
    return rows, cols, scale


def svec(matrix):
    rows, cols, scale = _svec_pattern(matrix.shape[0])
    return matrix[rows, cols] * scale


def smat(vector, p):
    rows, cols, scale = _svec_pattern(p)
    matrix = np.zeros((p, p))
    matrix[rows, cols] = vector / scale
    return matrix + np.triu(matrix, 1).T


def project_psd(matrix):
    """
    Frobenius-nearest PSD matrix: symmetrize, then clip eigenvalues at zero.
    """
    matrix = np.asarray(matrix, dtype=float)
    matrix = (matrix + matrix.T) / 2.0
    if not np.all(np.isfinite(matrix)):
        raise NumericalError('cannot project a matrix with non-finite entries')
    try:
        eigenvalues, eigenvectors = scipy.linalg.eigh(matrix)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError('eigendecomposition failed: %s' % exc)
    if eigenvalues[0] >= 0:
        return matrix
    positive = eigenvalues > 0
    kept = eigenvectors[:, positive]
    result = (kept * eigenvalues[positive]) @ kept.T
    return (result + result.T) / 2.0


def check_rank_one(block, schur=False):
    """
    Ratio of the second to the first eigenvalue of Y, and the leading
    eigenvector scaled by sqrt(lambda1). With ``schur=True`` the input is a
    Schur block [[1, l^T], [l, Y]]; the vector's sign then follows l, so for a
    rank-one Y = l l^T it reproduces l.
    """
    block = np.asarray(block, dtype=float)
    matrix = block[1:, 1:] if schur else block
    matrix = (matrix + matrix.T) / 2.0
    eigenvalues, eigenvectors = scipy.linalg.eigh(matrix)
    eigenvalues = eigenvalues[::-1]
    leading = eigenvectors[:, -1] * math.sqrt(max(eigenvalues[0], 0.0))
    reference = block[0, 1:] if schur else np.ones(len(leading))
    if leading @ reference < 0:
        leading = -leading
    if eigenvalues[0] <= 0 or len(eigenvalues) < 2:
        return 0.0, leading
    return float(max(eigenvalues[1], 0.0) / eigenvalues[0]), leading


class ConeForm(object):
    """
    Standard-form data (A, b, c) and cone sizes built from a ``ConicProblem``.
    """

    def __init__(self, problem):
        n = problem.n_variables
        nonneg = problem.nonneg
        psd_rows, psd_cols, psd_data = [], [], []
        row = 0
        for block, p in enumerate(problem.block_sizes):
            _, _, scale = _svec_pattern(p)
            span = problem.block_slice(block)
            psd_rows.append(np.arange(row, row + scale.size))
            psd_cols.append(np.arange(span.start, span.stop))
            psd_data.append(-scale)
            row += scale.size
        if psd_rows:
            psd = sp.csr_matrix((np.concatenate(psd_data),
                                 (np.concatenate(psd_rows), np.concatenate(psd_cols))),
                                shape=(row, n))
        else:
            psd = sp.csr_matrix((0, n))
        bounds = sp.csr_matrix((-np.ones(nonneg.size), (np.arange(nonneg.size), nonneg)),
                               shape=(nonneg.size, n))

        self.matrix = sp.vstack([problem.eq_matrix, problem.ineq_matrix, bounds, psd]).tocsr()
        self.b = np.concatenate([problem.eq_rhs, problem.ineq_rhs, np.zeros(nonneg.size + row)])
        self.c = np.array(problem.objective)
        self.n_zero = problem.n_equalities
        self.n_nonneg = problem.n_inequalities + nonneg.size
        self.block_sizes = problem.block_sizes
        start = self.n_zero + self.n_nonneg
        self.psd_slices = []
        for p in self.block_sizes:
            size = p * (p + 1) // 2
            self.psd_slices.append(slice(start, start + size))
            start += size
        self.m, self.n = self.matrix.shape

    def project_dual_cone(self, y):
        """Project onto K*: free on equalities, clip on the orthant, PSD blocks."""
        nonneg = slice(self.n_zero, self.n_zero + self.n_nonneg)
        y[nonneg] = np.maximum(y[nonneg], 0.0)
        for span, p in zip(self.psd_slices, self.block_sizes):
            y[span] = svec(project_psd(smat(y[span], p)))
        return y

    def dual_weights(self, scale):
        """Diagonal of the metric on y; the zero cone gets a much smaller weight."""
        weights = np.full(self.m, 1.0 / scale)
        weights[:self.n_zero] *= ZERO_CONE_WEIGHT
        return weights

    def residuals(self, x, y, s):
        primal = self.matrix @ x + s - self.b
        dual = self.matrix.T @ y + self.c
        cx, by = float(self.c @ x), float(self.b @ y)
        return Residuals(
            primal=_norm(primal) / max(1.0, _norm(self.b)),
            dual=_norm(dual) / max(1.0, _norm(self.c)),
            gap=abs(cx + by) / (1.0 + abs(cx) + abs(by)),
        )


def _norm(vector):
    return float(np.max(np.abs(vector), initial=0.0))


def equilibrate(matrix, cones, passes):
    """
    Ruiz equilibration: alternately divide rows and columns by the square root
    of their largest magnitude. Rows of one PSD cone share a single factor so
    the cone is mapped onto itself. Returns (scaled matrix, row scale D,
    column scale E) with scaled = D A E.
    """
    scaled = sp.csc_matrix(matrix)
    d = np.ones(matrix.shape[0])
    e = np.ones(matrix.shape[1])
    for _ in range(passes):
        magnitude = abs(scaled)
        rows = np.sqrt(magnitude.max(axis=1).toarray().ravel())
        cols = np.sqrt(magnitude.max(axis=0).toarray().ravel())
        for span in cones.psd_slices:
            rows[span] = rows[span].mean()
        rows = np.where(rows == 0, 1.0, np.clip(rows, MIN_EQUILIBRATION, MAX_EQUILIBRATION))
        cols = np.where(cols == 0, 1.0, np.clip(cols, MIN_EQUILIBRATION, MAX_EQUILIBRATION))
        scaled = sp.diags(1.0 / rows) @ scaled @ sp.diags(1.0 / cols)
        d /= rows
        e /= cols
    return sp.csc_matrix(scaled), d, e


def normalization(b, c):
    """
    Common factor bringing the larger of |b|_inf and |c|_inf to one, so the
    tolerances mean the same thing for every problem size.
    """
    size = max(_norm(b), _norm(c))
    if size == 0:
        return 1.0
    return float(np.clip(1.0 / size, MIN_EQUILIBRATION, MAX_EQUILIBRATION))


class ConicSolver(object):

    def __init__(self, problem, config=None):
        self.problem = problem
        self.config = config or SolverConfig()
        if problem.n_equalities == 0 or problem.n_variables == 0:
            raise EmptyProblem('the problem has no equality constraint')
        self.cones = ConeForm(problem)
        if self.config.scaling_enabled:
            self.matrix, self.d, self.e = equilibrate(
                self.cones.matrix, self.cones, self.config.equilibration_passes)
            self.sigma = normalization(self.d * self.cones.b, self.e * self.cones.c)
        else:
            self.matrix = sp.csc_matrix(self.cones.matrix)
            self.d = np.ones(self.cones.m)
            self.e = np.ones(self.cones.n)
            self.sigma = 1.0
        self.b = self.sigma * self.d * self.cones.b
        self.c = self.sigma * self.e * self.cones.c
        self.scale = None
        self._set_scale(self.config.scale)

    def _set_scale(self, scale):
        """
        Factorize the quasi-definite system [[rho_x I, A^T], [A, -R_y]] for the
        dual weight ``scale`` and solve it once for (c, -b).
        """
        n = self.cones.n
        self.scale = scale
        self.r_y = self.cones.dual_weights(scale)
        self.metric = np.concatenate([np.full(n, self.config.rho_x), self.r_y, [TAU_WEIGHT]])
        system = sp.bmat([
            [self.config.rho_x * sp.identity(n), self.matrix.T],
            [self.matrix, -sp.diags(self.r_y)],
        ], format='csc')
        try:
            self.lu = scipy.sparse.linalg.splu(system)
        except RuntimeError as exc:
            raise NumericalError('cannot factorize the embedding system: %s' % exc)
        self.g = self.lu.solve(np.concatenate([self.c, -self.b]))
        self.g_weight = TAU_WEIGHT + float(self.c @ self.g[:n] + self.b @ self.g[n:])

    def _linear_step(self, w):
        n = self.cones.n
        p = self.lu.solve(np.concatenate([self.config.rho_x * w[:n], -self.r_y * w[n:-1]]))
        tau = (TAU_WEIGHT * w[-1] + self.c @ p[:n] + self.b @ p[n:]) / self.g_weight
        return np.append(p - tau * self.g, tau)

    def _project(self, z):
        n = self.cones.n
        u = z.copy()
        u[n:-1] = self.cones.project_dual_cone(u[n:-1])
        u[-1] = max(u[-1], 0.0)
        return u

    def _unscale(self, u, rsk):
        n = self.cones.n
        x = self.e * u[:n] / self.sigma
        y = self.d * u[n:-1] / self.sigma
        s = rsk[n:-1] / (self.d * self.sigma)
        return x, y, s

    def _initial_point(self, warm_start):
        n, m = self.cones.n, self.cones.m
        w = np.zeros(n + m + 1)
        w[-1] = 1.0
        if warm_start is not None:
            w[:n] = self.sigma * warm_start.x / self.e
            w[n:-1] = self.sigma * (warm_start.y / self.d + self.d * warm_start.s / self.r_y)
        return w

    def _log_residual_ratio(self, u, rsk):
        """log of the relative primal over the relative dual residual, scaled data."""
        n = self.cones.n
        x, y, tau, s = u[:n], u[n:-1], u[-1], rsk[n:-1]
        ax = self.matrix @ x
        aty = self.matrix.T @ y
        primal_size = max(_norm(ax), _norm(s), tau * _norm(self.b))
        dual_size = max(_norm(aty), tau * _norm(self.c))
        if primal_size == 0 or dual_size == 0:
            return None
        primal = _norm(ax + s - tau * self.b) / primal_size
        dual = _norm(aty + tau * self.c) / dual_size
        if not (primal > 0 and dual > 0 and math.isfinite(primal / dual)):
            return None
        return math.log(primal / dual)

    def _certificate(self, u, rsk):
        """Infeasibility or unboundedness status for the current iterate, if any."""
        x, y, s = self._unscale(u, rsk)
        eps = self.config.eps_infeasible
        by = float(self.cones.b @ y)
        if by < 0:
            ratio = _norm(self.cones.matrix.T @ y) / -by
            if ratio <= eps:
                return SolverStatus.INFEASIBLE
        cx = float(self.cones.c @ x)
        if cx < 0:
            ratio = _norm(self.cones.matrix @ x + s) / -cx
            if ratio <= eps:
                return SolverStatus.UNBOUNDED
        return None

    def _candidate(self, u, rsk):
        tau = u[-1]
        if tau <= 0:
            return None, None
        x, y, s = self._unscale(u, rsk)
        x, y, s = x / tau, y / tau, s / tau
        return (x, y, s), self.cones.residuals(x, y, s)

    def _check_warm_start(self, warm_start):
        n, m = self.cones.n, self.cones.m
        if warm_start.x.shape != (n,) or warm_start.y.shape != (m,) or warm_start.s.shape != (m,):
            raise ConfigurationError('warm start does not match the problem dimensions')
        return self.cones.residuals(warm_start.x, warm_start.y, warm_start.s)

    def solve(self, warm_start=None):
        config = self.config
        alpha = config.over_relaxation
        if self.scale != config.scale:
            self._set_scale(config.scale)

        with ExitStack() as stack:
            trace = None
            if config.trace_path:
                # utils imports this module
                from django_maxrigid.utils import atomic_open
                trace = csv.writer(stack.enter_context(atomic_open(config.trace_path)))
                trace.writerow(['iteration', 'primal', 'dual', 'gap'])

            if warm_start is not None:
                residuals = self._check_warm_start(warm_start)
                if residuals.within(config):
                    logger.info('warm start is already optimal')
                    return build_solution(
                        self.problem, self.cones, SolverStatus.OPTIMAL,
                        self.problem.objective_value(warm_start.x), residuals, 0,
                        np.array(warm_start.x), np.array(warm_start.y), np.array(warm_start.s))

            w = self._initial_point(warm_start)
            iteration = 0
            status = None
            log_ratio, ratio_count, last_rescale = 0.0, 0, 0
            while status is None and iteration < config.max_iterations:
                iteration += 1
                u_tilde = self._linear_step(w)
                z = 2.0 * u_tilde - w
                u = self._project(z)
                rsk = self.metric * (u - z)
                w = w + alpha * (u - u_tilde)
                if not (np.all(np.isfinite(w)) and np.all(np.isfinite(u))):
                    raise NumericalError('iterates diverged at iteration %d' % iteration)

                point, residuals = self._candidate(u, rsk)
                if trace is not None and residuals is not None:
                    trace.writerow([iteration, repr(residuals.primal),
                                    repr(residuals.dual), repr(residuals.gap)])
                if residuals is not None and residuals.within(config):
                    status = SolverStatus.OPTIMAL
                    break
                status = self._certificate(u, rsk)
                if iteration % 500 == 0:
                    logger.debug('iteration %d: %s', iteration, residuals)

                if config.adaptive_scale:
                    ratio = self._log_residual_ratio(u, rsk)
                    if ratio is not None:
                        log_ratio += ratio
                        ratio_count += 1
                    if ratio_count and iteration - last_rescale >= RESCALE_MIN_ITERATIONS:
                        mean_ratio = math.exp(log_ratio / ratio_count)
                        limit = config.adapt_scale_ratio
                        if not 1.0 / limit <= mean_ratio <= limit:
                            scale = float(np.clip(self.scale * math.sqrt(mean_ratio),
                                                  MIN_METRIC_SCALE, MAX_METRIC_SCALE))
                            if scale != self.scale:
                                logger.debug('iteration %d: scale %g -> %g',
                                             iteration, self.scale, scale)
                                self._set_scale(scale)
                                w = rsk / self.metric + 2.0 * u_tilde - u
                            log_ratio, ratio_count, last_rescale = 0.0, 0, iteration

        if status is None:
            status = SolverStatus.MAX_ITERATIONS
        logger.info('solver finished: %s after %d iterations', status.value, iteration)
        return self._solution(status, iteration, u, rsk, point, residuals)

    def _solution(self, status, iteration, u, rsk, point, residuals):
        if status in (SolverStatus.INFEASIBLE, SolverStatus.UNBOUNDED):
            x, y, s = self._unscale(u, rsk)
            if status is SolverStatus.INFEASIBLE:
                y = y / -float(self.cones.b @ y)
                objective = math.inf
            else:
                scale = -float(self.cones.c @ x)
                x, s = x / scale, s / scale
                objective = -math.inf
            residuals = self.cones.residuals(x, y, s)
        elif point is None:
            x, y, s = self._unscale(u, rsk)
            residuals = self.cones.residuals(x, y, s)
            objective = self.problem.objective_value(x)
        else:
            x, y, s = point
            objective = self.problem.objective_value(x)
        return build_solution(self.problem, self.cones, status, objective, residuals,
                              iteration, x, y, s)


def build_solution(problem, cones, status, objective, residuals, iterations, x, y, s):
    blocks = tuple(smat(s[span], p) for span, p in zip(cones.psd_slices, cones.block_sizes))
    legs, dhat, ghat = {}, {}, {}
    layout = problem.layout
    if layout is not None:
        for frame_block in layout.frames:
            size = problem.block_sizes[frame_block.block]
            legs[frame_block.frame] = np.array(
                [x[problem.entry_index(frame_block.block, 0, r)] for r in range(1, size)])
        for key, scalar in layout.dhat:
            dhat[key] = float(x[problem.scalar_index(scalar)])
        for key, scalar in layout.ghat:
            ghat[key] = float(x[problem.scalar_index(scalar)])
    return SolverSolution(
        status=status,
        objective_value=float(objective),
        residuals=residuals,
        iterations=iterations,
        x=x, y=y, s=s,
        psd_blocks=blocks,
        legs=legs, dhat=dhat, ghat=ghat,
    )


def solve(problem, config=None, warm_start=None):
    return ConicSolver(problem, config).solve(warm_start=warm_start)


def load_solution(problem, data):
    """
    Rebuild a solution of ``problem`` from ``SolverSolution.to_dict`` output,
    for example to warm-start a later solve.
    """
    cones = ConeForm(problem)
    try:
        x = np.array(data['x'], dtype=float)
        y = np.array(data['y'], dtype=float)
        s = np.array(data['s'], dtype=float)
        status = SolverStatus(data['status'])
        residuals = Residuals(**data['residuals'])
        iterations = int(data['iterations'])
        objective = float(data['objective_value'])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError('not a stored solution: %s' % exc)
    if x.shape != (cones.n,) or y.shape != (cones.m,) or s.shape != (cones.m,):
        raise ConfigurationError('stored solution does not match the problem dimensions')
    return build_solution(problem, cones, status, objective, residuals, iterations, x, y, s)


@dataclass(frozen=True)
class KKTAudit:
    primal: float
    dual: float
    gap: float
    max_equality_violation: float
    min_psd_eigenvalue: float

    def to_dict(self):
        return {
            'primal': self.primal,
            'dual': self.dual,
            'gap': self.gap,
            'max_equality_violation': self.max_equality_violation,
            'min_psd_eigenvalue': self.min_psd_eigenvalue,
        }


def audit_solution(problem, solution):
    """
    Recompute the KKT residuals straight from the problem data: equalities,
    inequalities with their slacks, variable bounds and PSD blocks are
    checked one by one, and the stationarity residual is summed from the
    same pieces. Equalities are also evaluated with the reported PSD blocks
    in place of the block entries of ``x``.
    """
    x = np.asarray(solution.x, dtype=float)
    y = np.asarray(solution.y, dtype=float)
    s = np.asarray(solution.s, dtype=float)
    cuts = np.cumsum([problem.n_equalities, problem.n_inequalities, problem.nonneg.size])
    y_eq, y_in, y_bounds, y_psd = np.split(y, cuts)
    _, s_in, s_bounds, _ = np.split(s, cuts)

    primal = [
        problem.eq_matrix @ x - problem.eq_rhs,
        problem.ineq_matrix @ x + s_in - problem.ineq_rhs,
        s_bounds - x[problem.nonneg],
    ]
    gradient = np.array(problem.objective, dtype=float)
    gradient += problem.eq_matrix.T @ y_eq + problem.ineq_matrix.T @ y_in
    gradient[problem.nonneg] -= y_bounds

    substituted = x.copy()
    min_eigenvalue = math.inf
    start = 0
    for block, p in enumerate(problem.block_sizes):
        span = problem.block_slice(block)
        rows, cols = np.triu_indices(p)
        diagonal = rows == cols
        matrix = solution.psd_blocks[block]
        primal.append((matrix[rows, cols] - x[span]) * np.where(diagonal, 1.0, SQRT2))
        size = rows.size
        multiplier = smat(y_psd[start:start + size], p)
        gradient[span] -= multiplier[rows, cols] * np.where(diagonal, 1.0, 2.0)
        start += size
        substituted[span] = matrix[rows, cols]
        min_eigenvalue = min(min_eigenvalue, float(scipy.linalg.eigvalsh(matrix)[0]))

    rhs_size = max(1.0, _norm(problem.eq_rhs), _norm(problem.ineq_rhs))
    cx = float(problem.objective @ x)
    by = float(problem.eq_rhs @ y_eq + problem.ineq_rhs @ y_in)
    violation = problem.eq_matrix @ substituted - problem.eq_rhs
    return KKTAudit(
        primal=max(_norm(part) for part in primal) / rhs_size,
        dual=_norm(gradient) / max(1.0, _norm(problem.objective)),
        gap=abs(cx + by) / (1.0 + abs(cx) + abs(by)),
        max_equality_violation=_norm(violation),
        min_psd_eigenvalue=min_eigenvalue,
    )

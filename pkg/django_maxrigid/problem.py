"""
Assembly of the rigidity-maximizing semidefinite program.

For every frame k the legs l^k (distances from the camera center to the
visible points) live in a PSD block Z^k = [[1, l^T], [l, Y]]. Every graph edge
(i, j) visible in frame k contributes the cosine-law equality
tr(A_ij^k Y^k) = dhat_ij^k, and the squared distance is bounded by the
squared internal model, dhat_ij^k <= ghat_ij, with sum(ghat) == 1 fixing the
global scale. The objective is

    sum_k tr(Y^k) - lambda1 * sum(l) - lambda2 * sum(dhat)
"""
import enum
import logging
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from django_maxrigid.conic import ConicProblem, FrameBlock, ProblemLayout, triangle_size
from django_maxrigid.exceptions import ConfigurationError, EmptyProblem

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA1 = 1.0
DEFAULT_LAMBDA2 = 20.0

ROTATION_TOLERANCE = 1e-9
ORTHOGRAPHIC_TOLERANCE = 1e-3


@dataclass(frozen=True)
class ProblemWeights:
    lambda1: float = DEFAULT_LAMBDA1
    lambda2: float = DEFAULT_LAMBDA2

    def __post_init__(self):
        for name in ('lambda1', 'lambda2'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError('%s must be positive and finite, got %r' % (name, value))


@dataclass(frozen=True)
class EdgeConstraint:
    frame: int
    edge: tuple
    cosine: float
    n_points: int

    @property
    def a_matrix(self):
        """Sparse n x n matrix with ones at (i, i), (j, j) and -c at (i, j), (j, i)."""
        i, j = self.edge
        return sp.coo_matrix(
            ([1.0, 1.0, -self.cosine, -self.cosine], ([i, j, i, j], [i, j, j, i])),
            shape=(self.n_points, self.n_points),
        )

    def quadratic_form(self, legs):
        """Squared distance l^T A l implied by the legs of all points."""
        i, j = self.edge
        return legs[i] ** 2 + legs[j] ** 2 - 2.0 * self.cosine * legs[i] * legs[j]


def build_edge_constraints(seq, graph):
    """
    One constraint per (frame, edge) with both endpoints visible, ordered by
    frame then edge.
    """
    rays = seq.rays()
    constraints = []
    for frame in range(seq.n_frames):
        visible = seq.visible[frame]
        for i, j in graph.edges:
            if not (visible[i] and visible[j]):
                continue
            cosine = float(np.clip(np.dot(rays[frame, i], rays[frame, j]), -1.0, 1.0))
            constraints.append(EdgeConstraint(frame=frame, edge=(i, j), cosine=cosine,
                                              n_points=seq.n_points))
    return constraints


class _Rows(object):
    """Accumulates sparse constraint rows as triplets."""

    def __init__(self):
        self.rows, self.cols, self.data, self.rhs = [], [], [], []

    def add(self, coefficients, rhs=0.0):
        row = len(self.rhs)
        for col, value in coefficients:
            self.rows.append(row)
            self.cols.append(col)
            self.data.append(value)
        self.rhs.append(rhs)

    def matrix(self, n_variables):
        return sp.csr_matrix((self.data, (self.rows, self.cols)),
                             shape=(len(self.rhs), n_variables))


def assemble_problem(seq, graph, weights=None):
    constraints = build_edge_constraints(seq, graph)
    unused = set(graph.edges) - {c.edge for c in constraints}
    if unused:
        logger.warning('removing %d edges never visible in any frame', len(unused))
    return assemble_from_constraints(constraints, seq.visible, weights, seq.frame_index)


def assemble_from_constraints(constraints, visible, weights=None, frame_index=None):
    """
    Build the conic problem from edge constraints and the (frames, points)
    visibility mask they were computed on.
    """
    weights = weights or ProblemWeights()
    visible = np.asarray(visible, dtype=bool)
    n_frames, n_points = visible.shape
    if frame_index is None:
        frame_index = np.arange(n_frames)

    used_edges = sorted({c.edge for c in constraints})
    if not used_edges:
        raise EmptyProblem('no edge is visible in any frame')

    by_frame = defaultdict(list)
    for constraint in constraints:
        by_frame[constraint.frame].append(constraint)
    frames = []
    for frame in range(n_frames):
        if not by_frame[frame]:
            logger.warning('dropping frame %d: no constrained edges', frame_index[frame])
            continue
        points = tuple(int(p) for p in np.flatnonzero(visible[frame]))
        frames.append(FrameBlock(frame=frame, block=len(frames), points=points))

    block_sizes = tuple(len(b.points) + 1 for b in frames)
    offsets = np.concatenate([[0], np.cumsum([triangle_size(p) for p in block_sizes])])
    scalar_offset = int(offsets[-1])
    n_dhat = len(constraints)
    ghat_scalar = {edge: n_dhat + position for position, edge in enumerate(used_edges)}
    n_variables = scalar_offset + n_dhat + len(used_edges)

    def entry(block, r, s):
        p = block_sizes[block]
        if r > s:
            r, s = s, r
        return int(offsets[block]) + r * p - r * (r - 1) // 2 + (s - r)

    objective = np.zeros(n_variables)
    equalities = _Rows()
    inequalities = _Rows()
    nonneg = []
    dhat_layout = []

    for block in frames:
        b = block.block
        equalities.add([(entry(b, 0, 0), 1.0)], 1.0)
        for r in range(1, block_sizes[b]):
            objective[entry(b, r, r)] = 1.0
            objective[entry(b, 0, r)] = -weights.lambda1
            nonneg.append(entry(b, 0, r))

    rows_of = {block.frame: {p: r + 1 for r, p in enumerate(block.points)} for block in frames}
    block_of = {block.frame: block.block for block in frames}
    for scalar, constraint in enumerate(constraints):
        b = block_of[constraint.frame]
        i, j = constraint.edge
        ri, rj = rows_of[constraint.frame][i], rows_of[constraint.frame][j]
        dhat = scalar_offset + scalar
        ghat = scalar_offset + ghat_scalar[constraint.edge]
        equalities.add([
            (entry(b, ri, ri), 1.0),
            (entry(b, rj, rj), 1.0),
            (entry(b, ri, rj), -2.0 * constraint.cosine),
            (dhat, -1.0),
        ])
        inequalities.add([(dhat, 1.0), (ghat, -1.0)])
        objective[dhat] = -weights.lambda2
        nonneg.append(dhat)
        dhat_layout.append(((constraint.frame, i, j), scalar))

    equalities.add([(scalar_offset + s, 1.0) for s in ghat_scalar.values()], 1.0)
    nonneg.extend(scalar_offset + s for s in ghat_scalar.values())

    layout = ProblemLayout(
        n_points=n_points,
        frames=tuple(frames),
        dhat=tuple(dhat_layout),
        ghat=tuple((edge, ghat_scalar[edge]) for edge in used_edges),
    )
    problem = ConicProblem(
        block_sizes=block_sizes,
        n_scalars=n_dhat + len(used_edges),
        objective=objective,
        eq_matrix=equalities.matrix(n_variables),
        eq_rhs=equalities.rhs,
        ineq_matrix=inequalities.matrix(n_variables),
        ineq_rhs=inequalities.rhs,
        nonneg=nonneg,
        layout=layout,
    )
    logger.debug('assembled problem: %d blocks, %d variables, %d equalities, %d inequalities',
                 len(block_sizes), n_variables, problem.n_equalities, problem.n_inequalities)
    return problem


class Degeneracy(str, enum.Enum):
    WELL_POSED = 'WellPosed'
    PURE_ROTATION = 'PureRotationSuspected'
    NEAR_ORTHOGRAPHIC = 'NearOrthographic'


@dataclass(frozen=True)
class DegeneracyReport:
    kind: Degeneracy
    max_cosine_std: float
    max_angle: float

    @property
    def degenerate(self):
        return self.kind is not Degeneracy.WELL_POSED

    def to_dict(self):
        return {
            'kind': self.kind.value,
            'max_cosine_std': self.max_cosine_std,
            'max_angle': self.max_angle,
        }


def detect_degeneracy(seq, graph, tol_rot=ROTATION_TOLERANCE, tol_ortho=ORTHOGRAPHIC_TOLERANCE):
    """
    Near-orthographic views are checked first: their cosines are all close to
    one, which would also make them look like a pure rotation.
    """
    rays = seq.rays()
    max_std = 0.0
    max_angle = 0.0
    for i, j in graph.edges:
        both = seq.visible[:, i] & seq.visible[:, j]
        if not both.any():
            continue
        ray_i, ray_j = rays[both, i], rays[both, j]
        cosines = np.clip(np.einsum('kd,kd->k', ray_i, ray_j), -1.0, 1.0)
        max_std = max(max_std, float(np.std(cosines)))
        sines = np.linalg.norm(np.cross(ray_i, ray_j), axis=1)
        max_angle = max(max_angle, float(np.max(np.arctan2(sines, cosines))))

    if max_angle < tol_ortho:
        kind = Degeneracy.NEAR_ORTHOGRAPHIC
    elif max_std < tol_rot:
        kind = Degeneracy.PURE_ROTATION
    else:
        kind = Degeneracy.WELL_POSED
    return DegeneracyReport(kind=kind, max_cosine_std=max_std, max_angle=max_angle)

"""
From solver legs to 3D points, alignment to ground truth, error metrics and
rigidity diagnostics.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from django_maxrigid.exceptions import (
    AlignmentDegenerate,
    NoOverlap,
    ScaleUndefined,
    SolutionRejected,
)
from django_maxrigid.solver import SolverStatus, check_rank_one

logger = logging.getLogger(__name__)

LEG_TOLERANCE = 1e-6
SINGULAR_TOLERANCE = 1e-12


def _grid_to_json(grid):
    return [[None if not np.all(np.isfinite(p)) else [float(c) for c in p] for p in row]
            for row in grid]


def _grid_from_json(rows, width):
    grid = np.full((len(rows), len(rows[0]) if rows else 0, width), np.nan)
    for k, row in enumerate(rows):
        for i, value in enumerate(row):
            if value is not None:
                grid[k, i] = value
    return grid


@dataclass(frozen=True, eq=False)
class Reconstruction:
    """
    ``points`` is a (frames, points, 3) grid in the camera frame, NaN where
    a point is absent. ``source_legs`` holds the legs used, NaN likewise, and
    ``rank_ratios`` the per-frame lambda2 / lambda1 of the solved Y block.
    """
    points: np.ndarray = field(repr=False)
    rank_ratios: np.ndarray = field(repr=False)
    source_legs: np.ndarray = field(repr=False)
    frame_index: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        frame_index = self.frame_index
        if frame_index is None:
            frame_index = np.arange(points.shape[0])
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'rank_ratios', np.array(self.rank_ratios, dtype=float))
        object.__setattr__(self, 'source_legs', np.array(self.source_legs, dtype=float))
        object.__setattr__(self, 'frame_index', np.array(frame_index, dtype=int))

    @property
    def n_frames(self):
        return self.points.shape[0]

    @property
    def n_points(self):
        return self.points.shape[1]

    @property
    def present(self):
        return np.all(np.isfinite(self.points), axis=2)

    def scaled(self, scale):
        return replace(self, points=self.points * scale, source_legs=self.source_legs * scale)

    def with_points(self, points):
        return replace(self, points=points)

    def to_dict(self):
        return {
            'frame_index': self.frame_index.tolist(),
            'rank_ratios': [None if math.isnan(r) else float(r) for r in self.rank_ratios],
            'legs': [[None if math.isnan(leg) else float(leg) for leg in row]
                     for row in self.source_legs],
            'points': _grid_to_json(self.points),
        }

    @classmethod
    def from_dict(cls, data):
        legs = np.array([[np.nan if leg is None else leg for leg in row] for row in data['legs']],
                        dtype=float)
        return cls(
            points=_grid_from_json(data['points'], 3),
            rank_ratios=[np.nan if r is None else r for r in data['rank_ratios']],
            source_legs=legs,
            frame_index=data.get('frame_index'),
        )


def reconstruct(seq, sol, accept_max_iterations=False, leg_tolerance=LEG_TOLERANCE):
    """
    Place every visible point on its viewing ray at the solved leg length.

    Frames without a PSD block (no constrained edge) stay absent. Legs in
    ``[-leg_tolerance, 0)`` are treated as zero.
    """
    accepted = {SolverStatus.OPTIMAL}
    if accept_max_iterations:
        accepted.add(SolverStatus.MAX_ITERATIONS)
    if sol.status not in accepted:
        raise SolutionRejected('cannot reconstruct from a %s solution' % sol.status.value)
    if not sol.legs:
        raise SolutionRejected('solution carries no leg layout')

    rays = seq.rays()
    points = np.full((seq.n_frames, seq.n_points, 3), np.nan)
    legs = np.full((seq.n_frames, seq.n_points), np.nan)
    ratios = np.full(seq.n_frames, np.nan)
    # blocks are assembled in increasing frame order
    for block, frame in enumerate(sorted(sol.legs)):
        if not 0 <= frame < seq.n_frames:
            raise SolutionRejected('solution frame %d is outside the sequence' % frame)
        visible = np.flatnonzero(seq.visible[frame])
        frame_legs = np.asarray(sol.legs[frame], dtype=float)
        if frame_legs.shape != visible.shape:
            raise SolutionRejected('frame %d has %d legs for %d visible points'
                                   % (frame, frame_legs.size, visible.size))
        if np.any(frame_legs < -leg_tolerance):
            raise SolutionRejected('frame %d has a negative leg %r'
                                   % (frame, float(frame_legs.min())))
        frame_legs = np.maximum(frame_legs, 0.0)
        legs[frame, visible] = frame_legs
        points[frame, visible] = frame_legs[:, None] * rays[frame, visible]
        ratios[frame], _ = check_rank_one(sol.psd_blocks[block], schur=True)
    return Reconstruction(points=points, rank_ratios=ratios, source_legs=legs,
                          frame_index=seq.frame_index)


def _co_present(recon, truth):
    truth = np.asarray(truth, dtype=float)
    if truth.shape != recon.points.shape:
        raise NoOverlap('ground truth grid %s does not match the reconstruction %s'
                        % (truth.shape, recon.points.shape))
    mask = recon.present & np.all(np.isfinite(truth), axis=2)
    if not mask.any():
        raise NoOverlap('reconstruction and ground truth share no point')
    return truth, mask


def align_scale(recon, truth):
    """
    One global scale s = <truth, recon> / <recon, recon> over all co-present
    points, kept strictly positive.
    """
    if truth is None:
        raise NoOverlap('no ground truth to align to')
    truth, mask = _co_present(recon, truth)
    q = recon.points[mask]
    energy = float(np.sum(q * q))
    if energy == 0.0:
        raise ScaleUndefined('reconstruction is identically zero')
    scale = float(np.sum(truth[mask] * q)) / energy
    scale = max(scale, np.finfo(float).eps)
    return recon.scaled(scale), scale


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    scale: float
    rotation: np.ndarray = field(repr=False)
    translation: np.ndarray = field(repr=False)

    @classmethod
    def identity(cls):
        return cls(1.0, np.eye(3), np.zeros(3))

    def apply(self, points):
        return self.scale * points @ self.rotation.T + self.translation

    def to_dict(self):
        return {
            'scale': self.scale,
            'rotation': self.rotation.tolist(),
            'translation': self.translation.tolist(),
        }


def fit_similarity(source, target):
    """
    Least-squares similarity mapping ``source`` onto ``target`` (both N x 3),
    with the reflection removed.
    """
    if len(source) < 3:
        raise AlignmentDegenerate('need at least three points, got %d' % len(source))
    mu_source = source.mean(axis=0)
    mu_target = target.mean(axis=0)
    centered_source = source - mu_source
    centered_target = target - mu_target
    covariance = centered_target.T @ centered_source / len(source)
    u, singular, vt = scipy.linalg.svd(covariance)
    if singular[0] <= 0 or singular[1] <= SINGULAR_TOLERANCE * singular[0]:
        raise AlignmentDegenerate('points are collinear or coincident')
    sign = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        sign[2] = -1.0
    rotation = (u * sign) @ vt
    variance = np.mean(np.sum(centered_source ** 2, axis=1))
    scale = float(np.sum(singular * sign) / variance)
    translation = mu_target - scale * rotation @ mu_source
    return SimilarityTransform(scale, rotation, translation)


def align_procrustes(recon, truth, per_frame=False):
    """
    Similarity alignment of the reconstruction to ground truth. Returns the
    aligned reconstruction and the transform, or a tuple of transforms (one
    per frame, ``None`` for frames without points) with ``per_frame=True``.
    """
    truth, mask = _co_present(recon, truth)
    points = recon.points.copy()
    if not per_frame:
        transform = fit_similarity(recon.points[mask], truth[mask])
        present = recon.present
        points[present] = transform.apply(recon.points[present])
        return recon.with_points(points), transform

    transforms = []
    for frame in range(recon.n_frames):
        if not mask[frame].any():
            transforms.append(None)
            continue
        transform = fit_similarity(recon.points[frame, mask[frame]], truth[frame, mask[frame]])
        present = recon.present[frame]
        points[frame, present] = transform.apply(recon.points[frame, present])
        transforms.append(transform)
    return recon.with_points(points), tuple(transforms)


@dataclass(frozen=True)
class EvaluationReport:
    rmse: float
    r_err: float
    per_frame_rmse: tuple
    per_frame_r_err: tuple
    frame_index: tuple
    alignment: dict = None

    def to_dict(self):
        return {
            'rmse': self.rmse,
            'r_err': self.r_err,
            'per_frame_rmse': list(self.per_frame_rmse),
            'per_frame_r_err': list(self.per_frame_r_err),
            'frame_index': list(self.frame_index),
            'alignment': self.alignment,
        }

    def per_frame_rows(self):
        return [(frame, rmse, r_err) for frame, rmse, r_err
                in zip(self.frame_index, self.per_frame_rmse, self.per_frame_r_err)]


def compute_metrics(recon, truth, alignment=None):
    """
    Mean over frames of the per-frame RMSE and relative error, both taken
    over the points present in the reconstruction and the ground truth.
    Frames without such points are left out.
    """
    if truth is None:
        raise NoOverlap('no ground truth to evaluate against')
    truth, mask = _co_present(recon, truth)
    rmse, r_err, frames = [], [], []
    for frame in range(recon.n_frames):
        if not mask[frame].any():
            continue
        expected = truth[frame, mask[frame]]
        error = expected - recon.points[frame, mask[frame]]
        rmse.append(math.sqrt(np.mean(np.sum(error ** 2, axis=1))))
        error_norm = float(np.linalg.norm(error))
        truth_norm = float(np.linalg.norm(expected))
        if error_norm == 0.0:
            r_err.append(0.0)
        elif truth_norm == 0.0:
            r_err.append(math.inf)
        else:
            r_err.append(error_norm / truth_norm * 100.0)
        frames.append(int(recon.frame_index[frame]))
    return EvaluationReport(
        rmse=float(np.mean(rmse)),
        r_err=float(np.mean(r_err)),
        per_frame_rmse=tuple(float(v) for v in rmse),
        per_frame_r_err=tuple(float(v) for v in r_err),
        frame_index=tuple(frames),
        alignment=alignment,
    )


@dataclass(frozen=True)
class RigidityDiagnostics:
    """
    Per-edge realized maxima ``max_distances`` (the internal model g),
    temporal deviation ``delta_prime`` = sum_k |g - d^k| and the cubic-weighted
    deviation ``ullman_deviation`` against the internal model in use.
    """
    edges: tuple
    max_distances: dict
    delta_prime: dict
    ullman_deviation: dict
    total_delta_prime: float
    total_ullman_deviation: float
    skipped_edges: tuple = ()
    hatted_surrogate: float = None

    def to_dict(self):
        def per_edge(values):
            return [[i, j, values[(i, j)]] for i, j in self.edges]

        return {
            'edges': [list(edge) for edge in self.edges],
            'max_distances': per_edge(self.max_distances),
            'delta_prime': per_edge(self.delta_prime),
            'ullman_deviation': per_edge(self.ullman_deviation),
            'total_delta_prime': self.total_delta_prime,
            'total_ullman_deviation': self.total_ullman_deviation,
            'skipped_edges': [list(edge) for edge in self.skipped_edges],
            'hatted_surrogate': self.hatted_surrogate,
        }


def rigidity_diagnostics(recon, graph, internal_model=None, solution=None):
    """
    ``internal_model`` optionally maps an edge to the reference distance used
    in the cubic-weighted deviation; the realized maximum is used otherwise.
    With a ``solution``, the relaxed total sum(ghat - dhat) is reported too.
    """
    present = recon.present
    edges, skipped = [], []
    maxima, delta_prime, ullman = {}, {}, {}
    for i, j in graph.edges:
        both = present[:, i] & present[:, j]
        if not both.any():
            logger.warning('edge (%d, %d) is never reconstructed in both endpoints, skipped', i, j)
            skipped.append((i, j))
            continue
        distances = np.linalg.norm(recon.points[both, i] - recon.points[both, j], axis=1)
        g = float(distances.max())
        reference = g if internal_model is None else float(internal_model.get((i, j), g))
        edges.append((i, j))
        maxima[(i, j)] = g
        delta_prime[(i, j)] = float(np.sum(np.abs(g - distances)))
        if reference == 0.0:
            ullman[(i, j)] = 0.0
        else:
            ullman[(i, j)] = float(np.sum((reference - distances) ** 2) / reference ** 3)

    hatted = None
    if solution is not None and solution.ghat:
        hatted = float(sum(solution.ghat[(i, j)] - value
                           for (_, i, j), value in solution.dhat.items()))
    return RigidityDiagnostics(
        edges=tuple(edges),
        max_distances=maxima,
        delta_prime=delta_prime,
        ullman_deviation=ullman,
        total_delta_prime=float(sum(delta_prime.values())),
        total_ullman_deviation=float(sum(ullman.values())),
        skipped_edges=tuple(skipped),
        hatted_surrogate=hatted,
    )

"""
Calibrated 2D point tracks, the input of the reconstruction.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from django_maxrigid.exceptions import InvalidSequence
from django_maxrigid.geometry import Observation, normalize_rays

logger = logging.getLogger(__name__)

MIN_POINTS = 3
MIN_FRAMES = 2


@dataclass(frozen=True, eq=False)
class TrackedSequence:
    """
    ``uv`` is a (frames, points, 2) pixel grid, ``visible`` the matching
    (frames, points) mask. Invisible coordinates are stored as NaN.
    ``ground_truth`` is an optional (frames, points, 3) grid in scene units.
    ``frame_index`` maps each row back to the frame number it had on input.
    """
    intrinsics: object
    uv: np.ndarray = field(repr=False)
    visible: np.ndarray = field(repr=False)
    ground_truth: np.ndarray = field(default=None, repr=False)
    frame_index: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        uv = np.array(self.uv, dtype=float)
        visible = np.array(self.visible, dtype=bool)
        if uv.ndim != 3 or uv.shape[2] != 2:
            raise InvalidSequence('observations must form a (frames, points, 2) grid')
        if visible.shape != uv.shape[:2]:
            raise InvalidSequence('visibility mask does not match the observation grid')
        n_frames, n_points = visible.shape
        if n_points < MIN_POINTS:
            raise InvalidSequence('need at least %d points, got %d' % (MIN_POINTS, n_points))
        if n_frames < MIN_FRAMES:
            raise InvalidSequence('need at least %d frames, got %d' % (MIN_FRAMES, n_frames))
        if not np.all(np.isfinite(uv[visible])):
            raise InvalidSequence('visible observations must be finite')
        uv[~visible] = np.nan

        ground_truth = self.ground_truth
        if ground_truth is not None:
            ground_truth = np.array(ground_truth, dtype=float)
            if ground_truth.shape != (n_frames, n_points, 3):
                raise InvalidSequence('ground truth must form a (frames, points, 3) grid')
            ground_truth.setflags(write=False)

        frame_index = self.frame_index
        if frame_index is None:
            frame_index = np.arange(n_frames)
        frame_index = np.array(frame_index, dtype=int)
        if frame_index.shape != (n_frames,):
            raise InvalidSequence('frame index must have one entry per frame')

        for name, value in (('uv', uv), ('visible', visible), ('frame_index', frame_index)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, 'ground_truth', ground_truth)

    @property
    def n_frames(self):
        return self.visible.shape[0]

    @property
    def n_points(self):
        return self.visible.shape[1]

    @property
    def has_ground_truth(self):
        return self.ground_truth is not None

    @property
    def masked_fraction(self):
        return float(1.0 - self.visible.mean())

    def observation(self, frame, point):
        u, v = self.uv[frame, point]
        return Observation(float(u), float(v), bool(self.visible[frame, point]))

    @property
    def observations(self):
        return [[self.observation(k, i) for i in range(self.n_points)]
                for k in range(self.n_frames)]

    def rays(self):
        """
        Unit viewing rays, (frames, points, 3); zero where invisible.
        """
        return normalize_rays(self.intrinsics, self.uv, self.visible)

    def select_frames(self, keep):
        keep = np.asarray(keep)
        return replace(
            self,
            uv=self.uv[keep],
            visible=self.visible[keep],
            ground_truth=None if self.ground_truth is None else self.ground_truth[keep],
            frame_index=self.frame_index[keep],
        )


def ingest(seq, k):
    """
    Drop every frame whose visible-point count does not exceed ``k``, then
    check that each point is still visible in at least two frames.
    """
    counts = seq.visible.sum(axis=1)
    keep = counts > k
    for frame in np.flatnonzero(~keep):
        logger.warning('dropping frame %d: %d visible points, neighbourhood size %d',
                       seq.frame_index[frame], counts[frame], k)
    if keep.sum() < MIN_FRAMES:
        raise InvalidSequence('only %d frames keep more than %d visible points'
                              % (keep.sum(), k))
    if not keep.all():
        seq = seq.select_frames(keep)
    per_point = seq.visible.sum(axis=0)
    lonely = np.flatnonzero(per_point < 2)
    if lonely.size:
        raise InvalidSequence('points %s are visible in fewer than two frames'
                              % lonely.tolist())
    return seq

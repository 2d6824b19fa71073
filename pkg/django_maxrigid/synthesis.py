"""
Synthetic tracked sequences with known ground truth.

Random numbers come from numpy's PCG64 bit generator seeded with
``rng_seed``; Gaussian draws use ``Generator.standard_normal``. Draws happen
in a fixed order (base shape, per-frame poses, articulation, bending radii,
pixel noise, visibility mask), so a seed identifies one sequence on every
platform.
"""
import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from django_maxrigid.exceptions import ConfigurationError, GenerationFailed
from django_maxrigid.geometry import CameraIntrinsics, project
from django_maxrigid.sequence import TrackedSequence

logger = logging.getLogger(__name__)

MAX_MASK_ATTEMPTS = 1000


class MotionKind(str, enum.Enum):
    RIGID = 'Rigid'
    POINT_ARTICULATED = 'PointArticulated'
    AXIS_ARTICULATED = 'AxisArticulated'
    BENDING_SHEET = 'BendingSheet'
    PURE_ROTATION = 'PureRotation'

    @property
    def slug(self):
        return {
            MotionKind.RIGID: 'rigid',
            MotionKind.POINT_ARTICULATED: 'point-articulated',
            MotionKind.AXIS_ARTICULATED: 'axis-articulated',
            MotionKind.BENDING_SHEET: 'bending-sheet',
            MotionKind.PURE_ROTATION: 'pure-rotation',
        }[self]

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for kind in cls:
            if value in (kind.value, kind.slug):
                return kind
        raise ConfigurationError('unknown motion kind %r, expected one of %s'
                                 % (value, ', '.join(kind.slug for kind in cls)))


@dataclass(frozen=True)
class SynthesisConfig:
    """
    Lengths are in scene units. ``scene_depth`` is the distance from the
    camera to the scene center in multiples of ``scene_size``; rotation and
    articulation magnitudes are the largest per-frame angles in degrees;
    ``bend_radius_range`` bounds the per-frame cylinder radius of the
    bending sheet in multiples of ``scene_size``.
    """
    n_points: int = 30
    n_frames: int = 10
    motion_kind: MotionKind = MotionKind.RIGID
    noise_sigma: float = 0.0
    missing_ratio: float = 0.0
    rng_seed: int = 0
    fov_degrees: float = 81.69
    image_width: int = 640
    image_height: int = 480
    k_neighbors: int = 20
    scene_size: float = 1000.0
    scene_depth: float = 3.0
    rotation_degrees: float = 30.0
    translation: float = 0.1
    articulation_degrees: float = 40.0
    group_split: float = 0.5
    bend_radius_range: tuple = (0.6, 3.0)

    def __post_init__(self):
        object.__setattr__(self, 'motion_kind', MotionKind.parse(self.motion_kind))
        if self.n_points < 3 or self.n_frames < 2:
            raise ConfigurationError('need at least 3 points and 2 frames')
        if not self.noise_sigma >= 0:
            raise ConfigurationError('noise_sigma must be nonnegative')
        if not 0 <= self.missing_ratio < 1:
            raise ConfigurationError('missing_ratio must lie in [0, 1)')
        if not 0 < self.fov_degrees < 180:
            raise ConfigurationError('fov_degrees must lie in (0, 180)')
        if self.k_neighbors < 1:
            raise ConfigurationError('k_neighbors must be at least 1')
        if not (self.scene_size > 0 and self.scene_depth > 0):
            raise ConfigurationError('scene size and depth must be positive')
        if not 0 < self.group_split < 1:
            raise ConfigurationError('group_split must lie in (0, 1)')
        low, high = self.bend_radius_range
        if not 0 < low <= high:
            raise ConfigurationError('bend_radius_range must be an increasing positive pair')
        if self.motion_kind is MotionKind.BENDING_SHEET:
            columns, _ = _sheet_grid(self.n_points)
            smallest = 0.5 / (columns - 1)
            if low < smallest:
                raise ConfigurationError(
                    'bend_radius_range must start at %g or above for %d points: '
                    'a smaller radius cannot keep the grid spacing' % (smallest, self.n_points))

    @property
    def intrinsics(self):
        return CameraIntrinsics.from_fov(self.fov_degrees, self.image_width, self.image_height)


def _random_rotations(rng, count, max_degrees):
    axes = rng.standard_normal((count, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = np.radians(max_degrees) * rng.uniform(-1.0, 1.0, count)
    return Rotation.from_rotvec(axes * angles[:, None])


def _random_cloud(rng, config):
    return config.scene_size * rng.uniform(-0.5, 0.5, (config.n_points, 3))


def _poses(rng, config):
    rotations = _random_rotations(rng, config.n_frames, config.rotation_degrees)
    shifts = config.translation * config.scene_size * rng.uniform(-1.0, 1.0, (config.n_frames, 3))
    return rotations, shifts


def _rigid_frames(shapes, rotations, shifts, center):
    return np.stack([rotations[k].apply(shapes[k]) + center + shifts[k]
                     for k in range(len(shapes))])


def _articulated_shapes(rng, config, base):
    """
    Points beyond the ``group_split`` quantile of x form the second group,
    which turns about a joint on the split plane.
    """
    split = np.quantile(base[:, 0], config.group_split)
    moving = base[:, 0] > split
    joint = np.array([split, 0.0, 0.0])
    if config.motion_kind is MotionKind.POINT_ARTICULATED:
        turns = _random_rotations(rng, config.n_frames, config.articulation_degrees)
    else:
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        angles = np.radians(config.articulation_degrees) * rng.uniform(-1.0, 1.0, config.n_frames)
        turns = Rotation.from_rotvec(np.outer(angles, axis))
    shapes = []
    for k in range(config.n_frames):
        shape = base.copy()
        shape[moving] = turns[k].apply(base[moving] - joint) + joint
        shapes.append(shape)
    return shapes


def _sheet_grid(n_points):
    columns = int(math.ceil(math.sqrt(n_points)))
    return columns, int(math.ceil(n_points / columns))


def _sheet_shapes(rng, config):
    """
    A planar grid folded along its columns onto the inscribed polygon of a
    cylinder, so neighbouring grid points keep their spacing in every frame.
    """
    columns, rows = _sheet_grid(config.n_points)
    spacing = config.scene_size / (columns - 1)
    column = np.arange(config.n_points) % columns
    row = np.arange(config.n_points) // columns
    y = (row - (rows - 1) / 2.0) * spacing
    low, high = config.bend_radius_range
    radii = config.scene_size * rng.uniform(low, high, config.n_frames)
    shapes = []
    for radius in radii:
        # radii start at half the spacing; min() absorbs rounding
        step = 2.0 * math.asin(min(1.0, spacing / (2.0 * radius)))
        theta = (column - (columns - 1) / 2.0) * step
        x = radius * np.sin(theta)
        z = radius * (1.0 - np.cos(theta))
        shapes.append(np.column_stack([x, y, z - z.mean()]))
    return shapes


def _visibility(rng, config):
    shape = (config.n_frames, config.n_points)
    if config.missing_ratio == 0:
        return np.ones(shape, dtype=bool)
    k = min(config.k_neighbors, config.n_points - 1)
    for attempt in range(MAX_MASK_ATTEMPTS):
        visible = rng.random(shape) >= config.missing_ratio
        if visible.sum(axis=0).min() >= 2 and visible.sum(axis=1).min() > k:
            logger.debug('visibility mask accepted after %d attempts', attempt + 1)
            return visible
    raise GenerationFailed('no visibility mask with missing ratio %r keeps every frame above '
                           '%d points within %d attempts'
                           % (config.missing_ratio, k, MAX_MASK_ATTEMPTS))


def generate(config):
    """
    Build a ``TrackedSequence`` with ground truth for ``config``.
    """
    rng = np.random.Generator(np.random.PCG64(config.rng_seed))
    center = np.array([0.0, 0.0, config.scene_depth * config.scene_size])
    kind = config.motion_kind

    if kind is MotionKind.BENDING_SHEET:
        base = None
    else:
        base = _random_cloud(rng, config)
    rotations, shifts = _poses(rng, config)

    if kind is MotionKind.PURE_ROTATION:
        truth = np.stack([rotations[k].apply(base + center) for k in range(config.n_frames)])
    elif kind is MotionKind.RIGID:
        truth = _rigid_frames([base] * config.n_frames, rotations, shifts, center)
    elif kind is MotionKind.BENDING_SHEET:
        truth = _rigid_frames(_sheet_shapes(rng, config), rotations, shifts, center)
    else:
        truth = _rigid_frames(_articulated_shapes(rng, config, base), rotations, shifts, center)

    if truth[..., 2].min() <= 0:
        raise GenerationFailed('scene moved behind the camera, increase scene_depth')
    intrinsics = config.intrinsics
    uv = project(intrinsics, truth)
    if config.noise_sigma > 0:
        uv = uv + config.noise_sigma * rng.standard_normal(uv.shape)
    visible = _visibility(rng, config)

    logger.info('generated %s sequence: %d points, %d frames, seed %d',
                kind.value, config.n_points, config.n_frames, config.rng_seed)
    return TrackedSequence(intrinsics=intrinsics, uv=uv, visible=visible, ground_truth=truth)

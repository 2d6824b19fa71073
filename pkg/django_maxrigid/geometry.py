"""
Pinhole camera model and the viewing-ray geometry the reconstruction works on.

The world frame is the camera frame: the camera center is the origin and a
point is recovered from its leg (distance to the camera center) and its unit
viewing ray.
"""
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from django_maxrigid.exceptions import (
    InvalidIntrinsics,
    InvalidLeg,
    InvalidObservation,
    NotVisible,
)

UNIT_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class CameraIntrinsics:
    """
    Upper-triangular calibration matrix K, normalized so that K[2][2] == 1.
    """
    k_matrix: np.ndarray

    def __post_init__(self):
        k = np.array(self.k_matrix, dtype=float)
        if k.shape != (3, 3) or not np.all(np.isfinite(k)):
            raise InvalidIntrinsics('intrinsics must be a finite 3x3 matrix')
        if np.any(np.tril(k, -1) != 0):
            raise InvalidIntrinsics('intrinsics must be upper-triangular')
        if np.any(np.diag(k) <= 0):
            raise InvalidIntrinsics('intrinsics must have a positive diagonal')
        k = k / k[2, 2]
        if not np.isfinite(np.linalg.cond(k)):
            raise InvalidIntrinsics('intrinsics are singular')
        k.setflags(write=False)
        object.__setattr__(self, 'k_matrix', k)
        inverse = scipy.linalg.solve_triangular(k, np.eye(3))
        inverse.setflags(write=False)
        object.__setattr__(self, '_inverse', inverse)

    @classmethod
    def from_fov(cls, fov_degrees, width, height):
        """
        Virtual pinhole with a horizontal field of view and the principal
        point at the image center.
        """
        if not 0 < fov_degrees < 180:
            raise InvalidIntrinsics('field of view must lie in (0, 180) degrees')
        focal = (width / 2.0) / math.tan(math.radians(fov_degrees) / 2.0)
        return cls(np.array([
            [focal, 0.0, width / 2.0],
            [0.0, focal, height / 2.0],
            [0.0, 0.0, 1.0],
        ]))

    @property
    def inverse(self):
        return self._inverse

    def to_list(self):
        return self.k_matrix.tolist()


@dataclass(frozen=True)
class Observation:
    u: float
    v: float
    visible: bool = True


@dataclass(frozen=True, eq=False)
class NormalizedRay:
    direction: np.ndarray = field(repr=False)

    def __post_init__(self):
        direction = np.array(self.direction, dtype=float)
        if direction.shape != (3,):
            raise InvalidObservation('a ray is a 3-vector')
        if abs(np.linalg.norm(direction) - 1.0) > UNIT_TOLERANCE:
            raise InvalidObservation('ray direction must have unit length')
        if direction[2] <= 0:
            raise InvalidObservation('ray points behind the camera')
        direction.setflags(write=False)
        object.__setattr__(self, 'direction', direction)


def normalize_ray(intrinsics, obs):
    """
    Unit vector along K^-1 [u, v, 1]^T.
    """
    if not obs.visible:
        raise NotVisible('observation (%r, %r) is not visible' % (obs.u, obs.v))
    if not (math.isfinite(obs.u) and math.isfinite(obs.v)):
        raise InvalidObservation('visible observation has non-finite coordinates')
    homogeneous = intrinsics.inverse @ np.array([obs.u, obs.v, 1.0])
    if homogeneous[2] <= 0:
        raise InvalidObservation('observation back-projects behind the camera')
    return NormalizedRay(homogeneous / np.linalg.norm(homogeneous))


def normalize_rays(intrinsics, uv, visible):
    """
    Vectorized ``normalize_ray`` over a (frames, points, 2) grid. Invisible
    entries come back as zero vectors.
    """
    uv = np.asarray(uv, dtype=float)
    visible = np.asarray(visible, dtype=bool)
    homogeneous = np.concatenate([np.where(visible[..., None], uv, 0.0),
                                  np.ones(uv.shape[:-1] + (1,))], axis=-1)
    rays = homogeneous @ intrinsics.inverse.T
    if np.any(rays[..., 2][visible] <= 0):
        raise InvalidObservation('observation back-projects behind the camera')
    rays /= np.linalg.norm(rays, axis=-1, keepdims=True)
    rays[~visible] = 0.0
    return rays


def pair_cosine(ray_i, ray_j):
    cosine = float(np.dot(ray_i.direction, ray_j.direction))
    return min(1.0, max(-1.0, cosine))


def point_from_leg(leg, ray):
    if not leg >= 0:
        raise InvalidLeg('leg must be nonnegative, got %r' % (leg,))
    return leg * ray.direction


def project(intrinsics, point):
    """
    Pixel coordinates (u, v) of a camera-frame point with positive depth.
    """
    point = np.asarray(point, dtype=float)
    if point[..., 2].min() <= 0:
        raise InvalidObservation('point has non-positive depth')
    image = point @ intrinsics.k_matrix.T
    return image[..., :2] / image[..., 2:3]

import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from django_maxrigid.exceptions import InvalidIntrinsics, InvalidLeg, InvalidObservation, NotVisible
from django_maxrigid.geometry import (
    CameraIntrinsics,
    NormalizedRay,
    Observation,
    normalize_ray,
    normalize_rays,
    pair_cosine,
    point_from_leg,
    project,
)

DIAGONAL = np.array([1.0, 0.0, 1.0]) / math.sqrt(2.0)


def test_principal_ray(identity_intrinsics):
    ray = normalize_ray(identity_intrinsics, Observation(0.0, 0.0))
    assert np.array_equal(ray.direction, [0.0, 0.0, 1.0])


def test_ray_at_forty_five_degrees(identity_intrinsics):
    ray = normalize_ray(identity_intrinsics, Observation(1.0, 0.0))
    assert np.allclose(ray.direction, DIAGONAL, atol=1e-15)


def test_ray_through_calibrated_camera():
    intrinsics = CameraIntrinsics([[500.0, 0.0, 320.0], [0.0, 500.0, 240.0], [0.0, 0.0, 1.0]])
    expected = np.linalg.inv(intrinsics.k_matrix) @ [820.0, 240.0, 1.0]
    ray = normalize_ray(intrinsics, Observation(820.0, 240.0))
    assert np.allclose(ray.direction, expected / np.linalg.norm(expected), atol=1e-15)
    assert np.allclose(ray.direction, DIAGONAL, atol=1e-15)


def test_intrinsics_are_normalized():
    intrinsics = CameraIntrinsics(2.0 * np.array([[500.0, 0.0, 320.0],
                                                  [0.0, 500.0, 240.0],
                                                  [0.0, 0.0, 1.0]]))
    assert intrinsics.k_matrix[2, 2] == 1.0
    assert intrinsics.k_matrix[0, 0] == 500.0


@pytest.mark.parametrize('k_matrix', [
    np.zeros((3, 3)),
    [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
    [[np.nan, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
])
def test_invalid_intrinsics(k_matrix):
    with pytest.raises(InvalidIntrinsics):
        CameraIntrinsics(k_matrix)


def test_intrinsics_from_fov():
    intrinsics = CameraIntrinsics.from_fov(90.0, 640, 480)
    assert intrinsics.k_matrix[0, 0] == pytest.approx(320.0)
    assert intrinsics.k_matrix[0, 2] == 320.0
    assert intrinsics.k_matrix[1, 2] == 240.0
    with pytest.raises(InvalidIntrinsics):
        CameraIntrinsics.from_fov(180.0, 640, 480)


def test_invisible_observation(identity_intrinsics):
    with pytest.raises(NotVisible):
        normalize_ray(identity_intrinsics, Observation(0.0, 0.0, visible=False))


def test_non_finite_observation(identity_intrinsics):
    with pytest.raises(InvalidObservation):
        normalize_ray(identity_intrinsics, Observation(math.nan, 0.0))


def test_ray_validation():
    with pytest.raises(InvalidObservation):
        NormalizedRay([0.0, 0.0, 2.0])
    with pytest.raises(InvalidObservation):
        NormalizedRay([0.0, 0.0, -1.0])


def test_pair_cosine():
    principal = NormalizedRay([0.0, 0.0, 1.0])
    diagonal = NormalizedRay(DIAGONAL)
    assert pair_cosine(principal, principal) == 1.0
    assert pair_cosine(principal, diagonal) == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-15)
    assert pair_cosine(diagonal, principal) == pair_cosine(principal, diagonal)


def test_pair_cosine_random_rays_and_rotation():
    rng = np.random.default_rng(3)
    rotation = Rotation.from_rotvec([0.1, -0.2, 0.05])
    for _ in range(50):
        a, b = rng.normal(size=(2, 3))
        a[2], b[2] = abs(a[2]) + 1.0, abs(b[2]) + 1.0
        a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
        cosine = pair_cosine(NormalizedRay(a), NormalizedRay(b))
        assert -1.0 <= cosine <= 1.0
        assert cosine == pytest.approx(float(np.dot(a, b)), abs=1e-15)
        ra, rb = rotation.apply(a), rotation.apply(b)
        assert float(np.dot(ra, rb)) == pytest.approx(cosine, abs=1e-12)


def test_point_from_leg():
    assert np.array_equal(point_from_leg(0.0, NormalizedRay([0.0, 0.0, 1.0])), [0.0, 0.0, 0.0])
    assert np.array_equal(point_from_leg(2.0, NormalizedRay([0.0, 0.0, 1.0])), [0.0, 0.0, 2.0])
    point = point_from_leg(5.0, NormalizedRay(DIAGONAL))
    assert np.allclose(point, [5.0 / math.sqrt(2.0), 0.0, 5.0 / math.sqrt(2.0)], atol=1e-14)
    with pytest.raises(InvalidLeg):
        point_from_leg(-1.0, NormalizedRay([0.0, 0.0, 1.0]))


def test_projection_round_trip():
    intrinsics = CameraIntrinsics.from_fov(81.69, 640, 480)
    rng = np.random.default_rng(11)
    points = rng.uniform(-500.0, 500.0, (40, 3)) + [0.0, 0.0, 3000.0]
    uv = project(intrinsics, points)
    for point, (u, v) in zip(points, uv):
        ray = normalize_ray(intrinsics, Observation(u, v))
        rebuilt = point_from_leg(np.linalg.norm(point), ray)
        assert np.linalg.norm(rebuilt - point) <= 1e-9 * np.linalg.norm(point)


def test_vectorized_rays_match_single_rays():
    intrinsics = CameraIntrinsics.from_fov(60.0, 640, 480)
    uv = np.array([[[10.0, 20.0], [320.0, 240.0], [600.0, 5.0]]])
    visible = np.array([[True, False, True]])
    rays = normalize_rays(intrinsics, uv, visible)
    assert np.array_equal(rays[0, 1], [0.0, 0.0, 0.0])
    for i in (0, 2):
        single = normalize_ray(intrinsics, Observation(*uv[0, i]))
        assert np.allclose(rays[0, i], single.direction, atol=1e-15)


def test_project_rejects_points_behind_camera():
    with pytest.raises(InvalidObservation):
        project(CameraIntrinsics(np.eye(3)), [0.0, 0.0, -1.0])

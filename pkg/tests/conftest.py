import numpy as np
import pytest

from django_maxrigid.geometry import CameraIntrinsics, project
from django_maxrigid.sequence import TrackedSequence


@pytest.fixture
def identity_intrinsics():
    return CameraIntrinsics(np.eye(3))


@pytest.fixture
def sequence_from_points():
    """
    Factory building a TrackedSequence by projecting a (frames, points, 3)
    grid through a 640x480 pinhole.
    """
    def build(points, visible=None):
        points = np.asarray(points, dtype=float)
        intrinsics = CameraIntrinsics.from_fov(81.69, 640, 480)
        if visible is None:
            visible = np.ones(points.shape[:2], dtype=bool)
        return TrackedSequence(intrinsics=intrinsics, uv=project(intrinsics, points),
                               visible=visible, ground_truth=points)
    return build


@pytest.fixture
def image_sequence(identity_intrinsics):
    """
    Factory building a TrackedSequence from pixel coordinates repeated over
    ``frames`` frames.
    """
    def build(uv, frames=2, visible=None):
        uv = np.tile(np.asarray(uv, dtype=float)[None], (frames, 1, 1))
        if visible is None:
            visible = np.ones(uv.shape[:2], dtype=bool)
        return TrackedSequence(intrinsics=identity_intrinsics, uv=uv, visible=visible)
    return build


@pytest.fixture
def trace_problem_text():
    """minimize tr(Y) over 2x2 PSD Y with Y[0][0] == 1, in the CONIC text format."""
    return TRACE_PROBLEM


TRACE_PROBLEM = """CONIC 1
BLOCKS 1 2
SCALARS 0
OBJECTIVE 2
0 1.0
2 1.0
EQUALITIES 1 1
0 0 1.0
RHS 1
0 1.0
INEQUALITIES 0 0
RHS 0
NONNEG 0
END
"""

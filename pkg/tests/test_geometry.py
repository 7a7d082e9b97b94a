"""
Tests for camera geometry: projection, distortion, triangulation, scale and frames.
"""
import numpy as np
import pytest

from conftest import random_scene
from errors import (
    DegenerateGeometryError,
    DegenerateRigError,
    DomainError,
    PointAtInfinityError,
)
from models import CameraIntrinsics, CameraPose, CameraView, Ray, StereoRig
from services import geometry


@pytest.fixture
def distorted():
    return CameraIntrinsics(2000.0, 2000.0, 960.0, 540.0, 0.0, (-0.02, 0.003, 1e-4, -1e-4, 0.0))


# =============================================================================
# Projection and distortion
# =============================================================================

def test_project_principal_point():
    intr = CameraIntrinsics(1000.0, 1000.0, 640.0, 360.0)
    uv = geometry.project(intr, CameraPose.identity(), np.array([0.0, 0.0, 10.0]))
    assert uv == pytest.approx([640.0, 360.0])


def test_project_rejects_point_behind_camera():
    intr = CameraIntrinsics(1000.0, 1000.0, 640.0, 360.0)
    with pytest.raises(DomainError):
        geometry.project(intr, CameraPose.identity(), np.array([0.0, 0.0, -1.0]))


def test_undistort_inverts_distort(distorted):
    rng = np.random.default_rng(0)
    xn = rng.uniform(-0.3, 0.3, size=(200, 2))
    back = geometry.undistort(distorted, geometry.distort(distorted, xn))
    assert np.max(np.abs(back - xn)) < 1e-10


def test_undistort_rejects_non_finite(distorted):
    with pytest.raises(DomainError):
        geometry.undistort(distorted, np.array([np.nan, 1.0]))


def test_undistort_without_distortion_is_linear():
    intr = CameraIntrinsics(800.0, 800.0, 400.0, 300.0)
    assert geometry.undistort(intr, np.array([480.0, 260.0])) == pytest.approx([0.1, -0.05])


# =============================================================================
# Epipolar geometry
# =============================================================================

def test_exact_correspondences_satisfy_epipolar_constraint():
    rng = np.random.default_rng(1)
    rig, point = random_scene(rng)
    x1 = geometry.undistort(rig.cam1.intrinsics, geometry.project(rig.cam1.intrinsics, rig.cam1.pose, point))
    x2 = geometry.undistort(rig.cam2.intrinsics, geometry.project(rig.cam2.intrinsics, rig.cam2.pose, point))
    E = geometry.essential_matrix(rig.cam2.pose)
    assert abs(geometry.epipolar_residual(E, x1, x2)) < 1e-9


def test_essential_matrix_needs_translation():
    with pytest.raises(DegenerateRigError):
        geometry.essential_matrix(CameraPose.identity())


def test_essential_matrix_of_pure_lateral_translation():
    E = geometry.essential_matrix(CameraPose(R=np.eye(3), t=np.array([1.0, 0.0, 0.0])))
    assert np.array_equal(E, np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]))


def test_essential_matrix_structure():
    rng = np.random.default_rng(12)
    for _ in range(20):
        rig, _ = random_scene(rng)
        pose = rig.cam2.pose
        E = geometry.essential_matrix(pose)
        sigma = np.linalg.svd(E, compute_uv=False)
        assert sigma[0] == pytest.approx(sigma[1], rel=1e-9)
        assert sigma[0] == pytest.approx(np.linalg.norm(pose.t), rel=1e-9)
        assert sigma[2] < 1e-9 * sigma[0]
        assert np.max(np.abs(pose.t @ E)) < 1e-9 * sigma[0]


def test_epipolar_residual_grows_with_offset():
    E = geometry.essential_matrix(CameraPose(R=np.eye(3), t=np.array([1.0, 0.0, 0.0])))
    x1 = np.array([0.1, 0.05])
    x2 = np.array([-0.2, 0.05])
    offsets = np.array([0.0, 1e-4, 1e-3, 1e-2, 1e-1])
    residuals = np.abs([geometry.epipolar_residual(E, x1, x2 + [0.0, d]) for d in offsets])
    assert residuals[0] == 0.0
    assert np.all(np.diff(residuals) > 0)


# =============================================================================
# Triangulation
# =============================================================================

def test_triangulation_oracle_random_scenes():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        rig, point = random_scene(rng)
        uv1 = geometry.project(rig.cam1.intrinsics, rig.cam1.pose, point)
        uv2 = geometry.project(rig.cam2.intrinsics, rig.cam2.pose, point)
        P1 = geometry.projection_matrix(rig.cam1.intrinsics, rig.cam1.pose, normalized=True)
        P2 = geometry.projection_matrix(rig.cam2.intrinsics, rig.cam2.pose, normalized=True)
        estimate = geometry.triangulate_linear(
            P1, P2,
            geometry.undistort(rig.cam1.intrinsics, uv1),
            geometry.undistort(rig.cam2.intrinsics, uv2),
        )
        assert np.linalg.norm(estimate - point) / np.linalg.norm(point) < 1e-8
        assert geometry.reprojection_error(rig.cam1.intrinsics, rig.cam1.pose, estimate, uv1) < 1e-8
        assert geometry.reprojection_error(rig.cam2.intrinsics, rig.cam2.pose, estimate, uv2) < 1e-8


def test_scale_recovery_restores_metric_points():
    rng = np.random.default_rng(7)
    for factor in np.concatenate([[0.01, 100.0], rng.uniform(0.01, 100.0, size=30)]):
        rig, point = random_scene(rng)
        uv1 = geometry.project(rig.cam1.intrinsics, rig.cam1.pose, point)
        uv2 = geometry.project(rig.cam2.intrinsics, rig.cam2.pose, point)
        ambiguous = StereoRig(
            cam1=rig.cam1,
            cam2=CameraView(rig.cam2.intrinsics, CameraPose(R=rig.cam2.pose.R, t=factor * rig.cam2.pose.t)),
            measured_baseline=rig.measured_baseline,
        )
        s, scaled = geometry.recover_scale(ambiguous)
        assert s == pytest.approx(1.0 / factor, rel=1e-12)
        P1 = geometry.projection_matrix(scaled.cam1.intrinsics, scaled.cam1.pose, normalized=True)
        P2 = geometry.projection_matrix(scaled.cam2.intrinsics, scaled.cam2.pose, normalized=True)
        estimate = geometry.triangulate_linear(
            P1, P2,
            geometry.undistort(rig.cam1.intrinsics, uv1),
            geometry.undistort(rig.cam2.intrinsics, uv2),
        )
        assert np.max(np.abs(estimate - point)) < 1e-8


def test_recover_scale_identity_when_baseline_matches():
    rng = np.random.default_rng(3)
    rig, _ = random_scene(rng)
    s, scaled = geometry.recover_scale(rig)
    assert s == pytest.approx(1.0, abs=1e-12)
    assert scaled.estimated_baseline == pytest.approx(rig.measured_baseline)


def test_batch_matches_single_triangulation():
    rng = np.random.default_rng(11)
    rig, point = random_scene(rng)
    points = point + rng.normal(scale=0.05, size=(20, 3))
    x1 = geometry.undistort(rig.cam1.intrinsics, geometry.project(rig.cam1.intrinsics, rig.cam1.pose, points))
    x2 = geometry.undistort(rig.cam2.intrinsics, geometry.project(rig.cam2.intrinsics, rig.cam2.pose, points))
    P1 = geometry.projection_matrix(rig.cam1.intrinsics, rig.cam1.pose, normalized=True)
    P2 = geometry.projection_matrix(rig.cam2.intrinsics, rig.cam2.pose, normalized=True)
    batch = geometry.triangulate_linear_batch(P1, P2, x1, x2)
    singles = np.array([geometry.triangulate_linear(P1, P2, a, b) for a, b in zip(x1, x2)])
    assert np.allclose(batch, singles, rtol=0, atol=1e-12)


def test_shared_camera_center_is_degenerate():
    P = geometry.projection_matrix(CameraIntrinsics(1000.0, 1000.0, 0.0, 0.0), CameraPose.identity(), normalized=True)
    with pytest.raises(DegenerateRigError):
        geometry.triangulate_linear(P, P, np.array([0.1, 0.0]), np.array([0.1, 0.0]))


def test_parallel_rays_give_point_at_infinity():
    P1 = np.hstack([np.eye(3), np.zeros((3, 1))])
    P2 = np.hstack([np.eye(3), np.array([[-1.0], [0.0], [0.0]])])
    with pytest.raises(PointAtInfinityError) as info:
        geometry.triangulate_linear(P1, P2, np.array([0.1, 0.05]), np.array([0.1, 0.05]))
    assert info.value.parameters["index"] == 0


def test_midpoint_is_symmetric():
    r1 = Ray(np.zeros(3), np.array([0.0, 0.0, 1.0]))
    d2 = np.array([-0.3, 0.01, 1.0])
    r2 = Ray(np.array([3.0, 0.0, 0.0]), d2 / np.linalg.norm(d2))
    a = geometry.triangulate_midpoint(r1, r2)
    b = geometry.triangulate_midpoint(r2, r1)
    assert np.array_equal(a, b)


def test_midpoint_recovers_intersection():
    target = np.array([0.5, -0.2, 12.0])
    o1, o2 = np.zeros(3), np.array([4.0, 0.0, 0.0])
    r1 = Ray(o1, (target - o1) / np.linalg.norm(target - o1))
    r2 = Ray(o2, (target - o2) / np.linalg.norm(target - o2))
    assert geometry.triangulate_midpoint(r1, r2) == pytest.approx(target, abs=1e-9)


def test_midpoint_parallel_rays_report_parameters():
    d = np.array([0.0, 0.0, 1.0])
    with pytest.raises(DegenerateGeometryError) as info:
        geometry.triangulate_midpoint(Ray(np.zeros(3), d), Ray(np.array([1.0, 0.0, 0.0]), d))
    assert info.value.parameters["separation_m"] == pytest.approx(1.0)


def test_back_project_passes_through_point(distorted):
    pose = CameraPose.identity()
    point = np.array([0.4, -0.3, 9.0])
    ray = geometry.back_project(distorted, pose, geometry.project(distorted, pose, point))
    along = ray.origin + np.linalg.norm(point) * ray.direction
    assert along == pytest.approx(point, abs=1e-8)


# =============================================================================
# Structure frame
# =============================================================================

def test_layout_yaw():
    frame = geometry.structure_frame_from_layout(6.0, 8.0)
    assert frame.yaw_angle == pytest.approx(np.arctan2(8.0, 6.0))


def test_layout_camera_station_shifts_yaw():
    frame = geometry.structure_frame_from_layout(6.0, 8.0, camera_station=8.0)
    assert frame.yaw_angle == pytest.approx(0.0)


def test_layout_rejects_bad_distances():
    with pytest.raises(DomainError):
        geometry.structure_frame_from_layout(0.0, 8.0)
    with pytest.raises(DomainError):
        geometry.structure_frame_from_layout(6.0, -1.0)


def test_zero_yaw_axes():
    frame = geometry.structure_frame_from_layout(6.0, 0.0)
    assert geometry.to_structure_frame(frame, np.array([0.0, 0.0, 1.0])) == pytest.approx([1.0, 0.0, 0.0])
    assert geometry.to_structure_frame(frame, np.array([1.0, 0.0, 0.0])) == pytest.approx([0.0, 0.0, -1.0])
    assert geometry.to_structure_frame(frame, np.array([0.0, 1.0, 0.0])) == pytest.approx([0.0, 1.0, 0.0])


def test_vertical_sign_flips_y():
    frame = geometry.structure_frame_from_layout(6.0, 8.0, vertical_sign=-1)
    assert geometry.to_structure_frame(frame, np.array([0.0, 1.0, 0.0]))[1] == pytest.approx(-1.0)


def test_structure_frame_inverse():
    frame = geometry.structure_frame_from_layout(6.0, 12.0)
    p = np.random.default_rng(5).normal(size=(10, 3))
    assert geometry.from_structure_frame(frame, geometry.to_structure_frame(frame, p)) == pytest.approx(p)


def _pairwise_distances(p: np.ndarray) -> np.ndarray:
    return np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)


@pytest.mark.parametrize("vertical_sign", [1, -1])
def test_structure_frame_preserves_norms_and_distances(vertical_sign):
    frame = geometry.structure_frame_from_layout(6.0, 9.5, vertical_sign=vertical_sign)
    p = np.random.default_rng(6).normal(scale=5.0, size=(25, 3))
    q = geometry.to_structure_frame(frame, p)
    assert np.linalg.norm(q, axis=1) == pytest.approx(np.linalg.norm(p, axis=1), rel=1e-12)
    before, after = _pairwise_distances(p), _pairwise_distances(q)
    assert np.max(np.abs(after - before)) < 1e-12 * np.max(before)

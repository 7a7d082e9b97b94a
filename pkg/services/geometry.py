"""
Camera geometry for stereo displacement measurement.

Pinhole projection with radial/tangential distortion, epipolar checks, linear and
midpoint triangulation, metric scale recovery and the camera-to-structure frame
transform. Everything here is a pure function of immutable inputs; functions
accept single points or stacked arrays (last axis = coordinates).
"""
import logging
from typing import Tuple

import numpy as np

from config import Config
from errors import (
    DegenerateGeometryError,
    DegenerateRigError,
    DomainError,
    NumericError,
    PointAtInfinityError,
)
from models import CameraIntrinsics, CameraPose, Ray, StereoRig, StructureFrame

logger = logging.getLogger(__name__)

HOMOGENEOUS_EPS = 1e-12
PARALLEL_EPS = 1e-12
MIN_BASELINE = 1e-9


# =============================================================================
# Projection and distortion
# =============================================================================

def _distort_normalized(intr: CameraIntrinsics, xn: np.ndarray) -> np.ndarray:
    """Apply the (k1, k2, p1, p2, k3) polynomial in normalized coordinates."""
    k1, k2, p1, p2, k3 = intr.dist
    x = xn[..., 0]
    y = xn[..., 1]
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
    yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
    return np.stack([xd, yd], axis=-1)


def distort(intr: CameraIntrinsics, xn: np.ndarray) -> np.ndarray:
    """
    Map distortion-free normalized coordinates to pixels.

    Args:
        intr: Camera intrinsics
        xn: Normalized image coordinates, shape (..., 2)

    Returns:
        Pixel coordinates, shape (..., 2)
    """
    xd = _distort_normalized(intr, np.asarray(xn, dtype=np.float64))
    u = intr.fx * xd[..., 0] + intr.skew * xd[..., 1] + intr.cx
    v = intr.fy * xd[..., 1] + intr.cy
    return np.stack([u, v], axis=-1)


def project(intr: CameraIntrinsics, pose: CameraPose, X: np.ndarray) -> np.ndarray:
    """
    Project world points into pixels: K . D(normalize(R X + t)).

    Args:
        intr: Camera intrinsics
        pose: World->camera pose
        X: World points in meters, shape (..., 3)

    Returns:
        Pixel coordinates, shape (..., 2)

    Raises:
        DomainError: if any point lies at or behind the camera plane
    """
    X = np.asarray(X, dtype=np.float64)
    xc = X @ pose.R.T + pose.t
    depth = xc[..., 2]
    if np.any(depth <= 0):
        raise DomainError(
            f"Point at or behind the camera plane (min depth {float(np.min(depth)):.6g} m)", field="X"
        )
    xn = xc[..., :2] / depth[..., None]
    return distort(intr, xn)


def undistort(intr: CameraIntrinsics, p: np.ndarray) -> np.ndarray:
    """
    Invert the distortion map by fixed-point iteration.

    Args:
        intr: Camera intrinsics
        p: Pixel coordinates, shape (..., 2)

    Returns:
        Distortion-free normalized coordinates, shape (..., 2)

    Raises:
        DomainError: for non-finite pixels
        NumericError: if the iteration does not settle within the configured budget
    """
    p = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise DomainError("Pixel coordinates must be finite", field="u_px/v_px")

    yd = (p[..., 1] - intr.cy) / intr.fy
    xd = (p[..., 0] - intr.cx - intr.skew * yd) / intr.fx
    target = np.stack([xd, yd], axis=-1)
    if not intr.has_distortion:
        return target

    k1, k2, p1, p2, k3 = intr.dist
    x = target.copy()
    for iteration in range(Config.UNDISTORT_MAX_ITERATIONS):
        u, v = x[..., 0], x[..., 1]
        r2 = u * u + v * v
        radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        dx = 2.0 * p1 * u * v + p2 * (r2 + 2.0 * u * u)
        dy = p1 * (r2 + 2.0 * v * v) + 2.0 * p2 * u * v
        updated = np.stack([(xd - dx) / radial, (yd - dy) / radial], axis=-1)
        step = float(np.max(np.abs(updated - x))) if updated.size else 0.0
        x = updated
        if step < Config.UNDISTORT_TOL:
            return x

    residual = float(np.max(np.abs(_distort_normalized(intr, x) - target))) if x.size else 0.0
    if residual < Config.UNDISTORT_TOL:
        return x
    raise NumericError(
        f"Undistortion did not converge after {Config.UNDISTORT_MAX_ITERATIONS} iterations",
        residual=residual,
    )


def projection_matrix(intr: CameraIntrinsics, pose: CameraPose, normalized: bool = False) -> np.ndarray:
    """3x4 projection matrix K[R|t], or [R|t] for normalized coordinates."""
    Rt = np.hstack([pose.R, pose.t[:, None]])
    if normalized:
        return Rt
    return intr.K @ Rt


def reprojection_error(intr: CameraIntrinsics, pose: CameraPose, X: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Euclidean pixel distance between projected points and observations."""
    return np.linalg.norm(project(intr, pose, X) - np.asarray(p, dtype=np.float64), axis=-1)


# =============================================================================
# Epipolar geometry
# =============================================================================

def skew_matrix(t: np.ndarray) -> np.ndarray:
    """Cross-product matrix [t]x."""
    return np.array([
        [0.0, -t[2], t[1]],
        [t[2], 0.0, -t[0]],
        [-t[1], t[0], 0.0],
    ])


def essential_matrix(rel_pose: CameraPose) -> np.ndarray:
    """
    Essential matrix E = [t]x R of a relative pose.

    Raises:
        DegenerateRigError: for zero translation
    """
    if np.linalg.norm(rel_pose.t) < MIN_BASELINE:
        raise DegenerateRigError(
            "Essential matrix undefined for zero translation",
            parameters={"t": rel_pose.t.tolist()},
        )
    return skew_matrix(rel_pose.t) @ rel_pose.R


def epipolar_residual(E: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """
    Signed algebraic epipolar residual x2~^T E x1~ of normalized correspondences.

    Args:
        E: Essential matrix
        x1: Normalized points in view 1, shape (..., 2)
        x2: Normalized points in view 2, shape (..., 2)

    Returns:
        Residual per correspondence, shape (...)
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    x1h = np.concatenate([x1, np.ones(x1.shape[:-1] + (1,))], axis=-1)
    x2h = np.concatenate([x2, np.ones(x2.shape[:-1] + (1,))], axis=-1)
    return np.einsum("...i,ij,...j->...", x2h, E, x1h)


def back_project(intr: CameraIntrinsics, pose: CameraPose, p: np.ndarray) -> Ray:
    """
    Back-project a pixel to its viewing ray in world coordinates.

    Args:
        intr: Camera intrinsics
        pose: World->camera pose
        p: Pixel coordinates (u, v)

    Returns:
        Ray from the camera center through the undistorted pixel
    """
    xn = undistort(intr, np.asarray(p, dtype=np.float64).reshape(2))
    direction = pose.R.T @ np.array([xn[0], xn[1], 1.0])
    return Ray(origin=pose.center, direction=direction / np.linalg.norm(direction))


# =============================================================================
# Triangulation
# =============================================================================

def _camera_center(P: np.ndarray) -> np.ndarray:
    M = P[:, :3]
    return -np.linalg.solve(M, P[:, 3])


def triangulate_linear_batch(P1: np.ndarray, P2: np.ndarray, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """
    Linear (SVD) triangulation of many correspondences at once.

    Each view contributes the rows u*P[2] - P[0] and v*P[2] - P[1]; rows are scaled to
    unit norm before the SVD.

    Args:
        P1: 3x4 projection matrix of view 1
        P2: 3x4 projection matrix of view 2
        u1: Observations in view 1, shape (N, 2)
        u2: Observations in view 2, shape (N, 2)

    Returns:
        Points, shape (N, 3)

    Raises:
        DegenerateRigError: if both cameras share a center
        PointAtInfinityError: if a homogeneous solution has |W| < 1e-12
    """
    P1 = np.asarray(P1, dtype=np.float64)
    P2 = np.asarray(P2, dtype=np.float64)
    u1 = np.asarray(u1, dtype=np.float64).reshape(-1, 2)
    u2 = np.asarray(u2, dtype=np.float64).reshape(-1, 2)
    if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(u2))):
        raise DomainError("Observations must be finite", field="u_px/v_px")

    C1, C2 = _camera_center(P1), _camera_center(P2)
    if np.linalg.norm(C1 - C2) <= HOMOGENEOUS_EPS * max(1.0, np.linalg.norm(C1)):
        raise DegenerateRigError(
            "Both projection matrices share a camera center",
            parameters={"center": C1.tolist()},
        )

    A = np.stack([
        u1[:, 0, None] * P1[2] - P1[0],
        u1[:, 1, None] * P1[2] - P1[1],
        u2[:, 0, None] * P2[2] - P2[0],
        u2[:, 1, None] * P2[2] - P2[1],
    ], axis=1)
    A = A / np.linalg.norm(A, axis=2, keepdims=True)
    _, _, Vt = np.linalg.svd(A)
    Xh = Vt[:, -1, :]

    W = Xh[:, 3]
    bad = np.flatnonzero(np.abs(W) < HOMOGENEOUS_EPS)
    if bad.size:
        raise PointAtInfinityError(
            f"Triangulated point at infinity (|W| = {abs(W[bad[0]]):.3g})",
            parameters={"index": int(bad[0]), "W": float(W[bad[0]])},
        )
    return Xh[:, :3] / W[:, None]


def triangulate_linear(P1: np.ndarray, P2: np.ndarray, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Linear triangulation of a single correspondence; returns a 3-vector."""
    return triangulate_linear_batch(P1, P2, np.reshape(u1, (1, 2)), np.reshape(u2, (1, 2)))[0]


def _dot3(a: np.ndarray, b: np.ndarray) -> float:
    # Explicit sum keeps dot(a, b) == dot(b, a) bit for bit.
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def triangulate_midpoint(r1: Ray, r2: Ray) -> np.ndarray:
    """
    Midpoint of the shortest segment between two rays.

    Args:
        r1: First ray
        r2: Second ray

    Returns:
        3-vector midpoint

    Raises:
        DegenerateGeometryError: if the rays are parallel within 1e-12
    """
    d1, d2 = r1.direction, r2.direction
    w0 = r1.origin - r2.origin
    b = _dot3(d1, d2)
    d = _dot3(d1, w0)
    e = _dot3(d2, w0)
    denom = 1.0 - b * b
    if abs(b) >= 1.0 - PARALLEL_EPS:
        separation = w0 - d * d1
        raise DegenerateGeometryError(
            "Rays are parallel; closest approach is not unique",
            parameters={
                "cos_angle": float(b),
                "d1_dot_w0": float(d),
                "d2_dot_w0": float(e),
                "separation_m": float(np.linalg.norm(separation)),
            },
        )
    lam = (b * e - d) / denom
    mu = (e - b * d) / denom
    p1 = r1.origin + lam * d1
    p2 = r2.origin + mu * d2
    return 0.5 * (p1 + p2)


# =============================================================================
# Metric scale and structure frame
# =============================================================================

def recover_scale(rig: StereoRig) -> Tuple[float, StereoRig]:
    """
    Anchor metric scale to the measured baseline.

    Args:
        rig: Stereo rig whose cam2 translation may be scale-ambiguous

    Returns:
        (s, scaled rig) with s = measured_baseline / ||t2|| and t2 <- s * t2

    Raises:
        DegenerateRigError: if ||t2|| < 1e-9
    """
    b_est = rig.estimated_baseline
    if b_est < MIN_BASELINE:
        raise DegenerateRigError(
            f"Estimated baseline {b_est:.3g} m is too small to anchor scale",
            parameters={"estimated_baseline_m": b_est},
        )
    s = rig.measured_baseline / b_est
    if s == 1.0:
        return s, rig
    pose2 = CameraPose(R=rig.cam2.pose.R, t=s * rig.cam2.pose.t)
    scaled = StereoRig(
        cam1=rig.cam1,
        cam2=type(rig.cam2)(intrinsics=rig.cam2.intrinsics, pose=pose2),
        measured_baseline=rig.measured_baseline,
    )
    logger.debug(f"Scale recovered: s={s:.9g} (B_true={rig.measured_baseline} m, B_est={b_est:.9g})")
    return s, scaled


def structure_frame_from_layout(
    perp_distance: float,
    longitudinal_distance: float,
    vertical_sign: int = 1,
    camera_station: float = 0.0,
) -> StructureFrame:
    """
    Structure frame from the right triangle camera / target / bridge normal.

    Args:
        perp_distance: Perpendicular distance from the reference camera to the bridge axis (m)
        longitudinal_distance: Target distance from the bridge end along the bridge (m)
        vertical_sign: +1 for downward-positive Y
        camera_station: Camera station along the bridge measured from the same end (m)

    Returns:
        StructureFrame with yaw = atan2(longitudinal - station, perp), pitch = roll = 0
    """
    if not perp_distance > 0:
        raise DomainError(f"perp_distance must be > 0, got {perp_distance}", field="perpendicular_distance_m")
    if not longitudinal_distance >= 0:
        raise DomainError(
            f"longitudinal_distance must be >= 0, got {longitudinal_distance}", field="longitudinal_distance_m"
        )
    yaw = float(np.arctan2(longitudinal_distance - camera_station, perp_distance))
    return StructureFrame(yaw_angle=yaw, vertical_sign=vertical_sign)


def to_structure_frame(frame: StructureFrame, p: np.ndarray) -> np.ndarray:
    """Reference-camera coordinates -> (X lateral, Y vertical, Z longitudinal)."""
    return np.asarray(p, dtype=np.float64) @ frame.rotation.T


def from_structure_frame(frame: StructureFrame, p: np.ndarray) -> np.ndarray:
    """Inverse of to_structure_frame."""
    return np.asarray(p, dtype=np.float64) @ frame.rotation

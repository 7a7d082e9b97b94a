"""
Domain models for Girder Kit.

Numeric value types (cameras, tracks, trajectories, series) are frozen dataclasses
holding read-only numpy arrays. Documents that cross the file boundary (rig files,
run configuration, reports) are pydantic models validated on load.
"""
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from config import Config
from errors import ContractError, DomainError

AXES = ("X", "Y", "Z")
AXIS_INDEX = {"X": 0, "Y": 1, "Z": 2}
VIEWS = ("view1", "view2")

ORTHONORMAL_TOL = 1e-9


def _frozen_array(value, shape: Optional[Tuple[int, ...]] = None, name: str = "array") -> np.ndarray:
    """Copy into a read-only float64 array, optionally checking its shape."""
    arr = np.array(value, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise ContractError(f"{name} must have shape {shape}, got {arr.shape}", field=name)
    arr.setflags(write=False)
    return arr


# =============================================================================
# Camera geometry
# =============================================================================

@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics with 5-coefficient radial/tangential distortion (k1, k2, p1, p2, k3)."""

    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0
    dist: Tuple[float, float, float, float, float] = (0.0, 0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        dist = tuple(float(k) for k in self.dist)
        if len(dist) != 5:
            raise DomainError(f"dist must hold 5 coefficients, got {len(dist)}", field="dist")
        object.__setattr__(self, "dist", dist)
        values = (self.fx, self.fy, self.cx, self.cy, self.skew) + dist
        if not all(np.isfinite(values)):
            raise DomainError(f"Intrinsics must be finite, got {values}")
        if self.fx <= 0 or self.fy <= 0:
            raise DomainError(f"Focal lengths must be positive, got fx={self.fx}, fy={self.fy}", field="fx/fy")

    @property
    def K(self) -> np.ndarray:
        return np.array([
            [self.fx, self.skew, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    @property
    def has_distortion(self) -> bool:
        return any(k != 0.0 for k in self.dist)


@dataclass(frozen=True)
class CameraPose:
    """Rigid world->camera transform: x_cam = R @ X + t (t in meters)."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = _frozen_array(self.R, (3, 3), "R")
        t = _frozen_array(self.t, (3,), "t")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise DomainError("Pose must be finite")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHONORMAL_TOL:
            raise DomainError("R is not orthonormal (R^T R != I)", field="R")
        if abs(np.linalg.det(R) - 1.0) > ORTHONORMAL_TOL:
            raise DomainError("R is not a proper rotation (det != 1)", field="R")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(R=np.eye(3), t=np.zeros(3))

    @property
    def center(self) -> np.ndarray:
        """Camera center C = -R^T t in world coordinates."""
        return -self.R.T @ self.t

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.R, np.eye(3)) and not np.any(self.t))


@dataclass(frozen=True)
class CameraView:
    """One calibrated view: intrinsics plus pose."""

    intrinsics: CameraIntrinsics
    pose: CameraPose


@dataclass(frozen=True)
class StereoRig:
    """Two-camera rig; cam1 is the reference frame, cam2 is posed relative to it."""

    cam1: CameraView
    cam2: CameraView
    measured_baseline: float

    def __post_init__(self):
        if not self.cam1.pose.is_identity:
            raise ContractError("Reference camera pose must be identity rotation and zero translation", field="cam1.pose")
        if not np.isfinite(self.measured_baseline) or self.measured_baseline <= 0:
            raise DomainError(f"measured_baseline must be > 0, got {self.measured_baseline}", field="measured_baseline_m")
        if not np.linalg.norm(self.cam2.pose.t) > 0:
            raise ContractError("cam2 translation must be nonzero", field="cam2.t")

    @property
    def estimated_baseline(self) -> float:
        """Baseline implied by the (possibly scale-ambiguous) cam2 translation."""
        return float(np.linalg.norm(self.cam2.pose.t))

    def view(self, name: str) -> CameraView:
        if name == "view1":
            return self.cam1
        if name == "view2":
            return self.cam2
        raise ContractError(f"Unknown view '{name}', expected one of {VIEWS}", field="view")


@dataclass(frozen=True)
class Ray:
    """Back-projected viewing ray: origin + lambda * direction."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        origin = _frozen_array(self.origin, (3,), "origin")
        direction = _frozen_array(self.direction, (3,), "direction")
        if abs(np.linalg.norm(direction) - 1.0) > 1e-12:
            raise DomainError("Ray direction must have unit norm", field="direction")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "direction", direction)


@dataclass(frozen=True)
class StructureFrame:
    """Bridge-aligned frame: X lateral, Y vertical, Z longitudinal.

    yaw_angle is the horizontal angle of the reference optical axis measured from the
    bridge normal; positive yaw turns the axis toward the far bridge end (+Z).
    vertical_sign=+1 makes positive Y point downward.
    """

    yaw_angle: float
    vertical_sign: int = 1

    def __post_init__(self):
        if not np.isfinite(self.yaw_angle) or not (-np.pi < self.yaw_angle <= np.pi):
            raise DomainError(f"yaw_angle must lie in (-pi, pi], got {self.yaw_angle}", field="yaw_angle")
        if self.vertical_sign not in (1, -1):
            raise DomainError(f"vertical_sign must be +1 or -1, got {self.vertical_sign}", field="vertical_sign")

    @property
    def rotation(self) -> np.ndarray:
        """Matrix M with p_structure = M @ p_camera."""
        s, c = np.sin(self.yaw_angle), np.cos(self.yaw_angle)
        return np.array([
            [s, 0.0, c],
            [0.0, float(self.vertical_sign), 0.0],
            [-c, 0.0, s],
        ])


# =============================================================================
# Tracks, trajectories and series
# =============================================================================

@dataclass(frozen=True)
class Track2D:
    """Pixel tracks of every point in one view: uv[t, p] = (u, v)."""

    view: str
    point_ids: Tuple[str, ...]
    frame_index: np.ndarray
    time_s: np.ndarray
    uv: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point_ids", tuple(str(p) for p in self.point_ids))
        uv = _frozen_array(self.uv, name="uv")
        if uv.ndim != 3 or uv.shape[2] != 2 or uv.shape[1] != len(self.point_ids):
            raise ContractError(f"uv must have shape (T, {len(self.point_ids)}, 2), got {uv.shape}", field="uv")
        frames = np.array(self.frame_index, dtype=np.int64)
        frames.setflags(write=False)
        times = _frozen_array(self.time_s, (uv.shape[0],), "time_s")
        if frames.shape != (uv.shape[0],):
            raise ContractError("frame_index length must match the number of frames", field="frame_index")
        if not np.all(np.isfinite(uv)):
            raise ContractError("Track coordinates must be finite", field="u_px/v_px")
        object.__setattr__(self, "uv", uv)
        object.__setattr__(self, "frame_index", frames)
        object.__setattr__(self, "time_s", times)

    @property
    def n_frames(self) -> int:
        return self.uv.shape[0]

    @property
    def n_points(self) -> int:
        return self.uv.shape[1]

    def with_uv(self, uv: np.ndarray) -> "Track2D":
        return Track2D(self.view, self.point_ids, self.frame_index, self.time_s, uv)


@dataclass(frozen=True)
class Trajectory3D:
    """Point positions over time, xyz[t, p] in meters, in the named frame."""

    point_ids: Tuple[str, ...]
    time_s: np.ndarray
    xyz: np.ndarray
    frame: Literal["camera", "structure"] = "structure"

    def __post_init__(self):
        object.__setattr__(self, "point_ids", tuple(str(p) for p in self.point_ids))
        xyz = _frozen_array(self.xyz, name="xyz")
        if xyz.ndim != 3 or xyz.shape[1:] != (len(self.point_ids), 3):
            raise ContractError(f"xyz must have shape (T, {len(self.point_ids)}, 3), got {xyz.shape}", field="xyz")
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "time_s", _frozen_array(self.time_s, (xyz.shape[0],), "time_s"))


@dataclass(frozen=True)
class DisplacementSet:
    """Per-point structure-frame displacements disp_mm[t, p, axis] about origin_m[p]."""

    point_ids: Tuple[str, ...]
    frame_index: np.ndarray
    time_s: np.ndarray
    disp_mm: np.ndarray
    origin_m: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "point_ids", tuple(str(p) for p in self.point_ids))
        disp = _frozen_array(self.disp_mm, name="disp_mm")
        if disp.ndim != 3 or disp.shape[1:] != (len(self.point_ids), 3):
            raise ContractError(f"disp_mm must have shape (T, {len(self.point_ids)}, 3), got {disp.shape}", field="disp_mm")
        frames = np.array(self.frame_index, dtype=np.int64)
        frames.setflags(write=False)
        object.__setattr__(self, "disp_mm", disp)
        object.__setattr__(self, "frame_index", frames)
        object.__setattr__(self, "time_s", _frozen_array(self.time_s, (disp.shape[0],), "time_s"))
        if self.origin_m is not None:
            object.__setattr__(self, "origin_m", _frozen_array(self.origin_m, (len(self.point_ids), 3), "origin_m"))

    @property
    def n_frames(self) -> int:
        return self.disp_mm.shape[0]

    def series(self, point_id: str, axis: str) -> "DisplacementSeries":
        """Single-axis series of one point."""
        if point_id not in self.point_ids:
            raise ContractError(f"Point '{point_id}' not present (have {list(self.point_ids)})", field="point_id")
        if axis not in AXIS_INDEX:
            raise ContractError(f"Unknown axis '{axis}'", field="axis")
        p = self.point_ids.index(point_id)
        return DisplacementSeries(
            t=self.time_s,
            d=self.disp_mm[:, p, AXIS_INDEX[axis]],
            axis=axis,
            onset=float(self.time_s[0]),
        )


@dataclass(frozen=True)
class ScalarSeries:
    """Uniformly sampled scalar signal tagged with its unit."""

    t: np.ndarray
    values: np.ndarray
    unit: str

    def __post_init__(self):
        t = _frozen_array(self.t, name="t")
        values = _frozen_array(self.values, name="values")
        if t.ndim != 1 or values.shape != t.shape:
            raise ContractError(f"t and values must be equal-length 1-D arrays, got {t.shape} and {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ContractError("Series values must be finite", field="values")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ContractError("Series time must be strictly increasing", field="t")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.t.size

    def with_values(self, values: np.ndarray, unit: Optional[str] = None) -> "ScalarSeries":
        return ScalarSeries(self.t, values, unit or self.unit)


@dataclass(frozen=True)
class DisplacementSeries:
    """Displacement (mm) along one structure axis, defined from onset onward."""

    t: np.ndarray
    d: np.ndarray
    axis: str
    onset: float

    def __post_init__(self):
        t = _frozen_array(self.t, name="t")
        d = _frozen_array(self.d, name="d")
        if t.ndim != 1 or d.shape != t.shape:
            raise ContractError("t and d must be equal-length 1-D arrays")
        if self.axis not in AXIS_INDEX:
            raise ContractError(f"Unknown axis '{self.axis}'", field="axis")
        if t.size and t[0] < self.onset - 1e-9:
            raise ContractError("Displacement samples precede the onset", field="t")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "d", d)

    def as_scalar(self) -> ScalarSeries:
        return ScalarSeries(self.t, self.d, "mm")


@dataclass(frozen=True)
class AccelRecord:
    """Tri-axial accelerometer record in g, uniformly sampled."""

    t: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    az: np.ndarray
    nominal_rate: float = Config.ACCEL_NOMINAL_RATE_HZ

    def __post_init__(self):
        t = _frozen_array(self.t, name="time_s")
        if t.ndim != 1 or t.size < 2:
            raise ContractError("Accelerometer record needs at least 2 samples", field="time_s")
        for name in ("ax", "ay", "az"):
            arr = _frozen_array(getattr(self, name), (t.size,), f"{name}_g")
            if not np.all(np.isfinite(arr)):
                raise ContractError("Acceleration samples must be finite", field=f"{name}_g")
            object.__setattr__(self, name, arr)
        dt = np.diff(t)
        if np.any(dt <= 0):
            raise ContractError("Accelerometer time must be strictly increasing", field="time_s")
        period = 1.0 / self.nominal_rate
        if np.max(np.abs(dt - period)) >= 0.01 * period:
            raise ContractError(
                f"Accelerometer sampling deviates from {self.nominal_rate} Hz by more than 1%", field="time_s"
            )
        object.__setattr__(self, "t", t)

    def channel(self, axis: str) -> ScalarSeries:
        """Acceleration channel aligned with a structure axis (X->ax, Y->ay, Z->az), in g."""
        values = {"X": self.ax, "Y": self.ay, "Z": self.az}.get(axis)
        if values is None:
            raise ContractError(f"Unknown axis '{axis}'", field="axis")
        return ScalarSeries(self.t, values, "g")


@dataclass(frozen=True)
class BaselineTrajectories:
    """Un-refined triangulation in the structure frame, in millimetres of displacement.

    disp_mm[t, p, :] = (X0, Y0, Z0) about origin_m[p] (the per-point temporal mean);
    diff_mm holds the first temporal differences (T-1 rows).
    """

    trajectory: Trajectory3D
    origin_m: np.ndarray
    disp_mm: np.ndarray
    diff_mm: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        T, P = self.trajectory.xyz.shape[:2]
        object.__setattr__(self, "origin_m", _frozen_array(self.origin_m, (P, 3), "origin_m"))
        object.__setattr__(self, "disp_mm", _frozen_array(self.disp_mm, (T, P, 3), "disp_mm"))
        object.__setattr__(self, "diff_mm", _frozen_array(self.diff_mm, (T - 1, P, 3), "diff_mm"))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.trajectory.xyz.shape[:2]


# =============================================================================
# Configuration documents
# =============================================================================

class SGRWeights(BaseModel):
    """Weights of the five refinement terms."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    w_z_abs: float = Field(default=Config.SGR_W_Z_ABS, ge=0)
    w_z_diff: float = Field(default=Config.SGR_W_Z_DIFF, ge=0)
    w_xy_abs: float = Field(default=Config.SGR_W_XY_ABS, ge=0)
    w_xy_diff: float = Field(default=Config.SGR_W_XY_DIFF, ge=0)
    w_2d: float = Field(default=Config.SGR_W_2D, ge=0)

    @model_validator(mode="after")
    def _not_all_zero(self):
        if not any((self.w_z_abs, self.w_z_diff, self.w_xy_abs, self.w_xy_diff, self.w_2d)):
            raise ValueError("at least one SGR weight must be positive")
        return self


class SGRConfig(BaseModel):
    """Refinement solver controls."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    refined_view: Literal["view1", "view2"] = "view2"
    max_iterations: int = Field(default=Config.SGR_MAX_ITERATIONS, ge=1)
    convergence_tol: float = Field(default=Config.SGR_CONVERGENCE_TOL, gt=0)
    scale_floor_mm: float = Field(default=Config.SGR_SCALE_FLOOR_MM, gt=0)
    pixel_scale_px: float = Field(default=Config.SGR_PIXEL_SCALE, gt=0)
    jacobian_step_px: float = Field(default=Config.SGR_JACOBIAN_STEP_PX, gt=0)
    initial_damping: float = Field(default=Config.SGR_INITIAL_DAMPING, gt=0)
    damping_trials: int = Field(default=Config.SGR_DAMPING_TRIALS, ge=1)
    step_tol_px: float = Field(default=Config.SGR_STEP_TOL_PX, gt=0)


class SignalSettings(BaseModel):
    """Accelerometer-to-displacement chain parameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    onset_window_s: float = Field(default=Config.ONSET_WINDOW_S, gt=0)
    onset_threshold_factor: float = Field(default=Config.ONSET_THRESHOLD_FACTOR, ge=0)
    hampel_window_s: float = Field(default=Config.HAMPEL_WINDOW_S, gt=0)
    hampel_threshold: float = Field(default=Config.HAMPEL_THRESHOLD, gt=0)
    band_hz: Tuple[float, float] = (Config.BANDPASS_LOW_HZ, Config.BANDPASS_HIGH_HZ)
    filter_order: int = Field(default=Config.BANDPASS_ORDER, ge=1)
    target_rate_hz: float = Field(default=Config.TARGET_RATE_HZ, gt=0)


class Harmonic(BaseModel):
    """One sinusoidal motion component."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    amplitude_mm: float = Field(ge=0)
    frequency_hz: float = Field(gt=0)
    phase_rad: float = 0.0


class MotionSpec(BaseModel):
    """Ground-truth vibration of one point: sums of enveloped sinusoids per axis.

    The motion starts from rest: a smoothstep ramp over ramp_s brings displacement and
    velocity up from zero, so an accelerometer idle before the start integrates cleanly.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    lateral: List[Harmonic] = Field(default_factory=list)
    vertical: List[Harmonic] = Field(default_factory=list)
    longitudinal: List[Harmonic] = Field(default_factory=list)
    duration_s: float = Field(default=16.0, gt=0)
    rate_hz: float = Field(default=30.0, gt=0)
    decay_per_s: float = Field(default=0.0, ge=0)
    # Smoothstep build-up from rest; 0 starts at full amplitude
    ramp_s: float = Field(default=1.0, ge=0)

    @model_validator(mode="after")
    def _below_nyquist(self):
        for harmonic in self.lateral + self.vertical + self.longitudinal:
            if harmonic.frequency_hz >= self.rate_hz / 2:
                raise ValueError(
                    f"frequency {harmonic.frequency_hz} Hz is not below Nyquist ({self.rate_hz / 2} Hz)"
                )
        return self

    def axis_terms(self) -> Dict[str, List[Harmonic]]:
        return {"X": self.lateral, "Y": self.vertical, "Z": self.longitudinal}


class NoiseSpec(BaseModel):
    """Gaussian pixel noise per view and pixel axis, with its seed."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    view1_u_px: float = Field(default=0.0, ge=0)
    view1_v_px: float = Field(default=0.0, ge=0)
    view2_u_px: float = Field(default=0.0, ge=0)
    view2_v_px: float = Field(default=0.0, ge=0)
    seed: int = Config.DEFAULT_SEED

    def sigmas(self) -> Tuple[float, float, float, float]:
        return (self.view1_u_px, self.view1_v_px, self.view2_u_px, self.view2_v_px)


class SimulationSettings(BaseModel):
    """Synthetic scene controls for the simulate command."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    preset: str = Config.DEFAULT_PRESET
    noise: NoiseSpec = Field(default_factory=NoiseSpec)
    lead_in_s: float = Field(default=3.0, ge=0)
    accel_noise_g: float = Field(default=2e-4, ge=0)
    clock_offset_s: float = 0.0
    write_accelerometer: bool = True


class CameraDocument(BaseModel):
    """One camera entry of a rig document."""

    model_config = ConfigDict(extra="forbid")

    name: str
    reference: bool = False
    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0
    dist: List[float] = Field(default_factory=lambda: [0.0] * 5)
    R: List[float] = Field(default_factory=lambda: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
    t: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])

    @field_validator("dist")
    @classmethod
    def _five_coefficients(cls, v):
        if len(v) != 5:
            raise ValueError(f"expected 5 distortion coefficients (k1,k2,p1,p2,k3), got {len(v)}")
        return v

    @field_validator("R")
    @classmethod
    def _nine_entries(cls, v):
        if len(v) != 9:
            raise ValueError(f"expected 9 row-major rotation entries, got {len(v)}")
        return v

    @field_validator("t")
    @classmethod
    def _three_entries(cls, v):
        if len(v) != 3:
            raise ValueError(f"expected 3 translation entries, got {len(v)}")
        return v


class RigDocument(BaseModel):
    """Stereo rig plus the structure-frame layout measurements."""

    model_config = ConfigDict(extra="forbid")

    cameras: List[CameraDocument]
    measured_baseline_m: float = Field(gt=0)
    perpendicular_distance_m: float = Field(gt=0)
    longitudinal_distance_m: float = Field(ge=0)
    camera_station_m: float = 0.0
    vertical_sign: Literal[1, -1] = 1

    @model_validator(mode="after")
    def _one_reference_of_two(self):
        if len(self.cameras) != 2:
            raise ValueError(f"a rig has exactly 2 cameras, got {len(self.cameras)}")
        if sum(cam.reference for cam in self.cameras) != 1:
            raise ValueError("exactly one camera must carry reference=true")
        return self

    @property
    def reference_camera(self) -> CameraDocument:
        return next(cam for cam in self.cameras if cam.reference)

    @property
    def other_camera(self) -> CameraDocument:
        return next(cam for cam in self.cameras if not cam.reference)


class RunConfig(BaseModel):
    """Run configuration shared by every CLI command."""

    model_config = ConfigDict(extra="forbid")

    # Inputs (relative paths resolve against the config file directory)
    tracks_view1: Optional[Path] = None
    tracks_view2: Optional[Path] = None
    rig: Optional[Path] = None
    accelerometer: Optional[Path] = None
    prediction: Optional[Path] = None
    prediction_refined: Optional[Path] = None
    reference: Optional[Path] = None

    sgr_weights: SGRWeights = Field(default_factory=SGRWeights)
    sgr: SGRConfig = Field(default_factory=SGRConfig)
    signals: SignalSettings = Field(default_factory=SignalSettings)
    simulation: SimulationSettings = Field(default_factory=SimulationSettings)

    target_rate_hz: float = Field(default=Config.TARGET_RATE_HZ, gt=0)
    axes: List[Literal["X", "Y", "Z"]] = Field(default_factory=lambda: ["X", "Y"])
    displacement_reference: Literal["mean", "first-sample"] = "mean"
    max_lag_s: float = Field(default=Config.SYNC_MAX_LAG_S, gt=0)
    reference_point_id: str = "p0"
    reproducible: bool = False

    _base_dir: Path = PrivateAttr(default_factory=Path.cwd)

    @field_validator("axes")
    @classmethod
    def _unique_axes(cls, v):
        if not v:
            raise ValueError("at least one evaluation axis is required")
        if len(set(v)) != len(v):
            raise ValueError(f"duplicate axes in {v}")
        return v

    def bind(self, base_dir: Path) -> "RunConfig":
        self._base_dir = Path(base_dir)
        return self

    def resolve(self, name: str) -> Optional[Path]:
        value = getattr(self, name)
        if value is None:
            return None
        path = Path(value)
        return path if path.is_absolute() else self._base_dir / path

    def require(self, name: str) -> Path:
        """Resolved path of a required input; fails naming the config field."""
        path = self.resolve(name)
        if path is None:
            raise ContractError(f"Run configuration does not set '{name}'", field=name)
        if not path.exists():
            raise ContractError(f"Input file does not exist: {path}", file=str(path), field=name)
        return path


# =============================================================================
# Reports
# =============================================================================

class MetricReport(BaseModel):
    """Agreement between one predicted and one reference displacement series."""

    model_config = ConfigDict(frozen=True)

    axis: Literal["X", "Y", "Z"]
    nrmse_range: float = Field(ge=0)
    correlation: float = Field(ge=-1, le=1)
    rppae: float = Field(ge=0)
    n_samples: int = Field(ge=2)


class EvaluationEntry(BaseModel):
    """Metrics and amplitudes for one (point, axis) pair."""

    point_id: str
    axis: Literal["X", "Y", "Z"]
    without_sgr: MetricReport
    with_sgr: Optional[MetricReport] = None
    amplitude_without_sgr_mm: float
    amplitude_with_sgr_mm: Optional[float] = None
    amplitude_reference_mm: float


class MetricSummary(BaseModel):
    """Mean and population standard deviation of one metric across entries."""

    metric: str
    variant: Literal["without_sgr", "with_sgr"]
    mean: float
    std: float


class EvaluationReport(BaseModel):
    """Serialized result of the evaluate command."""

    tool: str = Config.TOOL_NAME
    tool_version: str = Config.TOOL_VERSION
    created_at: Optional[datetime] = None
    seeds: Dict[str, int] = Field(default_factory=dict)
    sync_lag_s: Optional[float] = None
    inputs: Dict[str, str] = Field(default_factory=dict)
    config: Dict[str, Any] = Field(default_factory=dict)
    entries: List[EvaluationEntry] = Field(default_factory=list)
    summary: List[MetricSummary] = Field(default_factory=list)


class PublishedCheckRow(BaseModel):
    """One published RPPAE recomputed from its published amplitudes."""

    dataset: str
    location: str
    axis: Literal["X", "Y"]
    variant: Literal["without_sgr", "with_sgr"]
    amplitude_pred_mm: float
    amplitude_reference_mm: float
    published_rppae: float
    computed_rppae: float
    rounded_rppae: float
    within_rounding: bool
    consistent: bool


class PublishedCheckReport(BaseModel):
    """Outcome of cross-checking every published RPPAE against its amplitudes."""

    tool: str = Config.TOOL_NAME
    tool_version: str = Config.TOOL_VERSION
    rows: List[PublishedCheckRow] = Field(default_factory=list)
    computed_mean_rppae: Dict[str, float] = Field(default_factory=dict)
    published_mean_rppae: Dict[str, float] = Field(default_factory=dict)
    all_consistent: bool = True


class StageRecord(BaseModel):
    """Metadata written next to every command's outputs."""

    stage: str
    tool: str = Config.TOOL_NAME
    tool_version: str = Config.TOOL_VERSION
    created_at: Optional[datetime] = None
    seed: Optional[int] = None
    preset: Optional[str] = None
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: Dict[str, str] = Field(default_factory=dict)
    details: Dict[str, Any] = Field(default_factory=dict)


class ValidationStatus:
    """Validation status values."""
    PASS = "pass"
    WARNING = "warning"
    FAIL = "fail"


class ValidationResult(BaseModel):
    """Outcome of the correspondence check between two track files."""

    status: Literal["pass", "warning", "fail"] = ValidationStatus.PASS
    checked: int = 0
    max_residual: float = 0.0
    median_residual: float = 0.0
    discrepancies: List[Dict[str, Any]] = Field(default_factory=list)

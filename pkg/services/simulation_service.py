"""
Simulation Service for synthetic stereo-vibration scenes.
Generates ground-truth motion, renders it into both views with seeded pixel noise and
synthesizes the matching accelerometer record. Used as the oracle for triangulation,
refinement and end-to-end pipeline checks.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from config import Config
from errors import ContractError, SceneConfigurationError
from models import (
    AccelRecord,
    CameraIntrinsics,
    CameraPose,
    CameraView,
    Harmonic,
    MotionSpec,
    NoiseSpec,
    SimulationSettings,
    StereoRig,
    StructureFrame,
    Track2D,
    Trajectory3D,
)
from services import geometry
from services.signal_processor import STANDARD_GRAVITY

logger = logging.getLogger(__name__)


# =============================================================================
# Presets
# =============================================================================

# Baselines (m) of the three recorded rigs.
RIG_BASELINES: Dict[str, float] = {"data1": 3.96, "data2": 4.00, "data3": 4.97}

SPAN_M = 16.0
LOCATIONS: Dict[str, float] = {"quarter": 4.0, "mid": 8.0, "threequarter": 12.0}

FOCAL_PX = 4000.0
IMAGE_SIZE = (3840, 2160)
PERPENDICULAR_DISTANCE_M = 6.0
TOE_IN_DEG = 10.0
ANCHOR_DROP_M = 0.3
DIST_VIEW1 = (-0.015, 0.002, 0.0, 0.0, 0.0)
DIST_VIEW2 = (-0.02, 0.003, 1e-4, -1e-4, 0.0)

VERTICAL_HZ = 2.5
LATERAL_HZ = 1.8
LATERAL_PHASE = 0.7

# Half of the accelerometer peak-to-peak amplitudes (mm): (lateral X, vertical Y).
SCENARIO_AMPLITUDES: Dict[str, Tuple[float, float]] = {
    "data1-mid": (9.70 / 2, 11.94 / 2),
    "data1-threequarter": (7.79 / 2, 8.30 / 2),
    "data2-quarter": (4.30 / 2, 12.15 / 2),
    "data2-mid": (7.28 / 2, 17.37 / 2),
    "data3-quarter": (1.54 / 2, 7.54 / 2),
    "data3-mid": (2.24 / 2, 10.95 / 2),
}


def available_presets() -> List[str]:
    return sorted(RIG_BASELINES) + sorted(SCENARIO_AMPLITUDES)


@dataclass(frozen=True)
class Scenario:
    """A fully specified synthetic scene."""

    name: str
    rig: StereoRig
    frame: StructureFrame
    motion: MotionSpec
    anchor: np.ndarray
    point_ids: Tuple[str, ...]
    perpendicular_distance_m: float
    longitudinal_distance_m: float
    camera_station_m: float = 0.0


@dataclass(frozen=True)
class SimulationOutput:
    """Everything one simulate run produces."""

    scenario: Scenario
    tracks1: Track2D
    tracks2: Track2D
    ground_truth: Trajectory3D
    accelerometer: Optional[AccelRecord]
    time_offset_s: float


def _split_preset(preset: str) -> Tuple[str, Optional[str]]:
    dataset, _, location = preset.partition("-")
    if dataset not in RIG_BASELINES or (location and location not in LOCATIONS):
        raise ContractError(
            f"Unknown preset '{preset}'. Valid presets: {', '.join(available_presets())}",
            field="simulation.preset",
        )
    return dataset, location or None


def default_rig(
    preset: str,
    longitudinal_distance: float = LOCATIONS["mid"],
    vertical_sign: int = 1,
) -> Tuple[StereoRig, StructureFrame]:
    """
    Rig preset with a recorded baseline and its structure frame.

    Two 4000 px cameras (3840x2160) looking at the target from 6 m off the bridge axis;
    cam2 sits one baseline to the right of cam1, toed in by 10 degrees.

    The viewing distance is hypot(6, station): about 7.2 m at the quarter point, 10 m
    at mid-span and 13.4 m at three quarters. This is closer, and the focal length
    longer, than a typical 10-20 m / 2000 px field setup, so that the recorded
    amplitudes move the target by several pixels instead of one or two. Pass a rig
    document to model a specific site.

    Args:
        preset: "data1", "data2", "data3" or a "<dataset>-<location>" scenario name
        longitudinal_distance: Target station along the bridge (m); scenario names override it
        vertical_sign: +1 for downward-positive Y

    Returns:
        (StereoRig, StructureFrame)
    """
    dataset, location = _split_preset(preset)
    if location is not None:
        longitudinal_distance = LOCATIONS[location]
    baseline = RIG_BASELINES[dataset]

    width, height = IMAGE_SIZE
    intr1 = CameraIntrinsics(FOCAL_PX, FOCAL_PX, width / 2.0, height / 2.0, 0.0, DIST_VIEW1)
    intr2 = CameraIntrinsics(FOCAL_PX, FOCAL_PX, width / 2.0, height / 2.0, 0.0, DIST_VIEW2)

    # cam->world rotation of cam2 (toe-in toward cam1's optical axis)
    R_c2w = Rotation.from_euler("y", -TOE_IN_DEG, degrees=True).as_matrix()
    R2 = R_c2w.T
    C2 = np.array([baseline, 0.0, 0.0])
    rig = StereoRig(
        cam1=CameraView(intr1, CameraPose.identity()),
        cam2=CameraView(intr2, CameraPose(R=R2, t=-R2 @ C2)),
        measured_baseline=baseline,
    )
    frame = geometry.structure_frame_from_layout(
        PERPENDICULAR_DISTANCE_M, longitudinal_distance, vertical_sign=vertical_sign
    )
    return rig, frame


def scenario_motion(preset: str, duration_s: float = 16.0, rate_hz: float = 30.0) -> MotionSpec:
    """Motion of a scenario preset; bare rig presets use the data2-mid amplitudes."""
    dataset, location = _split_preset(preset)
    key = f"{dataset}-{location}" if location else "data2-mid"
    lateral, vertical = SCENARIO_AMPLITUDES.get(key, SCENARIO_AMPLITUDES["data2-mid"])
    return MotionSpec(
        lateral=[Harmonic(amplitude_mm=lateral, frequency_hz=LATERAL_HZ, phase_rad=LATERAL_PHASE)],
        vertical=[Harmonic(amplitude_mm=vertical, frequency_hz=VERTICAL_HZ)],
        longitudinal=[],
        duration_s=duration_s,
        rate_hz=rate_hz,
    )


def build_scenario(preset: str, vertical_sign: int = 1) -> Scenario:
    """Rig, frame, motion and anchor for a preset name."""
    _, location = _split_preset(preset)
    longitudinal = LOCATIONS[location or "mid"]
    rig, frame = default_rig(preset, longitudinal, vertical_sign)
    distance = float(np.hypot(PERPENDICULAR_DISTANCE_M, longitudinal))
    anchor_cam = np.array([0.0, ANCHOR_DROP_M, distance])
    return Scenario(
        name=preset,
        rig=rig,
        frame=frame,
        motion=scenario_motion(preset),
        anchor=geometry.to_structure_frame(frame, anchor_cam),
        point_ids=("p0",),
        perpendicular_distance_m=PERPENDICULAR_DISTANCE_M,
        longitudinal_distance_m=longitudinal,
    )


# =============================================================================
# Motion, rendering, accelerometer
# =============================================================================

def motion_times(spec: MotionSpec) -> np.ndarray:
    count = int(round(spec.duration_s * spec.rate_hz))
    return np.arange(count) / spec.rate_hz


def _harmonics(terms: Sequence[Harmonic], tau: np.ndarray, decay: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sum of A e^(-decay t) sin(w t + phi) (mm) with its first and second derivatives."""
    g, dg, ddg = np.zeros_like(tau), np.zeros_like(tau), np.zeros_like(tau)
    envelope = np.exp(-decay * tau)
    for term in terms:
        w = 2.0 * np.pi * term.frequency_hz
        phase = w * tau + term.phase_rad
        s, c = term.amplitude_mm * envelope * np.sin(phase), term.amplitude_mm * envelope * np.cos(phase)
        g += s
        dg += w * c - decay * s
        ddg += (decay * decay - w * w) * s - 2.0 * decay * w * c
    return g, dg, ddg


def _ramp(tau: np.ndarray, ramp_s: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Smoothstep 3x^2 - 2x^3 over [0, ramp_s] with its first and second derivatives."""
    if ramp_s <= 0:
        return np.ones_like(tau), np.zeros_like(tau), np.zeros_like(tau)
    x = np.clip(tau / ramp_s, 0.0, 1.0)
    rising = (tau >= 0) & (tau < ramp_s)
    r = x * x * (3.0 - 2.0 * x)
    dr = np.where(rising, 6.0 * x * (1.0 - x) / ramp_s, 0.0)
    ddr = np.where(rising, (6.0 - 12.0 * x) / (ramp_s * ramp_s), 0.0)
    return r, dr, ddr


def _axis_signal(terms: Sequence[Harmonic], tau: np.ndarray, spec: MotionSpec, derivative: int = 0) -> np.ndarray:
    """Ramped axis motion (mm) or its second derivative (mm/s^2)."""
    g, dg, ddg = _harmonics(terms, tau, spec.decay_per_s)
    r, dr, ddr = _ramp(tau, spec.ramp_s)
    if derivative == 0:
        return r * g
    return ddr * g + 2.0 * dr * dg + r * ddg


def make_motion(
    spec: MotionSpec,
    anchor: np.ndarray,
    point_ids: Sequence[str] = ("p0",),
) -> Trajectory3D:
    """
    Ground-truth structure-frame trajectory: anchor plus ramped, enveloped sinusoids.

    Args:
        spec: Motion specification (amplitudes in mm)
        anchor: Rest position(s) in meters, shape (3,) or (P, 3)
        point_ids: Point labels

    Returns:
        Trajectory3D sampled at spec.rate_hz
    """
    tau = motion_times(spec)
    anchors = np.broadcast_to(np.asarray(anchor, dtype=np.float64), (len(point_ids), 3))
    disp_mm = np.stack([
        _axis_signal(terms, tau, spec) for terms in spec.axis_terms().values()
    ], axis=-1)
    xyz = anchors[None, :, :] + disp_mm[:, None, :] / 1000.0
    return Trajectory3D(point_ids=tuple(point_ids), time_s=tau, xyz=xyz, frame="structure")


def render_tracks(
    rig: StereoRig,
    frame: StructureFrame,
    trajectory: Trajectory3D,
    noise: Optional[NoiseSpec] = None,
    time_offset_s: float = 0.0,
) -> Tuple[Track2D, Track2D]:
    """
    Project a structure-frame trajectory into both views and add seeded pixel noise.

    Noise draws are always made in the order view1-u, view1-v, view2-u, view2-v so
    a seed fixes every track regardless of which sigmas are zero.

    Raises:
        SceneConfigurationError: if a point is at or behind either camera
    """
    noise = noise or NoiseSpec()
    _, scaled = geometry.recover_scale(rig)
    xyz_cam = geometry.from_structure_frame(frame, trajectory.xyz)
    T, P = xyz_cam.shape[:2]

    pixels = []
    for name, view in (("view1", scaled.cam1), ("view2", scaled.cam2)):
        depth = (xyz_cam @ view.pose.R.T + view.pose.t)[..., 2]
        behind = np.argwhere(depth <= 0)
        if behind.size:
            t_bad, p_bad = (int(i) for i in behind[0])
            raise SceneConfigurationError(
                f"Point {trajectory.point_ids[p_bad]} is behind {name} at frame {t_bad}",
                frame_index=t_bad,
                field=name,
            )
        pixels.append(geometry.project(view.intrinsics, view.pose, xyz_cam))

    rng = np.random.default_rng(noise.seed)
    draws = [rng.standard_normal((T, P)) for _ in range(4)]
    s1u, s1v, s2u, s2v = noise.sigmas()
    uv1 = pixels[0] + np.stack([s1u * draws[0], s1v * draws[1]], axis=-1)
    uv2 = pixels[1] + np.stack([s2u * draws[2], s2v * draws[3]], axis=-1)

    frames = np.arange(T)
    times = trajectory.time_s + time_offset_s
    return (
        Track2D("view1", trajectory.point_ids, frames, times, uv1),
        Track2D("view2", trajectory.point_ids, frames, times, uv2),
    )


def synthesize_accelerometer(
    spec: MotionSpec,
    lead_in_s: float = 3.0,
    rate_hz: float = Config.ACCEL_NOMINAL_RATE_HZ,
    noise_g: float = 2e-4,
    seed: int = Config.DEFAULT_SEED,
) -> AccelRecord:
    """
    Accelerometer record (g) of a motion, preceded by a quiescent lead-in.

    Motion starts at t = lead_in_s on the record's clock; the accelerometer axes are
    aligned with the structure frame (ax lateral, ay vertical, az longitudinal).
    """
    total = lead_in_s + spec.duration_s
    t = np.arange(int(round(total * rate_hz))) / rate_hz
    tau = t - lead_in_s
    moving = tau >= 0
    channels = []
    for terms in spec.axis_terms().values():
        accel = np.zeros_like(t)
        accel[moving] = _axis_signal(terms, tau[moving], spec, derivative=2)
        channels.append(accel / 1000.0 / STANDARD_GRAVITY)

    rng = np.random.default_rng(seed)
    ax, ay, az = (c + noise_g * rng.standard_normal(t.size) for c in channels)
    return AccelRecord(t=t, ax=ax, ay=ay, az=az, nominal_rate=rate_hz)


class SimulationService:
    """
    Service for producing complete synthetic datasets.

    Features:
    - Named presets with recorded baselines and amplitudes
    - Seeded pixel noise per view and axis
    - Matching accelerometer record on a shifted clock
    """

    def __init__(self, settings: Optional[SimulationSettings] = None):
        """Initialize simulation service."""
        self.settings = settings or SimulationSettings()

    def simulate(self, seed: Optional[int] = None) -> SimulationOutput:
        """
        Render the configured preset.

        Args:
            seed: Overrides the noise seed of the settings

        Returns:
            SimulationOutput with tracks, ground truth and accelerometer record
        """
        s = self.settings
        noise = s.noise if seed is None else s.noise.model_copy(update={"seed": seed})
        scenario = build_scenario(s.preset)
        truth = make_motion(scenario.motion, scenario.anchor, scenario.point_ids)

        offset = s.lead_in_s + s.clock_offset_s
        tracks1, tracks2 = render_tracks(scenario.rig, scenario.frame, truth, noise, time_offset_s=offset)
        accel = None
        if s.write_accelerometer:
            accel = synthesize_accelerometer(
                scenario.motion, s.lead_in_s, noise_g=s.accel_noise_g, seed=noise.seed
            )
        logger.info(
            f"Simulated preset {s.preset}: {tracks1.n_frames} frames, baseline {scenario.rig.measured_baseline} m, "
            f"yaw {np.degrees(scenario.frame.yaw_angle):.2f} deg, noise {noise.sigmas()} px, seed {noise.seed}"
        )
        return SimulationOutput(
            scenario=scenario,
            tracks1=tracks1,
            tracks2=tracks2,
            ground_truth=Trajectory3D(truth.point_ids, truth.time_s + offset, truth.xyz, "structure"),
            accelerometer=accel,
            time_offset_s=offset,
        )

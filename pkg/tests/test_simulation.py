"""
Tests for synthetic scene presets, motion and the accelerometer record.
"""
import numpy as np
import pytest

from errors import ContractError
from models import MotionSpec, NoiseSpec, SimulationSettings
from services import geometry
from services.simulation_service import (
    STANDARD_GRAVITY,
    SimulationService,
    available_presets,
    build_scenario,
    default_rig,
    make_motion,
    render_tracks,
    synthesize_accelerometer,
)


def test_available_presets():
    presets = available_presets()
    assert {"data1", "data2", "data3", "data2-mid", "data3-quarter"} <= set(presets)


def test_unknown_preset():
    with pytest.raises(ContractError) as info:
        build_scenario("data9")
    assert info.value.field == "simulation.preset"
    assert "data2-mid" in str(info.value)


@pytest.mark.parametrize("preset, baseline", [("data1", 3.96), ("data2", 4.00), ("data3-mid", 4.97)])
def test_rig_baselines(preset, baseline):
    rig, _ = default_rig(preset)
    assert rig.measured_baseline == baseline
    assert rig.estimated_baseline == pytest.approx(baseline)


def test_scenario_anchor_is_in_front_of_both_cameras(scenario):
    anchor_cam = geometry.from_structure_frame(scenario.frame, scenario.anchor)
    for view in (scenario.rig.cam1, scenario.rig.cam2):
        assert (view.pose.R @ anchor_cam + view.pose.t)[2] > 0


def test_default_scene_shape(clean_simulation):
    assert clean_simulation.tracks1.n_frames == 480
    assert clean_simulation.tracks1.point_ids == ("p0",)
    assert np.diff(clean_simulation.tracks1.time_s) == pytest.approx(np.full(479, 1 / 30.0))


def test_vision_clock_starts_after_lead_in():
    settings = SimulationSettings(preset="data2-mid", clock_offset_s=0.25)
    output = SimulationService(settings).simulate()
    assert output.time_offset_s == pytest.approx(3.25)
    assert output.tracks1.time_s[0] == pytest.approx(3.25)
    assert np.array_equal(output.tracks1.time_s, output.ground_truth.time_s)


def test_same_seed_same_tracks():
    settings = SimulationSettings(preset="data2-mid", noise=NoiseSpec(view2_u_px=0.5, seed=12))
    a = SimulationService(settings).simulate()
    b = SimulationService(settings).simulate()
    assert np.array_equal(a.tracks2.uv, b.tracks2.uv)
    assert np.array_equal(a.accelerometer.ay, b.accelerometer.ay)


def test_seed_override_changes_noise():
    settings = SimulationSettings(preset="data2-mid", noise=NoiseSpec(view2_u_px=0.5, seed=12))
    a = SimulationService(settings).simulate()
    b = SimulationService(settings).simulate(seed=13)
    assert not np.array_equal(a.tracks2.uv, b.tracks2.uv)


def test_noise_only_touches_configured_axis(clean_simulation, noisy_simulation):
    assert np.array_equal(clean_simulation.tracks1.uv, noisy_simulation.tracks1.uv)
    assert np.array_equal(clean_simulation.tracks2.uv[..., 1], noisy_simulation.tracks2.uv[..., 1])
    assert not np.array_equal(clean_simulation.tracks2.uv[..., 0], noisy_simulation.tracks2.uv[..., 0])


def test_accelerometer_can_be_skipped():
    settings = SimulationSettings(preset="data2-mid", write_accelerometer=False)
    assert SimulationService(settings).simulate().accelerometer is None


# =============================================================================
# Motion and accelerometer
# =============================================================================

def test_motion_starts_from_rest(scenario):
    truth = make_motion(scenario.motion, scenario.anchor)
    disp = (truth.xyz[:, 0, :] - scenario.anchor) * 1000.0
    assert np.all(np.abs(disp[0]) < 1e-9)
    assert np.all(np.abs(disp[1]) < 0.1)


def test_motion_reaches_full_amplitude_after_ramp(scenario):
    truth = make_motion(scenario.motion, scenario.anchor)
    vertical = (truth.xyz[30:, 0, 1] - scenario.anchor[1]) * 1000.0
    assert np.ptp(vertical) == pytest.approx(17.37, rel=0.01)


def test_accelerometer_record_layout():
    spec = MotionSpec(duration_s=4.0)
    record = synthesize_accelerometer(spec, lead_in_s=2.0, rate_hz=64.0, noise_g=0.0)
    assert record.t.size == 384
    assert record.nominal_rate == 64.0
    assert np.all(record.ax == 0.0)


def test_accelerometer_is_second_derivative_of_motion(scenario):
    spec = scenario.motion
    record = synthesize_accelerometer(spec, lead_in_s=0.0, rate_hz=1000.0, noise_g=0.0)
    truth = make_motion(spec.model_copy(update={"rate_hz": 1000.0}), scenario.anchor)
    y_mm = (truth.xyz[:, 0, 1] - scenario.anchor[1]) * 1000.0
    numeric = np.gradient(np.gradient(y_mm, 1e-3), 1e-3)
    analytic = record.ay[: y_mm.size] * STANDARD_GRAVITY * 1000.0
    core = slice(1500, 10000)
    assert np.max(np.abs(numeric[core] - analytic[core])) < 1e-2 * np.max(np.abs(analytic))


def test_accelerometer_quiet_before_motion():
    record = synthesize_accelerometer(build_scenario("data2-mid").motion, lead_in_s=3.0, noise_g=0.0)
    before = record.t < 3.0
    assert np.all(record.ay[before] == 0.0)
    assert np.max(np.abs(record.ay[~before])) > 0.01


# =============================================================================
# Pixel noise
# =============================================================================

def test_pixel_noise_has_requested_spread(scenario):
    offsets = np.array([[0.0, 0.0, 0.0], [0.3, 0.0, 0.0], [0.0, -0.2, 0.0], [-0.3, 0.2, 0.0]])
    truth = make_motion(
        MotionSpec(duration_s=100.0, rate_hz=30.0), scenario.anchor + offsets, ("a", "b", "c", "d")
    )
    noise = NoiseSpec(view1_u_px=0.2, view1_v_px=0.35, view2_u_px=0.5, view2_v_px=1.25, seed=21)
    clean1, clean2 = render_tracks(scenario.rig, scenario.frame, truth)
    noisy1, noisy2 = render_tracks(scenario.rig, scenario.frame, truth, noise)

    errors = {
        0.2: noisy1.uv[..., 0] - clean1.uv[..., 0],
        0.35: noisy1.uv[..., 1] - clean1.uv[..., 1],
        0.5: noisy2.uv[..., 0] - clean2.uv[..., 0],
        1.25: noisy2.uv[..., 1] - clean2.uv[..., 1],
    }
    for sigma, error in errors.items():
        assert error.size == 12000
        assert np.std(error) == pytest.approx(sigma, rel=0.05)
        assert abs(np.mean(error)) < 0.05 * sigma


@pytest.mark.parametrize("location, distance", [("quarter", 7.211), ("mid", 10.0), ("threequarter", 13.416)])
def test_viewing_distance_of_presets(location, distance):
    scenario = build_scenario(f"data2-{location}")
    anchor_cam = geometry.from_structure_frame(scenario.frame, scenario.anchor)
    assert np.hypot(anchor_cam[0], anchor_cam[2]) == pytest.approx(distance, abs=1e-3)
    assert scenario.rig.cam1.intrinsics.fx == 4000.0

"""
Tests for sequence triangulation and displacement references.
"""
import time

import numpy as np
import pytest

from errors import ContractError, DomainError
from models import CameraPose, CameraView, Harmonic, MotionSpec, StereoRig, Track2D
from services.simulation_service import available_presets, build_scenario, make_motion, render_tracks
from services.triangulation_service import DisplacementReference, TriangulationService


def _truth_displacement_mm(simulation):
    xyz = simulation.ground_truth.xyz
    return (xyz - xyz.mean(axis=0)) * 1000.0


def test_noiseless_triangulation_matches_ground_truth(clean_simulation):
    scenario = clean_simulation.scenario
    service = TriangulationService(scenario.rig, scenario.frame)
    trajectory = service.triangulate(clean_simulation.tracks1, clean_simulation.tracks2)
    displacement = service.displacements(trajectory, clean_simulation.tracks1.frame_index)

    assert displacement.disp_mm.shape == (480, 1, 3)
    assert np.max(np.abs(displacement.disp_mm - _truth_displacement_mm(clean_simulation))) < 1e-6
    assert np.max(np.abs(trajectory.xyz - clean_simulation.ground_truth.xyz)) < 1e-8


def test_constrained_scene_has_no_longitudinal_motion(clean_simulation):
    scenario = clean_simulation.scenario
    service = TriangulationService(scenario.rig, scenario.frame)
    baseline = service.baseline(clean_simulation.tracks1, clean_simulation.tracks2)
    z = baseline.disp_mm[..., 2]
    assert z.max() - z.min() < 1e-6
    assert baseline.diff_mm.shape == (479, 1, 3)


def test_first_sample_reference_starts_at_zero(clean_simulation):
    scenario = clean_simulation.scenario
    service = TriangulationService(scenario.rig, scenario.frame, DisplacementReference.FIRST_SAMPLE)
    trajectory = service.triangulate(clean_simulation.tracks1, clean_simulation.tracks2)
    displacement = service.displacements(trajectory, clean_simulation.tracks1.frame_index)
    assert np.all(displacement.disp_mm[0] == 0.0)


def test_unknown_displacement_reference(scenario):
    with pytest.raises(ContractError):
        TriangulationService(scenario.rig, scenario.frame, "median")


def test_single_frame_is_rejected(clean_simulation):
    t1, t2 = clean_simulation.tracks1, clean_simulation.tracks2
    one1 = Track2D("view1", t1.point_ids, t1.frame_index[:1], t1.time_s[:1], t1.uv[:1])
    one2 = Track2D("view2", t2.point_ids, t2.frame_index[:1], t2.time_s[:1], t2.uv[:1])
    with pytest.raises(ContractError, match="2 frames"):
        TriangulationService.check_alignment(one1, one2)


def test_frame_count_mismatch_is_rejected(clean_simulation):
    t2 = clean_simulation.tracks2
    short = Track2D("view2", t2.point_ids, t2.frame_index[:-1], t2.time_s[:-1], t2.uv[:-1])
    with pytest.raises(ContractError) as info:
        TriangulationService.check_alignment(clean_simulation.tracks1, short)
    assert info.value.field == "frame_index"


def test_point_ids_must_match(clean_simulation):
    t2 = clean_simulation.tracks2
    renamed = Track2D("view2", ("other",), t2.frame_index, t2.time_s, t2.uv)
    with pytest.raises(ContractError) as info:
        TriangulationService.check_alignment(clean_simulation.tracks1, renamed)
    assert info.value.field == "point_id"


def test_scene_behind_camera_names_frame():
    scenario = build_scenario("data2-mid")
    motion = MotionSpec(duration_s=1.0, rate_hz=30.0)
    trajectory = make_motion(motion, -scenario.anchor, scenario.point_ids)
    with pytest.raises(DomainError) as info:
        render_tracks(scenario.rig, scenario.frame, trajectory)
    assert info.value.frame_index == 0


# =============================================================================
# Closure against synthetic ground truth
# =============================================================================

def _closure_error_mm(rig, frame, motion, anchor) -> float:
    truth = make_motion(motion, anchor)
    tracks1, tracks2 = render_tracks(rig, frame, truth)
    service = TriangulationService(rig, frame)
    trajectory = service.triangulate(tracks1, tracks2)
    displacement = service.displacements(trajectory, tracks1.frame_index)
    expected = (truth.xyz - truth.xyz.mean(axis=0)) * 1000.0
    return float(np.max(np.abs(displacement.disp_mm - expected)))


@pytest.mark.parametrize("preset", available_presets())
def test_every_preset_closes_on_ground_truth(preset):
    scenario = build_scenario(preset)
    assert _closure_error_mm(scenario.rig, scenario.frame, scenario.motion, scenario.anchor) < 1e-6


def test_random_motion_closes_on_ground_truth():
    rng = np.random.default_rng(31)
    scenario = build_scenario("data2-mid")

    def harmonics():
        return [
            Harmonic(
                amplitude_mm=rng.uniform(0.0, 20.0),
                frequency_hz=rng.uniform(0.2, 10.0),
                phase_rad=rng.uniform(-np.pi, np.pi),
            )
            for _ in range(int(rng.integers(0, 3)))
        ]

    for _ in range(10):
        motion = MotionSpec(
            lateral=harmonics(),
            vertical=harmonics(),
            longitudinal=harmonics(),
            duration_s=4.0,
            decay_per_s=rng.uniform(0.0, 0.5),
            ramp_s=rng.uniform(0.0, 1.0),
        )
        assert _closure_error_mm(scenario.rig, scenario.frame, motion, scenario.anchor) < 1e-6


def test_doubled_baseline_closes_on_ground_truth():
    scenario = build_scenario("data1-quarter")
    rig = scenario.rig
    doubled = StereoRig(
        cam1=rig.cam1,
        cam2=CameraView(rig.cam2.intrinsics, CameraPose(R=rig.cam2.pose.R, t=2.0 * rig.cam2.pose.t)),
        measured_baseline=2.0 * rig.measured_baseline,
    )
    assert _closure_error_mm(doubled, scenario.frame, scenario.motion, scenario.anchor) < 1e-6


def test_triangulating_a_full_sequence_is_fast(clean_simulation):
    scenario = clean_simulation.scenario
    service = TriangulationService(scenario.rig, scenario.frame)
    timings = []
    for _ in range(3):
        started = time.perf_counter()
        service.triangulate(clean_simulation.tracks1, clean_simulation.tracks2)
        timings.append(time.perf_counter() - started)
    assert min(timings) <= 0.1

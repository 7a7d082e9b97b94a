"""
Tests for the epipolar correspondence check.
"""
import numpy as np
import pytest

from errors import ContractError
from models import Track2D, ValidationStatus
from services.validation_service import ValidationService


def _shift_v(tracks: Track2D, frame: int, pixels: float) -> Track2D:
    uv = np.array(tracks.uv)
    uv[frame, 0, 1] += pixels
    return Track2D(tracks.view, tracks.point_ids, tracks.frame_index, tracks.time_s, uv)


def test_clean_tracks_pass(clean_simulation):
    service = ValidationService(clean_simulation.scenario.rig)
    result = service.validate_correspondences(clean_simulation.tracks1, clean_simulation.tracks2)
    assert result.status == ValidationStatus.PASS
    assert result.checked == 480
    assert result.max_residual < 1e-6
    ValidationService.enforce(result)


def test_horizontal_pixel_noise_passes(noisy_simulation):
    service = ValidationService(noisy_simulation.scenario.rig)
    result = service.validate_correspondences(noisy_simulation.tracks1, noisy_simulation.tracks2)
    assert result.status == ValidationStatus.PASS


def test_small_vertical_offset_warns(clean_simulation):
    service = ValidationService(clean_simulation.scenario.rig)
    tracks2 = _shift_v(clean_simulation.tracks2, 100, 20.0)
    result = service.validate_correspondences(clean_simulation.tracks1, tracks2)
    assert result.status == ValidationStatus.WARNING
    assert result.discrepancies[0]["frame_index"] == 100
    ValidationService.enforce(result)


def test_mismatched_point_fails(clean_simulation):
    service = ValidationService(clean_simulation.scenario.rig)
    tracks2 = _shift_v(clean_simulation.tracks2, 42, 1000.0)
    result = service.validate_correspondences(clean_simulation.tracks1, tracks2)
    assert result.status == ValidationStatus.FAIL
    assert result.discrepancies[0]["severity"] == "error"
    assert result.discrepancies[0]["point_id"] == "p0"

    with pytest.raises(ContractError, match="frame 42") as info:
        ValidationService.enforce(result, track_file="view2_tracks.csv")
    assert info.value.file == "view2_tracks.csv"
    assert info.value.field == "u_px/v_px"


def test_thresholds_are_configurable(clean_simulation):
    service = ValidationService(clean_simulation.scenario.rig, warning_threshold=0.5, failure_threshold=1.0)
    tracks2 = _shift_v(clean_simulation.tracks2, 42, 1000.0)
    result = service.validate_correspondences(clean_simulation.tracks1, tracks2)
    assert result.status == ValidationStatus.PASS

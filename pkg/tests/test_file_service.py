"""
Tests for CSV and JSON input/output.
"""
import json

import numpy as np
import pytest

from errors import ContractError
from models import RunConfig
from services import file_service
from services.file_service import (
    atomic_write_text,
    read_accelerometer,
    read_displacement,
    read_rig,
    read_run_config,
    read_tracks,
    rig_to_document,
    write_accelerometer,
    write_model,
    write_tracks,
)

TRACK_HEADER = "point_id,frame_index,time_s,u_px,v_px\n"


def test_tracks_survive_a_write(tmp_path, noisy_simulation):
    path = write_tracks(noisy_simulation.tracks2, tmp_path / "view2_tracks.csv")
    tracks = read_tracks(path, "view2")
    assert tracks.point_ids == ("p0",)
    assert np.array_equal(tracks.frame_index, noisy_simulation.tracks2.frame_index)
    assert np.array_equal(tracks.uv, noisy_simulation.tracks2.uv)


def test_tracks_are_sorted_by_frame(tmp_path):
    path = tmp_path / "tracks.csv"
    path.write_text(
        TRACK_HEADER
        + "b,1,0.1,11,21\na,1,0.1,12,22\na,0,0.0,10,20\nb,0,0.0,13,23\n",
        encoding="utf-8",
    )
    tracks = read_tracks(path, "view1")
    assert tracks.point_ids == ("b", "a")
    assert tracks.frame_index.tolist() == [0, 1]
    assert tracks.uv[0, 1].tolist() == [10.0, 20.0]


def test_numeric_point_ids_stay_text(tmp_path):
    path = tmp_path / "tracks.csv"
    path.write_text(TRACK_HEADER + "007,0,0.0,1,2\n007,1,0.1,1,2\n", encoding="utf-8")
    assert read_tracks(path, "view1").point_ids == ("007",)


def test_missing_column_names_file_and_field(tmp_path):
    path = tmp_path / "tracks.csv"
    path.write_text("point_id,frame_index,time_s,u_px\np0,0,0.0,1\n", encoding="utf-8")
    with pytest.raises(ContractError) as info:
        read_tracks(path, "view1")
    assert info.value.file == str(path)
    assert info.value.field == "v_px"
    assert info.value.exit_code == 2


def test_non_numeric_value_names_line(tmp_path):
    path = tmp_path / "tracks.csv"
    path.write_text(TRACK_HEADER + "p0,0,0.0,1,2\np0,1,0.1,abc,2\n", encoding="utf-8")
    with pytest.raises(ContractError, match="line 3") as info:
        read_tracks(path, "view1")
    assert info.value.field == "u_px"


def test_incomplete_point_rows(tmp_path):
    path = tmp_path / "tracks.csv"
    path.write_text(TRACK_HEADER + "a,0,0.0,1,2\na,1,0.1,1,2\nb,0,0.0,1,2\n", encoding="utf-8")
    with pytest.raises(ContractError) as info:
        read_tracks(path, "view1")
    assert info.value.field == "frame_index"


def test_duplicate_rows(tmp_path):
    path = tmp_path / "tracks.csv"
    path.write_text(TRACK_HEADER + "a,0,0.0,1,2\na,0,0.0,1,2\n", encoding="utf-8")
    with pytest.raises(ContractError, match="Duplicate"):
        read_tracks(path, "view1")


def test_missing_file(tmp_path):
    with pytest.raises(ContractError) as info:
        read_displacement(tmp_path / "nope.csv")
    assert info.value.file.endswith("nope.csv")


def test_displacement_csv_layout(tmp_path):
    path = tmp_path / "displacement.csv"
    path.write_text(
        "point_id,frame_index,time_s,x_mm,y_mm,z_mm\n"
        "mid,0,3.0,0.5,-1.0,0.0\n"
        "mid,1,3.0333333333,0.6,-0.9,0.0\n",
        encoding="utf-8",
    )
    displacement = read_displacement(path)
    assert displacement.disp_mm.shape == (2, 1, 3)
    series = displacement.series("mid", "Y")
    assert series.d.tolist() == [-1.0, -0.9]


def test_accelerometer_file(tmp_path, clean_simulation):
    path = write_accelerometer(clean_simulation.accelerometer, tmp_path / "accel.csv")
    assert path.read_text(encoding="utf-8").splitlines()[0] == "time_s,ax_g,ay_g,az_g"
    record = read_accelerometer(path)
    assert record.t.size == clean_simulation.accelerometer.t.size
    assert np.allclose(record.ay, clean_simulation.accelerometer.ay, rtol=0, atol=1e-15)


def test_jittered_accelerometer_is_rejected(tmp_path):
    t = np.arange(200) / 64.0
    t[100] += 0.3 / 64.0
    lines = ["time_s,ax_g,ay_g,az_g"] + [f"{x:.10f},0,0,0" for x in t]
    path = tmp_path / "accel.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(ContractError) as info:
        read_accelerometer(path)
    assert info.value.file == str(path)


# =============================================================================
# Rig and run configuration documents
# =============================================================================

def test_rig_document(tmp_path, scenario):
    document = rig_to_document(scenario.rig, 6.0, scenario.longitudinal_distance_m)
    path = write_model(document, tmp_path / "rig.json")
    rig, frame, doc = read_rig(path)
    assert doc.reference_camera.name == "view1"
    assert np.allclose(rig.cam2.pose.R, scenario.rig.cam2.pose.R, rtol=0, atol=1e-15)
    assert frame.yaw_angle == pytest.approx(scenario.frame.yaw_angle)


def test_rig_with_two_reference_cameras(tmp_path, scenario):
    document = rig_to_document(scenario.rig, 6.0, 8.0).model_dump(mode="json")
    for camera in document["cameras"]:
        camera["reference"] = True
    path = tmp_path / "rig.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    with pytest.raises(ContractError, match="reference") as info:
        read_rig(path)
    assert info.value.file == str(path)


def test_rig_with_bad_baseline_names_field(tmp_path, scenario):
    document = rig_to_document(scenario.rig, 6.0, 8.0).model_dump(mode="json")
    document["measured_baseline_m"] = -4.0
    path = tmp_path / "rig.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    with pytest.raises(ContractError) as info:
        read_rig(path)
    assert info.value.field == "measured_baseline_m"


def test_run_config_paths_resolve_against_config_dir(write_config, tmp_path):
    (tmp_path / "data").mkdir()
    (tmp_path / "data" / "a.csv").write_text(TRACK_HEADER, encoding="utf-8")
    config = read_run_config(write_config(tracks_view1="data/a.csv", axes=["Y"]))
    assert config.resolve("tracks_view1").resolve() == (tmp_path / "data" / "a.csv").resolve()
    assert config.require("tracks_view1").exists()
    assert config.axes == ["Y"]


def test_run_config_missing_input_names_field(write_config):
    config = read_run_config(write_config(rig="missing.json"))
    with pytest.raises(ContractError) as info:
        config.require("rig")
    assert info.value.field == "rig"
    with pytest.raises(ContractError) as info:
        config.require("accelerometer")
    assert info.value.field == "accelerometer"


def test_run_config_rejects_unknown_keys(write_config):
    with pytest.raises(ContractError) as info:
        read_run_config(write_config(tracks="a.csv"))
    assert info.value.field == "tracks"


def test_run_config_rejects_duplicate_axes(write_config):
    with pytest.raises(ContractError) as info:
        read_run_config(write_config(axes=["Y", "Y"]))
    assert info.value.field == "axes"


def test_default_run_config_without_file():
    assert read_run_config(None) == RunConfig()


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "nested" / "report.json"
    atomic_write_text(target, "first\n")
    atomic_write_text(target, "second\n")
    assert target.read_text(encoding="utf-8") == "second\n"
    assert [p.name for p in target.parent.iterdir()] == ["report.json"]


def test_file_digests_skip_missing(tmp_path):
    present = tmp_path / "a.txt"
    present.write_text("x", encoding="utf-8")
    digests = file_service.file_digests({"a": present, "b": tmp_path / "b.txt", "c": None})
    assert list(digests) == ["a"]
    assert len(digests["a"]) == 64

"""
File I/O for tracks, rigs, accelerometer records, displacements and JSON documents.

CSV files are read and written with pandas (UTF-8, LF, '.' decimal); JSON documents
are pydantic models. Every write is atomic (temp file in the target directory, then
os.replace). Read failures raise ContractError naming the file and field.
"""
import hashlib
import logging
import os
import tempfile
from pathlib import Path
from typing import Dict, Optional, Tuple, Type, TypeVar, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from errors import ContractError, GirderKitError
from models import (
    AccelRecord,
    CameraDocument,
    CameraIntrinsics,
    CameraPose,
    CameraView,
    DisplacementSet,
    RigDocument,
    RunConfig,
    StereoRig,
    StructureFrame,
    Track2D,
)
from services import geometry

logger = logging.getLogger(__name__)

TRACK_COLUMNS = ("point_id", "frame_index", "time_s", "u_px", "v_px")
ACCEL_COLUMNS = ("time_s", "ax_g", "ay_g", "az_g")
DISPLACEMENT_COLUMNS = ("point_id", "frame_index", "time_s", "x_mm", "y_mm", "z_mm")

PathLike = Union[str, Path]
ModelT = TypeVar("ModelT", bound=BaseModel)


# =============================================================================
# Generic helpers
# =============================================================================

def get_file_hash(path: PathLike) -> str:
    """Calculate SHA-256 hash of a file."""
    sha256 = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(8192), b""):
            sha256.update(chunk)
    return sha256.hexdigest()


def file_digests(paths: Dict[str, Optional[Path]]) -> Dict[str, str]:
    """sha256 digests of the existing inputs, keyed by role."""
    return {role: get_file_hash(path) for role, path in paths.items() if path is not None and Path(path).exists()}


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write text via a temp file in the same directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _write_frame(df: pd.DataFrame, path: PathLike) -> Path:
    return atomic_write_text(path, df.to_csv(index=False, lineterminator="\n"))


def _read_frame(path: PathLike, required: Tuple[str, ...], text_columns: Tuple[str, ...] = ()) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise ContractError(f"File not found: {path}", file=str(path))
    try:
        df = pd.read_csv(path, dtype={c: str for c in text_columns}, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ContractError(f"Cannot parse CSV: {exc}", file=str(path)) from exc

    for column in required:
        if column not in df.columns:
            raise ContractError(f"Missing column '{column}'", file=str(path), field=column)
    if df.empty:
        raise ContractError("File has no data rows", file=str(path))

    for column in required:
        if column in text_columns:
            continue
        values = pd.to_numeric(df[column], errors="coerce")
        bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0]) + 2
            raise ContractError(f"Non-numeric or non-finite value on line {row}", file=str(path), field=column)
        df[column] = values
    return df


def _pivot(df: pd.DataFrame, path: Path, value_columns: Tuple[str, ...]) -> Tuple[Tuple[str, ...], np.ndarray, np.ndarray, np.ndarray]:
    """Reshape long-format rows into (point ids, frames, times, values[T, P, k])."""
    df = df.copy()
    df["frame_index"] = df["frame_index"].astype(np.int64)
    point_ids = tuple(dict.fromkeys(df["point_id"]))
    if df.duplicated(["point_id", "frame_index"]).any():
        raise ContractError("Duplicate (point_id, frame_index) rows", file=str(path), field="frame_index")

    times = df.groupby("frame_index")["time_s"].agg(["min", "max"]).sort_index()
    if ((times["max"] - times["min"]).abs() > 1e-9).any():
        raise ContractError("Points disagree on the time of a frame", file=str(path), field="time_s")

    wide = df.pivot(index="frame_index", columns="point_id", values=list(value_columns)).sort_index()
    if wide.isna().any().any():
        raise ContractError("Not every point has a row for every frame", file=str(path), field="frame_index")

    values = np.stack([wide[col][list(point_ids)].to_numpy(dtype=np.float64) for col in value_columns], axis=-1)
    frames = wide.index.to_numpy(dtype=np.int64)
    return point_ids, frames, times["min"].to_numpy(dtype=np.float64), values


def _long_frame(point_ids, frames, times, values: np.ndarray, columns: Tuple[str, ...]) -> pd.DataFrame:
    T, P = values.shape[:2]
    data = {
        "point_id": np.tile(np.asarray(point_ids, dtype=object), T),
        "frame_index": np.repeat(np.asarray(frames, dtype=np.int64), P),
        "time_s": np.repeat(np.asarray(times, dtype=np.float64), P),
    }
    for k, column in enumerate(columns):
        data[column] = values[..., k].reshape(-1)
    return pd.DataFrame(data)


def _validation_field(exc: ValidationError) -> str:
    errors = exc.errors()
    if not errors:
        return ""
    return ".".join(str(part) for part in errors[0].get("loc", ()))


def _validation_message(exc: ValidationError) -> str:
    errors = exc.errors()
    return errors[0].get("msg", str(exc)) if errors else str(exc)


# =============================================================================
# Tracks
# =============================================================================

def read_tracks(path: PathLike, view: str) -> Track2D:
    """
    Read a track CSV (point_id, frame_index, time_s, u_px, v_px).

    Args:
        path: CSV path
        view: "view1" or "view2"

    Returns:
        Track2D with points in order of first appearance and frames sorted
    """
    path = Path(path)
    df = _read_frame(path, TRACK_COLUMNS, text_columns=("point_id",))
    point_ids, frames, times, uv = _pivot(df, path, ("u_px", "v_px"))
    try:
        tracks = Track2D(view, point_ids, frames, times, uv)
    except GirderKitError as exc:
        raise exc.located(file=str(path))
    logger.info(f"Read {view} tracks: {tracks.n_frames} frames x {tracks.n_points} points from {path.name}")
    return tracks


def write_tracks(tracks: Track2D, path: PathLike) -> Path:
    df = _long_frame(tracks.point_ids, tracks.frame_index, tracks.time_s, tracks.uv, ("u_px", "v_px"))
    return _write_frame(df, path)


# =============================================================================
# Displacements
# =============================================================================

def read_displacement(path: PathLike) -> DisplacementSet:
    """Read a displacement CSV (point_id, frame_index, time_s, x_mm, y_mm, z_mm)."""
    path = Path(path)
    df = _read_frame(path, DISPLACEMENT_COLUMNS, text_columns=("point_id",))
    point_ids, frames, times, disp = _pivot(df, path, ("x_mm", "y_mm", "z_mm"))
    try:
        return DisplacementSet(point_ids, frames, times, disp)
    except GirderKitError as exc:
        raise exc.located(file=str(path))


def write_displacement(displacement: DisplacementSet, path: PathLike) -> Path:
    df = _long_frame(
        displacement.point_ids, displacement.frame_index, displacement.time_s,
        displacement.disp_mm, ("x_mm", "y_mm", "z_mm"),
    )
    return _write_frame(df, path)


# =============================================================================
# Accelerometer
# =============================================================================

def read_accelerometer(path: PathLike) -> AccelRecord:
    """Read an accelerometer CSV (time_s, ax_g, ay_g, az_g)."""
    path = Path(path)
    df = _read_frame(path, ACCEL_COLUMNS)
    try:
        record = AccelRecord(
            t=df["time_s"].to_numpy(dtype=np.float64),
            ax=df["ax_g"].to_numpy(dtype=np.float64),
            ay=df["ay_g"].to_numpy(dtype=np.float64),
            az=df["az_g"].to_numpy(dtype=np.float64),
        )
    except GirderKitError as exc:
        raise exc.located(file=str(path))
    logger.info(f"Read accelerometer record: {record.t.size} samples from {path.name}")
    return record


def write_accelerometer(record: AccelRecord, path: PathLike) -> Path:
    df = pd.DataFrame({"time_s": record.t, "ax_g": record.ax, "ay_g": record.ay, "az_g": record.az})
    return _write_frame(df, path)


# =============================================================================
# Rig documents
# =============================================================================

def _camera_view(doc: CameraDocument) -> CameraView:
    intrinsics = CameraIntrinsics(doc.fx, doc.fy, doc.cx, doc.cy, doc.skew, tuple(doc.dist))
    pose = CameraPose(R=np.array(doc.R, dtype=np.float64).reshape(3, 3), t=np.array(doc.t, dtype=np.float64))
    return CameraView(intrinsics, pose)


def rig_from_document(doc: RigDocument) -> Tuple[StereoRig, StructureFrame]:
    """Geometry objects of a rig document; the reference camera becomes view1."""
    rig = StereoRig(
        cam1=_camera_view(doc.reference_camera),
        cam2=_camera_view(doc.other_camera),
        measured_baseline=doc.measured_baseline_m,
    )
    frame = geometry.structure_frame_from_layout(
        doc.perpendicular_distance_m,
        doc.longitudinal_distance_m,
        vertical_sign=doc.vertical_sign,
        camera_station=doc.camera_station_m,
    )
    return rig, frame


def rig_to_document(
    rig: StereoRig,
    perpendicular_distance_m: float,
    longitudinal_distance_m: float,
    vertical_sign: int = 1,
    camera_station_m: float = 0.0,
) -> RigDocument:
    def camera(name: str, view: CameraView, reference: bool) -> CameraDocument:
        intr, pose = view.intrinsics, view.pose
        return CameraDocument(
            name=name,
            reference=reference,
            fx=intr.fx, fy=intr.fy, cx=intr.cx, cy=intr.cy, skew=intr.skew,
            dist=list(intr.dist),
            R=pose.R.reshape(-1).tolist(),
            t=pose.t.tolist(),
        )

    return RigDocument(
        cameras=[camera("view1", rig.cam1, True), camera("view2", rig.cam2, False)],
        measured_baseline_m=rig.measured_baseline,
        perpendicular_distance_m=perpendicular_distance_m,
        longitudinal_distance_m=longitudinal_distance_m,
        camera_station_m=camera_station_m,
        vertical_sign=vertical_sign,
    )


def read_rig(path: PathLike) -> Tuple[StereoRig, StructureFrame, RigDocument]:
    """Read and validate a rig JSON document."""
    path = Path(path)
    doc = read_model(path, RigDocument)
    try:
        rig, frame = rig_from_document(doc)
    except GirderKitError as exc:
        raise exc.located(file=str(path))
    return rig, frame, doc


# =============================================================================
# JSON documents
# =============================================================================

def read_model(path: PathLike, model: Type[ModelT]) -> ModelT:
    """Parse a JSON document into a pydantic model; failures name file and field."""
    path = Path(path)
    if not path.exists():
        raise ContractError(f"File not found: {path}", file=str(path))
    try:
        return model.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise ContractError(
            f"Invalid {model.__name__}: {_validation_message(exc)}",
            file=str(path),
            field=_validation_field(exc) or None,
        ) from exc


def write_model(document: BaseModel, path: PathLike) -> Path:
    return atomic_write_text(path, document.model_dump_json(indent=2) + "\n")


def read_run_config(path: Optional[PathLike]) -> RunConfig:
    """Run configuration with relative paths bound to the config file directory."""
    if path is None:
        return RunConfig().bind(Path.cwd())
    path = Path(path)
    return read_model(path, RunConfig).bind(path.resolve().parent)

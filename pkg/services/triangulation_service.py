"""
Triangulation Service for track sequences.
Turns two synchronized pixel-track files into structure-frame displacements.
"""
import logging
from typing import Optional

import numpy as np

from errors import ContractError, GirderKitError, NumericError
from models import (
    BaselineTrajectories,
    DisplacementSet,
    StereoRig,
    StructureFrame,
    Track2D,
    Trajectory3D,
)
from services import geometry

logger = logging.getLogger(__name__)


class DisplacementReference:
    """Zero reference of reported displacements."""
    MEAN = "mean"
    FIRST_SAMPLE = "first-sample"


class TriangulationService:
    """
    Service for triangulating stereo track sequences.

    Features:
    - Batch undistortion of both views
    - Linear triangulation in normalized coordinates with the metric-scaled rig
    - Camera -> structure frame transform
    - Displacements about the per-point mean (or first sample)
    """

    def __init__(
        self,
        rig: StereoRig,
        frame: StructureFrame,
        displacement_reference: str = DisplacementReference.MEAN,
    ):
        """Initialize with a rig; metric scale is recovered once here."""
        if displacement_reference not in (DisplacementReference.MEAN, DisplacementReference.FIRST_SAMPLE):
            raise ContractError(
                f"Unknown displacement reference '{displacement_reference}'", field="displacement_reference"
            )
        self.rig = rig
        self.frame = frame
        self.displacement_reference = displacement_reference
        self.scale, self.scaled_rig = geometry.recover_scale(rig)
        self.P1 = geometry.projection_matrix(self.scaled_rig.cam1.intrinsics, self.scaled_rig.cam1.pose, normalized=True)
        self.P2 = geometry.projection_matrix(self.scaled_rig.cam2.intrinsics, self.scaled_rig.cam2.pose, normalized=True)

    @staticmethod
    def check_alignment(tracks1: Track2D, tracks2: Track2D) -> None:
        """Both views must cover the same frames and points, with at least 2 frames."""
        if tracks1.n_frames != tracks2.n_frames:
            raise ContractError(
                f"Frame-count mismatch: {tracks1.view} has {tracks1.n_frames}, {tracks2.view} has {tracks2.n_frames}",
                field="frame_index",
            )
        if tracks1.point_ids != tracks2.point_ids:
            raise ContractError(
                f"Point ids differ between views: {list(tracks1.point_ids)} vs {list(tracks2.point_ids)}",
                field="point_id",
            )
        if not np.array_equal(tracks1.frame_index, tracks2.frame_index):
            raise ContractError("Views are not frame-aligned", field="frame_index")
        if tracks1.n_frames < 2:
            raise ContractError("At least 2 frames are needed to form displacements", field="frame_index")

    def undistort_view(self, view: str, uv: np.ndarray, frame_index: Optional[np.ndarray] = None) -> np.ndarray:
        """Undistort a (T, P, 2) pixel array of one view; failures name the frame."""
        intr = self.rig.view(view).intrinsics
        try:
            return geometry.undistort(intr, uv)
        except NumericError as exc:
            frame = self._first_failing_frame(intr, uv)
            label = frame if frame_index is None or frame is None else int(frame_index[frame])
            raise NumericError(
                f"{exc.message} in {view} at frame {label}", residual=exc.residual, field="u_px/v_px"
            ) from exc

    @staticmethod
    def _first_failing_frame(intr, uv: np.ndarray) -> Optional[int]:
        for t in range(uv.shape[0]):
            try:
                geometry.undistort(intr, uv[t])
            except NumericError:
                return t
        return None

    def triangulate_normalized(
        self,
        xn1: np.ndarray,
        xn2: np.ndarray,
        frame_index: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """
        Triangulate undistorted normalized observations into the structure frame.

        Args:
            xn1: Normalized view-1 coordinates, shape (T, P, 2)
            xn2: Normalized view-2 coordinates, shape (T, P, 2)
            frame_index: Frame labels used in error messages

        Returns:
            Structure-frame positions in meters, shape (T, P, 3)
        """
        T, P = xn1.shape[:2]
        try:
            xyz_cam = geometry.triangulate_linear_batch(
                self.P1, self.P2, xn1.reshape(-1, 2), xn2.reshape(-1, 2)
            ).reshape(T, P, 3)
        except GirderKitError as exc:
            index = getattr(exc, "parameters", {}).get("index")
            if index is not None:
                t = index // P
                label = int(frame_index[t]) if frame_index is not None else t
                exc.message = f"{exc.message} at frame {label}"
                exc.parameters["frame_index"] = label
            raise
        return geometry.to_structure_frame(self.frame, xyz_cam)

    def triangulate(self, tracks1: Track2D, tracks2: Track2D) -> Trajectory3D:
        """Full chain: undistort -> triangulate -> scale -> structure frame."""
        self.check_alignment(tracks1, tracks2)
        xn1 = self.undistort_view("view1", tracks1.uv, tracks1.frame_index)
        xn2 = self.undistort_view("view2", tracks2.uv, tracks2.frame_index)
        xyz = self.triangulate_normalized(xn1, xn2, tracks1.frame_index)
        return Trajectory3D(point_ids=tracks1.point_ids, time_s=tracks1.time_s, xyz=xyz, frame="structure")

    def origin_of(self, xyz: np.ndarray) -> np.ndarray:
        """Per-point zero reference of a (T, P, 3) trajectory."""
        if self.displacement_reference == DisplacementReference.FIRST_SAMPLE:
            return xyz[0].copy()
        return xyz.mean(axis=0)

    def displacements(self, trajectory: Trajectory3D, frame_index: np.ndarray) -> DisplacementSet:
        """Displacements in mm about the configured per-point reference."""
        origin = self.origin_of(trajectory.xyz)
        disp_mm = (trajectory.xyz - origin) * 1000.0
        return DisplacementSet(
            point_ids=trajectory.point_ids,
            frame_index=frame_index,
            time_s=trajectory.time_s,
            disp_mm=disp_mm,
            origin_m=origin,
        )

    def baseline(self, tracks1: Track2D, tracks2: Track2D) -> BaselineTrajectories:
        """
        Un-refined triangulation of a sequence with temporal differences.

        Args:
            tracks1: View-1 tracks
            tracks2: View-2 tracks

        Returns:
            BaselineTrajectories in mm about the per-point reference
        """
        trajectory = self.triangulate(tracks1, tracks2)
        origin = self.origin_of(trajectory.xyz)
        disp_mm = (trajectory.xyz - origin) * 1000.0
        logger.info(
            f"Baseline triangulation: {trajectory.xyz.shape[0]} frames x {trajectory.xyz.shape[1]} points "
            f"(scale {self.scale:.6g})"
        )
        return BaselineTrajectories(
            trajectory=trajectory,
            origin_m=origin,
            disp_mm=disp_mm,
            diff_mm=np.diff(disp_mm, axis=0),
            scale=self.scale,
        )


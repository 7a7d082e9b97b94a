"""
Validation Service for stereo correspondences.
Checks that two track files describe the same physical points before triangulation.
"""
import logging
from typing import Any, Dict, List, Optional

import numpy as np

from config import Config
from errors import ContractError
from models import CameraPose, StereoRig, Track2D, ValidationResult, ValidationStatus
from services import geometry

logger = logging.getLogger(__name__)


class ValidationService:
    """
    Service for validating correspondences between the two views.

    Features:
    - Epipolar residual of every (frame, point) in normalized coordinates
    - Time-axis sanity checks
    - Configurable warning/failure thresholds
    """

    def __init__(
        self,
        rig: StereoRig,
        warning_threshold: Optional[float] = None,
        failure_threshold: Optional[float] = None,
    ):
        """Initialize validation service."""
        self.rig = rig
        self.warning_threshold = Config.EPIPOLAR_WARNING if warning_threshold is None else warning_threshold
        self.failure_threshold = Config.EPIPOLAR_FAILURE if failure_threshold is None else failure_threshold

        # Unit translation so residuals do not depend on the (possibly unscaled) baseline
        pose = rig.cam2.pose
        self.essential = geometry.essential_matrix(CameraPose(R=pose.R, t=pose.t / np.linalg.norm(pose.t)))

    def validate_correspondences(self, tracks1: Track2D, tracks2: Track2D) -> ValidationResult:
        """
        Epipolar check of every correspondence.

        Args:
            tracks1: View-1 tracks
            tracks2: View-2 tracks, frame-aligned with tracks1

        Returns:
            ValidationResult with per-point discrepancies
        """
        discrepancies: List[Dict[str, Any]] = []

        x1 = geometry.undistort(self.rig.cam1.intrinsics, tracks1.uv)
        x2 = geometry.undistort(self.rig.cam2.intrinsics, tracks2.uv)
        residual = np.abs(geometry.epipolar_residual(self.essential, x1, x2))

        for p, point_id in enumerate(tracks1.point_ids):
            worst = int(np.argmax(residual[:, p]))
            value = float(residual[worst, p])
            if value > self.failure_threshold:
                severity = "error"
            elif value > self.warning_threshold:
                severity = "warning"
            else:
                continue
            discrepancies.append({
                "type": "epipolar_residual",
                "message": (
                    f"Point {point_id} violates the epipolar constraint by {value:.3g} "
                    f"at frame {int(tracks1.frame_index[worst])}"
                ),
                "severity": severity,
                "point_id": point_id,
                "frame_index": int(tracks1.frame_index[worst]),
                "residual": value,
            })

        discrepancies.extend(self._validate_time_axis(tracks1))

        if any(d.get("severity") == "error" for d in discrepancies):
            status = ValidationStatus.FAIL
        elif discrepancies:
            status = ValidationStatus.WARNING
        else:
            status = ValidationStatus.PASS

        result = ValidationResult(
            status=status,
            checked=int(residual.size),
            max_residual=float(residual.max()),
            median_residual=float(np.median(residual)),
            discrepancies=discrepancies,
        )
        for d in discrepancies:
            logger.warning(d["message"])
        logger.info(
            f"Correspondence check: {status} (max residual {result.max_residual:.3g}, {result.checked} pairs)"
        )
        return result

    def _validate_time_axis(self, tracks: Track2D) -> List[Dict[str, Any]]:
        issues = []
        dt = np.diff(tracks.time_s)
        if dt.size and np.any(dt <= 0):
            issues.append({
                "type": "time_not_increasing",
                "message": "Track time stamps are not strictly increasing",
                "severity": "error",
            })
        elif dt.size and np.max(np.abs(dt - np.median(dt))) > 0.01 * np.median(dt):
            issues.append({
                "type": "time_not_uniform",
                "message": "Track frames are not uniformly spaced in time",
                "severity": "warning",
            })
        return issues

    @staticmethod
    def enforce(result: ValidationResult, track_file: Optional[str] = None) -> None:
        """Raise ContractError when the check failed."""
        if result.status != ValidationStatus.FAIL:
            return
        first = next(d for d in result.discrepancies if d.get("severity") == "error")
        field = "time_s" if first["type"].startswith("time") else "u_px/v_px"
        raise ContractError(first["message"], file=track_file, field=field)

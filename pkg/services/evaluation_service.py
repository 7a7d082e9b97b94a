"""
Evaluation Service for comparing predicted and reference displacement.
Builds the EvaluationReport: metrics per (point, axis) with and without refinement.
"""
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from config import Config
from errors import ContractError
from models import (
    AXIS_INDEX,
    DisplacementSet,
    EvaluationEntry,
    EvaluationReport,
    RunConfig,
    ScalarSeries,
)
from services import metrics
from services.plot_service import PlotService
from services.signal_processor import align_pair

logger = logging.getLogger(__name__)


def axis_series(displacement: DisplacementSet, point_id: str, axis: str, source: str) -> ScalarSeries:
    """One (point, axis) column as a series; fails naming the file role and field."""
    if axis not in AXIS_INDEX:
        raise ContractError(f"Unknown axis '{axis}'", field="axes")
    if point_id not in displacement.point_ids:
        raise ContractError(
            f"Point '{point_id}' is absent from the {source} (have {list(displacement.point_ids)})",
            file=source,
            field="point_id",
        )
    values = displacement.disp_mm[:, displacement.point_ids.index(point_id), AXIS_INDEX[axis]]
    if not np.all(np.isfinite(values)):
        raise ContractError(f"Axis {axis} is absent or incomplete in the {source}", file=source, field=f"{axis.lower()}_mm")
    return ScalarSeries(displacement.time_s, values, "mm")


class EvaluationService:
    """
    Service for computing agreement metrics.

    Features:
    - Range-normalized RMSE, Pearson correlation, RPPAE per (point, axis)
    - Side-by-side w/o and w/ refinement
    - Summary statistics, config echo, input digests
    - Optional static figures
    """

    def __init__(self, run_config: Optional[RunConfig] = None):
        """Initialize evaluation service."""
        self.run_config = run_config or RunConfig()

    def _reference_point(self, point_id: str, reference: DisplacementSet) -> str:
        if point_id in reference.point_ids:
            return point_id
        if self.run_config.reference_point_id in reference.point_ids:
            return self.run_config.reference_point_id
        if len(reference.point_ids) == 1:
            return reference.point_ids[0]
        raise ContractError(
            f"No reference series for point '{point_id}'", file="reference", field="point_id"
        )

    def evaluate(
        self,
        prediction: DisplacementSet,
        reference: DisplacementSet,
        prediction_refined: Optional[DisplacementSet] = None,
        sync_lag_s: Optional[float] = None,
        inputs: Optional[Dict[str, str]] = None,
        seeds: Optional[Dict[str, int]] = None,
        plot_dir: Optional[Path] = None,
    ) -> EvaluationReport:
        """
        Evaluate every (point, axis) of the prediction against the reference.

        Args:
            prediction: Displacements without refinement
            reference: Accelerometer-derived displacements, already time-aligned
            prediction_refined: Displacements with refinement, optional
            sync_lag_s: Lag applied during synchronization (recorded only)
            inputs: sha256 digests of the input files
            seeds: Seeds used upstream
            plot_dir: Write figures here when given

        Returns:
            EvaluationReport
        """
        plotter = PlotService(plot_dir) if plot_dir is not None else None
        entries: List[EvaluationEntry] = []

        for point_id in prediction.point_ids:
            ref_id = self._reference_point(point_id, reference)
            for axis in self.run_config.axes:
                pred = axis_series(prediction, point_id, axis, "prediction")
                ref = axis_series(reference, ref_id, axis, "reference")
                pred_aligned, ref_aligned = align_pair(pred, ref)
                without = metrics.evaluate_pair(pred_aligned.values, ref_aligned.values, axis)

                with_report = None
                amplitude_with = None
                refined_aligned = None
                if prediction_refined is not None:
                    refined = axis_series(prediction_refined, point_id, axis, "refined prediction")
                    refined_aligned, ref_for_refined = align_pair(refined, ref)
                    with_report = metrics.evaluate_pair(refined_aligned.values, ref_for_refined.values, axis)
                    amplitude_with = metrics.peak_to_peak(refined_aligned.values)

                entries.append(EvaluationEntry(
                    point_id=point_id,
                    axis=axis,
                    without_sgr=without,
                    with_sgr=with_report,
                    amplitude_without_sgr_mm=metrics.peak_to_peak(pred_aligned.values),
                    amplitude_with_sgr_mm=amplitude_with,
                    amplitude_reference_mm=metrics.peak_to_peak(ref_aligned.values),
                ))
                logger.info(
                    f"{point_id} {axis}: NRMSE {without.nrmse_range:.3f}, R {without.correlation:.3f}, "
                    f"RPPAE {without.rppae:.3f}"
                    + (f" | w/ SGR: NRMSE {with_report.nrmse_range:.3f}, R {with_report.correlation:.3f}, "
                       f"RPPAE {with_report.rppae:.3f}" if with_report else "")
                )

                if plotter is not None:
                    plotter.plot_pair(
                        point_id, axis, ref_aligned, pred_aligned, refined_aligned,
                        correlations={
                            "without_sgr": without.correlation,
                            **({"with_sgr": with_report.correlation} if with_report else {}),
                        },
                    )

        return EvaluationReport(
            tool=Config.TOOL_NAME,
            tool_version=Config.TOOL_VERSION,
            created_at=None if self.run_config.reproducible else datetime.now(timezone.utc),
            seeds=dict(seeds or {}),
            sync_lag_s=sync_lag_s,
            inputs=dict(inputs or {}),
            config=self.run_config.model_dump(mode="json"),
            entries=entries,
            summary=metrics.summarize(entries),
        )

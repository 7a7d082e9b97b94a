"""
Pipeline Service for orchestrating the displacement workflow.
Runs simulate -> triangulate -> refine -> reference -> sync -> evaluate inside one
output directory; every stage writes its files plus a JSON stage record.
"""
import logging
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterator, Optional

import numpy as np

from config import Config
from errors import ContractError, GirderKitError, StagnationError
from models import (
    AXES,
    DisplacementSet,
    EvaluationReport,
    PublishedCheckReport,
    RunConfig,
    StageRecord,
    Track2D,
)
from services import file_service, metrics
from services.evaluation_service import EvaluationService, axis_series
from services.reference_service import ReferenceService
from services.refinement_service import RefinementResult, RefinementService
from services.signal_processor import align_pair, synchronize
from services.simulation_service import SimulationService
from services.triangulation_service import TriangulationService
from services.validation_service import ValidationService

logger = logging.getLogger(__name__)


class PipelineStage:
    """Stage names; each stage writes <stage>.json next to its outputs."""
    SIMULATE = "simulate"
    TRIANGULATE = "triangulate"
    REFINE = "refine"
    REFERENCE = "reference"
    SYNC = "sync"
    EVALUATE = "evaluate"

    ORDER = (SIMULATE, TRIANGULATE, REFINE, REFERENCE, SYNC, EVALUATE)


class OutputFiles:
    """File names written into the output directory."""
    TRACKS_VIEW1 = "view1_tracks.csv"
    TRACKS_VIEW2 = "view2_tracks.csv"
    RIG = "rig.json"
    GROUND_TRUTH = "ground_truth.csv"
    ACCELEROMETER = "accel.csv"
    DISPLACEMENT = "displacement.csv"
    DISPLACEMENT_SGR = "displacement_sgr.csv"
    REFERENCE = "reference.csv"
    REFERENCE_ALIGNED = "reference_aligned.csv"
    REPORT = "report.json"
    PUBLISHED_CHECK = "published_check.json"
    PLOTS = "plots"

    @staticmethod
    def refined_tracks(view: str) -> str:
        return f"{view}_tracks_sgr.csv"

    @staticmethod
    def record(stage: str) -> str:
        return f"{stage}.json"


@contextmanager
def _located(path: Optional[Path]) -> Iterator[None]:
    """Attach the file being processed to errors that do not name one yet."""
    try:
        yield
    except GirderKitError as exc:
        raise exc.located(file=str(path) if path is not None else None)


def _rms(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(values))))


class PipelineService:
    """
    Service for running pipeline stages against files.

    Features:
    - Inputs from the run configuration, falling back to earlier stages' outputs
    - Epipolar correspondence gate before triangulate and refine
    - Atomic writes, input digests and stage records
    - Seed override applied to the simulation noise
    """

    def __init__(
        self,
        run_config: Optional[RunConfig] = None,
        out_dir: Optional[Path] = None,
        seed: Optional[int] = None,
        plots: bool = False,
    ):
        """
        Initialize pipeline service.

        Args:
            run_config: Bound run configuration (defaults when omitted)
            out_dir: Output directory (Config.OUTPUT_DIR when omitted)
            seed: Overrides simulation.noise.seed
            plots: Write evaluation figures
        """
        run_config = run_config or RunConfig().bind(Path.cwd())
        if seed is not None:
            base_dir = run_config._base_dir
            simulation = run_config.simulation.model_copy(
                update={"noise": run_config.simulation.noise.model_copy(update={"seed": seed})}
            )
            run_config = run_config.model_copy(update={"simulation": simulation}).bind(base_dir)
        self.run_config = run_config
        self.out_dir = Path(out_dir or Config.OUTPUT_DIR)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.plots = plots

    @property
    def seed(self) -> int:
        return self.run_config.simulation.noise.seed

    # =========================================================================
    # Helpers
    # =========================================================================

    def _output(self, name: str) -> Path:
        return self.out_dir / name

    def _input(self, field: str, fallback: Optional[str] = None, required: bool = True) -> Optional[Path]:
        """Configured input path, else an earlier stage's output in out_dir."""
        configured = self.run_config.resolve(field)
        if configured is not None:
            return self.run_config.require(field)
        if fallback is not None and self._output(fallback).exists():
            return self._output(fallback)
        if required:
            raise ContractError(
                f"No '{field}' input: set it in the run configuration or run the producing stage first"
                + (f" (expected {self._output(fallback)})" if fallback else ""),
                field=field,
            )
        return None

    def _created_at(self) -> Optional[datetime]:
        return None if self.run_config.reproducible else datetime.now(timezone.utc)

    def _record(
        self,
        stage: str,
        inputs: Dict[str, Optional[Path]],
        outputs: Dict[str, Path],
        details: Optional[Dict[str, Any]] = None,
    ) -> StageRecord:
        record = StageRecord(
            stage=stage,
            created_at=self._created_at(),
            seed=self.seed,
            preset=self.run_config.simulation.preset if stage == PipelineStage.SIMULATE else None,
            inputs=file_service.file_digests(inputs),
            outputs={role: path.name for role, path in outputs.items()},
            details=details or {},
        )
        file_service.write_model(record, self._output(OutputFiles.record(stage)))
        logger.info(f"Stage {stage} complete: {', '.join(p.name for p in outputs.values())}")
        return record

    def _read_stereo(self):
        """Rig and both track files, checked for epipolar consistency."""
        rig_path = self._input("rig", OutputFiles.RIG)
        view1_path = self._input("tracks_view1", OutputFiles.TRACKS_VIEW1)
        view2_path = self._input("tracks_view2", OutputFiles.TRACKS_VIEW2)
        rig, frame, _ = file_service.read_rig(rig_path)
        tracks1 = file_service.read_tracks(view1_path, "view1")
        tracks2 = file_service.read_tracks(view2_path, "view2")
        with _located(view2_path):
            TriangulationService.check_alignment(tracks1, tracks2)

        validation = ValidationService(rig).validate_correspondences(tracks1, tracks2)
        ValidationService.enforce(validation, track_file=str(view2_path))
        inputs = {"rig": rig_path, "tracks_view1": view1_path, "tracks_view2": view2_path}
        return rig, frame, tracks1, tracks2, validation, inputs

    @staticmethod
    def _baseline_displacement(result: RefinementResult, tracks: Track2D) -> DisplacementSet:
        baseline = result.baseline
        return DisplacementSet(
            point_ids=baseline.trajectory.point_ids,
            frame_index=tracks.frame_index,
            time_s=baseline.trajectory.time_s,
            disp_mm=baseline.disp_mm,
            origin_m=baseline.origin_m,
        )

    # =========================================================================
    # Stages
    # =========================================================================

    def simulate(self) -> StageRecord:
        """Render the configured preset into track, rig, ground-truth and accelerometer files."""
        settings = self.run_config.simulation
        output = SimulationService(settings).simulate(seed=self.seed)
        scenario = output.scenario

        outputs = {
            "tracks_view1": file_service.write_tracks(output.tracks1, self._output(OutputFiles.TRACKS_VIEW1)),
            "tracks_view2": file_service.write_tracks(output.tracks2, self._output(OutputFiles.TRACKS_VIEW2)),
            "rig": file_service.write_model(
                file_service.rig_to_document(
                    scenario.rig,
                    scenario.perpendicular_distance_m,
                    scenario.longitudinal_distance_m,
                    vertical_sign=scenario.frame.vertical_sign,
                    camera_station_m=scenario.camera_station_m,
                ),
                self._output(OutputFiles.RIG),
            ),
        }

        truth = output.ground_truth
        origin = truth.xyz.mean(axis=0)
        ground_truth = DisplacementSet(
            point_ids=truth.point_ids,
            frame_index=output.tracks1.frame_index,
            time_s=truth.time_s,
            disp_mm=(truth.xyz - origin) * 1000.0,
            origin_m=origin,
        )
        outputs["ground_truth"] = file_service.write_displacement(ground_truth, self._output(OutputFiles.GROUND_TRUTH))
        if output.accelerometer is not None:
            outputs["accelerometer"] = file_service.write_accelerometer(
                output.accelerometer, self._output(OutputFiles.ACCELEROMETER)
            )

        return self._record(PipelineStage.SIMULATE, {}, outputs, {
            "time_offset_s": output.time_offset_s,
            "noise_px": list(settings.noise.model_copy(update={"seed": self.seed}).sigmas()),
            "baseline_m": scenario.rig.measured_baseline,
            "yaw_deg": float(np.degrees(scenario.frame.yaw_angle)),
            "frames": output.tracks1.n_frames,
            "points": list(output.tracks1.point_ids),
        })

    def triangulate(self) -> StageRecord:
        """Un-refined displacement of every tracked point."""
        rig, frame, tracks1, tracks2, validation, inputs = self._read_stereo()
        service = TriangulationService(rig, frame, self.run_config.displacement_reference)
        with _located(inputs["tracks_view2"]):
            trajectory = service.triangulate(tracks1, tracks2)
            displacement = service.displacements(trajectory, tracks1.frame_index)

        outputs = {"displacement": file_service.write_displacement(displacement, self._output(OutputFiles.DISPLACEMENT))}
        return self._record(PipelineStage.TRIANGULATE, inputs, outputs, {
            "scale": service.scale,
            "frames": displacement.n_frames,
            "points": list(displacement.point_ids),
            "validation": validation.model_dump(mode="json"),
        })

    def refine(self) -> StageRecord:
        """
        Refine the configured view and write both w/o and w/ SGR displacements.

        A stagnated refinement still writes its best-so-far outputs before the error propagates.
        """
        rig, frame, tracks1, tracks2, validation, inputs = self._read_stereo()
        service = RefinementService(
            rig,
            frame,
            weights=self.run_config.sgr_weights,
            config=self.run_config.sgr,
            displacement_reference=self.run_config.displacement_reference,
        )
        stagnation: Optional[StagnationError] = None
        with _located(inputs["tracks_view2"]):
            try:
                result = service.refine(tracks1, tracks2)
            except StagnationError as exc:
                if exc.result is None:
                    raise
                stagnation, result = exc, exc.result

        before = self._baseline_displacement(result, tracks1)
        after = result.displacement
        view = result.tracks.view
        outputs = {
            "refined_tracks": file_service.write_tracks(result.tracks, self._output(OutputFiles.refined_tracks(view))),
            "displacement": file_service.write_displacement(before, self._output(OutputFiles.DISPLACEMENT)),
            "displacement_sgr": file_service.write_displacement(after, self._output(OutputFiles.DISPLACEMENT_SGR)),
        }

        diagnostics = dict(result.diagnostics)
        if self.run_config.reproducible:
            diagnostics.pop("elapsed_s", None)
        record = self._record(PipelineStage.REFINE, inputs, outputs, {
            "diagnostics": diagnostics,
            "z_rms_mm": {"without_sgr": _rms(before.disp_mm[..., 2]), "with_sgr": _rms(after.disp_mm[..., 2])},
            "validation": validation.model_dump(mode="json"),
        })
        if stagnation is not None:
            raise stagnation
        return record

    def reference(self) -> StageRecord:
        """Accelerometer-derived displacement on all three axes."""
        accel_path = self._input("accelerometer", OutputFiles.ACCELEROMETER)
        record = file_service.read_accelerometer(accel_path)

        settings = self.run_config.signals
        if "target_rate_hz" in self.run_config.model_fields_set:
            settings = settings.model_copy(update={"target_rate_hz": self.run_config.target_rate_hz})
        with _located(accel_path):
            series = ReferenceService(settings).derive_all(record, AXES)

        first = series[AXES[0]]
        disp_mm = np.stack([series[axis].d for axis in AXES], axis=-1)[:, None, :]
        reference = DisplacementSet(
            point_ids=(self.run_config.reference_point_id,),
            frame_index=np.arange(first.t.size),
            time_s=first.t,
            disp_mm=disp_mm,
        )
        outputs = {"reference": file_service.write_displacement(reference, self._output(OutputFiles.REFERENCE))}
        return self._record(PipelineStage.REFERENCE, {"accelerometer": accel_path}, outputs, {
            "onset_s": first.onset,
            "samples": int(first.t.size),
            "target_rate_hz": settings.target_rate_hz,
            "amplitude_mm": {axis: metrics.peak_to_peak(series[axis].d) for axis in AXES},
        })

    def sync(self) -> StageRecord:
        """
        Lag of the reference against the prediction on the vertical axis.

        The reference is shifted by the lag, sampled on the prediction grid and written
        with all three axes.
        """
        pred_path = self._input("prediction", OutputFiles.DISPLACEMENT)
        ref_path = self._input("reference", OutputFiles.REFERENCE)
        prediction = file_service.read_displacement(pred_path)
        reference = file_service.read_displacement(ref_path)

        point_id = (
            self.run_config.reference_point_id
            if self.run_config.reference_point_id in prediction.point_ids
            else prediction.point_ids[0]
        )
        ref_id = reference.point_ids[0] if point_id not in reference.point_ids else point_id
        pred_y = axis_series(prediction, point_id, "Y", "prediction")

        with _located(ref_path):
            pred_common, ref_common = align_pair(pred_y, axis_series(reference, ref_id, "Y", "reference"))
            lag = synchronize(pred_common, ref_common, self.run_config.max_lag_s)
            aligned = [
                align_pair(pred_y, axis_series(reference, ref_id, axis, "reference"), lag_s=lag)[1]
                for axis in AXES
            ]

        times = aligned[0].t
        frames = prediction.frame_index[np.searchsorted(prediction.time_s, times)]
        shifted = DisplacementSet(
            point_ids=(ref_id,),
            frame_index=frames,
            time_s=times,
            disp_mm=np.stack([s.values for s in aligned], axis=-1)[:, None, :],
        )
        outputs = {
            "reference_aligned": file_service.write_displacement(shifted, self._output(OutputFiles.REFERENCE_ALIGNED)),
        }
        return self._record(PipelineStage.SYNC, {"prediction": pred_path, "reference": ref_path}, outputs, {
            "lag_s": lag,
            "axis": "Y",
            "point_id": point_id,
            "samples": int(times.size),
        })

    def evaluate(self, published_tables: bool = False):
        """
        Metrics report of the prediction(s) against the aligned reference.

        Args:
            published_tables: Run the published amplitude-table cross-check instead

        Returns:
            EvaluationReport, or PublishedCheckReport in cross-check mode
        """
        if published_tables:
            check: PublishedCheckReport = metrics.check_published_tables()
            file_service.write_model(check, self._output(OutputFiles.PUBLISHED_CHECK))
            logger.info(
                f"Published-table check: {'consistent' if check.all_consistent else 'INCONSISTENT'} "
                f"({len(check.rows)} rows)"
            )
            return check

        pred_path = self._input("prediction", OutputFiles.DISPLACEMENT)
        refined_path = self._input("prediction_refined", OutputFiles.DISPLACEMENT_SGR, required=False)
        ref_path = self._input("reference", OutputFiles.REFERENCE_ALIGNED)

        sync_lag = None
        sync_record = self._output(OutputFiles.record(PipelineStage.SYNC))
        if sync_record.exists():
            sync_lag = file_service.read_model(sync_record, StageRecord).details.get("lag_s")

        prediction = file_service.read_displacement(pred_path)
        refined = file_service.read_displacement(refined_path) if refined_path is not None else None
        reference = file_service.read_displacement(ref_path)

        inputs = {"prediction": pred_path, "prediction_refined": refined_path, "reference": ref_path}
        with _located(ref_path):
            report = EvaluationService(self.run_config).evaluate(
                prediction,
                reference,
                prediction_refined=refined,
                sync_lag_s=sync_lag,
                inputs=file_service.file_digests(inputs),
                seeds={"noise": self.seed},
                plot_dir=self._output(OutputFiles.PLOTS) if self.plots else None,
            )
        file_service.write_model(report, self._output(OutputFiles.REPORT))
        logger.info(f"Stage {PipelineStage.EVALUATE} complete: {len(report.entries)} entries")
        return report

    def run(self) -> EvaluationReport:
        """Every stage in order inside the output directory."""
        logger.info(f"Running pipeline into {self.out_dir} (preset {self.run_config.simulation.preset}, seed {self.seed})")
        for stage in PipelineStage.ORDER[:-1]:
            getattr(self, stage)()
        return self.evaluate()

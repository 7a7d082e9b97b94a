"""
Refinement Service for structural geometry refinement (SGR).
Corrects the horizontal pixel track of one view so that the reconstructed motion
keeps near-zero longitudinal displacement while preserving lateral and vertical motion.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from errors import ContractError, StagnationError
from models import (
    BaselineTrajectories,
    DisplacementSet,
    SGRConfig,
    SGRWeights,
    StereoRig,
    StructureFrame,
    Track2D,
    Trajectory3D,
)
from services.triangulation_service import DisplacementReference, TriangulationService

logger = logging.getLogger(__name__)

GRADIENT_TOL = 1e-12


class TerminationReason:
    """Why the solver stopped."""
    GRADIENT = "gradient"
    OBJECTIVE = "objective"
    STEP = "step"
    MAX_ITERATIONS = "max_iterations"


@dataclass
class RefinementResult:
    """Output of a refinement run."""

    tracks: Track2D
    reference_tracks: Track2D
    correction_px: np.ndarray
    trajectory: Trajectory3D
    displacement: DisplacementSet
    baseline: BaselineTrajectories
    diagnostics: Dict[str, Any] = field(default_factory=dict)


class RefinementService:
    """
    Service for refining one view's horizontal track against structural priors.

    Objective blocks (each sqrt(w)-weighted and normalized):
    - longitudinal displacement and its temporal difference
    - lateral/vertical deviation from the baseline, absolute and differenced
    - pixel-correction magnitude
    """

    def __init__(
        self,
        rig: StereoRig,
        frame: StructureFrame,
        weights: Optional[SGRWeights] = None,
        config: Optional[SGRConfig] = None,
        displacement_reference: str = DisplacementReference.MEAN,
    ):
        """Initialize refinement service."""
        self.weights = weights or SGRWeights()
        self.config = config or SGRConfig()
        self.triangulation = TriangulationService(rig, frame, displacement_reference)
        self.refined_view = self.config.refined_view

    # =========================================================================
    # Problem setup
    # =========================================================================

    def baseline_triangulation(self, tracks1: Track2D, tracks2: Track2D) -> BaselineTrajectories:
        """Baseline trajectories (X0, Y0, Z0) and their differences."""
        return self.triangulation.baseline(tracks1, tracks2)

    def _split(self, tracks1: Track2D, tracks2: Track2D):
        if self.refined_view == "view2":
            return tracks2, tracks1
        return tracks1, tracks2

    def _scales(self, baseline: BaselineTrajectories) -> np.ndarray:
        """Characteristic motion scale per (point, axis), shape (P, 3)."""
        return np.maximum(baseline.disp_mm.std(axis=0), self.config.scale_floor_mm)

    def _problem(self, tracks1: Track2D, tracks2: Track2D, baseline: BaselineTrajectories) -> "_Problem":
        refined, reference = self._split(tracks1, tracks2)
        xn_ref = self.triangulation.undistort_view(reference.view, reference.uv, reference.frame_index)
        return _Problem(
            service=self,
            refined=refined,
            reference=reference,
            xn_reference=xn_ref,
            baseline=baseline,
            scales=self._scales(baseline),
        )

    # =========================================================================
    # Objective
    # =========================================================================

    def sgr_residuals(
        self,
        correction: np.ndarray,
        tracks1: Track2D,
        tracks2: Track2D,
        baseline: BaselineTrajectories,
    ) -> np.ndarray:
        """
        Stacked, weighted, normalized residual vector.

        Args:
            correction: Horizontal pixel correction of the refined view, shape (T, P)
            tracks1: View-1 tracks
            tracks2: View-2 tracks
            baseline: Baseline trajectories of the uncorrected tracks

        Returns:
            1-D residual vector whose squared norm is the SGR objective
        """
        problem = self._problem(tracks1, tracks2, baseline)
        return problem.residuals(problem.check(correction))

    def sgr_objective(
        self,
        correction: np.ndarray,
        tracks1: Track2D,
        tracks2: Track2D,
        baseline: BaselineTrajectories,
    ) -> float:
        r = self.sgr_residuals(correction, tracks1, tracks2, baseline)
        return float(r @ r)

    # =========================================================================
    # Solver
    # =========================================================================

    def refine(self, tracks1: Track2D, tracks2: Track2D) -> RefinementResult:
        """
        Minimize the SGR objective over the refined view's horizontal correction.

        Args:
            tracks1: View-1 tracks
            tracks2: View-2 tracks

        Returns:
            RefinementResult with corrected tracks and re-triangulated trajectories

        Raises:
            StagnationError: if no damping decreases the objective and the step is not negligible
        """
        started = time.perf_counter()
        baseline = self.baseline_triangulation(tracks1, tracks2)
        problem = self._problem(tracks1, tracks2, baseline)
        cfg = self.config

        c = np.zeros(problem.shape)
        disp = problem.displacement(c)
        r = problem.residuals(c, disp)
        f = float(r @ r)
        damping = cfg.initial_damping
        history: List[float] = [f]
        dampings: List[float] = []
        reason = TerminationReason.MAX_ITERATIONS
        iterations = 0

        logger.info(
            f"SGR start: refining {self.refined_view}, {problem.shape[0]} frames x {problem.shape[1]} points, "
            f"objective {f:.6g}"
        )

        for iteration in range(1, cfg.max_iterations + 1):
            iterations = iteration
            J = problem.jacobian(c, disp)
            grad = J.T @ r
            if np.max(np.abs(grad)) < GRADIENT_TOL:
                reason = TerminationReason.GRADIENT
                break

            JtJ = (J.T @ J).tocsc()
            scaling = np.maximum(JtJ.diagonal(), GRADIENT_TOL)
            accepted = False
            step = np.zeros_like(grad)
            for _ in range(cfg.damping_trials):
                A = (JtJ + sparse.diags(damping * scaling)).tocsc()
                step = spsolve(A, -grad)
                c_trial = c + step.reshape(problem.shape)
                disp_trial = problem.displacement(c_trial)
                r_trial = problem.residuals(c_trial, disp_trial)
                f_trial = float(r_trial @ r_trial)
                if f_trial < f:
                    accepted = True
                    break
                damping *= 10.0

            dampings.append(damping)
            if not accepted:
                if np.max(np.abs(step)) < cfg.step_tol_px:
                    reason = TerminationReason.STEP
                    break
                result = problem.result(c, disp, self._diagnostics(
                    iterations, history, dampings, "stagnation", c, started
                ))
                raise StagnationError(
                    f"SGR objective did not decrease at any of {cfg.damping_trials} damping levels "
                    f"(iteration {iteration}, objective {f:.6g})",
                    result=result,
                    diagnostics=result.diagnostics,
                )

            relative_change = (f - f_trial) / max(f, np.finfo(float).tiny)
            c, disp, r, f = c_trial, disp_trial, r_trial, f_trial
            damping = max(damping / 10.0, np.finfo(float).eps)
            history.append(f)
            logger.debug(f"SGR iteration {iteration}: objective {f:.9g}, damping {damping:.3g}")
            if relative_change < cfg.convergence_tol:
                reason = TerminationReason.OBJECTIVE
                break

        diagnostics = self._diagnostics(iterations, history, dampings, reason, c, started)
        logger.info(
            f"SGR done: {reason} after {iterations} iterations, objective {history[0]:.6g} -> {f:.6g}, "
            f"max |du| {diagnostics['max_abs_correction_px']:.4g} px"
        )
        return problem.result(c, disp, diagnostics)

    def _diagnostics(self, iterations, history, dampings, reason, c, started) -> Dict[str, Any]:
        return {
            "refined_view": self.refined_view,
            "iterations": iterations,
            "termination": reason,
            "objective_initial": history[0],
            "objective_final": history[-1],
            "objective_history": list(history),
            "damping_history": list(dampings),
            "max_abs_correction_px": float(np.max(np.abs(c))) if c.size else 0.0,
            "elapsed_s": time.perf_counter() - started,
        }


class _Problem:
    """Fixed data of one refinement run; evaluates displacements, residuals and the Jacobian."""

    def __init__(self, service: RefinementService, refined: Track2D, reference: Track2D,
                 xn_reference: np.ndarray, baseline: BaselineTrajectories, scales: np.ndarray):
        self.service = service
        self.refined = refined
        self.reference = reference
        self.xn_reference = xn_reference
        self.baseline = baseline
        self.scales = scales
        self.shape = refined.uv.shape[:2]

        w = service.weights
        self.sqrt_w = {
            "z_abs": np.sqrt(w.w_z_abs),
            "z_diff": np.sqrt(w.w_z_diff),
            "xy_abs": np.sqrt(w.w_xy_abs),
            "xy_diff": np.sqrt(w.w_xy_diff),
            "2d": np.sqrt(w.w_2d),
        }
        T, P = self.shape
        # Forward difference over time acting on (t, p)-ravelled vectors.
        D_T = sparse.diags([-np.ones(T - 1), np.ones(T - 1)], [0, 1], shape=(T - 1, T))
        self.diff_op = sparse.kron(D_T, sparse.identity(P), format="csr")

    def check(self, correction: np.ndarray) -> np.ndarray:
        correction = np.asarray(correction, dtype=np.float64)
        if correction.shape != self.shape:
            raise ContractError(
                f"Correction must have shape {self.shape}, got {correction.shape}", field="correction"
            )
        return correction

    def corrected_uv(self, c: np.ndarray) -> np.ndarray:
        uv = np.array(self.refined.uv)
        uv[..., 0] += c
        return uv

    def displacement(self, c: np.ndarray) -> np.ndarray:
        """Structure-frame displacement in mm about the baseline origin, shape (T, P, 3)."""
        tri = self.service.triangulation
        xn_refined = tri.undistort_view(self.refined.view, self.corrected_uv(c), self.refined.frame_index)
        if self.refined.view == "view2":
            xn1, xn2 = self.xn_reference, xn_refined
        else:
            xn1, xn2 = xn_refined, self.xn_reference
        xyz = tri.triangulate_normalized(xn1, xn2, self.refined.frame_index)
        return (xyz - self.baseline.origin_m) * 1000.0

    def residuals(self, c: np.ndarray, disp: Optional[np.ndarray] = None) -> np.ndarray:
        if disp is None:
            disp = self.displacement(c)
        sw = self.sqrt_w
        s = self.scales
        d0 = self.baseline.disp_mm
        diff = np.diff(disp, axis=0)
        diff0 = self.baseline.diff_mm
        pixel_scale = self.service.config.pixel_scale_px
        return np.concatenate([
            (sw["z_abs"] * disp[..., 2] / s[:, 2]).ravel(),
            (sw["z_diff"] * diff[..., 2] / s[:, 2]).ravel(),
            (sw["xy_abs"] * (disp[..., 0] - d0[..., 0]) / s[:, 0]).ravel(),
            (sw["xy_abs"] * (disp[..., 1] - d0[..., 1]) / s[:, 1]).ravel(),
            (sw["xy_diff"] * (diff[..., 0] - diff0[..., 0]) / s[:, 0]).ravel(),
            (sw["xy_diff"] * (diff[..., 1] - diff0[..., 1]) / s[:, 1]).ravel(),
            (sw["2d"] * c / pixel_scale).ravel(),
        ])

    def jacobian(self, c: np.ndarray, disp: np.ndarray) -> sparse.csr_matrix:
        """
        Sparse Jacobian of the residual vector.

        Each (t, p) position depends only on its own correction, so one forward
        difference over all unknowns yields every column.
        """
        h = self.service.config.jacobian_step_px
        g = (self.displacement(c + h) - disp) / h
        sw = self.sqrt_w
        s = self.scales
        gx = (g[..., 0] / s[:, 0]).ravel()
        gy = (g[..., 1] / s[:, 1]).ravel()
        gz = (g[..., 2] / s[:, 2]).ravel()
        n = gz.size
        pixel_scale = self.service.config.pixel_scale_px
        blocks = [
            sparse.diags(sw["z_abs"] * gz),
            sw["z_diff"] * (self.diff_op @ sparse.diags(gz)),
            sparse.diags(sw["xy_abs"] * gx),
            sparse.diags(sw["xy_abs"] * gy),
            sw["xy_diff"] * (self.diff_op @ sparse.diags(gx)),
            sw["xy_diff"] * (self.diff_op @ sparse.diags(gy)),
            sparse.identity(n) * (sw["2d"] / pixel_scale),
        ]
        return sparse.vstack(blocks, format="csr")

    def result(self, c: np.ndarray, disp: np.ndarray, diagnostics: Dict[str, Any]) -> RefinementResult:
        tri = self.service.triangulation
        refined_tracks = self.refined.with_uv(self.corrected_uv(c))
        xyz = self.baseline.origin_m + disp / 1000.0
        trajectory = Trajectory3D(
            point_ids=self.refined.point_ids, time_s=self.refined.time_s, xyz=xyz, frame="structure"
        )
        return RefinementResult(
            tracks=refined_tracks,
            reference_tracks=self.reference,
            correction_px=c,
            trajectory=trajectory,
            displacement=tri.displacements(trajectory, self.refined.frame_index),
            baseline=self.baseline,
            diagnostics=diagnostics,
        )


def refine(
    tracks1: Track2D,
    tracks2: Track2D,
    rig: StereoRig,
    frame: StructureFrame,
    weights: Optional[SGRWeights] = None,
    config: Optional[SGRConfig] = None,
) -> RefinementResult:
    """Functional entry point: RefinementService(...).refine(tracks1, tracks2)."""
    return RefinementService(rig, frame, weights, config).refine(tracks1, tracks2)

"""
Plot Service for evaluation figures.
Renders time-series overlays and parity scatters of predicted vs reference displacement.
"""
import logging
from pathlib import Path
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from models import ScalarSeries  # noqa: E402

logger = logging.getLogger(__name__)


class PlotColors:
    """Color definitions for evaluation figures."""
    REFERENCE = (0.0, 0.0, 0.0)           # Black
    WITHOUT_SGR = (0.0, 0.45, 0.85)       # Blue
    WITH_SGR = (0.85, 0.2, 0.1)           # Red
    IDENTITY_LINE = (0.5, 0.5, 0.5)       # Grey

    SCATTER_ALPHA = 0.4


class PlotService:
    """
    Service for generating static evaluation figures.

    Features:
    - Time-series overlay (reference, w/o SGR, w/ SGR)
    - Parity scatter with identity line and correlation in the legend
    """

    DPI = 150
    FIGSIZE = (10.0, 4.0)

    def __init__(self, output_dir: Path):
        """Initialize plot service."""
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def plot_pair(
        self,
        point_id: str,
        axis: str,
        reference: ScalarSeries,
        without_sgr: ScalarSeries,
        with_sgr: Optional[ScalarSeries] = None,
        correlations: Optional[dict] = None,
    ) -> List[Path]:
        """
        Write the overlay and parity figures of one (point, axis).

        Args:
            point_id: Point label
            axis: Structure axis
            reference: Aligned reference series (mm)
            without_sgr: Aligned prediction without refinement (mm)
            with_sgr: Aligned refined prediction (mm), optional
            correlations: Optional {"without_sgr": rho, "with_sgr": rho} for legends

        Returns:
            Paths of the written PNG files
        """
        correlations = correlations or {}
        stem = f"{point_id}_{axis}"
        return [
            self._overlay(stem, axis, reference, without_sgr, with_sgr),
            self._parity(stem, axis, reference, without_sgr, with_sgr, correlations),
        ]

    def _overlay(self, stem, axis, reference, without_sgr, with_sgr) -> Path:
        fig, ax = plt.subplots(figsize=self.FIGSIZE)
        try:
            ax.plot(reference.t, reference.values, color=PlotColors.REFERENCE, lw=1.2, label="Accelerometer")
            ax.plot(without_sgr.t, without_sgr.values, color=PlotColors.WITHOUT_SGR, lw=1.0, label="w/o SGR")
            if with_sgr is not None:
                ax.plot(with_sgr.t, with_sgr.values, color=PlotColors.WITH_SGR, lw=1.0, label="w/ SGR")
            ax.set_xlabel("Time (s)")
            ax.set_ylabel(f"{axis} displacement (mm)")
            ax.grid(True, alpha=0.3)
            ax.legend(loc="upper right")
            path = self.output_dir / f"{stem}_timeseries.png"
            fig.savefig(path, dpi=self.DPI, bbox_inches="tight")
        finally:
            plt.close(fig)
        logger.debug(f"Wrote {path}")
        return path

    def _parity(self, stem, axis, reference, without_sgr, with_sgr, correlations) -> Path:
        fig, ax = plt.subplots(figsize=(5.0, 5.0))
        try:
            series = [("without_sgr", "w/o SGR", without_sgr, PlotColors.WITHOUT_SGR)]
            if with_sgr is not None:
                series.append(("with_sgr", "w/ SGR", with_sgr, PlotColors.WITH_SGR))
            for key, label, pred, color in series:
                if key in correlations:
                    label = f"{label} (R = {correlations[key]:.3f})"
                ax.scatter(reference.values, pred.values, s=6, color=color, alpha=PlotColors.SCATTER_ALPHA, label=label)
            values = np.concatenate([reference.values] + [s[2].values for s in series])
            lo, hi = float(values.min()), float(values.max())
            ax.plot([lo, hi], [lo, hi], color=PlotColors.IDENTITY_LINE, lw=1.0, ls="--")
            ax.set_xlabel(f"Reference {axis} (mm)")
            ax.set_ylabel(f"Predicted {axis} (mm)")
            ax.set_aspect("equal", adjustable="box")
            ax.legend(loc="upper left")
            path = self.output_dir / f"{stem}_parity.png"
            fig.savefig(path, dpi=self.DPI, bbox_inches="tight")
        finally:
            plt.close(fig)
        logger.debug(f"Wrote {path}")
        return path

"""
Reference Service for accelerometer-derived displacement.
Runs the same processing chain, with the same settings, on every requested axis.
"""
import logging
from typing import Dict, Iterable, Optional

from models import AXES, AccelRecord, DisplacementSeries, SignalSettings
from services import signal_processor

logger = logging.getLogger(__name__)


class ReferenceService:
    """
    Service for deriving displacement references from accelerometer records.

    Features:
    - One onset shared by all axes (combined magnitude)
    - Per-axis Hampel, band-pass, integration and resampling
    - No per-dataset tuning: one SignalSettings for everything
    """

    def __init__(self, settings: Optional[SignalSettings] = None):
        """Initialize reference service."""
        self.settings = settings or SignalSettings()

    def detect_onset(self, record: AccelRecord) -> float:
        s = self.settings
        return signal_processor.detect_onset(
            record.t, record.ax, record.ay, record.az, s.onset_window_s, s.onset_threshold_factor
        )

    def derive(self, record: AccelRecord, axis: str, onset: Optional[float] = None) -> DisplacementSeries:
        """
        Displacement reference for one axis.

        Args:
            record: Accelerometer record in g
            axis: Structure axis (X -> ax, Y -> ay, Z -> az)
            onset: Precomputed onset; detected from the record when omitted

        Returns:
            DisplacementSeries in mm at the target rate
        """
        s = self.settings
        return signal_processor.derive_reference(
            record,
            axis,
            window_s=s.onset_window_s,
            threshold_factor=s.onset_threshold_factor,
            hampel_window_s=s.hampel_window_s,
            hampel_threshold=s.hampel_threshold,
            band=s.band_hz,
            order=s.filter_order,
            target_rate=s.target_rate_hz,
            onset=onset,
        )

    def derive_all(self, record: AccelRecord, axes: Iterable[str] = AXES) -> Dict[str, DisplacementSeries]:
        """Displacement references for several axes sharing one onset."""
        onset = self.detect_onset(record)
        logger.info(f"Accelerometer onset at {onset:.3f} s; deriving axes {list(axes)}")
        return {axis: self.derive(record, axis, onset=onset) for axis in axes}

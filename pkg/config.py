"""
Configuration management for Girder Kit.
Loads settings from environment variables with fail-fast validation.
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Load .env file
load_dotenv()

# Base directories
BASE_DIR = Path(__file__).parent.absolute()
DEFAULT_OUTPUT_DIR = Path(os.getenv("GIRDER_OUTPUT_DIR", "girder_out"))


class Config:
    """Application configuration with fail-fast validation."""

    TOOL_NAME = "girder-kit"
    TOOL_VERSION = "0.3.0"

    # Logging
    DEBUG = os.getenv("GIRDER_DEBUG", "false").lower() == "true"
    LOG_LEVEL = os.getenv("GIRDER_LOG_LEVEL", "INFO").upper()
    OUTPUT_DIR = DEFAULT_OUTPUT_DIR

    # SGR objective weights (applied to normalized residuals)
    SGR_W_Z_ABS = float(os.getenv("GIRDER_SGR_W_Z_ABS", "4.0"))
    SGR_W_Z_DIFF = float(os.getenv("GIRDER_SGR_W_Z_DIFF", "8.0"))
    SGR_W_XY_ABS = float(os.getenv("GIRDER_SGR_W_XY_ABS", "6.0"))
    SGR_W_XY_DIFF = float(os.getenv("GIRDER_SGR_W_XY_DIFF", "12.0"))
    SGR_W_2D = float(os.getenv("GIRDER_SGR_W_2D", "0.05"))

    # SGR solver controls
    SGR_MAX_ITERATIONS = int(os.getenv("GIRDER_SGR_MAX_ITERATIONS", "50"))
    SGR_CONVERGENCE_TOL = float(os.getenv("GIRDER_SGR_CONVERGENCE_TOL", "1e-8"))
    SGR_SCALE_FLOOR_MM = float(os.getenv("GIRDER_SGR_SCALE_FLOOR_MM", "0.1"))
    SGR_PIXEL_SCALE = float(os.getenv("GIRDER_SGR_PIXEL_SCALE", "1.0"))
    SGR_JACOBIAN_STEP_PX = float(os.getenv("GIRDER_SGR_JACOBIAN_STEP_PX", "1e-4"))
    SGR_INITIAL_DAMPING = float(os.getenv("GIRDER_SGR_INITIAL_DAMPING", "1e-3"))
    SGR_DAMPING_TRIALS = int(os.getenv("GIRDER_SGR_DAMPING_TRIALS", "12"))
    SGR_STEP_TOL_PX = float(os.getenv("GIRDER_SGR_STEP_TOL_PX", "1e-10"))

    # Undistortion (fixed-point inversion of the distortion map)
    UNDISTORT_MAX_ITERATIONS = int(os.getenv("GIRDER_UNDISTORT_MAX_ITERATIONS", "20"))
    UNDISTORT_TOL = float(os.getenv("GIRDER_UNDISTORT_TOL", "1e-10"))

    # Accelerometer reference chain
    ACCEL_NOMINAL_RATE_HZ = float(os.getenv("GIRDER_ACCEL_RATE_HZ", "64.0"))
    ONSET_WINDOW_S = float(os.getenv("GIRDER_ONSET_WINDOW_S", "1.0"))
    ONSET_THRESHOLD_FACTOR = float(os.getenv("GIRDER_ONSET_THRESHOLD_FACTOR", "5.0"))
    HAMPEL_WINDOW_S = float(os.getenv("GIRDER_HAMPEL_WINDOW_S", "0.75"))
    HAMPEL_THRESHOLD = float(os.getenv("GIRDER_HAMPEL_THRESHOLD", "3.5"))
    BANDPASS_LOW_HZ = float(os.getenv("GIRDER_BANDPASS_LOW_HZ", "1.0"))
    BANDPASS_HIGH_HZ = float(os.getenv("GIRDER_BANDPASS_HIGH_HZ", "10.0"))
    BANDPASS_ORDER = int(os.getenv("GIRDER_BANDPASS_ORDER", "4"))
    TARGET_RATE_HZ = float(os.getenv("GIRDER_TARGET_RATE_HZ", "30.0"))

    # Synchronization
    SYNC_MAX_LAG_S = float(os.getenv("GIRDER_SYNC_MAX_LAG_S", "2.0"))

    # Correspondence gate (epipolar residual, normalized image units)
    EPIPOLAR_WARNING = float(os.getenv("GIRDER_EPIPOLAR_WARNING", "2e-3"))
    EPIPOLAR_FAILURE = float(os.getenv("GIRDER_EPIPOLAR_FAILURE", "5e-2"))

    # Synthetic scenes
    DEFAULT_PRESET = os.getenv("GIRDER_DEFAULT_PRESET", "data2-mid")
    DEFAULT_SEED = int(os.getenv("GIRDER_DEFAULT_SEED", "0"))

    @classmethod
    def validate(cls):
        """Validate required configuration. Fail-fast if invalid."""
        errors = []

        if cls.LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"GIRDER_LOG_LEVEL must be a logging level name, got: {cls.LOG_LEVEL}")

        weights = (cls.SGR_W_Z_ABS, cls.SGR_W_Z_DIFF, cls.SGR_W_XY_ABS, cls.SGR_W_XY_DIFF, cls.SGR_W_2D)
        if any(w < 0 for w in weights):
            errors.append(f"SGR weights must be nonnegative, got: {weights}")
        elif not any(w > 0 for w in weights):
            errors.append("At least one SGR weight must be positive")

        if cls.SGR_MAX_ITERATIONS < 1:
            errors.append(f"GIRDER_SGR_MAX_ITERATIONS must be >= 1, got: {cls.SGR_MAX_ITERATIONS}")

        if cls.SGR_CONVERGENCE_TOL <= 0 or cls.SGR_SCALE_FLOOR_MM <= 0 or cls.SGR_PIXEL_SCALE <= 0:
            errors.append("SGR convergence tolerance, scale floor and pixel scale must be positive")

        if not 0 < cls.BANDPASS_LOW_HZ < cls.BANDPASS_HIGH_HZ:
            errors.append(
                f"Band-pass edges must satisfy 0 < low < high, got: {cls.BANDPASS_LOW_HZ}, {cls.BANDPASS_HIGH_HZ}"
            )

        if cls.TARGET_RATE_HZ <= 0:
            errors.append(f"GIRDER_TARGET_RATE_HZ must be positive, got: {cls.TARGET_RATE_HZ}")

        if not 0 < cls.EPIPOLAR_WARNING < cls.EPIPOLAR_FAILURE:
            errors.append("Epipolar thresholds must satisfy 0 < warning < failure")

        if errors:
            raise ValueError("Configuration errors:\n" + "\n".join(f"  - {e}" for e in errors))

        return True


# Validate on import
Config.validate()

"""
Shared pytest fixtures for Girder Kit.
"""
import json
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from models import (
    CameraIntrinsics,
    CameraPose,
    CameraView,
    NoiseSpec,
    SimulationSettings,
    StereoRig,
)
from services.simulation_service import SimulationService, build_scenario


def look_at(center: np.ndarray, target: np.ndarray) -> np.ndarray:
    """World->camera rotation of a camera at center whose optical axis passes through target."""
    z = (target - center) / np.linalg.norm(target - center)
    x = np.cross([0.0, 1.0, 0.0], z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.vstack([x, y, z])


def random_scene(rng: np.random.Generator):
    """
    Random noiseless two-view scene.

    Depth 5-50 m, baseline 1-10 m, focal 500-4000 px, nonzero distortion; cam2 is
    aimed at the point with a small random attitude error.

    Returns:
        (rig, world point)
    """
    depth = rng.uniform(5.0, 50.0)
    baseline = rng.uniform(1.0, 10.0)
    point = depth * np.array([rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15), 1.0])

    def intrinsics():
        f = rng.uniform(500.0, 4000.0)
        dist = (rng.uniform(-0.05, 0.05), rng.uniform(-0.01, 0.01),
                rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3), 0.0)
        return CameraIntrinsics(f, f * rng.uniform(0.98, 1.02), 960.0, 540.0, 0.0, dist)

    center2 = np.array([baseline, rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)])
    R2 = Rotation.from_rotvec(rng.uniform(-0.03, 0.03, size=3)).as_matrix() @ look_at(center2, point)
    rig = StereoRig(
        cam1=CameraView(intrinsics(), CameraPose.identity()),
        cam2=CameraView(intrinsics(), CameraPose(R=R2, t=-R2 @ center2)),
        measured_baseline=float(np.linalg.norm(center2)),
    )
    return rig, point


@pytest.fixture
def scenario():
    return build_scenario("data2-mid")


@pytest.fixture
def clean_simulation():
    return SimulationService(SimulationSettings(preset="data2-mid")).simulate()


@pytest.fixture
def noisy_simulation():
    settings = SimulationSettings(preset="data2-mid", noise=NoiseSpec(view2_u_px=0.5, seed=3))
    return SimulationService(settings).simulate()


@pytest.fixture
def write_config(tmp_path):
    """Write a run configuration JSON and return its path."""

    def _write(name: str = "run.json", **fields) -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(fields, indent=2), encoding="utf-8")
        return path

    return _write

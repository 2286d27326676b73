import json
import os
import tempfile
from typing import Dict

import numpy as np
import pytest


def pytest_configure():
    """Configure test environment before running tests."""
    # Keep log files out of the working tree
    os.environ.setdefault("KAC_LOG_DIR", os.path.join(tempfile.gettempdir(), "kac_reservoir_test_logs"))
    os.environ.setdefault("KAC_LOG_LEVEL", "WARNING")


@pytest.fixture
def params():
    from src.kac.model import ModelParams

    return ModelParams(mu=20.0, rho=1.0, lam=1.0)


@pytest.fixture
def free_params():
    """Collision-free rates: the thermostat alone."""
    from src.kac.model import ModelParams

    return ModelParams(mu=20.0, rho=1.0, lam=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def coarse_grid():
    from src.kac.grid import VelocityGrid

    return VelocityGrid(v_max=4.0, dv=0.05)


@pytest.fixture
def raw_config() -> Dict:
    """Minimal valid experiment config.

    Returns:
        Dict: Decoded JSON document
    """
    return {
        "seed": 7,
        "params": {"mu": 4.0, "rho": 1.0, "lambda": 1.0},
        "initial": {"kind": "product", "eta": 2.0, "law": {"kind": "maxwellian"}},
        "checkpoints": [0.0, 0.5, 1.0],
        "replicas": 20,
    }


@pytest.fixture
def config_file(tmp_path, raw_config):
    """Write raw_config to a temporary JSON file and return its path."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw_config))
    return str(path)

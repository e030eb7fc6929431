from pathlib import Path

import pytest

from servokit.config import load_config

REPO = Path(__file__).resolve().parent.parent
CONFIGS = REPO / "configs"
SCENARIOS = REPO / "scenarios"
SCENES = REPO / "scenes"


@pytest.fixture(scope="session")
def tribus_path() -> Path:
    return CONFIGS / "tribus.json"


@pytest.fixture(scope="session")
def shared_bus_path() -> Path:
    return CONFIGS / "shared_bus.json"


@pytest.fixture(scope="session")
def cfg(tribus_path):
    return load_config(tribus_path)


@pytest.fixture(scope="session")
def shared_cfg(shared_bus_path):
    return load_config(shared_bus_path)


@pytest.fixture(scope="session")
def topology(cfg):
    return cfg.topology


@pytest.fixture(scope="session")
def load_model(cfg):
    return cfg.load_model


@pytest.fixture(scope="session")
def left_arm(cfg):
    return cfg.chains["left_arm"]

"""Shared fixtures for all test modules."""
import os

import numpy as np
import pytest
from fastapi.testclient import TestClient

os.environ.setdefault("API_KEY", "TEST-KEY-2026")
os.environ.setdefault("APP_ENV", "development")

from app.main import create_app
from app.models.config import AppConfig
from app.repository.run_store import RunStore


def small_config(tmp_path, **run_overrides) -> AppConfig:
    """Tiny networks and short synthetic traces: whole workflows finish in seconds."""
    run = {
        "scenario": "event-spike",
        "synthetic_train_steps": 240,
        "synthetic_test_steps": 40,
        "episodes": 2,
        "steps_per_episode": 10,
        "seed": 7,
        "output_dir": str(tmp_path / "runs"),
        "parallel_eval": False,
    }
    run.update(run_overrides)
    return AppConfig.model_validate(
        {
            "forecaster": {"seq_len": 4, "hidden1": 4, "hidden2": 3, "epochs": 2, "batch": 32},
            "sac": {"hidden": 8, "batch": 4, "warmup_steps": 5, "buffer_capacity": 500},
            "run": run,
        }
    )


@pytest.fixture
def config(tmp_path) -> AppConfig:
    return small_config(tmp_path)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def runs_dir(tmp_path):
    path = tmp_path / "runs"
    path.mkdir()
    return path


@pytest.fixture
def store(runs_dir) -> RunStore:
    return RunStore(runs_dir)


@pytest.fixture
def client(runs_dir):
    return TestClient(create_app(runs_dir), raise_server_exceptions=False)


@pytest.fixture
def auth_headers():
    return {"X-API-Key": "TEST-KEY-2026"}

"""Shared fixtures for the cqms tests."""

import json
from pathlib import Path
from typing import Any, Callable, Dict

import numpy as np
import pytest

from cqms_logger import setup_logging
from cqms_metrics import two_point_lipnorm
from cqms_nctorus import clock_shift_algebra, torus_lipnorm
from cqms_opsys import OperatorSystem


@pytest.fixture(autouse=True, scope="session")
def quiet_logging():
    setup_logging("WARNING")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="module")
def two_point() -> OperatorSystem:
    return OperatorSystem.two_point()


@pytest.fixture(scope="module")
def unit_pair():
    """Two points at distance 1."""
    return two_point_lipnorm(1.0)


@pytest.fixture(scope="module")
def torus3():
    """Lattice gauge Lip-norm on the q=3, p=1 clock-shift model."""
    return torus_lipnorm(clock_shift_algebra(2, 3, 1))


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[[Dict[str, Any], str], Path]:
    def write(document: Dict[str, Any], name: str = "config.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path
    return write

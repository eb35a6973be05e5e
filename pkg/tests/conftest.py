import json
from pathlib import Path
from typing import Any, Callable

import numpy as np
import pytest

from ipflab.models import MAFactor, ScalarWeight, StackedShift, WhiteNoise


@pytest.fixture
def white_noise() -> WhiteNoise:
    return WhiteNoise(2)


@pytest.fixture
def ma1() -> MAFactor:
    return MAFactor(np.array([np.eye(2), [[0.5, 0.2], [0.0, 0.3]]], dtype=complex))


@pytest.fixture
def ma_scalar() -> MAFactor:
    # θ(z) = 1 + 0.5z
    return MAFactor(np.array([[[1.0]], [[0.5]]]))


@pytest.fixture
def scalar_weight() -> ScalarWeight:
    return ScalarWeight(np.eye(2))


@pytest.fixture
def stacked_shift() -> StackedShift:
    return StackedShift()


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[..., Path]:
    def write(raw: dict[str, Any], name: str = "config.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(raw), encoding="utf-8")
        return path

    return write

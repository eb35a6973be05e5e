"""Tests for experiment configuration validation and loading."""

import json
from pathlib import Path
from typing import Any, Callable

import numpy as np
import pytest

from ipflab.common import ConfigError
from ipflab.config import DEFAULT_OUTPUT_DIR, apply_overrides, build_config, load_raw, validate
from ipflab.models import MAFactor, StackedShift, Transposed, WhiteNoise


CONFIG_DIR = Path(__file__).parent.parent / "configs"


def _raw(**overrides: Any) -> dict[str, Any]:
    raw: dict[str, Any] = {"model": {"variant": "white_noise", "q": 2}, "tasks": ["conditions", "report"]}
    raw.update(overrides)
    return raw


def test_valid_config_has_no_diagnostics() -> None:
    assert validate(_raw()) == []


def test_build_config_fills_defaults() -> None:
    config = build_config(_raw())
    assert isinstance(config.model, WhiteNoise) and config.model.q == 2
    assert config.tasks == ("conditions", "report")
    assert config.output_dir == Path(DEFAULT_OUTPUT_DIR)
    assert config.seed == 0 and config.m == 12
    assert config.params["factorize"].order == 16
    assert config.params["report"].start == {"lag": 0, "component": 1}


def test_partial_params_are_merged() -> None:
    config = build_config(_raw(params={"angles": {"N_list": [2, 3]}}))
    assert config.params["angles"].N_list == [2, 3]
    assert config.params["angles"].tol == 1e-10


def test_bad_order_gives_single_diagnostic() -> None:
    diagnostics = validate(_raw(params={"factorize": {"order": 100}}))
    assert len(diagnostics) == 1
    assert "params.factorize.order" in diagnostics[0]


def test_order_above_cap() -> None:
    diagnostics = validate(_raw(params={"factorize": {"order": 64, "cap": 32}}))
    assert diagnostics == ["params.factorize.order: must not exceed cap"]


def test_start_component_outside_model_dimension() -> None:
    diagnostics = validate(_raw(params={"report": {"start": {"lag": 0, "component": 3}}}))
    assert len(diagnostics) == 1
    assert "params.report.start.component" in diagnostics[0]


@pytest.mark.parametrize(
    "raw, fragment",
    [
        (_raw(colour="blue"), "unknown field 'colour'"),
        (_raw(model={"variant": "arma"}), "unknown variant \"arma\""),
        (_raw(model={"variant": "white_noise", "q": 0}), "model.q"),
        (_raw(tasks=["conditions", "plot"]), "unknown task \"plot\""),
        (_raw(tasks=["angles", "angles"]), "duplicate task 'angles'"),
        (_raw(tasks=[]), "non-empty list of task names"),
        (_raw(m=2), "m: grid exponent"),
        (_raw(seed=-1), "seed"),
        (_raw(params={"angles": {"N_list": [4, 2]}}), "strictly ascending"),
        (_raw(params={"intersect": {"n_list": [8], "N_list": [4, 8]}}), "needs N > n"),
        (_raw(params={"report": {"degree": 1024}}), "G/4"),
        (_raw(params={"report": {"isometry_rows": [[1, 2, 3]]}}), "model dimension is 2"),
        ({"tasks": ["conditions"]}, "missing field 'model'"),
    ],
)
def test_invalid_configs(raw: dict[str, Any], fragment: str) -> None:
    diagnostics = validate(raw)
    assert any(fragment in d for d in diagnostics), diagnostics


def test_ma_factor_entries_accept_complex_pairs() -> None:
    config = build_config(_raw(model={"variant": "ma_factor", "coeffs": [[[1, 0], [0, 1]], [[[0.5, 0.5], 0], [0, 0.3]]]}))
    assert isinstance(config.model, MAFactor)
    assert config.model.coeffs[1][0, 0] == 0.5 + 0.5j


def test_ma_factor_rejects_mismatched_sizes() -> None:
    diagnostics = validate(_raw(model={"variant": "ma_factor", "coeffs": [[[1, 0], [0, 1]], [[0.5]]]}))
    assert any("same size" in d for d in diagnostics)


def test_ma_factor_rejects_singular_leading_coefficient() -> None:
    diagnostics = validate(_raw(model={"variant": "ma_factor", "coeffs": [[[1, 0], [0, 0]]]}))
    assert any("invertible" in d for d in diagnostics)


def test_nested_models() -> None:
    config = build_config(_raw(model={"variant": "transposed", "base": {"variant": "stacked_shift"}}))
    assert isinstance(config.model, Transposed)
    assert isinstance(config.model.base, StackedShift)


def test_build_config_raises_with_all_diagnostics() -> None:
    with pytest.raises(ConfigError) as exc_info:
        build_config(_raw(seed=-1, m=30))
    assert len(exc_info.value.diagnostics) == 2
    assert str(exc_info.value).startswith("Invalid configuration:")


def test_load_raw(write_config: Callable[..., Path], tmp_path: Path) -> None:
    assert load_raw(write_config(_raw())) == _raw()
    broken = tmp_path / "broken.json"
    broken.write_text("{ nope", encoding="utf-8")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_raw(broken)


def test_apply_overrides_leaves_input_untouched() -> None:
    raw = _raw(m=10)
    overridden = apply_overrides(raw, output_dir="out", m=8)
    assert overridden["output_dir"] == "out" and overridden["m"] == 8
    assert raw["m"] == 10 and "output_dir" not in raw
    assert apply_overrides(raw) == raw


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_are_valid(path: Path) -> None:
    raw = json.loads(path.read_text(encoding="utf-8"))
    assert validate(raw) == []
    config = build_config(raw)
    np.testing.assert_array_equal(config.model.autocovariance(0), config.model.autocovariance(0).conj().T)

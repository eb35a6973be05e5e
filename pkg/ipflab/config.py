#
# ipflab
#
# A numerical laboratory for the intersection of past and future of multivariate stationary processes.
#
# Copyright (c) 2025-2026 Thomas Kuhlmann
#
# Licensed under the MIT License. See LICENSE file in the project root for license information.
#

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from ipflab.common import ComplexArray, ConfigError, ConfigNamespace
from ipflab.factorization import ORDER_CAP, is_power_of_two
from ipflab.models import DensityModel, MAFactor, ScalarWeight, StackedShift, Transposed, WhiteNoise
from ipflab.quadrature import GRID_MAX_EXPONENT, GRID_MIN_EXPONENT


TASKS: tuple[str, ...] = ("autocov", "factorize", "conditions", "angles", "intersect", "predictor", "report")

TOP_LEVEL_KEYS: frozenset[str] = frozenset({"model", "tasks", "params", "output_dir", "seed", "m"})

MODEL_KEYS: dict[str, frozenset[str]] = {
    "white_noise": frozenset({"variant", "q"}),
    "ma_factor": frozenset({"variant", "coeffs"}),
    "scalar_weight": frozenset({"variant", "B"}),
    "stacked_shift": frozenset({"variant", "base"}),
    "transposed": frozenset({"variant", "base"}),
}

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "autocov": {"K": 8, "source": "closed-form"},
    "factorize": {"order": 16, "tol": 1e-10, "cap": ORDER_CAP},
    "conditions": {},
    "angles": {"N_list": [1, 2, 4, 8, 16], "tol": 1e-10},
    "intersect": {"n_list": [1, 2, 3], "N_list": [4, 8, 16], "tol": 1e-8},
    "predictor": {"N": 64},
    "report": {"polynomials": 20, "degree": 3, "iterations": 10, "window": 8, "start": {"lag": 0, "component": 1}, "isometry_rows": None, "phase_m": 6},
}

DEFAULT_OUTPUT_DIR: str = "ipflab-output"
DEFAULT_SEED: int = 0
DEFAULT_GRID_EXPONENT: int = 12


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    raw: dict[str, Any]  # echoed into the report
    model: DensityModel
    tasks: tuple[str, ...]
    params: dict[str, ConfigNamespace]
    output_dir: Path
    seed: int
    m: int


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


class ConfigValidator:
    def __init__(self) -> None:
        self._errors: list[str] = []

    def add_error(self, msg: str) -> None:
        self._errors.append(msg)

    @property
    def errors(self) -> list[str]:
        return list(self._errors)

    # Value helpers
    def parse_complex(self, value: Any, path: str) -> Optional[complex]:
        if _is_number(value):
            return complex(value)
        if isinstance(value, list) and len(value) == 2 and all(_is_number(v) for v in value):
            return complex(value[0], value[1])
        self.add_error(f"{path}: expected a number or an [re, im] pair, got {json.dumps(value)}")
        return None

    def parse_matrix(self, value: Any, path: str) -> Optional[ComplexArray]:
        if not isinstance(value, list) or not value or not all(isinstance(row, list) for row in value):
            self.add_error(f"{path}: expected a non-empty list of rows")
            return None
        size = len(value)
        if any(len(row) != size for row in value):
            self.add_error(f"{path}: expected a square {size}x{size} matrix, got row lengths {[len(row) for row in value]}")
            return None
        entries = [[self.parse_complex(v, f"{path}[{i}][{j}]") for j, v in enumerate(row)] for i, row in enumerate(value)]
        if any(v is None for row in entries for v in row):
            return None
        return np.array(entries, dtype=complex)

    def _check_keys(self, section: Any, allowed: frozenset[str], path: str) -> bool:
        if not isinstance(section, dict):
            self.add_error(f"{path}: expected an object")
            return False
        for key in sorted(set(section) - allowed):
            self.add_error(f"{path}: unknown field '{key}' (allowed: {', '.join(sorted(allowed))})")
        return True

    # Model
    def build_model(self, spec: Any, path: str = "model") -> Optional[DensityModel]:
        if not isinstance(spec, dict):
            self.add_error(f"{path}: expected an object with a 'variant' field")
            return None
        variant = spec.get("variant")
        if variant not in MODEL_KEYS:
            self.add_error(f"{path}.variant: unknown variant {json.dumps(variant)} (use {', '.join(MODEL_KEYS)})")
            return None
        self._check_keys(spec, MODEL_KEYS[variant], path)
        try:
            return self._build_variant(variant, spec, path)
        except ValueError as e:
            self.add_error(f"{path}: {e}")
            return None

    def _build_variant(self, variant: str, spec: dict[str, Any], path: str) -> Optional[DensityModel]:
        if variant == "white_noise":
            q = spec.get("q", 1)
            if not _is_int(q) or q < 1:
                self.add_error(f"{path}.q: must be an integer >= 1, got {json.dumps(q)}")
                return None
            return WhiteNoise(q)
        if variant == "ma_factor":
            coeffs = spec.get("coeffs")
            if not isinstance(coeffs, list) or not coeffs:
                self.add_error(f"{path}.coeffs: expected a non-empty list of matrices")
                return None
            matrices = [self.parse_matrix(c, f"{path}.coeffs[{i}]") for i, c in enumerate(coeffs)]
            if any(mat is None for mat in matrices):
                return None
            if len({mat.shape for mat in matrices if mat is not None}) != 1:
                self.add_error(f"{path}.coeffs: all matrices must have the same size")
                return None
            return MAFactor(np.array(matrices))
        if variant == "scalar_weight":
            B = self.parse_matrix(spec.get("B"), f"{path}.B")
            return ScalarWeight(B) if B is not None else None
        base = self.build_model(spec.get("base", {"variant": "white_noise", "q": 1}), f"{path}.base")
        if base is None:
            return None
        return StackedShift(base) if variant == "stacked_shift" else Transposed(base)

    # Parameters
    def _check_params(self, name: str, section: dict[str, Any], q: Optional[int], m: int) -> None:
        path = f"params.{name}"

        def check(failed: Callable[[], bool], msg: str) -> None:
            try:
                if failed():
                    self.add_error(f"{path}.{msg}")
            except (TypeError, IndexError):
                pass  # malformed value, reported by its type check

        def positive_int(key: str) -> None:
            check(lambda: not _is_int(section[key]) or section[key] < 1, f"{key}: must be an integer >= 1, got {json.dumps(section[key])}")

        def positive_float(key: str) -> None:
            check(lambda: not _is_number(section[key]) or section[key] <= 0, f"{key}: tolerance must be > 0, got {json.dumps(section[key])}")

        def ascending(key: str) -> None:
            value = section[key]
            valid = isinstance(value, list) and bool(value) and all(_is_int(v) and v >= 1 for v in value)
            check(lambda: not valid, f"{key}: must be a non-empty list of integers >= 1, got {json.dumps(value)}")
            check(lambda: valid and any(b <= a for a, b in zip(value, value[1:])), f"{key}: must be strictly ascending, got {json.dumps(value)}")

        if name == "autocov":
            positive_int("K")
            check(lambda: section["source"] not in ("closed-form", "quadrature"), f"source: must be 'closed-form' or 'quadrature', got {json.dumps(section['source'])}")
            check(lambda: section["source"] == "quadrature" and _is_int(section["K"]) and 2 * section["K"] >= 2**m, f"K: quadrature source needs K < G/2 = {2 ** (m - 1)} for m={m}")
        elif name == "factorize":
            for key in ("order", "cap"):
                check(lambda key=key: not _is_int(section[key]) or not is_power_of_two(section[key]), f"{key}: must be a power of two, got {json.dumps(section[key])}")
            check(lambda: _is_int(section["order"]) and _is_int(section["cap"]) and section["order"] > section["cap"], "order: must not exceed cap")
            positive_float("tol")
        elif name == "angles":
            ascending("N_list")
            positive_float("tol")
        elif name == "intersect":
            ascending("n_list")
            ascending("N_list")
            positive_float("tol")
            n_list, N_list = section["n_list"], section["N_list"]
            check(lambda: n_list[0] >= N_list[-1], f"n_list: every pair needs N > n, but n={n_list[0]} is not below the largest N={N_list[-1]}")
        elif name == "predictor":
            positive_int("N")
        elif name == "report":
            for key in ("polynomials", "iterations", "window"):
                positive_int(key)
            check(lambda: not _is_int(section["degree"]) or section["degree"] < 0, f"degree: must be an integer >= 0, got {json.dumps(section['degree'])}")
            check(lambda: _is_int(section["degree"]) and 4 * section["degree"] >= 2**m, f"degree: must be < G/4 = {2 ** (m - 2)} for m={m}")
            check(lambda: not _is_int(section["phase_m"]) or not GRID_MIN_EXPONENT <= section["phase_m"] <= GRID_MAX_EXPONENT, f"phase_m: must be an integer in {GRID_MIN_EXPONENT}..{GRID_MAX_EXPONENT}")
            self._check_start(section["start"], section["window"], q, f"{path}.start")
            self._check_isometry_rows(section["isometry_rows"], q, f"{path}.isometry_rows")

    def _check_start(self, start: Any, window: Any, q: Optional[int], path: str) -> None:
        if not self._check_keys(start, frozenset({"lag", "component"}), path):
            return
        lag, component = start.get("lag"), start.get("component")
        if not _is_int(lag) or (_is_int(window) and not -window <= lag <= window):
            self.add_error(f"{path}.lag: must be an integer inside the projection window, got {json.dumps(lag)}")
        if not _is_int(component) or component < 1 or (q is not None and component > q):
            self.add_error(f"{path}.component: must be an integer in 1..{q if q is not None else 'q'}, got {json.dumps(component)}")

    def _check_isometry_rows(self, rows: Any, q: Optional[int], path: str) -> None:
        if rows is None:
            return
        if not isinstance(rows, list) or not rows:
            self.add_error(f"{path}: expected a non-empty list of rows")
            return
        for i, row in enumerate(rows):
            if not isinstance(row, list):
                self.add_error(f"{path}[{i}]: expected a list of {q} entries")
            elif q is not None and len(row) != q:
                self.add_error(f"{path}[{i}]: has {len(row)} entries, model dimension is {q}")
            else:
                for j, v in enumerate(row):
                    self.parse_complex(v, f"{path}[{i}][{j}]")

    # Main hook
    def validate(self, raw: Any) -> Optional[ExperimentConfig]:
        self._errors = []
        if not self._check_keys(raw, TOP_LEVEL_KEYS, "config"):
            return None
        if "model" not in raw:
            self.add_error("config: missing field 'model'")
        model = self.build_model(raw["model"]) if "model" in raw else None

        tasks = raw.get("tasks")
        if not isinstance(tasks, list) or not tasks:
            self.add_error(f"tasks: expected a non-empty list of task names ({', '.join(TASKS)})")
            tasks = []
        for task in tasks:
            if task not in TASKS:
                self.add_error(f"tasks: unknown task {json.dumps(task)} (use {', '.join(TASKS)})")
        for task in sorted({t for t in tasks if isinstance(t, str) and tasks.count(t) > 1}):
            self.add_error(f"tasks: duplicate task '{task}'")

        m = raw.get("m", DEFAULT_GRID_EXPONENT)
        if not _is_int(m) or not GRID_MIN_EXPONENT <= m <= GRID_MAX_EXPONENT:
            self.add_error(f"m: grid exponent must be an integer in {GRID_MIN_EXPONENT}..{GRID_MAX_EXPONENT}, got {json.dumps(m)}")
            m = DEFAULT_GRID_EXPONENT
        seed = raw.get("seed", DEFAULT_SEED)
        if not _is_int(seed) or seed < 0:
            self.add_error(f"seed: must be an integer >= 0, got {json.dumps(seed)}")
        output_dir = raw.get("output_dir", DEFAULT_OUTPUT_DIR)
        if not isinstance(output_dir, str) or not output_dir:
            self.add_error(f"output_dir: must be a non-empty string, got {json.dumps(output_dir)}")

        params = raw.get("params", {})
        merged: dict[str, ConfigNamespace] = {}
        if self._check_keys(params, frozenset(TASKS), "params"):
            for name in TASKS:
                section = params.get(name, {})
                if not self._check_keys(section, frozenset(DEFAULT_PARAMS[name]), f"params.{name}"):
                    continue
                values = {**copy.deepcopy(DEFAULT_PARAMS[name]), **section}
                self._check_params(name, values, model.q if model is not None else None, m)
                merged[name] = ConfigNamespace(**values)

        if self._errors or model is None:
            return None
        return ExperimentConfig(copy.deepcopy(raw), model, tuple(tasks), merged, Path(output_dir), seed, m)


def validate(raw: Any) -> list[str]:
    validator = ConfigValidator()
    validator.validate(raw)
    return validator.errors


def build_config(raw: Any) -> ExperimentConfig:
    validator = ConfigValidator()
    config = validator.validate(raw)
    if config is None:
        raise ConfigError(validator.errors)
    return config


def load_raw(path: Path) -> Any:
    try:
        with path.open(encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError([f"{path}: invalid JSON ({e.msg} at line {e.lineno}, column {e.colno})"]) from e


def apply_overrides(raw: Any, output_dir: Optional[str] = None, m: Optional[int] = None) -> Any:
    if not isinstance(raw, dict):
        return raw
    raw = dict(raw)
    if output_dir is not None:
        raw["output_dir"] = output_dir
    if m is not None:
        raw["m"] = m
    return raw

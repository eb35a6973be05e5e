#
# ipflab
#
# A numerical laboratory for the intersection of past and future of multivariate stationary processes.
#
# Copyright (c) 2025-2026 Thomas Kuhlmann
#
# Licensed under the MIT License. See LICENSE file in the project root for license information.
#

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional, Protocol, Union

import numpy as np

from ipflab.common import AliasingError, ComplexArray, FloatArray, ModelEvaluationError
from ipflab.toeplitz import AutocovSeq


GRID_MIN_EXPONENT: int = 3
GRID_MAX_EXPONENT: int = 24
HERMITIAN_RTOL: float = 1e-12

PROBE_RTOL: float = 1e-6
PROBE_GEOMETRIC_RATIO: float = 0.75
# ratios in (PROBE_GEOMETRIC_RATIO, PROBE_DIVERGENT_RATIO) must agree to PROBE_RATIO_SPREAD
PROBE_DIVERGENT_RATIO: float = 0.95
PROBE_RATIO_SPREAD: float = 0.02
PROBE_MIN_REFINEMENTS: int = 4


class NodeEvaluable(Protocol):
    @property
    def q(self) -> int: ...

    def evaluate_many(self, thetas: FloatArray) -> ComplexArray: ...


def check_exponent(m: int) -> None:
    if not GRID_MIN_EXPONENT <= m <= GRID_MAX_EXPONENT:
        raise ValueError(f"Grid exponent m={m} outside {GRID_MIN_EXPONENT}..{GRID_MAX_EXPONENT}")


def grid_nodes(m: int) -> FloatArray:
    # half-step offset: θ = 0 and θ = ±π are never nodes
    check_exponent(m)
    G = 2**m
    return -np.pi + (np.arange(G) + 0.5) * (2 * np.pi / G)


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    m: int
    nodes: FloatArray
    values: ComplexArray  # (G, q, q)

    @property
    def size(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def q(self) -> int:
        return int(self.values.shape[1])


def make_grid(model: NodeEvaluable, m: int) -> SpectralGrid:
    nodes = grid_nodes(m)
    values = np.asarray(model.evaluate_many(nodes), dtype=complex)
    finite = np.isfinite(values).all(axis=(1, 2))
    if not finite.all():
        raise ModelEvaluationError("Spectral density is not finite", int(np.argmin(finite)))
    deviation = np.abs(values - values.conj().transpose(0, 2, 1)).max(axis=(1, 2))
    scale = np.maximum(np.abs(values).max(axis=(1, 2)), 1.0)
    not_hermitian = deviation > HERMITIAN_RTOL * scale
    if not_hermitian.any():
        raise ModelEvaluationError("Spectral density is not Hermitian", int(np.argmax(not_hermitian)))
    return SpectralGrid(m, nodes, values)


def integrate(values: Union[Sequence[float], FloatArray]) -> float:
    # midpoint rule for ∫ · dθ/2π, exact for trigonometric polynomials of degree < G/2
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("Nothing to integrate")
    if not np.isfinite(v).all():
        return float(np.sum(v)) / v.size
    return math.fsum(v.tolist()) / v.size


def fourier_coeffs(grid: SpectralGrid, K: int) -> AutocovSeq:
    if K < 0:
        raise ValueError(f"Max lag must be >= 0, got {K}")
    if 2 * K >= grid.size:
        raise AliasingError(f"Max lag K={K} needs K < G/2 = {grid.size // 2} (m={grid.m})")
    phases = np.exp(-1j * np.outer(np.arange(K + 1), grid.nodes))
    gammas = np.tensordot(phases, grid.values, axes=(1, 0)) / grid.size
    return AutocovSeq.from_nonnegative(gammas, source="quadrature")


def evaluate_power_series(coeffs: ComplexArray, m: int) -> ComplexArray:
    # h(θ_j) = Σ_n c(n) e^{inθ_j}; coefficients folded mod G, so exact for any length
    nodes = grid_nodes(m)
    G = nodes.size
    coeffs = np.asarray(coeffs, dtype=complex)
    n = np.arange(coeffs.shape[0])
    folded = np.zeros((G,) + coeffs.shape[1:], dtype=complex)
    np.add.at(folded, n % G, coeffs * np.exp(1j * n * nodes[0])[:, None, None])
    return np.fft.ifft(folded, axis=0) * G


class Integrability(Enum):
    FINITE = "FINITE"
    DIVERGENT = "DIVERGENT"
    INCONCLUSIVE = "INCONCLUSIVE"
    # condition not applicable: the density fails maximal rank analytically
    FAILS = "FAILS"


@dataclass(frozen=True)
class ProbeResult:
    outcome: Integrability
    value: Optional[float]
    exponents: tuple[int, ...]
    values: tuple[float, ...]
    notes: tuple[str, ...] = field(default=())
    extrapolated: bool = False

    @property
    def increments(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.values, self.values[1:]))

    def to_dict(self) -> dict[str, Any]:
        return {
            "outcome": self.outcome.value,
            "value": self.value,
            "extrapolated": self.extrapolated,
            "exponents": list(self.exponents),
            "values": list(self.values),
            "increments": list(self.increments),
            "notes": list(self.notes),
        }


def integrability_probe(integrand: Callable[[FloatArray], FloatArray], m_range: Sequence[int]) -> ProbeResult:
    exponents = tuple(int(m) for m in m_range)
    if len(exponents) < PROBE_MIN_REFINEMENTS or any(b != a + 1 for a, b in zip(exponents, exponents[1:])):
        raise ValueError(f"Integrability probe needs at least {PROBE_MIN_REFINEMENTS} consecutive exponents, got {list(exponents)}")

    values: list[float] = []
    notes: list[str] = []
    for m in exponents:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            node_values = np.asarray(integrand(grid_nodes(m)), dtype=float)
        not_finite = int(np.count_nonzero(~np.isfinite(node_values)))
        if not_finite:
            notes.append(f"m={m}: integrand not finite at {not_finite} node(s)")
            values.append(math.inf)
        else:
            values.append(integrate(node_values))
    return _classify_probe(exponents, tuple(values), tuple(notes))


def _classify_probe(exponents: tuple[int, ...], values: tuple[float, ...], notes: tuple[str, ...]) -> ProbeResult:
    def result(outcome: Integrability, value: Optional[float] = None, extrapolated: bool = False) -> ProbeResult:
        return ProbeResult(outcome, value, exponents, values, notes, extrapolated)

    if not all(math.isfinite(v) for v in values):
        return result(Integrability.DIVERGENT)

    d = np.diff(values)
    scale = max(abs(v) for v in values)
    last = d[-2:]
    if scale == 0.0 or all(abs(x) < PROBE_RTOL * scale for x in last):
        return result(Integrability.FINITE, values[-1])

    # per-doubling increment ratios over the last two doublings
    ratios = [abs(d[i + 1]) / abs(d[i]) if d[i] != 0 else math.inf for i in (-3, -2)]
    same_sign = np.sign(d[-1]) == np.sign(d[-2])
    fast = all(r <= PROBE_GEOMETRIC_RATIO for r in ratios)
    # power singularities |θ|^-a converge with ratio 2^(a-1), slowly for a near 1
    steady = all(r < PROBE_DIVERGENT_RATIO for r in ratios) and abs(ratios[0] - ratios[1]) <= PROBE_RATIO_SPREAD
    if same_sign and (fast or steady):
        r = d[-1] / d[-2]
        return result(Integrability.FINITE, float(values[-1] + d[-1] * r / (1 - r)), extrapolated=True)

    monotone = bool(np.all(d > 0) or np.all(d < 0))
    if monotone and all(r >= PROBE_DIVERGENT_RATIO for r in ratios):
        return result(Integrability.DIVERGENT)
    return result(Integrability.INCONCLUSIVE)

"""Tests for the circle grid, quadrature, Fourier coefficients and the integrability probe."""

import math
from dataclasses import dataclass

import numpy as np
import pytest

from ipflab.common import AliasingError, ModelEvaluationError
from ipflab.models import MAFactor, autocovariance_sequence
from ipflab.quadrature import Integrability, evaluate_power_series, fourier_coeffs, grid_nodes, integrability_probe, integrate, make_grid


@dataclass
class _BrokenDensity:
    bad_node: int
    kind: str
    q: int = 1

    def evaluate_many(self, thetas: np.ndarray) -> np.ndarray:
        values = np.ones((len(thetas), 2, 2), dtype=complex)
        if self.kind == "nan":
            values[self.bad_node, 0, 0] = np.nan
        else:
            values[self.bad_node, 0, 1] = 1j
        return values


@pytest.mark.parametrize("m", [3, 6, 12])
def test_grid_nodes_avoid_zero_and_pi(m: int) -> None:
    nodes = grid_nodes(m)
    assert nodes.size == 2**m
    assert np.all(nodes > -np.pi) and np.all(nodes < np.pi)
    assert np.min(np.abs(nodes)) == pytest.approx(np.pi / 2**m)
    np.testing.assert_allclose(nodes, -nodes[::-1], atol=1e-15)


@pytest.mark.parametrize("m", [2, 25])
def test_grid_exponent_out_of_range(m: int) -> None:
    with pytest.raises(ValueError, match="outside 3..24"):
        grid_nodes(m)


def test_integrate_is_exact_for_trigonometric_polynomials() -> None:
    nodes = grid_nodes(5)
    assert integrate(np.ones(nodes.size) * 2.5) == pytest.approx(2.5, abs=1e-15)
    for k in range(1, 32):
        assert abs(integrate(np.cos(k * nodes))) < 1e-14


def test_integrate_rejects_empty_input() -> None:
    with pytest.raises(ValueError):
        integrate([])


def test_fourier_coeffs_match_closed_form(ma1: MAFactor) -> None:
    """MA densities are trigonometric polynomials, so the quadrature is exact."""
    quadrature = fourier_coeffs(make_grid(ma1, 6), 4)
    closed = autocovariance_sequence(ma1, 4)
    assert quadrature.source == "quadrature"
    np.testing.assert_allclose(quadrature.gammas, closed.gammas, atol=1e-14)


def test_fourier_coeffs_aliasing() -> None:
    grid = make_grid(MAFactor(np.eye(1)[None]), 3)
    with pytest.raises(AliasingError, match="K=4"):
        fourier_coeffs(grid, 4)
    assert fourier_coeffs(grid, 3).K == 3


@pytest.mark.parametrize("kind, message", [("nan", "not finite"), ("hermitian", "not Hermitian")])
def test_make_grid_rejects_invalid_values(kind: str, message: str) -> None:
    with pytest.raises(ModelEvaluationError, match=message) as exc:
        make_grid(_BrokenDensity(5, kind), 4)
    assert exc.value.node_index == 5


def test_evaluate_power_series_folds_long_rows() -> None:
    rng = np.random.default_rng(3)
    coeffs = rng.standard_normal((20, 2, 2)) + 1j * rng.standard_normal((20, 2, 2))
    nodes = grid_nodes(3)
    direct = np.einsum("gn,nab->gab", np.exp(1j * np.outer(nodes, np.arange(20))), coeffs)
    np.testing.assert_allclose(evaluate_power_series(coeffs, 3), direct, atol=1e-12)


def test_probe_constant_is_finite() -> None:
    probe = integrability_probe(lambda t: np.full(t.shape, 3.0), range(4, 8))
    assert probe.outcome is Integrability.FINITE
    assert probe.value == pytest.approx(3.0)
    assert not probe.extrapolated


def test_probe_reciprocal_is_divergent() -> None:
    probe = integrability_probe(lambda t: 1.0 / np.abs(t), range(8, 17))
    assert probe.outcome is Integrability.DIVERGENT
    assert probe.value is None
    assert all(d > 0 for d in probe.increments)


def test_probe_log_singularity_is_extrapolated() -> None:
    """∫ log|θ| dθ/2π = log π - 1, an integrable singularity at a grid midpoint."""
    probe = integrability_probe(lambda t: np.log(np.abs(t)), range(8, 17))
    assert probe.outcome is Integrability.FINITE
    assert probe.extrapolated
    assert probe.value == pytest.approx(math.log(math.pi) - 1, abs=1e-6)


def test_power_singularity_with_slow_increments_is_finite() -> None:
    """∫ |θ|^-0.7 dθ/2π = π^-0.7 / 0.3, doubling increments shrink by 2^-0.3."""
    result = integrability_probe(lambda t: np.abs(t) ** -0.7, range(8, 17))
    assert result.outcome is Integrability.FINITE
    assert result.extrapolated
    assert result.value == pytest.approx(math.pi**-0.7 / 0.3, rel=1e-3)


def test_probe_non_finite_values_are_divergent() -> None:
    probe = integrability_probe(lambda t: np.where(np.abs(t) < 0.1, np.inf, 1.0), range(4, 8))
    assert probe.outcome is Integrability.DIVERGENT
    assert probe.notes


@pytest.mark.parametrize("m_range", [range(4, 6), [4, 5, 7, 8]])
def test_probe_needs_consecutive_exponents(m_range: object) -> None:
    with pytest.raises(ValueError, match="consecutive"):
        integrability_probe(lambda t: t, m_range)  # type: ignore[arg-type]

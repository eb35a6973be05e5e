#
# ipflab
#
# A numerical laboratory for the intersection of past and future of multivariate stationary processes.
#
# Copyright (c) 2025-2026 Thomas Kuhlmann
#
# Licensed under the MIT License. See LICENSE file in the project root for license information.
#

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Optional, Protocol

import numpy as np

from ipflab.common import AliasingError, ComplexArray, FloatArray, NotFactorizableError, SingularFactorError, SingularGramError
from ipflab.models import DensityModel, autocovariance_sequence, transpose_density
from ipflab.quadrature import GRID_MAX_EXPONENT, evaluate_power_series, grid_nodes, integrate
from ipflab.toeplitz import AutocovSeq, levinson_whittle


ORDER_CAP: int = 4096
DEFAULT_ORDER: int = 16
DEFAULT_TOL: float = 1e-10
RESIDUAL_GRID_EXPONENT: int = 12
OUTER_GRID_EXPONENT: int = 14
OUTER_TOL: float = 1e-4
OUTER_MAX_EXCLUDED_FRACTION: float = 0.01
# extra grid exponents above the requested one for the phase check
PHASE_REFINEMENTS: tuple[int, ...] = (2, 4)


class Normalization(Enum):
    LOWER_TRIANGULAR_POSITIVE_DIAG = "LOWER_TRIANGULAR_POSITIVE_DIAG"
    # h♯ = gᵀ with g normalized lower triangular
    UPPER_TRIANGULAR_POSITIVE_DIAG = "UPPER_TRIANGULAR_POSITIVE_DIAG"


class FactorStatus(Enum):
    CONVERGED = "CONVERGED"
    SLOW_CONVERGENCE = "SLOW_CONVERGENCE"


class BoundaryFactor(Protocol):
    @property
    def q(self) -> int: ...

    def on_grid(self, m: int) -> ComplexArray: ...


def is_power_of_two(value: int) -> bool:
    return value >= 1 and value & (value - 1) == 0


@dataclass(frozen=True, eq=False)
class OuterFactor:
    coeffs: ComplexArray  # c(0..M) of h(z) = Σ c(n) zⁿ
    normalization: Normalization = Normalization.LOWER_TRIANGULAR_POSITIVE_DIAG
    residual: float = float("nan")
    status: FactorStatus = FactorStatus.CONVERGED
    order: int = 0
    change: float = float("nan")

    @property
    def q(self) -> int:
        return int(self.coeffs.shape[1])

    @property
    def tail_norm(self) -> float:
        # energy in the upper half of the coefficient row
        half = (self.coeffs.shape[0] + 1) // 2
        return float(np.sqrt(np.sum(np.abs(self.coeffs[half:]) ** 2)))

    def on_grid(self, m: int) -> ComplexArray:
        return evaluate_power_series(self.coeffs, m)

    def to_dict(self) -> dict[str, Any]:
        return {
            "normalization": self.normalization.value,
            "status": self.status.value,
            "order": self.order,
            "coefficient_count": int(self.coeffs.shape[0]),
            "last_change": self.change,
            "residual": self.residual,
            "tail_norm": self.tail_norm,
        }


def _factor_residual(factor: BoundaryFactor, model: DensityModel, sharp: bool, m: int = RESIDUAL_GRID_EXPONENT) -> float:
    h = factor.on_grid(m)
    h_star = h.conj().transpose(0, 2, 1)
    product = h_star @ h if sharp else h @ h_star
    return float(np.linalg.norm(product - model.evaluate_many(grid_nodes(m)), axis=(1, 2)).max())


def _cholesky_coefficients(autocov: AutocovSeq, order: int) -> ComplexArray:
    try:
        row = levinson_whittle(autocov.nonnegative()[: order + 1], order, cholesky_row=True).cholesky_row
    except SingularGramError as e:
        raise NotFactorizableError(f"No outer factor: the density violates maximal rank (degenerate). {e}") from e
    assert row is not None  # noqa: S101
    # c(j) = L_{N,N-j}
    return row[::-1].copy()


def bauer_factorize(autocov: AutocovSeq, order: int = DEFAULT_ORDER, tol: float = DEFAULT_TOL, cap: int = ORDER_CAP, model: Optional[DensityModel] = None) -> OuterFactor:
    """Outer factor h with w = hh* from the last block row of growing block Toeplitz Cholesky factors.

    The order doubles until the leading half of the coefficient row moves by less than tol
    (Frobenius, max over coefficients). An order already at the limit is compared with half
    of it. Stopping at the cap, or at the end of the autocovariance sequence, returns the partial
    result flagged SLOW_CONVERGENCE. The residual is measured against model when one is given.
    """
    if not is_power_of_two(order) or not is_power_of_two(cap):
        raise ValueError(f"Factorization order and cap must be powers of two, got {order} and {cap}")
    if tol <= 0:
        raise ValueError(f"Tolerance must be > 0, got {tol}")
    limit = min(cap, autocov.K)
    if order > limit:
        raise AliasingError(f"Order {order} needs autocovariances up to lag {order}, available {autocov.K} (cap {cap})")

    n = order
    previous: Optional[ComplexArray] = None
    if order == limit and order > 1:
        # no room to double, compare against the half order instead
        previous = _cholesky_coefficients(autocov, order // 2)
    change = float("inf")
    status = FactorStatus.SLOW_CONVERGENCE
    while True:
        coeffs = _cholesky_coefficients(autocov, n)
        if previous is not None:
            leading = previous.shape[0] // 2 + 1
            change = float(np.linalg.norm(coeffs[:leading] - previous[:leading], axis=(1, 2)).max())
            if change < tol:
                status = FactorStatus.CONVERGED
                break
        if 2 * n > limit:
            break
        previous, n = coeffs, 2 * n

    residual = _factor_residual_from_coeffs(coeffs, model, sharp=False) if model is not None else float("nan")
    return OuterFactor(coeffs, Normalization.LOWER_TRIANGULAR_POSITIVE_DIAG, residual, status, n, change)


def _factor_residual_from_coeffs(coeffs: ComplexArray, model: DensityModel, sharp: bool) -> float:
    return _factor_residual(OuterFactor(coeffs), model, sharp)


def factorize(model: DensityModel, order: int = DEFAULT_ORDER, tol: float = DEFAULT_TOL, cap: int = ORDER_CAP) -> OuterFactor:
    if model.degenerate:
        raise NotFactorizableError(f"No outer factor: the {model.variant} density violates maximal rank (degenerate at every angle)")
    return bauer_factorize(autocovariance_sequence(model, cap), order, tol, cap, model)


def factorize_sharp(model: DensityModel, order: int = DEFAULT_ORDER, tol: float = DEFAULT_TOL, cap: int = ORDER_CAP) -> OuterFactor:
    # h♯ = gᵀ where w̄ = wᵀ = gg*
    g = factorize(transpose_density(model), order, tol, cap)
    coeffs = g.coeffs.transpose(0, 2, 1).copy()
    residual = _factor_residual(OuterFactor(coeffs), model, sharp=True)
    return replace(g, coeffs=coeffs, normalization=Normalization.UPPER_TRIANGULAR_POSITIVE_DIAG, residual=residual)


class OuterVerdict(Enum):
    OUTER = "OUTER"
    NOT_OUTER = "NOT_OUTER"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class OuterCheck:
    residual: float
    log_abs_det_c0: float
    mean_log_abs_det: float
    excluded_nodes: int
    verdict: OuterVerdict
    tol: float = OUTER_TOL

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "residual": self.residual,
            "log_abs_det_c0": self.log_abs_det_c0,
            "mean_log_abs_det": self.mean_log_abs_det,
            "excluded_nodes": self.excluded_nodes,
            "tol": self.tol,
        }


def verify_outer(factor: OuterFactor, m: int = OUTER_GRID_EXPONENT, tol: float = OUTER_TOL) -> OuterCheck:
    # mean-value property of log|det h| holds exactly for outer h
    modulus = np.abs(np.linalg.det(factor.on_grid(m)))
    usable = np.isfinite(modulus) & (modulus > 0)
    excluded = int(np.count_nonzero(~usable))
    log_c0 = float(np.log(abs(np.linalg.det(factor.coeffs[0]))))
    if excluded > OUTER_MAX_EXCLUDED_FRACTION * modulus.size or not np.isfinite(log_c0):
        return OuterCheck(float("nan"), log_c0, float("nan"), excluded, OuterVerdict.INCONCLUSIVE, tol)
    mean_log = integrate(np.log(modulus[usable]))
    residual = abs(log_c0 - mean_log)
    return OuterCheck(residual, log_c0, mean_log, excluded, OuterVerdict.OUTER if residual < tol else OuterVerdict.NOT_OUTER, tol)


@dataclass(frozen=True, eq=False)
class Innovation:
    # X(n) = Σ_k c(n-k) ξ(k) with unit-covariance innovations ξ
    coeffs: ComplexArray
    error_covariance: ComplexArray  # c(0)c(0)*, one-step prediction error covariance


def innovation_coeffs(factor: OuterFactor) -> Innovation:
    c0 = factor.coeffs[0]
    return Innovation(factor.coeffs, c0 @ c0.conj().T)


@dataclass(frozen=True, eq=False)
class PhaseReport:
    constancy: float  # max_j ‖Φ(θ_j) - Φ(θ_0)‖_F
    unitarity: float  # ‖Φ(θ_0)Φ(θ_0)* - I‖_F
    reference: ComplexArray
    m: int

    def is_constant_unitary(self, tol: float) -> bool:
        return self.constancy < tol and self.unitarity < tol

    def to_dict(self) -> dict[str, Any]:
        return {"m": self.m, "constancy_deviation": self.constancy, "unitarity_deviation": self.unitarity}


def phase_matrix(h: BoundaryFactor, h_sharp: BoundaryFactor, m: int) -> PhaseReport:
    # Φ = e^{-iθ/2} (h♯*)^{-1} h
    nodes = grid_nodes(m)
    H = h.on_grid(m)
    S_star = h_sharp.on_grid(m).conj().transpose(0, 2, 1)
    try:
        quotient = np.linalg.solve(S_star, H)
    except np.linalg.LinAlgError as e:
        raise SingularFactorError(f"h♯* is singular at a grid node (m={m})") from e
    phi = np.exp(-0.5j * nodes)[:, None, None] * quotient
    constancy = float(np.linalg.norm(phi - phi[0], axis=(1, 2)).max())
    unitarity = float(np.linalg.norm(phi[0] @ phi[0].conj().T - np.eye(h.q)))
    return PhaseReport(constancy, unitarity, phi[0], m)


def phase_profile(h: BoundaryFactor, h_sharp: BoundaryFactor, m: int) -> list[PhaseReport]:
    # the requested grid first, then the finer ones up to GRID_MAX_EXPONENT
    exponents = [m] + [m + step for step in PHASE_REFINEMENTS if m + step <= GRID_MAX_EXPONENT]
    return [phase_matrix(h, h_sharp, e) for e in exponents]


@dataclass(frozen=True, eq=False)
class TrigPolynomial:
    # 1×q row function f(θ) = Σ_k a_k e^{-ikθ}, a_k the coefficient of the generators e(k)
    lags: tuple[int, ...]
    rows: ComplexArray  # (len(lags), q)

    @property
    def q(self) -> int:
        return int(self.rows.shape[1])

    @property
    def degree(self) -> int:
        return max(abs(k) for k in self.lags)

    def on_nodes(self, nodes: FloatArray) -> ComplexArray:
        return np.exp(-1j * np.outer(nodes, np.asarray(self.lags, dtype=float))) @ self.rows

    @classmethod
    def generator(cls, q: int, lag: int, component: int) -> "TrigPolynomial":
        # e_j(k), components counted from 1
        if not 1 <= component <= q:
            raise ValueError(f"Component {component} outside 1..{q}")
        row = np.zeros((1, q), dtype=complex)
        row[0, component - 1] = 1.0
        return cls((lag,), row)


def random_trig_polynomial(q: int, degree: int, rng: np.random.Generator) -> TrigPolynomial:
    lags = tuple(range(-degree, degree + 1))
    rows = rng.standard_normal((len(lags), q)) + 1j * rng.standard_normal((len(lags), q))
    return TrigPolynomial(lags, rows / np.linalg.norm(rows))


@dataclass(frozen=True)
class IsometryCheck:
    norm_w: float
    norm_sharp: float

    @property
    def discrepancy(self) -> float:
        return abs(self.norm_w - self.norm_sharp)


def verify_isometry_G(model: DensityModel, h_sharp: BoundaryFactor, f: TrigPolynomial, m: int = RESIDUAL_GRID_EXPONENT) -> IsometryCheck:
    # ‖f‖²_w against ‖f h♯*‖² of the image row function
    G = 2**m
    if 4 * f.degree >= G:
        raise AliasingError(f"Polynomial degree {f.degree} needs degree < G/4 = {G // 4} (m={m})")
    nodes = grid_nodes(m)
    F = f.on_nodes(nodes)
    W = model.evaluate_many(nodes)
    norm_w = integrate(np.einsum("ga,gab,gb->g", F, W, F.conj()).real)
    image = np.einsum("ga,gba->gb", F, h_sharp.on_grid(m).conj())
    norm_sharp = integrate(np.sum(np.abs(image) ** 2, axis=1))
    return IsometryCheck(norm_w, norm_sharp)

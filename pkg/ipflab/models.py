#
# ipflab
#
# A numerical laboratory for the intersection of past and future of multivariate stationary processes.
#
# Copyright (c) 2025-2026 Thomas Kuhlmann
#
# Licensed under the MIT License. See LICENSE file in the project root for license information.
#

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import ClassVar, Optional

import numpy as np
from scipy.special import binom

from ipflab.common import ComplexArray, FloatArray
from ipflab.quadrature import fourier_coeffs, grid_nodes, make_grid
from ipflab.toeplitz import AutocovSeq


INVERTIBLE_RTOL: float = 1e-12


@dataclass(frozen=True)
class AnalyticCertificate:
    # Facts proven for a model family, they take precedence over numeric probes
    ipf: bool
    cnd: bool
    source: str


def _as_square(matrix: object, name: str) -> ComplexArray:
    array = np.array(matrix, dtype=complex)
    if array.ndim != 2 or array.shape[0] != array.shape[1] or array.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {array.shape}")
    return array


def _check_invertible(matrix: ComplexArray, name: str) -> None:
    s = np.linalg.svd(matrix, compute_uv=False)
    if s[-1] <= INVERTIBLE_RTOL * max(s[0], 1.0):
        raise ValueError(f"{name} must be invertible (smallest singular value {s[-1]:.3e})")


def _conj_t(stack: ComplexArray) -> ComplexArray:
    return stack.conj().swapaxes(-1, -2)


class DensityModel(ABC):
    variant: ClassVar[str]

    @property
    @abstractmethod
    def q(self) -> int: ...

    @abstractmethod
    def evaluate_many(self, thetas: FloatArray) -> ComplexArray: ...

    @abstractmethod
    def autocovariance(self, k: int) -> ComplexArray: ...

    def evaluate(self, theta: float) -> ComplexArray:
        if not -np.pi <= theta < np.pi:
            raise ValueError(f"Angle {theta} outside [-π, π)")
        return self.evaluate_many(np.array([theta], dtype=float))[0]

    def transpose(self) -> "DensityModel":
        return self if self.q == 1 else Transposed(self)

    @property
    def degenerate(self) -> bool:
        # rank-deficient at every angle, i.e. maximal rank fails analytically
        return False

    @property
    def certificate(self) -> Optional[AnalyticCertificate]:
        return None


@dataclass(frozen=True, eq=False)
class WhiteNoise(DensityModel):
    variant: ClassVar[str] = "white_noise"
    dimension: int = 1

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError(f"White noise dimension must be >= 1, got {self.dimension}")

    @property
    def q(self) -> int:
        return self.dimension

    def evaluate_many(self, thetas: FloatArray) -> ComplexArray:
        return np.broadcast_to(np.eye(self.q, dtype=complex), (len(thetas), self.q, self.q)).copy()

    def autocovariance(self, k: int) -> ComplexArray:
        return np.eye(self.q, dtype=complex) if k == 0 else np.zeros((self.q, self.q), dtype=complex)

    def transpose(self) -> DensityModel:
        return self


@dataclass(frozen=True, eq=False)
class MAFactor(DensityModel):
    # w = θθ* with θ(z) = Σ θ_k z^k
    variant: ClassVar[str] = "ma_factor"
    coeffs: ComplexArray = field(default_factory=lambda: np.eye(1, dtype=complex)[None])

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.ndim == 2:
            coeffs = coeffs[None]
        if coeffs.ndim != 3 or coeffs.shape[1] != coeffs.shape[2] or coeffs.shape[0] == 0 or coeffs.shape[1] == 0:
            raise ValueError(f"MA coefficients must be a non-empty list of equally sized square matrices, got shape {coeffs.shape}")
        _check_invertible(coeffs[0], "θ₀")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def q(self) -> int:
        return int(self.coeffs.shape[1])

    @property
    def p(self) -> int:
        return int(self.coeffs.shape[0]) - 1

    def factor_many(self, thetas: FloatArray) -> ComplexArray:
        phases = np.exp(1j * np.outer(thetas, np.arange(self.p + 1)))
        return np.tensordot(phases, self.coeffs, axes=(1, 0))

    def evaluate_many(self, thetas: FloatArray) -> ComplexArray:
        T = self.factor_many(thetas)
        return T @ _conj_t(T)

    def autocovariance(self, k: int) -> ComplexArray:
        if k < 0:
            return self.autocovariance(-k).conj().T
        if k > self.p:
            return np.zeros((self.q, self.q), dtype=complex)
        return np.einsum("jab,jcb->ac", self.coeffs[k:], self.coeffs[: self.p + 1 - k].conj())

    def determinant_zero_moduli(self) -> FloatArray:
        # det θ(z) is a polynomial of degree <= q·p, recovered from roots-of-unity samples
        M = self.q * self.p + 1
        z = np.exp(2j * np.pi * np.arange(M) / M)
        dets = np.linalg.det(np.tensordot(z[:, None] ** np.arange(self.p + 1), self.coeffs, axes=(1, 0)))
        poly = np.fft.fft(dets) / M
        tiny = 1e-12 * np.abs(poly).max()
        while poly.size > 1 and abs(poly[-1]) <= tiny:
            poly = poly[:-1]
        if poly.size == 1:
            return np.zeros(0)
        return np.sort(np.abs(np.roots(poly[::-1])))

    def is_candidate_outer(self) -> bool:
        moduli = self.determinant_zero_moduli()
        return bool(np.all(moduli > 1.0))


@dataclass(frozen=True, eq=False)
class ScalarWeight(DensityModel):
    # w(θ) = |1 + e^{iθ}| BB*, vanishing only at θ = π
    variant: ClassVar[str] = "scalar_weight"
    B: ComplexArray = field(default_factory=lambda: np.eye(1, dtype=complex))

    def __post_init__(self) -> None:
        B = _as_square(self.B, "B")
        _check_invertible(B, "B")
        object.__setattr__(self, "B", B)

    @property
    def q(self) -> int:
        return int(self.B.shape[0])

    @property
    def BB(self) -> ComplexArray:
        return self.B @ self.B.conj().T

    def evaluate_many(self, thetas: FloatArray) -> ComplexArray:
        weight = 2 * np.abs(np.cos(np.asarray(thetas, dtype=float) / 2))
        return weight[:, None, None] * self.BB[None]

    def autocovariance(self, k: int) -> ComplexArray:
        # Fourier coefficients of 2|cos(θ/2)|
        return (4 / np.pi) * (-1) ** (k + 1) / (4 * k * k - 1) * self.BB

    def transpose(self) -> DensityModel:
        return ScalarWeight(self.B.conj())

    @property
    def certificate(self) -> Optional[AnalyticCertificate]:
        return AnalyticCertificate(ipf=True, cnd=True, source="analytic outer factors (1+z)^{1/2}B and (1+z)^{1/2}B* have constant phase quotient e^{iθ/2}I")


@dataclass(frozen=True, eq=False)
class StackedShift(DensityModel):
    # X(k) = (Y(k-1), Y(k)) over a scalar base process Y
    variant: ClassVar[str] = "stacked_shift"
    base: DensityModel = field(default_factory=WhiteNoise)

    def __post_init__(self) -> None:
        if self.base.q != 1:
            raise ValueError(f"Stacked shift needs a scalar base density, got dimension {self.base.q}")

    @property
    def q(self) -> int:
        return 2

    def evaluate_many(self, thetas: FloatArray) -> ComplexArray:
        thetas = np.asarray(thetas, dtype=float)
        wy = self.base.evaluate_many(thetas)[:, 0, 0].real
        phase = np.exp(1j * thetas)
        values = np.empty((thetas.size, 2, 2), dtype=complex)
        values[:, 0, 0] = wy
        values[:, 0, 1] = phase * wy
        values[:, 1, 0] = phase.conj() * wy
        values[:, 1, 1] = wy
        return values

    def autocovariance(self, k: int) -> ComplexArray:
        def g(lag: int) -> complex:
            return complex(self.base.autocovariance(lag)[0, 0])

        return np.array([[g(k), g(k - 1)], [g(k + 1), g(k)]], dtype=complex)

    @property
    def degenerate(self) -> bool:
        return True

    @property
    def certificate(self) -> Optional[AnalyticCertificate]:
        return AnalyticCertificate(ipf=True, cnd=False, source="past and future share the base variable Y(-1); the shared part is spanned by the middle block")


@dataclass(frozen=True, eq=False)
class Transposed(DensityModel):
    variant: ClassVar[str] = "transposed"
    base: DensityModel = field(default_factory=WhiteNoise)

    @property
    def q(self) -> int:
        return self.base.q

    def evaluate_many(self, thetas: FloatArray) -> ComplexArray:
        return self.base.evaluate_many(thetas).swapaxes(-1, -2).copy()

    def autocovariance(self, k: int) -> ComplexArray:
        return self.base.autocovariance(k).T.copy()

    def transpose(self) -> DensityModel:
        return self.base

    @property
    def degenerate(self) -> bool:
        return self.base.degenerate

    @property
    def certificate(self) -> Optional[AnalyticCertificate]:
        return self.base.certificate


def transpose_density(model: DensityModel) -> DensityModel:
    return model.transpose()


def autocovariance_sequence(model: DensityModel, K: int, source: str = "closed-form", m: int = 14) -> AutocovSeq:
    if K < 0:
        raise ValueError(f"Max lag must be >= 0, got {K}")
    if source == "quadrature":
        return fourier_coeffs(make_grid(model, m), K)
    if source != "closed-form":
        raise ValueError(f"Unknown autocovariance source '{source}' (use closed-form or quadrature)")
    return AutocovSeq.from_nonnegative(np.array([model.autocovariance(k) for k in range(K + 1)]), source)


def analytic_factor_scalar_weight(B: ComplexArray, z: complex, sharp: bool = False) -> ComplexArray:
    # principal branch of (1+z)^{1/2}, equal to 1 at z = 0
    B = _as_square(B, "B")
    if abs(z) > 1.0 + 1e-15:
        raise ValueError(f"Point z={z} outside the closed unit disk")
    if z == -1:
        raise ValueError("z = -1 is the branch point of (1+z)^{1/2}")
    return complex(np.sqrt(1 + complex(z))) * (B.conj().T if sharp else B)


def scalar_weight_taylor_coeffs(B: ComplexArray, count: int, sharp: bool = False) -> ComplexArray:
    B = _as_square(B, "B")
    M = B.conj().T if sharp else B
    return binom(0.5, np.arange(count))[:, None, None] * M[None]


@dataclass(frozen=True, eq=False)
class AnalyticScalarWeightFactor:
    B: ComplexArray
    sharp: bool = False

    @property
    def q(self) -> int:
        return int(np.shape(self.B)[0])

    def on_grid(self, m: int) -> ComplexArray:
        nodes = grid_nodes(m)
        root = np.sqrt(1 + np.exp(1j * nodes))
        M = np.asarray(self.B, dtype=complex)
        return root[:, None, None] * (M.conj().T if self.sharp else M)[None]


#
# ipflab
#
# A numerical laboratory for the intersection of past and future of multivariate stationary processes.
#
# Copyright (c) 2025-2026 Thomas Kuhlmann
#
# Licensed under the MIT License. See LICENSE file in the project root for license information.
#

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

import numpy as np
import numpy.typing as npt
import scipy.linalg as la

from ipflab.common import ComplexArray, FloatArray
from ipflab.models import DensityModel, autocovariance_sequence
from ipflab.toeplitz import AutocovSeq, block_matrix, block_toeplitz, levinson_whittle


RANK_RTOL: float = 1e-10
RANK_STABILITY_BAND: float = 10.0
COSINE_ONE: float = 1 - 1e-8
COINCIDENCE_TOL: float = 1e-8


@dataclass(frozen=True)
class IndexSet:
    lags: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.lags:
            raise ValueError("Index set must not be empty")
        if any(b <= a for a, b in zip(self.lags, self.lags[1:])):
            raise ValueError(f"Index set lags must be sorted and duplicate-free, got {list(self.lags)}")

    @classmethod
    def window(cls, a: int, b: int) -> "IndexSet":
        if a > b:
            raise ValueError(f"Empty lag window [{a}, {b}]")
        return cls(tuple(range(a, b + 1)))

    @classmethod
    def of(cls, lags: Iterable[int]) -> "IndexSet":
        return cls(tuple(sorted(set(lags))))

    def union(self, other: "IndexSet") -> "IndexSet":
        return IndexSet.of(self.lags + other.lags)

    def __len__(self) -> int:
        return len(self.lags)

    def __str__(self) -> str:
        contiguous = self.lags[-1] - self.lags[0] + 1 == len(self.lags)
        return f"[{self.lags[0]}..{self.lags[-1]}]" if contiguous else str(list(self.lags))


@dataclass(frozen=True, eq=False)
class GramBlockToeplitz:
    q: int
    lags: IndexSet
    matrix: ComplexArray

    def block(self, k: int, l: int) -> ComplexArray:  # noqa: E741
        i, j = self.lags.lags.index(k), self.lags.lags.index(l)
        return self.matrix[i * self.q : (i + 1) * self.q, j * self.q : (j + 1) * self.q]

    def rank(self, tol: float = RANK_RTOL) -> int:
        return _whiten(self.matrix, tol).rank


def gram(autocov: AutocovSeq, window: tuple[int, int]) -> GramBlockToeplitz:
    lags = IndexSet.window(*window)
    return GramBlockToeplitz(autocov.q, lags, block_toeplitz(autocov, lags.lags))


@dataclass(frozen=True, eq=False)
class _Whitening:
    # rows R with R G R* = I on the numerically nonzero eigenspace of G
    rows: ComplexArray
    eigenvalues: FloatArray
    threshold: float
    unstable: bool

    @property
    def rank(self) -> int:
        return int(self.rows.shape[0])


def _whiten(G: ComplexArray, tol: float) -> _Whitening:
    eigenvalues, vectors = la.eigh(G)
    threshold = tol * max(float(eigenvalues[-1]), 0.0)
    keep = eigenvalues > threshold
    near = (eigenvalues > threshold / RANK_STABILITY_BAND) & (eigenvalues < threshold * RANK_STABILITY_BAND)
    rows = vectors[:, keep].conj().T / np.sqrt(eigenvalues[keep])[:, None]
    return _Whitening(rows, eigenvalues, threshold, bool(near.any()))


def _embedding(sub: IndexSet, union: IndexSet, q: int) -> npt.NDArray[np.intp]:
    # coordinates of sub's generators inside union's generator list
    positions = [union.lags.index(k) for k in sub.lags]
    return np.array([p * q + j for p in positions for j in range(q)], dtype=np.intp)


def _embed(rows: ComplexArray, sub: IndexSet, union: IndexSet, q: int) -> ComplexArray:
    embedded = np.zeros((rows.shape[0], len(union) * q), dtype=complex)
    embedded[:, _embedding(sub, union, q)] = rows
    return embedded


@dataclass(frozen=True, eq=False)
class PrincipalAngleReport:
    cosines: tuple[float, ...]
    rank_a: int
    rank_b: int
    tol: float

    @property
    def largest(self) -> float:
        return self.cosines[0] if self.cosines else 0.0

    @property
    def second(self) -> float:
        return self.cosines[1] if len(self.cosines) > 1 else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"cosines": list(self.cosines), "rank_a": self.rank_a, "rank_b": self.rank_b, "tol": self.tol}


@dataclass(frozen=True, eq=False)
class _PrincipalPairs:
    cosines: FloatArray
    vectors_a: ComplexArray  # principal rows over A's generators
    vectors_b: ComplexArray
    whitening_a: _Whitening
    whitening_b: _Whitening


def _principal_pairs(A: IndexSet, B: IndexSet, autocov: AutocovSeq, tol: float) -> _PrincipalPairs:
    wa = _whiten(block_toeplitz(autocov, A.lags), tol)
    wb = _whiten(block_toeplitz(autocov, B.lags), tol)
    cross = block_matrix(autocov, A.lags, B.lags)
    M = wa.rows @ cross @ wb.rows.conj().T
    if M.size == 0:
        return _PrincipalPairs(np.zeros(0), np.zeros((0, wa.rows.shape[1]), dtype=complex), np.zeros((0, wb.rows.shape[1]), dtype=complex), wa, wb)
    U, s, Vh = la.svd(M)
    k = s.size
    return _PrincipalPairs(np.minimum(s, 1.0), U[:, :k].conj().T @ wa.rows, Vh[:k] @ wb.rows, wa, wb)


def principal_angles(A: IndexSet, B: IndexSet, autocov: AutocovSeq, tol: float = RANK_RTOL) -> PrincipalAngleReport:
    """Cosines of the principal angles between span A and span B in L(w).

    Singular values of W_A G_AB W_B*, with W_X the eigen-truncated inverse square root of G_X,
    so rank-deficient Grams are handled by pseudo-whitening.
    """
    pairs = _principal_pairs(A, B, autocov, tol)
    return PrincipalAngleReport(tuple(float(c) for c in pairs.cosines), pairs.whitening_a.rank, pairs.whitening_b.rank, tol)


class Stability(Enum):
    STABLE = "STABLE"
    UNSTABLE = "UNSTABLE"


@dataclass(frozen=True, eq=False)
class IntersectionCertificate:
    dim: int
    basis: ComplexArray  # expressions over A's generators, embedded in the union
    counterpart: ComplexArray  # the same vectors expressed over B's generators
    union: IndexSet
    residual: float
    cosines: tuple[float, ...]
    ranks: tuple[int, int, int]  # rank G_A, rank G_B, rank G_{A∪B}
    stability: Stability
    reason: Optional[str] = None

    @property
    def certified(self) -> int:
        return sum(1 for c in self.cosines if c >= COSINE_ONE)

    def to_dict(self) -> dict[str, Any]:
        return {
            "dim": self.dim,
            "certified": self.certified,
            "residual": self.residual,
            "ranks": {"a": self.ranks[0], "b": self.ranks[1], "union": self.ranks[2]},
            "largest_cosines": list(self.cosines[: max(self.dim, 2)]),
            "stability": self.stability.value,
            "reason": self.reason,
        }


def _gram_norms(rows: ComplexArray, G: ComplexArray) -> FloatArray:
    # squared L(w) norms of coefficient rows, ‖x‖² = x G x*
    return np.maximum(np.einsum("ia,ab,ib->i", rows, G, rows.conj()).real, 0.0)


def intersection(A: IndexSet, B: IndexSet, autocov: AutocovSeq, tol: float = RANK_RTOL) -> IntersectionCertificate:
    q = autocov.q
    union = A.union(B)
    G_union = block_toeplitz(autocov, union.lags)
    wu = _whiten(G_union, tol)
    pairs = _principal_pairs(A, B, autocov, tol)
    ranks = (pairs.whitening_a.rank, pairs.whitening_b.rank, wu.rank)
    # Grassmann: dim(A ∩ B) = dim A + dim B - dim(A + B)
    dim = max(ranks[0] + ranks[1] - ranks[2], 0)

    basis = _embed(pairs.vectors_a[:dim], A, union, q)
    counterpart = _embed(pairs.vectors_b[:dim], B, union, q)
    residual = float(_gram_norms(basis - counterpart, G_union).max()) if dim else 0.0
    cosines = tuple(float(c) for c in pairs.cosines)

    reasons = []
    if pairs.whitening_a.unstable or pairs.whitening_b.unstable or wu.unstable:
        reasons.append(f"eigenvalues within a factor {RANK_STABILITY_BAND:g} of the rank threshold")
    certified = sum(1 for c in cosines if c >= COSINE_ONE)
    if certified != dim:
        reasons.append(f"rank formula gives dim {dim} but {certified} cosine(s) are >= {COSINE_ONE}")
    stability = Stability.UNSTABLE if reasons else Stability.STABLE
    return IntersectionCertificate(dim, basis, counterpart, union, residual, cosines, ranks, stability, "; ".join(reasons) or None)


@dataclass(frozen=True)
class ProfileRow:
    N: int
    cos_1: float
    cos_2: float
    dim: int
    residual: float
    n: Optional[int] = None

    def to_dict(self) -> dict[str, Any]:
        return {"N": self.N, "n": self.n, "cos_1": self.cos_1, "cos_2": self.cos_2, "dim": self.dim, "residual": self.residual}


def past(N: int) -> IndexSet:
    return IndexSet.window(-N, -1)


def future(N: int) -> IndexSet:
    return IndexSet.window(0, N)


def cnd_profile(model: DensityModel, N_list: Sequence[int], tol: float = RANK_RTOL, autocov: Optional[AutocovSeq] = None) -> list[ProfileRow]:
    if not N_list or any(b <= a for a, b in zip(N_list, N_list[1:])) or N_list[0] < 1:
        raise ValueError(f"N list must be ascending positive integers, got {list(N_list)}")
    autocov = autocov if autocov is not None else autocovariance_sequence(model, 2 * N_list[-1])
    rows = []
    for N in N_list:
        certificate = intersection(past(N), future(N), autocov, tol)
        cosines = certificate.cosines
        rows.append(ProfileRow(N, cosines[0] if cosines else 0.0, cosines[1] if len(cosines) > 1 else 0.0, certificate.dim, certificate.residual))
    return rows


class CheckVerdict(Enum):
    PASS = "PASS"
    FAIL = "FAIL"


@dataclass(frozen=True)
class IpfCheck:
    verdict: CheckVerdict
    reason: Optional[str]
    n: int
    N: int
    dim: int
    expected_dim: int
    union_rank: int
    union_size: int
    coincidence_angles: tuple[float, ...]
    residual: float
    cosines: tuple[float, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "reason": self.reason,
            "n": self.n,
            "N": self.N,
            "dim": self.dim,
            "expected_dim": self.expected_dim,
            "union_rank": self.union_rank,
            "union_size": self.union_size,
            "max_coincidence_angle": max(self.coincidence_angles, default=0.0),
            "residual": self.residual,
        }


def _orthonormal_rows(rows: ComplexArray, G: ComplexArray, tol: float) -> ComplexArray:
    # L(w)-orthonormal rows spanning the same subspace
    w = _whiten(rows @ G @ rows.conj().T, tol)
    return w.rows @ rows


def _coincidence_angles(basis: ComplexArray, middle: ComplexArray, G: ComplexArray, tol: float) -> FloatArray:
    # angles from sines: residual of the basis after projecting onto span(middle)
    Q = _orthonormal_rows(basis, G, tol)
    P = _orthonormal_rows(middle, G, tol)
    residual = Q - (Q @ G @ P.conj().T) @ P
    sines = np.sqrt(np.maximum(la.eigvalsh(residual @ G @ residual.conj().T), 0.0))
    return np.arcsin(np.minimum(sines, 1.0))[::-1]


def ipf_finite_check(model: DensityModel, n: int, N: int, tol: float = COINCIDENCE_TOL, rank_tol: float = RANK_RTOL, autocov: Optional[AutocovSeq] = None) -> IpfCheck:
    """Finite shadow of past ∩ future-from-(-n) = middle block [-n..-1].

    PASS is consistency evidence only; a FAIL from an extra shared dimension is conclusive.
    """
    if not N > n >= 1:
        raise ValueError(f"Need N > n >= 1, got n={n}, N={N}")
    autocov = autocov if autocov is not None else autocovariance_sequence(model, 2 * N)
    q = autocov.q
    A, B, middle = past(N), IndexSet.window(-n, N), IndexSet.window(-n, -1)
    certificate = intersection(A, B, autocov, rank_tol)
    union_size = len(certificate.union) * q
    expected = q * n

    def fail(reason: str, angles: tuple[float, ...] = ()) -> IpfCheck:
        return IpfCheck(CheckVerdict.FAIL, reason, n, N, certificate.dim, expected, certificate.ranks[2], union_size, angles, certificate.residual, certificate.cosines[:2])

    if certificate.ranks[2] < union_size:
        return fail("RANK_DEFICIENT")
    if certificate.stability is Stability.UNSTABLE:
        return fail(f"UNSTABLE: {certificate.reason}")
    if certificate.dim != expected:
        return fail("DIMENSION_MISMATCH")

    G_union = block_toeplitz(autocov, certificate.union.lags)
    middle_rows = _embed(np.eye(len(middle) * q, dtype=complex), middle, certificate.union, q)
    angles = tuple(float(a) for a in _coincidence_angles(certificate.basis, middle_rows, G_union, rank_tol))
    if max(angles, default=0.0) >= tol:
        return fail("NOT_COINCIDENT", angles)
    return IpfCheck(CheckVerdict.PASS, None, n, N, certificate.dim, expected, certificate.ranks[2], union_size, angles, certificate.residual, certificate.cosines[:2])


@dataclass(frozen=True)
class ProjectionTrace:
    norms: tuple[float, ...]

    @property
    def decay_ratio(self) -> float:
        if len(self.norms) < 2 or self.norms[-2] == 0.0:
            return 0.0
        return self.norms[-1] / self.norms[-2]

    @property
    def limit_norm(self) -> float:
        return self.norms[-1]

    def to_dict(self) -> dict[str, Any]:
        return {"norms": list(self.norms), "decay_ratio": self.decay_ratio, "limit_norm": self.limit_norm}


def generator_row(lags: IndexSet, q: int, lag: int, component: int) -> ComplexArray:
    # coefficient row of e_component(lag), components counted from 1
    if lag not in lags.lags:
        raise ValueError(f"Lag {lag} is not in {lags}")
    if not 1 <= component <= q:
        raise ValueError(f"Component {component} outside 1..{q}")
    row = np.zeros(len(lags) * q, dtype=complex)
    row[lags.lags.index(lag) * q + component - 1] = 1.0
    return row


def alternating_projections(A: IndexSet, B: IndexSet, autocov: AutocovSeq, start: ComplexArray, iters: int, tol: float = RANK_RTOL) -> ProjectionTrace:
    # x ← P_A P_B x in the Gram geometry of span(A ∪ B); start is a coefficient row over A ∪ B
    if iters < 1:
        raise ValueError(f"Need at least one iteration, got {iters}")
    q = autocov.q
    union = A.union(B)
    G = block_toeplitz(autocov, union.lags)
    x = np.asarray(start, dtype=complex)
    if x.shape != (len(union) * q,):
        raise ValueError(f"Start row must have {len(union) * q} coefficients over {union}, got shape {x.shape}")
    R_a = _embed(_whiten(block_toeplitz(autocov, A.lags), tol).rows, A, union, q)
    R_b = _embed(_whiten(block_toeplitz(autocov, B.lags), tol).rows, B, union, q)

    def project(rows: ComplexArray, y: ComplexArray) -> ComplexArray:
        return (y @ G @ rows.conj().T) @ rows

    def norm(y: ComplexArray) -> float:
        return float(np.sqrt(max((y @ G @ y.conj()).real, 0.0)))

    norms = [norm(x)]
    for _ in range(iters):
        x = project(R_a, project(R_b, x))
        norms.append(norm(x))
    return ProjectionTrace(tuple(norms))


@dataclass(frozen=True, eq=False)
class FinitePredictor:
    # X(0) ≈ Σ_{i=1..N} A_i X(-i)
    coefficients: ComplexArray
    error_trace: ComplexArray  # V_0..V_N

    @property
    def N(self) -> int:
        return int(self.coefficients.shape[0])

    @property
    def error_covariance(self) -> ComplexArray:
        return self.error_trace[-1]

    def det_trace(self) -> FloatArray:
        return np.linalg.det(self.error_trace).real

    def loewner_violation(self) -> float:
        # largest eigenvalue of V_{p+1} - V_p; nonincreasing errors keep this <= 0
        if self.N == 0:
            return 0.0
        steps = self.error_trace[1:] - self.error_trace[:-1]
        return float(np.linalg.eigvalsh((steps + steps.conj().transpose(0, 2, 1)) / 2).max())


def finite_predictor(autocov: AutocovSeq, N: int) -> FinitePredictor:
    if N < 1:
        raise ValueError(f"Predictor order must be >= 1, got {N}")
    result = levinson_whittle(autocov.nonnegative()[: N + 1], N)
    return FinitePredictor(result.forward, result.errors)

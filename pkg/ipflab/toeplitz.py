#
# ipflab
#
# A numerical laboratory for the intersection of past and future of multivariate stationary processes.
#
# Copyright (c) 2025-2026 Thomas Kuhlmann
#
# Licensed under the MIT License. See LICENSE file in the project root for license information.
#

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la

from ipflab.common import AliasingError, ComplexArray, SingularGramError


GRAM_PD_RTOL: float = 1e-10


@dataclass(frozen=True, eq=False)
class AutocovSeq:
    # gammas[k + K] = Γ(k) = E[X(k)X(0)*], k = -K..K
    gammas: ComplexArray
    source: str = "closed-form"

    @property
    def q(self) -> int:
        return int(self.gammas.shape[1])

    @property
    def K(self) -> int:
        return (int(self.gammas.shape[0]) - 1) // 2

    def at(self, k: int) -> ComplexArray:
        if abs(k) > self.K:
            raise AliasingError(f"Lag {k} outside the available range -{self.K}..{self.K}")
        return self.gammas[k + self.K]

    def nonnegative(self) -> ComplexArray:
        return self.gammas[self.K :]

    @classmethod
    def from_nonnegative(cls, gammas: ComplexArray, source: str = "closed-form") -> "AutocovSeq":
        gammas = np.array(gammas, dtype=complex)
        if gammas.ndim != 3 or gammas.shape[1] != gammas.shape[2]:
            raise ValueError(f"Expected an array of square matrices, got shape {gammas.shape}")
        # Γ(0) is symmetrized so that Γ(-k) = Γ(k)* holds bitwise for k = 0 as well
        gammas[0] = (gammas[0] + gammas[0].conj().T) / 2
        mirrored = gammas[:0:-1].conj().transpose(0, 2, 1)
        return cls(np.concatenate([mirrored, gammas]), source)


def block_matrix(autocov: AutocovSeq, row_lags: Sequence[int], col_lags: Sequence[int]) -> ComplexArray:
    # block (k, l) = Γ(k - l) = <e(k), e(l)>_w
    rows, cols = np.asarray(row_lags, dtype=int), np.asarray(col_lags, dtype=int)
    if rows.size == 0 or cols.size == 0:
        raise ValueError("Empty lag set")
    diffs = rows[:, None] - cols[None, :]
    needed = int(np.abs(diffs).max())
    if needed > autocov.K:
        raise AliasingError(f"Autocovariance sequence has lags up to {autocov.K}, but the window needs {needed}")
    q = autocov.q
    blocks = autocov.gammas[diffs + autocov.K]
    return np.ascontiguousarray(blocks.transpose(0, 2, 1, 3).reshape(rows.size * q, cols.size * q))


def block_toeplitz(autocov: AutocovSeq, lags: Sequence[int]) -> ComplexArray:
    return block_matrix(autocov, lags, lags)


@dataclass(frozen=True, eq=False)
class WhittleResult:
    forward: ComplexArray  # A_1..A_N of the order-N forward predictor
    errors: ComplexArray  # V_0..V_N, forward prediction error covariances
    cholesky_row: Optional[ComplexArray]  # L_{N,0..N}, last block row of the lower Cholesky factor

    @property
    def order(self) -> int:
        return int(self.forward.shape[0])


def _check_positive_definite(matrix: ComplexArray, scale: float, rtol: float, what: str, order: int) -> None:
    smallest = float(np.linalg.eigvalsh(matrix)[0])
    if smallest <= rtol * scale:
        raise SingularGramError(f"Block Toeplitz Gram is not positive definite: {what} error covariance at order {order} has smallest eigenvalue {smallest:.3e} (threshold {rtol * scale:.3e})")


def _right_solve(rhs: ComplexArray, matrix: ComplexArray) -> ComplexArray:
    # rhs @ matrix^{-1} for Hermitian positive definite matrix
    return la.solve(matrix, rhs.conj().T, assume_a="pos").conj().T


def levinson_whittle(gammas: ComplexArray, order: int, rtol: float = GRAM_PD_RTOL, cholesky_row: bool = False) -> WhittleResult:
    """Multichannel Levinson-Whittle recursion on Γ(0..order).

    Optionally accumulates the last block row of the lower block Cholesky factor of the
    (order+1)-block Toeplitz matrix, L_{N,l} = (Γ(N-l) - Σ_i Γ(N-l+i) A_i^(l)*) D_l^{-*}
    with D_l the lower Cholesky factor of V_l. Memory stays O(order·q²).
    """
    gammas = np.asarray(gammas, dtype=complex)
    if gammas.shape[0] < order + 1:
        raise AliasingError(f"Recursion of order {order} needs lags 0..{order}, got 0..{gammas.shape[0] - 1}")
    q = gammas.shape[1]
    N = order
    A = np.zeros((N, q, q), dtype=complex)
    B = np.zeros((N, q, q), dtype=complex)
    V = gammas[0].copy()
    U = gammas[0].copy()
    scale = max(float(np.linalg.eigvalsh(gammas[0])[-1]), np.finfo(float).tiny)
    _check_positive_definite(V, scale, rtol, "forward", 0)
    errors = [V.copy()]

    row: Optional[ComplexArray] = None
    if cholesky_row:
        row = np.zeros((N + 1, q, q), dtype=complex)
        row[0] = _lower_cholesky_solve(gammas[N], V)

    for p in range(N):
        delta = gammas[p + 1] - np.einsum("iab,ibc->ac", A[:p], gammas[p:0:-1])
        a_new = _right_solve(delta, U)
        b_new = _right_solve(delta.conj().T, V)
        A_prev, B_prev = A[:p].copy(), B[:p].copy()
        A[:p] = A_prev - np.einsum("ab,ibc->iac", a_new, B_prev[::-1])
        B[:p] = B_prev - np.einsum("ab,ibc->iac", b_new, A_prev[::-1])
        A[p], B[p] = a_new, b_new
        V = V - a_new @ delta.conj().T
        U = U - b_new @ delta
        V, U = (V + V.conj().T) / 2, (U + U.conj().T) / 2
        _check_positive_definite(V, scale, rtol, "forward", p + 1)
        _check_positive_definite(U, scale, rtol, "backward", p + 1)
        errors.append(V.copy())

        if row is not None:
            l = p + 1  # noqa: E741
            cov = gammas[N - l] - np.einsum("iab,icb->ac", gammas[N - l + 1 : N + 1], A[:l].conj())
            row[l] = _lower_cholesky_solve(cov, V)

    return WhittleResult(forward=A, errors=np.array(errors), cholesky_row=row)


def _lower_cholesky_solve(cov: ComplexArray, V: ComplexArray) -> ComplexArray:
    # cov @ D^{-*} with D = chol(V) lower triangular
    D = la.cholesky(V, lower=True)
    return la.solve_triangular(D, cov.conj().T, lower=True).conj().T

"""Tests for autocovariance sequences, block Toeplitz assembly and the Levinson-Whittle recursion."""

import numpy as np
import pytest

from ipflab.common import AliasingError, SingularGramError
from ipflab.models import MAFactor, StackedShift, autocovariance_sequence
from ipflab.subspaces import gram
from ipflab.toeplitz import AutocovSeq, block_matrix, block_toeplitz, levinson_whittle


def test_from_nonnegative_mirrors_lags(ma1: MAFactor) -> None:
    seq = autocovariance_sequence(ma1, 3)
    assert seq.K == 3 and seq.q == 2
    for k in range(4):
        np.testing.assert_array_equal(seq.at(-k), seq.at(k).conj().T)
    with pytest.raises(AliasingError, match="Lag 4"):
        seq.at(4)


def test_from_nonnegative_rejects_non_square() -> None:
    with pytest.raises(ValueError, match="square"):
        AutocovSeq.from_nonnegative(np.zeros((2, 2, 3)))


def test_block_toeplitz_structure(ma1: MAFactor) -> None:
    seq = autocovariance_sequence(ma1, 4)
    T = block_toeplitz(seq, range(-2, 3))
    assert T.shape == (10, 10)
    np.testing.assert_array_equal(T, T.conj().T)
    for i, k in enumerate(range(-2, 3)):
        for j, l in enumerate(range(-2, 3)):
            np.testing.assert_array_equal(T[2 * i : 2 * i + 2, 2 * j : 2 * j + 2], seq.at(k - l))
    assert np.linalg.eigvalsh(T).min() > 0


@pytest.mark.parametrize("shift", [-7, 3, 11])
def test_gram_is_shift_invariant(ma1: MAFactor, shift: int) -> None:
    seq = autocovariance_sequence(ma1, 6)
    np.testing.assert_array_equal(gram(seq, (-3, 2)).matrix, gram(seq, (-3 + shift, 2 + shift)).matrix)


def test_block_matrix_needs_enough_lags(ma1: MAFactor) -> None:
    seq = autocovariance_sequence(ma1, 2)
    with pytest.raises(AliasingError, match="needs 3"):
        block_toeplitz(seq, range(4))
    with pytest.raises(ValueError, match="Empty"):
        block_matrix(seq, [], [0])


def test_levinson_whittle_solves_normal_equations(ma1: MAFactor) -> None:
    """Forward predictor X(0) ≈ Σ A_i X(-i) from the block normal equations."""
    N, q = 3, 2
    seq = autocovariance_sequence(ma1, N)
    result = levinson_whittle(seq.nonnegative(), N)

    R = block_toeplitz(seq, [-i for i in range(1, N + 1)])
    rhs = np.hstack([seq.at(j) for j in range(1, N + 1)])
    A_row = np.linalg.solve(R.T, rhs.T).T
    for i in range(N):
        np.testing.assert_allclose(result.forward[i], A_row[:, i * q : (i + 1) * q], atol=1e-12)

    V = seq.at(0) - sum(A_row[:, i * q : (i + 1) * q] @ seq.at(-(i + 1)) for i in range(N))
    np.testing.assert_allclose(result.errors[-1], V, atol=1e-12)
    assert result.order == N
    assert result.cholesky_row is None


def test_levinson_whittle_cholesky_row(ma1: MAFactor) -> None:
    N, q = 4, 2
    seq = autocovariance_sequence(ma1, N)
    row = levinson_whittle(seq.nonnegative(), N, cholesky_row=True).cholesky_row
    assert row is not None
    L = np.linalg.cholesky(block_toeplitz(seq, range(N + 1)))
    for l in range(N + 1):  # noqa: E741
        np.testing.assert_allclose(row[l], L[N * q :, l * q : (l + 1) * q], atol=1e-12)


def test_levinson_whittle_error_covariances_decrease(ma_scalar: MAFactor) -> None:
    errors = levinson_whittle(autocovariance_sequence(ma_scalar, 32).nonnegative(), 32).errors
    dets = errors[:, 0, 0].real
    assert dets[0] == pytest.approx(1.25)
    assert np.all(np.diff(dets) <= 1e-15)
    assert dets[-1] == pytest.approx(1.0, abs=1e-12)


def test_levinson_whittle_singular(stacked_shift: StackedShift) -> None:
    with pytest.raises(SingularGramError, match="not positive definite"):
        levinson_whittle(autocovariance_sequence(stacked_shift, 4).nonnegative(), 4)


def test_levinson_whittle_needs_lags(ma1: MAFactor) -> None:
    with pytest.raises(AliasingError):
        levinson_whittle(autocovariance_sequence(ma1, 2).nonnegative(), 5)

"""Tests for Gram geometry: principal angles, intersections, finite IPF checks, projections and prediction."""

import numpy as np
import pytest

from ipflab.models import MAFactor, ScalarWeight, StackedShift, WhiteNoise, autocovariance_sequence
from ipflab.subspaces import (
    CheckVerdict,
    IndexSet,
    Stability,
    alternating_projections,
    cnd_profile,
    finite_predictor,
    future,
    generator_row,
    gram,
    intersection,
    ipf_finite_check,
    past,
    principal_angles,
)
from ipflab.toeplitz import block_toeplitz


def test_index_set() -> None:
    window = IndexSet.window(-2, 1)
    assert window.lags == (-2, -1, 0, 1)
    assert str(window) == "[-2..1]"
    assert str(IndexSet.of([3, -1, 3])) == "[-1, 3]"
    assert past(3).union(future(2)) == IndexSet.window(-3, 2)
    assert len(future(4)) == 5
    with pytest.raises(ValueError, match="Empty lag window"):
        IndexSet.window(2, 1)
    with pytest.raises(ValueError, match="sorted"):
        IndexSet((1, 1))


def test_gram_block_access(ma1: MAFactor) -> None:
    autocov = autocovariance_sequence(ma1, 6)
    g = gram(autocov, (-2, 2))
    np.testing.assert_array_equal(g.block(1, -1), autocov.at(2))
    assert g.rank() == 10


def test_white_noise_past_and_future_are_orthogonal(white_noise: WhiteNoise) -> None:
    report = principal_angles(past(4), future(4), autocovariance_sequence(white_noise, 8))
    assert report.rank_a == 8 and report.rank_b == 10
    assert report.largest < 1e-14


def test_ma1_principal_angles(ma1: MAFactor) -> None:
    """Only X(-1) and X(0) are correlated across the boundary, so at most q cosines are nonzero."""
    report = principal_angles(past(6), future(6), autocovariance_sequence(ma1, 12))
    assert 0 < report.largest < 1
    assert report.second > 0
    assert max(report.cosines[2:]) < 1e-10


@pytest.mark.parametrize("N", range(1, 17))
def test_stacked_shift_profile_has_shared_dimension(stacked_shift: StackedShift, N: int) -> None:
    autocov = autocovariance_sequence(stacked_shift, 32)
    row = cnd_profile(stacked_shift, [N], autocov=autocov)[0]
    assert row.dim == 1
    assert row.cos_1 >= 1 - 1e-8
    assert row.residual < 1e-8


def test_stacked_shift_common_vector(stacked_shift: StackedShift) -> None:
    """The shared vector is Y(-1), i.e. e_2(-1) in the past and e_1(0) in the future."""
    autocov = autocovariance_sequence(stacked_shift, 16)
    certificate = intersection(past(8), future(8), autocov)
    assert certificate.dim == 1
    assert certificate.stability is Stability.STABLE
    assert certificate.residual < 1e-8
    G = block_toeplitz(autocov, certificate.union.lags)
    x = certificate.basis[0]
    for lag, component in [(-1, 2), (0, 1)]:
        e = generator_row(certificate.union, 2, lag, component)
        assert abs(x @ G @ e.conj()) == pytest.approx(1.0, abs=1e-8)


def test_scalar_weight_profile_has_no_shared_dimension(scalar_weight: ScalarWeight) -> None:
    rows = cnd_profile(scalar_weight, [1, 2, 4, 8, 16])
    assert [r.dim for r in rows] == [0, 0, 0, 0, 0]
    assert all(r.cos_1 < 1 - 1e-8 for r in rows)
    assert rows[-1].cos_1 > rows[0].cos_1


@pytest.mark.parametrize("name", ["ma1", "scalar_weight", "stacked_shift"])
def test_largest_cosine_never_decreases_over_nested_windows(name: str, request: pytest.FixtureRequest) -> None:
    rows = cnd_profile(request.getfixturevalue(name), [1, 2, 4, 8, 16, 32])
    largest = [r.cos_1 for r in rows]
    assert all(b >= a - 1e-12 for a, b in zip(largest, largest[1:]))


@pytest.mark.parametrize(
    "name, A, B",
    [
        ("ma1", past(8), future(8)),
        ("ma1", past(8), IndexSet.window(-2, 8)),
        ("stacked_shift", past(6), future(6)),
        ("scalar_weight", past(4), IndexSet.window(-1, 4)),
    ],
)
def test_intersection_dimension_follows_grassmann(name: str, A: IndexSet, B: IndexSet, request: pytest.FixtureRequest) -> None:
    certificate = intersection(A, B, autocovariance_sequence(request.getfixturevalue(name), 32))
    rank_a, rank_b, rank_union = certificate.ranks
    assert certificate.dim == rank_a + rank_b - rank_union
    assert certificate.stability is Stability.STABLE


@pytest.mark.parametrize("name", ["white_noise", "ma1", "scalar_weight"])
@pytest.mark.parametrize("N", [1, 8, 32])
def test_gram_has_full_rank_for_maximal_rank_models(name: str, N: int, request: pytest.FixtureRequest) -> None:
    autocov = autocovariance_sequence(request.getfixturevalue(name), 2 * N)
    assert gram(autocov, (-N, N)).rank(1e-8) == 2 * (2 * N + 1)


def test_ma1_largest_cosine_settles(ma1: MAFactor) -> None:
    rows = cnd_profile(ma1, [32, 64])
    assert rows[1].cos_1 == pytest.approx(rows[0].cos_1, abs=1e-10)
    assert rows[1].dim == 0


def test_scalar_weight_cosines_stay_below_one(scalar_weight: ScalarWeight) -> None:
    rows = cnd_profile(scalar_weight, [8, 16, 32, 64])
    assert all(r.cos_1 < 1 - 1e-6 for r in rows)
    assert all(r.dim == 0 for r in rows)


def test_cnd_profile_rejects_unsorted(white_noise: WhiteNoise) -> None:
    with pytest.raises(ValueError, match="ascending"):
        cnd_profile(white_noise, [4, 2])


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ipf_finite_check_passes(ma1: MAFactor, white_noise: WhiteNoise, n: int) -> None:
    for model in (ma1, white_noise):
        autocov = autocovariance_sequence(model, 32)
        for N in range(4, 17):
            check = ipf_finite_check(model, n, N, autocov=autocov)
            assert check.verdict is CheckVerdict.PASS, check.reason
            assert check.dim == 2 * n == check.expected_dim
            assert max(check.coincidence_angles) < 1e-8


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ipf_finite_check_fails_on_stacked_shift(stacked_shift: StackedShift, n: int) -> None:
    check = ipf_finite_check(stacked_shift, n, 8)
    assert check.verdict is CheckVerdict.FAIL
    assert check.reason == "RANK_DEFICIENT"
    assert check.dim == n + 1
    assert check.union_rank < check.union_size
    assert check.to_dict()["verdict"] == "FAIL"


def test_ipf_finite_check_needs_n_below_N(white_noise: WhiteNoise) -> None:
    with pytest.raises(ValueError, match="N > n >= 1"):
        ipf_finite_check(white_noise, 4, 4)


def test_alternating_projections_decay_matches_largest_cosine(ma1: MAFactor) -> None:
    A, B = past(8), future(8)
    autocov = autocovariance_sequence(ma1, 16)
    start = generator_row(A.union(B), 2, 0, 1)
    trace = alternating_projections(A, B, autocov, start, 30)
    largest = principal_angles(A, B, autocov).largest
    assert trace.decay_ratio == pytest.approx(largest**2, abs=1e-6)
    assert len(trace.norms) == 31


def test_alternating_projections_keep_shared_vector(stacked_shift: StackedShift) -> None:
    A, B = past(8), future(8)
    start = generator_row(A.union(B), 2, 0, 1)
    trace = alternating_projections(A, B, autocovariance_sequence(stacked_shift, 16), start, 10)
    assert trace.limit_norm == pytest.approx(1.0, abs=1e-10)
    assert trace.decay_ratio == pytest.approx(1.0, abs=1e-10)


def test_alternating_projections_argument_checks(white_noise: WhiteNoise) -> None:
    autocov = autocovariance_sequence(white_noise, 4)
    with pytest.raises(ValueError, match="at least one iteration"):
        alternating_projections(past(2), future(2), autocov, np.zeros(10), 0)
    with pytest.raises(ValueError, match="Start row"):
        alternating_projections(past(2), future(2), autocov, np.zeros(3), 1)


def test_generator_row_checks() -> None:
    lags = IndexSet.window(-1, 1)
    np.testing.assert_array_equal(generator_row(lags, 2, 1, 2), [0, 0, 0, 0, 0, 1])
    with pytest.raises(ValueError, match="not in"):
        generator_row(lags, 2, 5, 1)
    with pytest.raises(ValueError, match="outside 1..2"):
        generator_row(lags, 2, 0, 3)


def test_finite_predictor_reaches_szego_limit(ma1: MAFactor) -> None:
    """det V_N tends to exp ∫ log det w dσ = |det θ₀|² = 1."""
    predictor = finite_predictor(autocovariance_sequence(ma1, 64), 64)
    assert predictor.N == 64
    assert abs(predictor.det_trace()[-1] - 1.0) < 1e-3
    assert predictor.loewner_violation() <= 1e-10
    np.testing.assert_allclose(predictor.error_covariance, np.eye(2), atol=1e-6)


def test_finite_predictor_order(white_noise: WhiteNoise) -> None:
    with pytest.raises(ValueError, match=">= 1"):
        finite_predictor(autocovariance_sequence(white_noise, 2), 0)

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gfevd_bruteforce
from qvarspill.errors import DegenerateVarianceError
from qvarspill.fevd import FevdMatrix, generalized_fevd, qvma
from qvarspill.qvar import QvarSpec, fit_qvar, from_parameters


def test_qvma_first_order_powers():
    A = qvma(from_parameters(0.5 * np.eye(2), np.eye(2)), 3).A
    np.testing.assert_array_equal(A, [np.eye(2), 0.5 * np.eye(2), 0.25 * np.eye(2)])


def test_qvma_zero_coefficients():
    A = qvma(from_parameters(np.zeros((3, 3)), np.eye(3)), 6).A
    assert np.array_equal(A[0], np.eye(3))
    assert not A[1:].any()


def test_qvma_second_order_scalar():
    A = qvma(np.array([[[0.5]], [[0.3]]]), 4).A
    # A2 = 0.5*0.5 + 0.3*1, A3 = 0.5*0.55 + 0.3*0.5
    np.testing.assert_allclose(A.ravel(), [1.0, 0.5, 0.55, 0.425], rtol=0, atol=1e-12)


def test_white_noise_diagonal_sigma_identity():
    f = generalized_fevd(from_parameters(np.zeros((3, 3)), np.diag([1.0, 4.0, 0.5])), 10)
    np.testing.assert_allclose(f.normalized, np.eye(3), atol=1e-15)


@pytest.mark.parametrize("H", [1, 2, 10, 50])
def test_correlated_white_noise_closed_form(H):
    S = np.array([[1.0, 0.5], [0.5, 1.0]])
    f = generalized_fevd(from_parameters(np.zeros((2, 2)), S), H)
    np.testing.assert_allclose(f.raw, [[1.0, 0.25], [0.25, 1.0]], atol=1e-12)
    assert f.normalized[0, 1] == pytest.approx(0.2, abs=1e-12)
    assert f.normalized[1, 0] == pytest.approx(0.2, abs=1e-12)


def test_closed_form_general_white_noise():
    # raw[j, k] = S_jk^2 / (S_kk S_jj) when B = 0
    S = np.array([[2.0, 0.6, -0.3], [0.6, 1.0, 0.2], [-0.3, 0.2, 0.5]])
    f = generalized_fevd(from_parameters(np.zeros((3, 3)), S), 7)
    d = np.diag(S)
    np.testing.assert_allclose(f.raw, S**2 / np.outer(d, d), rtol=1e-13)


def test_degenerate_variance():
    S = np.diag([1.0, 0.0])
    with pytest.raises(DegenerateVarianceError):
        generalized_fevd(from_parameters(np.zeros((2, 2)), S), 5)


def test_json_shape_and_round_trip():
    f = generalized_fevd(from_parameters(0.3 * np.eye(2), np.eye(2) + 0.2, tau=0.05, assets=("X", "Y")), 10)
    d = json.loads(f.to_json())
    assert set(d) == {"tau", "horizon", "assets", "normalized"}
    assert d["assets"] == ["X", "Y"] and d["tau"] == 0.05 and d["horizon"] == 10
    g = FevdMatrix.from_dict(d)
    assert np.array_equal(g.normalized, f.normalized)


# properties --------------------------------------------------------------

@st.composite
def var1(draw, max_n=3):
    n = draw(st.integers(1, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    B = rng.normal(scale=0.5, size=(n, n))
    L = rng.normal(size=(n, n))
    S = L @ L.T + 0.1 * np.eye(n)
    return B, S


@settings(max_examples=80, deadline=None)
@given(var1(), st.integers(1, 5))
def test_matches_bruteforce(params, H):
    B, S = params
    f = generalized_fevd(from_parameters(B, S), H)
    raw = gfevd_bruteforce(B, S, H)
    np.testing.assert_allclose(f.raw, raw, rtol=1e-12, atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(var1(max_n=4), st.integers(1, 20))
def test_rows_sum_to_one(params, H):
    B, S = params
    f = generalized_fevd(from_parameters(B, S), H)
    np.testing.assert_allclose(f.normalized.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(f.normalized >= 0)


@settings(max_examples=60, deadline=None)
@given(var1(max_n=4), st.floats(1e-3, 1e3))
def test_uniform_scale_invariance(params, c):
    B, S = params
    a = generalized_fevd(from_parameters(B, S), 10)
    b = generalized_fevd(from_parameters(B, c * c * S), 10)
    np.testing.assert_allclose(b.normalized, a.normalized, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(var1(max_n=4), st.integers(1, 15))
def test_denominator_monotone_in_horizon(params, H):
    B, S = params
    m = from_parameters(B, S)
    A1, A2 = qvma(m, H).A, qvma(m, H + 1).A
    d1 = np.einsum("hjk,kl,hjl->j", A1, S, A1)
    d2 = np.einsum("hjk,kl,hjl->j", A2, S, A2)
    assert np.all(d2 >= d1 - 1e-12 * np.abs(d1))


@settings(max_examples=60, deadline=None)
@given(var1(max_n=4), st.randoms(use_true_random=False))
def test_permutation_equivariance(params, rnd):
    B, S = params
    n = len(S)
    perm = list(range(n))
    rnd.shuffle(perm)
    a = generalized_fevd(from_parameters(B, S), 10)
    b = generalized_fevd(from_parameters(B[np.ix_(perm, perm)], S[np.ix_(perm, perm)]), 10)
    np.testing.assert_allclose(b.normalized, a.normalized[np.ix_(perm, perm)], atol=1e-12)


def test_scale_invariance_through_estimation():
    rng = np.random.default_rng(8)
    Y = rng.standard_t(4, size=(300, 3))
    a = generalized_fevd(fit_qvar(Y, QvarSpec(1, 0.05)), 10)
    b = generalized_fevd(fit_qvar(7.5 * Y, QvarSpec(1, 0.05)), 10)
    np.testing.assert_allclose(b.normalized, a.normalized, atol=1e-10)

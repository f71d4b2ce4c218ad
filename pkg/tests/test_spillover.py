import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qvarspill.errors import AlignmentError
from qvarspill.fevd import FevdMatrix, generalized_fevd
from qvarspill.qvar import from_parameters
from qvarspill.spillover import category_flows, indices, network, pairwise_deltas, relative
from qvarspill.timeseries import AssetMeta, Category

M2 = [[0.8, 0.2], [0.3, 0.7]]


def fm(mat, assets=None, tau=0.5):
    return FevdMatrix.from_normalized(mat, assets=assets, tau=tau)


def test_identity_no_spillover():
    ix = indices(fm(np.eye(3)))
    assert ix.total == 0 and not ix.from_.any() and not ix.to.any() and not ix.net.any()


def test_two_by_two_arithmetic():
    ix = indices(fm(M2))
    np.testing.assert_allclose(ix.from_, [0.2, 0.3])
    np.testing.assert_allclose(ix.to, [0.3, 0.2])
    np.testing.assert_allclose(ix.net, [0.1, -0.1])
    assert ix.total == pytest.approx(0.25)


def test_white_noise_chain_total():
    f = generalized_fevd(from_parameters(np.zeros((2, 2)), [[1.0, 0.5], [0.5, 1.0]]), 10)
    assert indices(f).total == pytest.approx(0.2, abs=1e-12)


def _ix(from_, to, tau):
    n = len(from_)
    from_, to = np.asarray(from_, float), np.asarray(to, float)
    return type(indices(fm(np.eye(n))))(tau, tuple("abc"[:n]), from_, to, to - from_, 0.0)


def test_relative_zero_when_identical():
    a = indices(fm(M2))
    r = relative(a, a, a)
    for side in (r.left, r.right):
        for v in side.values():
            assert not np.any(v)


def test_relative_left_from_and_right_to():
    lo = _ix([0.5, 0.1], [0.1, 0.1], 0.05)
    md = _ix([0.2, 0.1], [0.25, 0.1], 0.5)
    hi = _ix([0.2, 0.1], [0.1, 0.1], 0.95)
    r = relative(lo, md, hi)
    assert r.left["from"][0] == pytest.approx(0.3)
    assert r.right["to"][0] == pytest.approx(-0.15)


def test_relative_misaligned():
    a = indices(fm(M2, assets=("x", "y")))
    b = indices(fm(M2, assets=("y", "x")))
    with pytest.raises(AlignmentError):
        relative(a, b, a)


def test_pairwise_identical_zero():
    out = pairwise_deltas(fm(M2), fm(M2), top_k=2)
    assert [d for *_, d in out] == [0.0, 0.0]


def test_pairwise_single_perturbation():
    base = np.full((3, 3), 0.2) + 0.4 * np.eye(3)
    tail = base.copy()
    tail[2, 0] += 0.1  # source 1 -> target 3
    tail[2, 2] -= 0.1
    out = pairwise_deltas(fm(tail), fm(base), top_k=1)
    assert out[0][:2] == ("1", "3")
    assert out[0][2] == pytest.approx(10.0)


def test_pairwise_clamps_top_k():
    out = pairwise_deltas(fm(np.eye(3)), fm(np.eye(3)), top_k=100)
    assert len(out) == 6
    # ties broken by (source, target)
    assert [(s, t) for s, t, _ in out] == sorted((s, t) for s, t, _ in out)


def test_network_identity_empty():
    assert network(fm(np.eye(4)), threshold=1e-6) == []


def test_network_two_assets():
    edges = {(e.source, e.target): e for e in network(fm(M2), threshold=0.0)}
    assert set(edges) == {("2", "1"), ("1", "2")}
    assert edges["2", "1"].weight == pytest.approx(0.2) and edges["2", "1"].net_weight == pytest.approx(-0.1)
    assert edges["1", "2"].weight == pytest.approx(0.3) and edges["1", "2"].net_weight == pytest.approx(0.1)


def test_network_threshold():
    edges = network(fm(M2), threshold=0.25)
    assert [(e.source, e.target) for e in edges] == [("1", "2")]


def test_flows_single_category():
    f = fm(M2)
    flows = category_flows(f, {"1": "Algorithmic", "2": "Algorithmic"})
    assert len(flows) == 1
    assert flows[0].flow == pytest.approx(2 * indices(f).total)


def test_flows_identity_zero():
    flows = category_flows(fm(np.eye(2)), {"1": "FiatBacked", "2": "Algorithmic"})
    assert len(flows) == 4 and all(f.flow == 0 for f in flows)


def test_flows_single_entry():
    mat = np.eye(3)
    mat[2, 0], mat[2, 2] = 0.3, 0.7  # C receives 0.3 from A
    meta = [AssetMeta("A", "FiatBacked"), AssetMeta("B", "FiatBacked"), AssetMeta("C", "Algorithmic")]
    flows = {(f.from_category, f.to_category): f.flow for f in category_flows(fm(mat, assets="ABC"), meta)}
    assert flows.pop((Category.FiatBacked, Category.Algorithmic)) == pytest.approx(0.3)
    assert all(v == 0 for v in flows.values())


def test_flows_missing_category():
    with pytest.raises(AlignmentError):
        category_flows(fm(M2), {"1": "FiatBacked"})


# properties --------------------------------------------------------------

@st.composite
def stochastic(draw, max_n=8):
    n = draw(st.integers(1, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    W = np.random.default_rng(seed).random((n, n)) ** 3
    return W / W.sum(axis=1, keepdims=True)


@settings(max_examples=200)
@given(stochastic())
def test_identities(mat):
    ix = indices(fm(mat))
    n = len(mat)
    assert abs(ix.net.sum()) <= 1e-10
    assert abs(n * ix.total - ix.from_.sum()) <= 1e-10
    assert abs(n * ix.total - ix.to.sum()) <= 1e-10


@settings(max_examples=100)
@given(stochastic(), st.data())
def test_flows_sum_to_mass(mat, data):
    n = len(mat)
    cats = data.draw(st.lists(st.sampled_from(list(Category)), min_size=n, max_size=n))
    f = fm(mat)
    flows = category_flows(f, dict(zip(f.asset_order, cats)))
    assert abs(sum(x.flow for x in flows) - n * indices(f).total) <= 1e-10


@settings(max_examples=100)
@given(stochastic(), st.integers(0, 2**32 - 1))
def test_pairwise_antisymmetric(mat, seed):
    n = len(mat)
    W = np.random.default_rng(seed).random((n, n))
    other = W / W.sum(axis=1, keepdims=True)
    ab = {(s, t): d for s, t, d in pairwise_deltas(fm(mat), fm(other), top_k=n * n)}
    ba = {(s, t): d for s, t, d in pairwise_deltas(fm(other), fm(mat), top_k=n * n)}
    assert ab.keys() == ba.keys()
    for key in ab:
        assert ab[key] == -ba[key]


@settings(max_examples=100)
@given(stochastic(), st.floats(0.0, 0.5))
def test_network_weights_match_matrix(mat, thr):
    f = fm(mat)
    pos = {a: i for i, a in enumerate(f.asset_order)}
    for e in network(f, thr):
        assert e.weight >= thr
        assert e.weight == mat[pos[e.target], pos[e.source]]

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qvarspill import rolling
from qvarspill.dgp import DgpSpec, simulate
from qvarspill.errors import PlanError, RunError
from qvarspill.fevd import generalized_fevd
from qvarspill.qvar import QvarSpec, fit_qvar
from qvarspill.spillover import indices
from qvarspill.timeseries import DeviationPanel

S_WN = np.array([[1.0, 0.5], [0.5, 1.0]])


def test_plan_counts():
    p = rolling.plan(100, 50, 10)
    assert len(p.windows) == 6
    assert p.windows[-1] == (50, 99)
    assert p.windows[0] == (0, 49)


def test_plan_single_window():
    assert rolling.plan(80, 80, 3).windows == ((0, 79),)


@pytest.mark.parametrize("T,w,s", [(100, 101, 1), (100, 0, 1), (100, 10, 0)])
def test_plan_errors(T, w, s):
    with pytest.raises(PlanError):
        rolling.plan(T, w, s)


@settings(max_examples=200)
@given(st.integers(1, 500), st.integers(1, 500), st.integers(1, 50))
def test_plan_formula(T, w, s):
    if w > T:
        return
    p = rolling.plan(T, w, s)
    assert len(p.windows) == (T - w) // s + 1
    assert all(b - a + 1 == w for a, b in p.windows)
    assert p.windows[-1][1] <= T - 1 < p.windows[-1][1] + s


def test_panel_shorter_than_plan():
    panel = DeviationPanel.from_diffs(np.random.default_rng(0).normal(size=(40, 2)))
    with pytest.raises(PlanError):
        rolling.run(panel, rolling.plan(60, 50, 5), [0.5])


def _wn_total(seed, T):
    panel = simulate(DgpSpec(2, 1, np.zeros((2, 2)), S_WN, T=T, seed=seed))
    return indices(generalized_fevd(fit_qvar(panel, QvarSpec(1, 0.5)), 10)).total


def test_white_noise_path_near_closed_form():
    w = 300
    oracle = np.array([_wn_total(5000 + s, w) for s in range(50)])
    # the sampling distribution is centred near the closed-form level 0.2
    assert abs(np.median(oracle) - 0.2) < 0.02
    lo, hi = oracle.mean() - 4 * oracle.std(), oracle.mean() + 4 * oracle.std()
    panel = simulate(DgpSpec(2, 1, np.zeros((2, 2)), S_WN, T=600, seed=77))
    res = rolling.run(panel, rolling.plan(600, w, 60), [0.5])
    totals = res.totals(0.5)
    assert len(totals) == 6
    assert np.all((totals > lo) & (totals < hi))
    assert all(r.flags == () for r in res.rows)


def test_singular_window_isolated():
    rng = np.random.default_rng(3)
    diffs = rng.normal(size=(120, 2))
    diffs[40:70, 1] = 0.0  # only window 2 (rows 40..69) has a constant column
    panel = DeviationPanel.from_diffs(diffs)
    res = rolling.run(panel, rolling.plan(120, 30, 10), [0.5])
    failed = [r.index for r in res.rows if r.indices is None]
    assert 4 in failed
    for r in res.rows:
        a, b = res.plan.windows[r.index]
        touches = not (b < 40 or a > 69)
        constant = a >= 40 and b <= 69
        if constant:
            assert r.indices is None and r.flags == ("SingularDesignError",)
        elif not touches:
            assert r.indices is not None


def test_all_windows_fail():
    panel = DeviationPanel.from_diffs(np.zeros((60, 2)))
    with pytest.raises(RunError):
        rolling.run(panel, rolling.plan(60, 30, 10), [0.5])


def test_anchor_is_window_end():
    panel = DeviationPanel.from_diffs(np.random.default_rng(1).normal(size=(100, 2)))
    res = rolling.run(panel, rolling.plan(100, 50, 25), [0.5])
    assert [r.anchor for r in res.rows] == [panel.diff_timestamps[i] for i in (49, 74, 99)]
    assert res.metadata["window"] == 50 and res.metadata["step"] == 25


def _same(a, b):
    assert len(a.rows) == len(b.rows)
    for x, y in zip(a.rows, b.rows):
        assert (x.index, x.tau, x.anchor, x.flags) == (y.index, y.tau, y.anchor, y.flags)
        for f in ("from_", "to", "net"):
            assert np.array_equal(getattr(x.indices, f), getattr(y.indices, f))
        assert x.indices.total == y.indices.total


@pytest.fixture(scope="module")
def panel4():
    return simulate(DgpSpec(3, 1, 0.3 * np.eye(3), np.eye(3) + 0.3, T=260, seed=4, dist="t", df=4))


def test_thread_schedule_independent(panel4, monkeypatch):
    p = rolling.plan(260, 120, 35)
    a = rolling.run(panel4, p, [0.05, 0.5], threads=1)
    b = rolling.run(panel4, p, [0.05, 0.5], threads=8)
    monkeypatch.setenv("SPILL_THREADS", "3")
    c = rolling.run(panel4, p, [0.05, 0.5])
    _same(a, b)
    _same(a, c)


def test_window_isolation(panel4):
    p = rolling.plan(260, 120, 35)
    base = rolling.run(panel4, p, [0.5])
    diffs = panel4.diffs.copy()
    diffs[200:] += 50.0  # outside window 0 (rows 0..119)
    moved = DeviationPanel(panel4.timestamps, panel4.assets, panel4.deviations, diffs, panel4.diff_timestamps)
    other = rolling.run(moved, p, [0.5])
    assert np.array_equal(base.rows[0].indices.from_, other.rows[0].indices.from_)
    assert base.rows[0].indices.total == other.rows[0].indices.total


def test_stream_equals_batch(panel4):
    p = rolling.plan(260, 120, 35)
    batch = rolling.run(panel4, p, [0.5])
    for i, win in enumerate(p.windows):
        one = rolling.run(panel4, rolling.WindowPlan(p.w, p.s, (win,)), [0.5])
        assert one.rows[0].indices.total == batch.rows[i].indices.total


def test_thread_cap_env(monkeypatch):
    monkeypatch.setenv("SPILL_THREADS", "6")
    assert rolling.thread_cap() == 6
    monkeypatch.setenv("SPILL_THREADS", "junk")
    assert rolling.thread_cap() == 1
    monkeypatch.delenv("SPILL_THREADS")
    assert rolling.thread_cap(2) == 2

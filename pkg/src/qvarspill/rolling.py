"""Fixed-length rolling-window spillover estimation."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PlanError, RunError, SpillError
from .fevd import generalized_fevd
from .qvar import QvarSpec, fit_qvar, stability_check
from .spillover import indices

DEFAULT_WINDOW = 200
DEFAULT_STEP = 5


@dataclass(frozen=True)
class WindowPlan:
    w: int
    s: int
    windows: tuple  # ((start, end), ...) inclusive row indices into diffs


@dataclass(frozen=True)
class WindowResult:
    index: int
    tau: float
    anchor: np.datetime64
    indices: object | None  # SpilloverIndices, None when the window failed
    flags: tuple = ()
    error: str | None = None


@dataclass(frozen=True)
class RollingResult:
    plan: WindowPlan
    assets: tuple
    taus: tuple
    horizon: int
    rows: tuple  # WindowResult, ordered by window then tau
    metadata: dict = field(default_factory=dict)

    @property
    def anchor_timestamps(self):
        return np.array(sorted({r.anchor for r in self.rows}), dtype="datetime64[ns]")

    def totals(self, tau) -> np.ndarray:
        return np.array([r.indices.total if r.indices is not None else np.nan for r in self.rows if r.tau == tau])


def plan(T: int, w: int = DEFAULT_WINDOW, s: int = DEFAULT_STEP) -> WindowPlan:
    if s < 1:
        raise PlanError(f"step must be >= 1, got {s}")
    if w < 1:
        raise PlanError(f"window length must be >= 1, got {w}")
    if w > T:
        raise PlanError(f"window length {w} exceeds the {T} available observations")
    count = (T - w) // s + 1
    return WindowPlan(w, s, tuple((i * s, i * s + w - 1) for i in range(count)))


def thread_cap(default: int = 1) -> int:
    raw = os.environ.get("SPILL_THREADS")
    if raw is None:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def _one_window(Y, ts, assets, start, end, tau, p, H, index):
    anchor = ts[end]
    chunk = Y[start : end + 1]
    try:
        model = fit_qvar(chunk, QvarSpec(p, tau), assets=assets)
        flags = []
        if stability_check(model) >= 1.0:
            flags.append("unstable")
        if model.psd_repaired:
            flags.append("psd_repair")
        if not all(model.converged):
            flags.append("nonconvergence")
        idx = indices(generalized_fevd(model, H))
        return WindowResult(index, tau, anchor, idx, tuple(flags))
    except SpillError as exc:
        return WindowResult(index, tau, anchor, None, (type(exc).__name__,), str(exc))


def run(panel, window_plan: WindowPlan, specs, H: int = 10, threads: int | None = None) -> RollingResult:
    """Fit every (window, quantile) cell; failed cells are flagged, not fatal.

    ``specs`` is a list of QvarSpec (one per quantile) or of quantile levels
    (lag order 1). Work is spread over ``threads`` workers (default from
    ``SPILL_THREADS``); output order follows the plan regardless.
    """
    Y = np.asarray(panel.diffs, dtype=float)
    ts = panel.diff_timestamps
    last = window_plan.windows[-1][1] if window_plan.windows else -1
    if last >= len(Y):
        raise PlanError(f"plan needs {last + 1} observations, panel has {len(Y)}")
    specs = [s if isinstance(s, QvarSpec) else QvarSpec(1, float(s)) for s in specs]
    assets = tuple(panel.ids)
    jobs = [
        (Y, ts, assets, a, b, s.tau, s.p, H, i)
        for i, (a, b) in enumerate(window_plan.windows)
        for s in specs
    ]
    threads = thread_cap() if threads is None else max(1, int(threads))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda job: _one_window(*job), jobs))
    else:
        rows = [_one_window(*job) for job in jobs]
    if rows and all(r.indices is None for r in rows):
        raise RunError(f"all {len(rows)} window fits failed; first error: {rows[0].error}")
    meta = {"window": window_plan.w, "step": window_plan.s, "horizon": H, "lags": [s.p for s in specs]}
    return RollingResult(window_plan, assets, tuple(s.tau for s in specs), H, tuple(rows), meta)

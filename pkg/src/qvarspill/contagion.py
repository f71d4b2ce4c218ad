"""Event-study tools: Forbes-Rigobon adjusted correlations and synthetic control."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DomainError, DonorPoolError, InsufficientDataError
from .fevd import generalized_fevd
from .qvar import QvarSpec, fit_qvar
from .spillover import indices
from .timeseries import Category, balanced_window

MIN_WINDOW_OBS = 10
ALPHA = 0.05


@dataclass(frozen=True)
class EventWindowSpec:
    affected: str
    calm: tuple  # (start, end) instants, inclusive
    crisis: tuple
    event_time: str | None = None
    name: str = "event"
    targets: tuple = ()
    treated: str | None = None
    donors: tuple = ()
    proxy_window: int = 24
    resample: str | None = None

    def __post_init__(self):
        calm = tuple(np.datetime64(t, "ns") for t in self.calm)
        crisis = tuple(np.datetime64(t, "ns") for t in self.crisis)
        if len(calm) != 2 or len(crisis) != 2:
            raise ValueError("windows are [start, end] pairs")
        if not (calm[0] <= calm[1] and crisis[0] <= crisis[1]):
            raise ValueError("window start must not follow its end")
        if not calm[1] < crisis[0]:
            raise ValueError("calm window must precede the crisis window")
        object.__setattr__(self, "calm", calm)
        object.__setattr__(self, "crisis", crisis)
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "donors", tuple(self.donors))

    @classmethod
    def from_dict(cls, d) -> "EventWindowSpec":
        d = dict(d)
        return cls(
            affected=d["affected"],
            calm=tuple(d["calm"]),
            crisis=tuple(d["crisis"]),
            event_time=d.get("event_time"),
            name=d.get("name", "event"),
            targets=tuple(d.get("targets", ())),
            treated=d.get("treated"),
            donors=tuple(d.get("donors", ())),
            proxy_window=int(d.get("proxy_window", 24)),
            resample=d.get("resample"),
        )

    @classmethod
    def from_json(cls, path) -> "EventWindowSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class FrResult:
    target_asset: str
    rho_calm: float
    rho_crisis: float
    delta: float
    rho_adj: float
    delta_rho_adj: float
    significant: bool
    z_stat: float
    n_calm: int = 0
    n_crisis: int = 0


@dataclass(frozen=True)
class SyntheticControlResult:
    treated: str
    donors: tuple
    weights: np.ndarray
    pre_rmse: float
    effect: float
    placebo_effects: dict
    p_value: float
    paths: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "treated": self.treated,
            "donors": list(self.donors),
            "weights": dict(zip(self.donors, self.weights.tolist())),
            "pre_rmse": self.pre_rmse,
            "effect": self.effect,
            "placebo_effects": self.placebo_effects,
            "p_value": self.p_value,
            "paths": self.paths,
        }


@dataclass(frozen=True)
class EventSpillover:
    pre_total: float
    during_total: float

    @property
    def delta(self) -> float:
        return self.during_total - self.pre_total


def fr_adjust(rho_crisis: float, delta: float) -> float:
    """Heteroskedasticity-adjusted crisis correlation."""
    if not abs(rho_crisis) <= 1.0:
        raise DomainError(f"|rho| must be <= 1, got {rho_crisis}")
    if not delta > -1.0:
        raise DomainError(f"delta must exceed -1, got {delta}")
    return rho_crisis / math.sqrt(1.0 + delta * (1.0 - rho_crisis**2))


def _fisher(r):
    return math.atanh(max(-1 + 1e-15, min(1 - 1e-15, r)))


def _window_mask(ts, window):
    return (ts >= window[0]) & (ts <= window[1])


def fr_test(panel, spec: EventWindowSpec, targets=None) -> list[FrResult]:
    """Forbes-Rigobon test of affected -> target co-movement for each target.

    Volatility shift ``delta`` is the affected asset's crisis/calm diff
    variance ratio minus one. Significance: one-sided Fisher z test of
    ``rho_adj > rho_calm`` at 5%.
    """
    ids = panel.ids
    if spec.affected not in ids:
        raise InsufficientDataError(f"affected asset {spec.affected!r} not in panel")
    targets = list(targets or spec.targets or [a for a in ids if a != spec.affected])
    ts = panel.diff_timestamps
    src = panel.diffs[:, ids.index(spec.affected)]
    calm_m = _window_mask(ts, spec.calm)
    crisis_m = _window_mask(ts, spec.crisis)

    def variance(mask, label):
        x = src[mask & np.isfinite(src)]
        if len(x) < MIN_WINDOW_OBS:
            raise InsufficientDataError(f"{label} window has {len(x)} finite observations of {spec.affected}, need {MIN_WINDOW_OBS}")
        return float(np.var(x, ddof=1))

    var_calm = variance(calm_m, "calm")
    var_crisis = variance(crisis_m, "crisis")
    if var_calm <= 0:
        raise InsufficientDataError(f"calm window: {spec.affected} has zero variance")
    delta = var_crisis / var_calm - 1.0

    out = []
    for t in targets:
        y = panel.diffs[:, ids.index(t)]
        both = np.isfinite(src) & np.isfinite(y)
        rhos, counts = [], []
        for mask, label in ((calm_m, "calm"), (crisis_m, "crisis")):
            sel = mask & both
            m = int(sel.sum())
            if m < MIN_WINDOW_OBS:
                raise InsufficientDataError(f"{label} window has {m} aligned observations for {spec.affected}/{t}, need {MIN_WINDOW_OBS}")
            rhos.append(float(np.corrcoef(src[sel], y[sel])[0, 1]))
            counts.append(m)
        rho_calm, rho_crisis = rhos
        rho_adj = fr_adjust(rho_crisis, delta)
        se = math.sqrt(1.0 / (counts[1] - 3) + 1.0 / (counts[0] - 3))
        z = (_fisher(rho_adj) - _fisher(rho_calm)) / se
        out.append(
            FrResult(
                target_asset=t,
                rho_calm=rho_calm,
                rho_crisis=rho_crisis,
                delta=delta,
                rho_adj=rho_adj,
                delta_rho_adj=rho_adj - rho_calm,
                significant=bool(z > stats.norm.ppf(1 - ALPHA)),
                z_stat=z,
                n_calm=counts[0],
                n_crisis=counts[1],
            )
        )
    return out


def category_contagion(results, meta) -> dict:
    """Mean ``delta_rho_adj`` per target category; empty categories omitted."""
    cats = {k: Category(v) for k, v in meta.items()} if isinstance(meta, dict) else {m.id: m.category for m in meta}
    groups: dict = {}
    for r in results:
        groups.setdefault(cats[r.target_asset], []).append(r.delta_rho_adj)
    return {c: float(np.mean(groups[c])) for c in Category if c in groups}


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{w >= 0, sum w = 1}`` (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _polish(D, t, w):
    """Exact least squares on the support of ``w`` with the sum constraint.

    Returns the polished weights when they are feasible and satisfy the KKT
    conditions of the simplex problem, else None.
    """
    support = list(np.flatnonzero(w > 1e-9))
    while support:
        Ds = D[:, support]
        k = len(support)
        K = np.zeros((k + 1, k + 1))
        K[:k, :k] = 2.0 * Ds.T @ Ds
        K[:k, k] = K[k, :k] = 1.0
        rhs = np.concatenate([2.0 * Ds.T @ t, [1.0]])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            return None
        worst = int(np.argmin(sol[:k]))
        if sol[worst] >= -1e-12:
            break
        del support[worst]  # active-set step: drop the most negative weight
    else:
        return None
    out = np.zeros_like(w)
    out[support] = np.clip(sol[:k], 0.0, None)
    out /= out.sum()
    grad = 2.0 * D.T @ (D @ out - t)
    lam = -sol[k]
    scale = max(1.0, float(np.abs(grad).max()))
    if np.any(grad < lam - 1e-8 * scale):
        return None
    return out


def simplex_weights(target, donors, tol: float = 1e-10, max_iter: int = 100_000) -> np.ndarray:
    """Minimise ``||target - donors @ w||`` over the simplex.

    Accelerated projected gradient from uniform weights with gradient restart;
    stops when the projected-gradient step is below ``tol``. The result is
    then re-solved exactly on its support when that passes the KKT check,
    which removes the slow tail of first-order convergence on nearly
    collinear donors.
    """
    D = np.asarray(donors, dtype=float)
    t = np.asarray(target, dtype=float)
    k = D.shape[1]
    if k == 1:
        return np.ones(1)
    L = 2.0 * np.linalg.norm(D, 2) ** 2
    if L == 0:
        return np.full(k, 1.0 / k)
    step = 1.0 / L
    w = np.full(k, 1.0 / k)
    v = w.copy()
    mom = 1.0
    for _ in range(max_iter):
        grad = 2.0 * D.T @ (D @ v - t)
        w_new = project_simplex(v - step * grad)
        if np.max(np.abs(w_new - v)) <= tol:
            w = w_new
            break
        mom_new = (1 + math.sqrt(1 + 4 * mom * mom)) / 2
        if (v - w_new) @ (w_new - w) > 0:
            # momentum points uphill: restart
            v, mom_new = w_new.copy(), 1.0
        else:
            v = w_new + ((mom - 1) / mom_new) * (w_new - w)
        w, mom = w_new, mom_new
    polished = _polish(D, t, w)
    if polished is not None and np.sum((D @ polished - t) ** 2) <= np.sum((D @ w - t) ** 2):
        return polished
    return w


def _as_window(win, length):
    if isinstance(win, slice):
        return np.arange(length)[win]
    win = np.asarray(win)
    if win.dtype == bool:
        return np.flatnonzero(win)
    if win.ndim == 1 and len(win) == 2 and np.issubdtype(win.dtype, np.integer):
        return np.arange(int(win[0]), int(win[1]) + 1)
    return win.astype(int)


def _fit_effect(outcome, treated, donors, pre, event):
    D = np.column_stack([outcome[d] for d in donors])
    t = np.asarray(outcome[treated], dtype=float)
    w = simplex_weights(t[pre], D[pre])
    synth = D @ w
    gap = t - synth
    return w, synth, float(np.sqrt(np.mean(gap[pre] ** 2))), float(np.mean(gap[event]))


def synth_control(outcome, treated, donors, pre_window, event_window) -> SyntheticControlResult:
    """Synthetic-control effect with placebo-rank p-value.

    ``outcome`` maps asset id -> 1-D series on a common index. Windows are
    inclusive ``(start, end)`` index pairs, slices, boolean masks or index
    arrays. Each placebo treats one donor as treated with the remaining
    donors as its pool (the real treated unit is never a donor).
    """
    donors = list(donors)
    if len(donors) < 2:
        raise DonorPoolError(f"synthetic control needs at least 2 donors, got {len(donors)}")
    if treated in donors:
        raise DonorPoolError("treated unit cannot be its own donor")
    length = len(outcome[treated])
    pre = _as_window(pre_window, length)
    event = _as_window(event_window, length)
    if len(pre) < len(donors):
        raise InsufficientDataError(f"pre-window has {len(pre)} points for {len(donors)} donors")
    if len(event) == 0:
        raise InsufficientDataError("empty event window")

    w, synth, pre_rmse, effect = _fit_effect(outcome, treated, donors, pre, event)
    placebo = {}
    for d in donors:
        pool = [x for x in donors if x != d]
        placebo[d] = _fit_effect(outcome, d, pool, pre, event)[3]
    mags = [abs(e) for e in placebo.values()]
    rank = 1 + sum(m >= abs(effect) for m in mags)
    paths = {
        "treated": np.asarray(outcome[treated], float).tolist(),
        "synthetic": synth.tolist(),
        "pre_index": [int(i) for i in pre],
        "event_index": [int(i) for i in event],
    }
    return SyntheticControlResult(treated, tuple(donors), w, pre_rmse, effect, placebo, rank / (len(donors) + 1), paths)


def spillover_proxy(diffs, window: int = 24) -> np.ndarray:
    """Trailing ``window``-observation mean of absolute deviation changes."""
    a = np.abs(np.asarray(diffs, dtype=float))
    out = np.full(a.shape, np.nan)
    if len(a) >= window:
        c = np.cumsum(np.vstack([np.zeros((1,) + a.shape[1:]), a]), axis=0)
        out[window - 1 :] = (c[window:] - c[:-window]) / window
    return out


def event_spillover_delta(panel, spec: EventWindowSpec, p: int = 1, H: int = 10, tau: float = 0.5) -> EventSpillover:
    """Total spillover (share) from median QVARs on the calm and crisis windows."""
    totals = []
    for window in (spec.calm, spec.crisis):
        sub, _ = balanced_window(panel, None, window[0], window[1], min_rows=1)
        model = fit_qvar(sub, QvarSpec(p, tau))
        totals.append(indices(generalized_fevd(model, H)).total)
    return EventSpillover(*totals)

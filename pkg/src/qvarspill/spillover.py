"""Directional, net, total and tail-relative spillover measures.

All values are shares in [0, 1]; conversion to percent happens only in
:mod:`qvarspill.report`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError
from .timeseries import Category

DEFAULT_EDGE_THRESHOLD = 0.01


@dataclass(frozen=True)
class SpilloverIndices:
    tau: float
    assets: tuple
    from_: np.ndarray
    to: np.ndarray
    net: np.ndarray
    total: float

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "assets": list(self.assets),
            "from": self.from_.tolist(),
            "to": self.to.tolist(),
            "net": self.net.tolist(),
            "total": self.total,
        }


@dataclass(frozen=True)
class RelativeSpillover:
    assets: tuple
    left: dict  # {"from": array, "to": array, "net": array}
    right: dict

    def to_dict(self) -> dict:
        return {
            "assets": list(self.assets),
            "left": {k: v.tolist() for k, v in self.left.items()},
            "right": {k: v.tolist() for k, v in self.right.items()},
        }


@dataclass(frozen=True)
class NetworkEdge:
    source: str
    target: str
    weight: float
    net_weight: float


@dataclass(frozen=True)
class CategoryFlow:
    from_category: Category
    to_category: Category
    flow: float


def indices(fevd) -> SpilloverIndices:
    theta = np.asarray(fevd.normalized, dtype=float)
    n = theta.shape[0]
    off = theta - np.diag(np.diag(theta))
    from_ = off.sum(axis=1)
    to = off.sum(axis=0)
    return SpilloverIndices(
        tau=float(fevd.tau),
        assets=tuple(fevd.asset_order),
        from_=from_,
        to=to,
        net=to - from_,
        total=float(off.sum() / n),
    )


def relative(at_05: SpilloverIndices, at_50: SpilloverIndices, at_95: SpilloverIndices) -> RelativeSpillover:
    """Left tail minus median and right tail minus median, per asset."""
    if not (tuple(at_05.assets) == tuple(at_50.assets) == tuple(at_95.assets)):
        raise AlignmentError("asset order differs across quantiles")

    def delta(a, b):
        return {"from": a.from_ - b.from_, "to": a.to - b.to, "net": a.net - b.net}

    return RelativeSpillover(tuple(at_50.assets), delta(at_05, at_50), delta(at_95, at_50))


def _aligned(a, b):
    if tuple(a.asset_order) != tuple(b.asset_order):
        raise AlignmentError("FEVD matrices have different asset orders")
    if a.horizon != b.horizon:
        raise AlignmentError(f"horizon mismatch ({a.horizon} vs {b.horizon})")


def pairwise_deltas(fevd_tail, fevd_median, top_k: int = 10):
    """Largest source->target increases from median to tail, in percentage points.

    Returns ``[(source, target, delta_pp), ...]`` sorted by delta descending,
    ties by (source, target).
    """
    _aligned(fevd_tail, fevd_median)
    names = fevd_tail.asset_order
    diff = (np.asarray(fevd_tail.normalized) - np.asarray(fevd_median.normalized)) * 100.0
    pairs = [
        (names[k], names[j], float(diff[j, k]))
        for j in range(len(names))
        for k in range(len(names))
        if j != k
    ]
    pairs.sort(key=lambda t: (-t[2], t[0], t[1]))
    return pairs[: max(0, int(top_k))]


def network(fevd, threshold: float = DEFAULT_EDGE_THRESHOLD) -> list[NetworkEdge]:
    """Directed edges source -> target weighted by ``normalized[target, source]``."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    theta = np.asarray(fevd.normalized, dtype=float)
    names = fevd.asset_order
    edges = []
    for k, src in enumerate(names):
        for j, dst in enumerate(names):
            if j == k or theta[j, k] < threshold:
                continue
            if theta[j, k] == 0 and threshold > 0:
                continue
            edges.append(NetworkEdge(src, dst, float(theta[j, k]), float(theta[j, k] - theta[k, j])))
    return edges


def category_flows(fevd, meta) -> list[CategoryFlow]:
    """Off-diagonal FEVD mass aggregated by (source category, target category).

    ``meta`` is a list of AssetMeta or a mapping id -> category. Every ordered
    pair of categories present in the panel is reported, zeros included.
    """
    if isinstance(meta, dict):
        cats = {k: Category(v) for k, v in meta.items()}
    else:
        cats = {m.id: m.category for m in meta}
    names = fevd.asset_order
    missing = [a for a in names if a not in cats]
    if missing:
        raise AlignmentError(f"no category for {missing}")
    present = [c for c in Category if c in {cats[a] for a in names}]
    totals = {(a, b): 0.0 for a in present for b in present}
    theta = np.asarray(fevd.normalized, dtype=float)
    for j, target in enumerate(names):
        for k, source in enumerate(names):
            if j != k:
                totals[(cats[source], cats[target])] += float(theta[j, k])
    return [CategoryFlow(a, b, v) for (a, b), v in totals.items()]

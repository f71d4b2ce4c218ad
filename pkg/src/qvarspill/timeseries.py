"""Price-panel ingestion and the peg-deviation transform.

Prices are turned into basis-point deviations from the $1 peg,
``(price - 1) * 10000``, and first-differenced. The differenced series is
what every estimator downstream consumes.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import IngestError, InsufficientDataError

BP = 10_000.0


class Category(str, enum.Enum):
    FiatBacked = "FiatBacked"
    CryptoCollateralized = "CryptoCollateralized"
    Algorithmic = "Algorithmic"
    CryptoAnchor = "CryptoAnchor"
    FiatAnchor = "FiatAnchor"

    @property
    def is_anchor(self) -> bool:
        return self in (Category.CryptoAnchor, Category.FiatAnchor)


@dataclass(frozen=True)
class AssetMeta:
    id: str
    category: Category = Category.FiatBacked

    def __post_init__(self):
        if not self.id:
            raise ValueError("asset id must be nonempty")
        object.__setattr__(self, "category", Category(self.category))


def _check_assets(assets):
    ids = [a.id for a in assets]
    if len(set(ids)) != len(ids):
        raise IngestError(f"duplicate asset ids in {ids}")


def _frozen(a):
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PricePanel:
    timestamps: np.ndarray  # datetime64[ns], strictly increasing
    assets: tuple
    values: np.ndarray  # T x n, NaN for missing

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[ns]")
        vals = np.asarray(self.values, dtype=float)
        assets = tuple(self.assets)
        _check_assets(assets)
        if vals.ndim != 2 or vals.shape != (len(ts), len(assets)):
            raise IngestError(
                f"values shape {vals.shape} does not match {len(ts)} timestamps x {len(assets)} assets"
            )
        if len(ts) > 1 and not np.all(ts[1:] > ts[:-1]):
            raise IngestError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "assets", assets)

    @property
    def ids(self) -> list[str]:
        return [a.id for a in self.assets]


@dataclass(frozen=True)
class DeviationPanel:
    """Deviations in bp and their first differences.

    ``diffs[i]`` runs from ``timestamps`` row i to row i+1 and is labeled by
    ``diff_timestamps[i]`` (its end point). After :func:`balanced_window`,
    rows are filtered so ``timestamps`` and ``diff_timestamps`` coincide and
    ``deviations`` holds the end-point level of each retained diff.
    """

    timestamps: np.ndarray
    assets: tuple
    deviations: np.ndarray
    diffs: np.ndarray
    diff_timestamps: np.ndarray
    dropped: int = 0
    transforms: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(self.assets))
        _check_assets(self.assets)
        for name in ("timestamps", "diff_timestamps"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype="datetime64[ns]")))
        for name in ("deviations", "diffs"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 2 or arr.shape[1] != len(self.assets):
                raise ValueError(f"{name} must be 2-D with one column per asset")
            object.__setattr__(self, name, _frozen(arr))
        if len(self.diff_timestamps) != len(self.diffs):
            raise ValueError("diff_timestamps must label every diff row")

    @property
    def ids(self) -> list[str]:
        return [a.id for a in self.assets]

    def select(self, ids) -> "DeviationPanel":
        idx = [self.ids.index(i) for i in ids]
        return DeviationPanel(
            self.timestamps,
            [self.assets[i] for i in idx],
            self.deviations[:, idx],
            self.diffs[:, idx],
            self.diff_timestamps,
            self.dropped,
            dict(self.transforms),
        )

    @classmethod
    def from_diffs(cls, diffs, assets=None, start="2000-01-01", freq="D") -> "DeviationPanel":
        """Wrap an already-differenced array (synthetic data, tests)."""
        diffs = np.asarray(diffs, dtype=float)
        n = diffs.shape[1]
        if assets is None:
            assets = [AssetMeta(f"A{j + 1}") for j in range(n)]
        assets = [a if isinstance(a, AssetMeta) else AssetMeta(a) for a in assets]
        step = np.timedelta64(1, freq).astype("timedelta64[ns]")
        ts = np.datetime64(start, "ns") + step * np.arange(len(diffs) + 1)
        levels = np.vstack([np.zeros((1, n)), np.cumsum(diffs, axis=0)])
        transforms = {a.id: "logreturn" if a.category.is_anchor else "peg" for a in assets}
        return cls(ts, assets, levels, diffs, ts[1:], 0, transforms)


def parse_timestamp(text: str) -> np.datetime64:
    text = text.strip()
    if not text:
        raise ValueError("empty timestamp")
    try:
        epoch = float(text)
    except ValueError:
        pass
    else:
        if not math.isfinite(epoch):
            raise ValueError(f"bad epoch {text!r}")
        # milliseconds are common in exchange dumps
        unit = "ms" if abs(epoch) > 1e11 else "s"
        return np.datetime64(int(round(epoch)), unit).astype("datetime64[ns]")
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return np.datetime64(dt, "ns")


def load_metadata(path) -> dict[str, Category]:
    """Read the JSON sidecar ``{id: {"category": ...}}``."""
    with open(path) as fh:
        raw = json.load(fh)
    out = {}
    for key, val in raw.items():
        cat = val["category"] if isinstance(val, dict) else val
        try:
            out[key] = Category(cat)
        except ValueError as exc:
            raise IngestError(f"unknown category {cat!r} for asset {key!r}") from exc
    return out


def load_csv(path, schema=None, meta=None) -> PricePanel:
    """Load a ``date,<asset>,...`` price CSV.

    ``schema`` maps CSV column name to asset id (default: every column after
    the first, ids equal to the header). ``meta`` maps asset id to category,
    either as a dict or a path to the JSON sidecar.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"input file not found: {path}")
    if isinstance(meta, (str, Path)):
        meta = load_metadata(meta)
    meta = meta or {}

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and not r[0].startswith("#")]
    if not rows:
        raise IngestError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    columns = header[1:]
    if schema is None:
        schema = {c: c for c in columns}
    missing = [c for c in schema if c not in columns]
    if missing:
        raise IngestError(f"{path}: columns {missing} not in header")
    if not schema:
        raise IngestError(f"{path}: zero assets")
    if not body:
        raise IngestError(f"{path}: empty panel (header only)")

    col_idx = [columns.index(c) + 1 for c in schema]
    stamps, values = [], []
    for lineno, row in enumerate(body, start=2):
        try:
            stamps.append(parse_timestamp(row[0]))
        except ValueError as exc:
            raise IngestError(f"{path}:{lineno}: unparseable timestamp {row[0]!r}") from exc
        vals = []
        for i in col_idx:
            cell = row[i].strip() if i < len(row) else ""
            try:
                vals.append(float(cell) if cell else math.nan)
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: non-numeric value {cell!r}") from exc
        values.append(vals)
        if len(stamps) > 1 and stamps[-1] <= stamps[-2]:
            what = "duplicate timestamp" if stamps[-1] == stamps[-2] else "timestamps not increasing"
            raise IngestError(f"{path}:{lineno}: {what} {row[0]!r}")

    assets = [AssetMeta(aid, meta.get(aid, Category.FiatBacked)) for aid in schema.values()]
    return PricePanel(np.array(stamps), assets, np.array(values, dtype=float))


def write_csv(panel: PricePanel, path, fmt="%.10f", header_lines=()):
    """Inverse of :func:`load_csv`; ``header_lines`` become ``#`` comments."""
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date"] + panel.ids)
        for ts, row in zip(panel.timestamps, panel.values):
            stamp = np.datetime_as_string(ts, unit="s")
            if stamp.endswith("T00:00:00"):
                stamp = stamp[:10]
            w.writerow([stamp] + ["" if math.isnan(v) else fmt % v for v in row])


def to_deviations(panel: PricePanel, anchor_transform: str = "logreturn") -> DeviationPanel:
    """Peg deviations in bp and their first differences; NaN propagates.

    Non-stablecoin anchors (``CryptoAnchor``/``FiatAnchor``) have no $1 peg.
    With ``anchor_transform="logreturn"`` their level is ``10000 * ln(price)``
    so the diffs are log-returns in bp; ``"peg"`` applies the stablecoin
    formula to them as well.
    """
    if len(panel.timestamps) == 0:
        raise InsufficientDataError("empty price panel")
    if anchor_transform not in ("logreturn", "peg"):
        raise ValueError(f"unknown anchor_transform {anchor_transform!r}")
    values = panel.values
    dev = (values - 1.0) * BP
    transforms = {}
    for j, a in enumerate(panel.assets):
        if a.category.is_anchor and anchor_transform == "logreturn":
            with np.errstate(invalid="ignore", divide="ignore"):
                dev[:, j] = np.log(values[:, j]) * BP
            transforms[a.id] = "logreturn"
        else:
            transforms[a.id] = "peg"
    diffs = dev[1:] - dev[:-1]
    return DeviationPanel(panel.timestamps, panel.assets, dev, diffs, panel.timestamps[1:], 0, transforms)


def to_prices(panel: DeviationPanel) -> np.ndarray:
    """Invert :func:`to_deviations` on the level series."""
    out = panel.deviations / BP + 1.0
    for j, a in enumerate(panel.assets):
        if panel.transforms.get(a.id) == "logreturn":
            out[:, j] = np.exp(panel.deviations[:, j] / BP)
    return out


def balanced_window(panel: DeviationPanel, assets=None, start=None, end=None, min_rows: int = 1):
    """Listwise-deleted sub-panel over ``[start, end]`` for ``assets``.

    Returns ``(panel, dropped)``. A diff row survives only if every selected
    asset is finite on it.
    """
    ids = list(assets) if assets is not None else panel.ids
    if not ids:
        raise ValueError("asset subset must be nonempty")
    sub = panel.select(ids)
    ts = sub.diff_timestamps
    lo = np.datetime64(start, "ns") if start is not None else ts[0] if len(ts) else None
    hi = np.datetime64(end, "ns") if end is not None else ts[-1] if len(ts) else None
    if start is not None and end is not None and not lo < hi:
        raise ValueError("start must precede end")
    in_range = (ts >= lo) & (ts <= hi) if len(ts) else np.zeros(0, bool)
    finite = np.all(np.isfinite(sub.diffs), axis=1)
    keep = in_range & finite
    dropped = int(np.sum(in_range & ~finite))
    n_rows = int(keep.sum())
    if n_rows < min_rows:
        raise InsufficientDataError(
            f"balanced window has {n_rows} rows, need at least {min_rows} ({dropped} dropped for missing data)"
        )
    kept_ts = ts[keep]
    # level rows at the diff end points; index shift of one against timestamps
    levels = sub.deviations[1:][keep]
    out = DeviationPanel(kept_ts, sub.assets, levels, sub.diffs[keep], kept_ts, dropped, dict(sub.transforms))
    return out, dropped


def resample(panel: PricePanel, rule: str) -> PricePanel:
    """Last observed price per ``rule`` bucket (e.g. ``"1h"``), for minute data."""
    import pandas as pd

    df = pd.DataFrame(panel.values, index=pd.DatetimeIndex(panel.timestamps), columns=panel.ids)
    out = df.resample(rule, label="right", closed="right").last().dropna(how="all")
    return PricePanel(out.index.values, panel.assets, out.to_numpy())

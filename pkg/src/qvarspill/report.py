"""Serialization of results to CSV/JSON.

This is the only place where shares in [0, 1] are turned into percent.
Every file carries the resolved run configuration: JSON files under a
``"config"`` key, CSV files as a leading ``# config:`` comment line.
"""
from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np


def utc_stamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def pct(x):
    """Share -> percent (or percentage points for differences)."""
    return np.asarray(x, dtype=float) * 100.0 if np.ndim(x) else float(x) * 100.0


def fmt1(x) -> str:
    return "" if x is None or (isinstance(x, float) and np.isnan(x)) else f"{x:.1f}"


def date_str(ts) -> str:
    s = np.datetime_as_string(np.datetime64(ts, "ns"), unit="s")
    return s[:10] if s.endswith("T00:00:00") else s


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "value"):  # enums
        return obj.value
    return obj


class Writer:
    """Writes artifacts into one directory, serialized, config embedded."""

    def __init__(self, out_dir, config: dict, timestamp: bool = True):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.config = _jsonable(config)
        self.timestamp = timestamp
        self.written: list[Path] = []

    def _stamp(self):
        return utc_stamp()

    def json(self, name, payload) -> Path:
        doc = {}
        if self.timestamp:
            doc["generated_at"] = self._stamp()
        doc["config"] = self.config
        doc.update(_jsonable(payload))
        path = self.out / name
        path.write_text(json.dumps(doc, indent=2) + "\n")
        self.written.append(path)
        return path

    def csv(self, name, header, rows) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            if self.timestamp:
                fh.write(f"# generated_at: {self._stamp()}\n")
            fh.write("# config: " + json.dumps(self.config, sort_keys=True) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
        self.written.append(path)
        return path

    def text(self, name, body: str) -> Path:
        path = self.out / name
        lines = []
        if self.timestamp:
            lines.append(f"# generated_at: {self._stamp()}")
        lines.append("# config: " + json.dumps(self.config, sort_keys=True))
        path.write_text("\n".join(lines) + "\n" + body)
        self.written.append(path)
        return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return v


# payload builders -------------------------------------------------------

INDICES_HEADER = ["asset", "from", "to", "net", "total"]


def indices_rows(idx):
    """Per-asset rows in percent, then a ``TOTAL`` row carrying the system index."""
    rows = [
        (a, float(pct(f)), float(pct(t)), float(pct(n)), "")
        for a, f, t, n in zip(idx.assets, idx.from_, idx.to, idx.net)
    ]
    return rows + [("TOTAL", "", "", "", float(pct(idx.total)))]


def indices_payload(idx) -> dict:
    d = idx.to_dict()
    d["units"] = "share in [0, 1]"
    return d


def edges_payload(edges) -> dict:
    return {
        "edges": [
            {"source": e.source, "target": e.target, "weight": e.weight, "net_weight": e.net_weight}
            for e in edges
        ]
    }


def flows_payload(flows) -> dict:
    return {"flows": [{"from": f.from_category.value, "to": f.to_category.value, "flow": f.flow} for f in flows]}


def rolling_rows(result):
    assets = result.assets
    header = ["anchor_date", "window", "tau", "status", "flags", "total"]
    header += [f"from_{a}" for a in assets] + [f"to_{a}" for a in assets] + [f"net_{a}" for a in assets]
    rows = []
    for r in result.rows:
        base = [date_str(r.anchor), r.index, r.tau]
        if r.indices is None:
            rows.append(base + ["failed", ";".join(r.flags), np.nan] + [np.nan] * (3 * len(assets)))
            continue
        ix = r.indices
        vals = [float(pct(ix.total))] + list(pct(ix.from_)) + list(pct(ix.to)) + list(pct(ix.net))
        rows.append(base + ["ok", ";".join(r.flags)] + [float(v) for v in vals])
    return header, rows


def rolling_plot(result) -> dict:
    series = {}
    for tau in result.taus:
        rows = [r for r in result.rows if r.tau == tau]

        def col(get):
            return [float(pct(get(r.indices))) if r.indices is not None else None for r in rows]

        series[str(tau)] = {
            "dates": [date_str(r.anchor) for r in rows],
            "total": col(lambda ix: ix.total),
            "net": {a: col(lambda ix, j=j: ix.net[j]) for j, a in enumerate(result.assets)},
            "ok": [r.indices is not None for r in rows],
        }
    return {"units": "percent", "metadata": result.metadata, "series": series}

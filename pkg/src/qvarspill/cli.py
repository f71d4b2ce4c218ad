"""``spill`` command-line interface.

Subcommands: fit, rolling, event, robustness, simulate. A run is described by
one JSON config file; command-line flags override its fields. Exit codes:
0 success, 1 runtime failure, 2 usage/config error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import contagion, report, rolling, spillover
from .dgp import DgpSpec, simulate
from .errors import ConfigError, DonorPoolError, PlanError, SpecError, SpillError
from .fevd import generalized_fevd
from .qvar import QvarSpec, fit_qvar, stability_check
from .timeseries import (
    PricePanel,
    balanced_window,
    load_csv,
    load_metadata,
    resample,
    to_deviations,
    to_prices,
    write_csv,
)

DEFAULT_GRID = {
    "lags": [1, 2, 3],
    "horizons": [5, 10, 15, 20],
    "quantile_sets": [[0.01, 0.5, 0.99], [0.05, 0.5, 0.95], [0.1, 0.5, 0.9]],
}


@dataclass
class RunConfig:
    input: str | None = None
    metadata: str | None = None
    assets: list | None = None
    quantiles: list = field(default_factory=lambda: [0.05, 0.5, 0.95])
    lags: int = 1
    horizon: int = 10
    start: str | None = None
    end: str | None = None
    rolling: dict | None = None
    event: str | None = None
    out: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "json"])
    anchor_transform: str = "logreturn"
    resample: str | None = None
    edge_threshold: float = spillover.DEFAULT_EDGE_THRESHOLD
    robustness: dict | None = None
    threads: int | None = None
    timestamp: bool = True

    def validate(self) -> "RunConfig":
        qs = [float(q) for q in self.quantiles]
        if not qs:
            raise ConfigError("quantiles: at least one level required")
        bad = [q for q in qs if not 0.0 < q < 1.0]
        if bad:
            raise ConfigError(f"quantiles must lie strictly in (0, 1); got {bad}")
        self.quantiles = sorted(set(qs))
        if int(self.lags) != self.lags or self.lags < 1:
            raise ConfigError(f"lags must be an integer >= 1, got {self.lags}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigError(f"horizon must be an integer >= 1, got {self.horizon}")
        self.lags, self.horizon = int(self.lags), int(self.horizon)
        unknown = set(self.formats) - {"csv", "json"}
        if unknown or not self.formats:
            raise ConfigError(f"formats must be a nonempty subset of csv/json, got {self.formats}")
        if self.anchor_transform not in ("logreturn", "peg"):
            raise ConfigError(f"anchor_transform must be logreturn or peg, got {self.anchor_transform!r}")
        if self.edge_threshold < 0:
            raise ConfigError("edge_threshold must be nonnegative")
        return self

    def require_input(self):
        if not self.input:
            raise ConfigError("no input file given (--input or config 'input')")
        if not Path(self.input).exists():
            raise ConfigError(f"input file not found: {self.input}")
        if self.metadata and not Path(self.metadata).exists():
            raise ConfigError(f"metadata file not found: {self.metadata}")


def _split(text, conv=float):
    return [conv(x) for x in str(text).split(",") if x.strip()]


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    known = {f.name for f in fields(RunConfig)}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"{path}: unknown config keys {sorted(extra)}")
    # paths in a config file are relative to that file
    for key in ("input", "metadata", "event"):
        if raw.get(key) and not Path(raw[key]).is_absolute():
            raw[key] = str(path.parent / raw[key])
    return raw


def resolve_config(args) -> RunConfig:
    raw = load_config(args.config) if getattr(args, "config", None) else {}
    try:
        cfg = RunConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        if args.input is not None:
            cfg.input = args.input
        if args.metadata is not None:
            cfg.metadata = args.metadata
        if args.assets is not None:
            cfg.assets = _split(args.assets, str)
        if args.quantiles is not None:
            cfg.quantiles = _split(args.quantiles)
        if args.lags is not None and args.command != "robustness":
            cfg.lags = int(args.lags)
        if args.horizon is not None:
            cfg.horizon = int(args.horizon)
        for name in ("start", "end", "out", "resample", "anchor_transform", "threads"):
            val = getattr(args, name, None)
            if val is not None:
                setattr(cfg, name, val)
        if args.formats is not None:
            cfg.formats = _split(args.formats, str)
        if args.no_timestamp:
            cfg.timestamp = False
        if getattr(args, "window", None) is not None or getattr(args, "step", None) is not None:
            block = dict(cfg.rolling or {})
            if args.window is not None:
                block["window"] = args.window
            if args.step is not None:
                block["step"] = args.step
            cfg.rolling = block
        if getattr(args, "event", None) is not None:
            cfg.event = args.event
        if args.command == "robustness":
            grid = dict(cfg.robustness or DEFAULT_GRID)
            if args.lags is not None:
                grid["lags"] = _split(args.lags, int)
            if args.horizons is not None:
                grid["horizons"] = _split(args.horizons, int)
            if args.quantile_sets is not None:
                grid["quantile_sets"] = [
                    [float(x) for x in triple.split("/")] for triple in str(args.quantile_sets).split(",") if triple.strip()
                ]
            cfg.robustness = grid
    except ValueError as exc:
        raise ConfigError(f"bad flag value: {exc}") from exc
    return cfg.validate()


# data preparation --------------------------------------------------------

def _load_prices(cfg: RunConfig) -> PricePanel:
    cfg.require_input()
    meta = load_metadata(cfg.metadata) if cfg.metadata else None
    panel = load_csv(cfg.input, meta=meta)
    if cfg.resample:
        panel = resample(panel, cfg.resample)
    return panel


def prepare_panel(cfg: RunConfig, balanced: bool = True):
    prices = _load_prices(cfg)
    dev = to_deviations(prices, cfg.anchor_transform)
    if cfg.assets:
        missing = [a for a in cfg.assets if a not in dev.ids]
        if missing:
            raise ConfigError(f"assets {missing} not in input columns {dev.ids}")
    if not balanced:
        return (dev.select(cfg.assets) if cfg.assets else dev), 0
    return balanced_window(dev, cfg.assets, cfg.start, cfg.end, min_rows=1)


def _tau_tag(tau) -> str:
    return f"tau{float(tau):g}"


def _categories(panel) -> dict:
    return {a.id: a.category for a in panel.assets}


def _fit_one(panel, p, tau, H, threads=1):
    model = fit_qvar(panel, QvarSpec(p, tau), threads=threads)
    fevd = generalized_fevd(model, H)
    return model, fevd, spillover.indices(fevd)


# subcommands ------------------------------------------------------------

def cmd_fit(cfg: RunConfig) -> list:
    panel, dropped = prepare_panel(cfg)
    w = report.Writer(cfg.out, asdict(cfg), cfg.timestamp)
    threads = cfg.threads or rolling.thread_cap()
    results = {}
    for tau in cfg.quantiles:
        model, fevd, idx = _fit_one(panel, cfg.lags, tau, cfg.horizon, threads)
        results[tau] = (fevd, idx)
        tag = _tau_tag(tau)
        info = {
            "observations": int(len(panel.diffs)),
            "dropped_rows": dropped,
            "spectral_radius": stability_check(model),
            "psd_repaired": model.psd_repaired,
            "converged": list(model.converged),
            "non_unique": list(model.non_unique),
        }
        edges = spillover.network(fevd, cfg.edge_threshold)
        flows = spillover.category_flows(fevd, panel.assets)
        w.json(f"fevd_{tag}.json", {**fevd.to_dict(), "raw": fevd.raw, "estimation": info})
        if "csv" in cfg.formats:
            w.csv(f"indices_{tag}.csv", report.INDICES_HEADER, report.indices_rows(idx))
            w.csv(f"edges_{tag}.csv", ["source", "target", "weight", "net_weight"],
                  [(e.source, e.target, e.weight, e.net_weight) for e in edges])
            w.csv(f"flows_{tag}.csv", ["from", "to", "flow"],
                  [(f.from_category.value, f.to_category.value, f.flow) for f in flows])
        if "json" in cfg.formats:
            w.json(f"indices_{tag}.json", report.indices_payload(idx))
            w.json(f"network_{tag}.json", report.edges_payload(edges))
            w.json(f"flows_{tag}.json", report.flows_payload(flows))

    w.csv("totals.csv", ["tau", "total"], [(tau, float(report.pct(results[tau][1].total))) for tau in cfg.quantiles])
    lo, hi = cfg.quantiles[0], cfg.quantiles[-1]
    if 0.5 in results and lo < 0.5 < hi:
        rel = spillover.relative(results[lo][1], results[0.5][1], results[hi][1])
        w.json("relative.json", {"left_tau": lo, "right_tau": hi, **rel.to_dict()})
        rows = []
        left = spillover.pairwise_deltas(results[lo][0], results[0.5][0], 10)
        right = spillover.pairwise_deltas(results[hi][0], results[0.5][0], 10)
        for side, pairs in (("left", left), ("right", right)):
            rows += [(side, i + 1, s, t, d) for i, (s, t, d) in enumerate(pairs)]
        w.csv("top_deltas.csv", ["tail", "rank", "source", "target", "delta_pp"], rows)
    return w.written


def cmd_rolling(cfg: RunConfig) -> list:
    # resolve defaults into the config so the outputs record them
    block = cfg.rolling or {}
    try:
        cfg.rolling = {
            "window": int(block.get("window", rolling.DEFAULT_WINDOW)),
            "step": int(block.get("step", rolling.DEFAULT_STEP)),
        }
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"rolling window/step must be integers ({exc})") from exc
    win, step = cfg.rolling["window"], cfg.rolling["step"]
    panel, dropped = prepare_panel(cfg)
    plan = rolling.plan(len(panel.diffs), win, step)
    threads = cfg.threads or rolling.thread_cap()
    result = rolling.run(panel, plan, [QvarSpec(cfg.lags, t) for t in cfg.quantiles], cfg.horizon, threads)
    w = report.Writer(cfg.out, asdict(cfg), cfg.timestamp)
    header, rows = report.rolling_rows(result)
    w.csv("rolling.csv", header, rows)
    w.json("rolling_plot.json", {**report.rolling_plot(result), "dropped_rows": dropped})
    return w.written


def _synth_inputs(panel, spec):
    treated = spec.treated or spec.affected
    cats = _categories(panel)
    if treated not in cats:
        raise DonorPoolError(f"treated asset {treated!r} not in panel")
    donors = list(spec.donors) or [a for a in panel.ids if a != treated and cats[a] == cats[treated]]
    if len(donors) < 2:
        raise DonorPoolError(f"synthetic control needs at least 2 donors, got {donors}")
    proxy = contagion.spillover_proxy(panel.diffs, spec.proxy_window)
    cols = [panel.ids.index(a) for a in [treated] + donors]
    ts = panel.diff_timestamps
    calm = (ts >= spec.calm[0]) & (ts <= spec.calm[1])
    crisis = (ts >= spec.crisis[0]) & (ts <= spec.crisis[1])
    rows = (calm | crisis) & np.all(np.isfinite(proxy[:, cols]), axis=1)
    outcome = {a: proxy[rows, panel.ids.index(a)] for a in [treated] + donors}
    return treated, donors, outcome, calm[rows], crisis[rows], ts[rows]


def cmd_event(cfg: RunConfig) -> list:
    if not cfg.event:
        raise ConfigError("event needs --event or config 'event'")
    if not Path(cfg.event).exists():
        raise ConfigError(f"event file not found: {cfg.event}")
    try:
        spec = contagion.EventWindowSpec.from_json(cfg.event)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"{cfg.event}: invalid event spec ({exc})") from exc
    if spec.resample and not cfg.resample:
        cfg.resample = spec.resample
    panel, _ = prepare_panel(cfg, balanced=False)
    w = report.Writer(cfg.out, {**asdict(cfg), "event_spec": json.loads(Path(cfg.event).read_text())}, cfg.timestamp)

    fr = contagion.fr_test(panel, spec)
    w.csv(
        "fr_table.csv",
        ["target", "rho_calm", "rho_crisis", "delta", "rho_adj", "delta_rho_adj", "z_stat", "significant"],
        [(r.target_asset, r.rho_calm, r.rho_crisis, r.delta, r.rho_adj, r.delta_rho_adj, r.z_stat, r.significant) for r in fr],
    )
    means = contagion.category_contagion(fr, panel.assets)
    w.csv("category_contagion.csv", ["category", "mean_delta_rho_adj"], [(c.value, v) for c, v in means.items()])

    try:
        treated, donors, outcome, pre, event, stamps = _synth_inputs(panel, spec)
        sc = contagion.synth_control(outcome, treated, donors, pre, event)
        payload = sc.to_dict()
        payload["paths"]["dates"] = [report.date_str(t) for t in stamps]
        payload["proxy"] = {"kind": "trailing mean |diff|", "window": spec.proxy_window}
        w.json("synthetic_control.json", payload)
    except (DonorPoolError, SpillError) as exc:
        w.json("synthetic_control.json", {"error": f"{type(exc).__name__}: {exc}"})

    cats = _categories(panel)
    mech = cats[spec.affected].value if spec.affected in cats else ""
    try:
        es = contagion.event_spillover_delta(panel, spec, cfg.lags, cfg.horizon, 0.5)
        pre_pct, during_pct = report.pct(es.pre_total), report.pct(es.during_total)
        delta_pp = report.pct(es.delta)
        w.csv(
            "event_spillover.csv",
            ["event", "affected", "mechanism", "pre_event", "during", "delta"],
            [(spec.name, spec.affected, mech, report.fmt1(pre_pct), report.fmt1(during_pct), f"{delta_pp:+.1f}")],
        )
        w.json("event_spillover.json", {"event": spec.name, "pre_total": pre_pct, "during_total": during_pct, "delta_pp": delta_pp, "units": "percent"})
    except SpillError as exc:
        w.json("event_spillover.json", {"error": f"{type(exc).__name__}: {exc}"})
    return w.written


def _robustness_rows(cfg: RunConfig):
    grid = cfg.robustness or DEFAULT_GRID
    lags = list(grid.get("lags", []))
    horizons = list(grid.get("horizons", []))
    qsets = [list(q) for q in grid.get("quantile_sets", [])]
    if not (lags and horizons and qsets):
        raise ConfigError("robustness grid needs nonempty lags, horizons and quantile_sets")
    for q in qsets:
        if len(q) != 3 or not all(0 < x < 1 for x in q) or sorted(q) != q:
            raise ConfigError(f"quantile set {q} must be three increasing levels in (0, 1)")
    base_q = cfg.quantiles if len(cfg.quantiles) == 3 else [0.05, 0.5, 0.95]
    base = (cfg.lags, cfg.horizon, tuple(base_q))
    panels = {
        "A": [(p, cfg.horizon, tuple(base_q)) for p in lags],
        "B": [(cfg.lags, h, tuple(base_q)) for h in horizons],
        "C": [(cfg.lags, cfg.horizon, tuple(q)) for q in qsets],
    }
    # drop panels that only restate the baseline; keep one if nothing else is left
    shown = {k: v for k, v in panels.items() if v != [base]}
    if not shown:
        shown = {"A": [base]}
    return base, shown


def cmd_robustness(cfg: RunConfig) -> list:
    base, shown = _robustness_rows(cfg)
    panel, _ = prepare_panel(cfg)
    models: dict = {}
    totals: dict = {}

    def total(p, H, tau):
        key = (p, H, tau)
        if key not in totals:
            try:
                if (p, tau) not in models:
                    models[(p, tau)] = fit_qvar(panel, QvarSpec(p, tau))
                model = models[(p, tau)]
                if isinstance(model, Exception):
                    raise model
                totals[key] = (spillover.indices(generalized_fevd(model, H)).total, "ok")
            except SpillError as exc:
                models.setdefault((p, tau), exc)
                totals[key] = (float("nan"), f"{type(exc).__name__}: {exc}")
        return totals[key]

    long_rows, wide_rows = [], []
    names = {"A": "Lag order", "B": "Forecast horizon", "C": "Quantile choice"}
    for panel_key, specs in shown.items():
        for p, H, qs in specs:
            label = {"A": f"p = {p}", "B": f"H = {H}", "C": "tau in {" + "/".join(f"{q:g}" for q in qs) + "}"}[panel_key]
            if (p, H, qs) == base:
                label += " (baseline)"
            cells = []
            for pos, tau in zip(("low", "median", "high"), qs):
                val, status = total(p, H, tau)
                long_rows.append((panel_key, label, p, H, pos, tau, float(report.pct(val)), status))
                cells.append(report.fmt1(float(report.pct(val))) if status == "ok" else "failed")
            wide_rows.append((f"{panel_key}: {names[panel_key]}", label, *cells))

    w = report.Writer(cfg.out, asdict(cfg), cfg.timestamp)
    w.csv("robustness.csv", ["panel", "specification", "p", "H", "position", "tau", "total", "status"], long_rows)
    w.csv("robustness_table.csv", ["panel", "specification", "tau_low", "tau_median", "tau_high"], wide_rows)
    lines = ["| Specification | tau low | tau median | tau high |", "|---|---|---|---|"]
    current = None
    for panel_name, label, *cells in wide_rows:
        if panel_name != current:
            lines.append(f"| *{panel_name}* | | | |")
            current = panel_name
        lines.append(f"| {label} | " + " | ".join(cells) + " |")
    w.text("robustness_table.md", "\n".join(lines) + "\n")
    return w.written


def cmd_simulate(spec_path, out_path, timestamp=True) -> list:
    if not Path(spec_path).exists():
        raise ConfigError(f"spec file not found: {spec_path}")
    spec = DgpSpec.from_json(spec_path)
    panel = simulate(spec)
    prices = PricePanel(panel.timestamps, panel.assets, to_prices(panel))
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    header = [f"generated_at: {report.utc_stamp()}"] if timestamp else []
    header.append("config: " + json.dumps({"spec": spec.to_dict()}, sort_keys=True))
    write_csv(prices, out, fmt="%.15g", header_lines=header)
    meta_path = out.with_name(out.stem + ".meta.json")
    meta_path.write_text(json.dumps({a.id: {"category": a.category.value} for a in panel.assets}, indent=2) + "\n")
    return [out, meta_path]


# argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spill", description="Quantile VAR spillover analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--input", help="price CSV (date column + one column per asset)")
        p.add_argument("--metadata", help="JSON sidecar mapping asset id to category")
        p.add_argument("--assets", help="comma-separated asset subset")
        p.add_argument("--quantiles", help="comma-separated quantile levels")
        p.add_argument("--lags", help="lag order (robustness: comma-separated list)")
        p.add_argument("--horizon", help="forecast horizon H")
        p.add_argument("--start")
        p.add_argument("--end")
        p.add_argument("--out", help="output directory")
        p.add_argument("--formats", help="csv,json")
        p.add_argument("--resample", help="resampling rule for intraday data, e.g. 1h")
        p.add_argument("--anchor-transform", dest="anchor_transform", choices=["logreturn", "peg"])
        p.add_argument("--threads", type=int, help="worker cap (default: SPILL_THREADS or 1)")
        p.add_argument("--no-timestamp", action="store_true", help="omit the generated_at header")
        return p

    common(sub.add_parser("fit", help="full-sample QVAR spillover tables"))
    r = common(sub.add_parser("rolling", help="rolling-window spillover paths"))
    r.add_argument("--window", type=int)
    r.add_argument("--step", type=int)
    e = common(sub.add_parser("event", help="contagion event study"))
    e.add_argument("--event", help="event spec JSON")
    rb = common(sub.add_parser("robustness", help="total spillover over a (p, H, quantile) grid"))
    rb.add_argument("--horizons")
    rb.add_argument("--quantile-sets", dest="quantile_sets", help="e.g. 0.01/0.5/0.99,0.05/0.5/0.95")
    s = sub.add_parser("simulate", help="write a synthetic price panel from a DGP spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--no-timestamp", action="store_true")
    return parser


COMMANDS = {"fit": cmd_fit, "rolling": cmd_rolling, "event": cmd_event, "robustness": cmd_robustness}


def _fail(code, exc):
    module = getattr(exc, "module", "cli")
    print(f"spill: error [{module}] {type(exc).__name__}: {exc}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "simulate":
            written = cmd_simulate(args.spec, args.out, timestamp=not args.no_timestamp)
        else:
            written = COMMANDS[args.command](resolve_config(args))
    except (ConfigError, PlanError, SpecError) as exc:
        return _fail(2, exc)
    except SpillError as exc:
        return _fail(1, exc)
    except (OSError, ValueError) as exc:
        return _fail(1, exc)
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

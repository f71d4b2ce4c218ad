"""Synthetic VAR panels with known parameters.

Besides plain Gaussian / Student-t VARs, a spec may carry a ``common_shock``
strength ``k``: all innovations at time t are multiplied by the common factor
``1 + k * tanh(mean(Y_{t-1}) / s)``. The multiplier moves every asset's tail
quantiles together with the lagged cross-section, which makes the conditional
tails (but not the median) depend on the other assets' past values.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SpecError
from .fevd import FevdMatrix
from .qvar import companion
from .timeseries import AssetMeta, Category, DeviationPanel

BURN_IN = 200


@dataclass(frozen=True)
class RegimeSwitch:
    switch_time: int
    B: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True)
class DgpSpec:
    n: int
    p: int
    B: np.ndarray  # (p, n, n)
    sigma: np.ndarray
    T: int = 1000
    seed: int = 0
    dist: str = "gaussian"  # or "t"
    df: float = np.inf
    regime_switch: Optional[RegimeSwitch] = None
    common_shock: float = 0.0
    assets: tuple = ()
    categories: tuple = ()
    start: str = "2021-01-01"
    freq: str = "D"

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 2:
            B = B[None]
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "sigma", np.atleast_2d(np.asarray(self.sigma, dtype=float)))
        if not self.assets:
            object.__setattr__(self, "assets", tuple(f"S{j + 1}" for j in range(self.n)))
        if not self.categories:
            object.__setattr__(self, "categories", tuple("FiatBacked" for _ in range(self.n)))
        rs = self.regime_switch
        if rs is not None and not isinstance(rs, RegimeSwitch):
            rs = RegimeSwitch(**rs)
        if rs is not None:
            rb = np.asarray(rs.B, dtype=float)
            object.__setattr__(
                self,
                "regime_switch",
                RegimeSwitch(int(rs.switch_time), rb[None] if rb.ndim == 2 else rb, np.atleast_2d(np.asarray(rs.sigma, float))),
            )

    def validate(self):
        regimes = [(self.B, self.sigma)]
        if self.regime_switch is not None:
            regimes.append((self.regime_switch.B, self.regime_switch.sigma))
            if not 0 <= self.regime_switch.switch_time <= self.T:
                raise SpecError("switch_time outside the sample")
        for B, S in regimes:
            if B.shape != (self.p, self.n, self.n):
                raise SpecError(f"B has shape {B.shape}, expected {(self.p, self.n, self.n)}")
            if S.shape != (self.n, self.n):
                raise SpecError(f"sigma has shape {S.shape}, expected {(self.n, self.n)}")
            if not np.allclose(S, S.T):
                raise SpecError("sigma must be symmetric")
            if np.linalg.eigvalsh(S).min() < -1e-12 * max(np.trace(S), 1.0):
                raise SpecError("sigma must be positive semidefinite")
            radius = float(np.max(np.abs(np.linalg.eigvals(companion(B)))))
            if radius >= 1.0 - 1e-12:
                raise SpecError(f"unstable VAR: companion spectral radius {radius:.6g} >= 1")
        if self.dist not in ("gaussian", "t"):
            raise SpecError(f"unknown innovation distribution {self.dist!r}")
        if self.dist == "t" and not self.df > 2:
            raise SpecError("Student-t innovations need df > 2")
        if not 0 <= self.common_shock < 1:
            raise SpecError("common_shock must lie in [0, 1)")
        if self.T < 2:
            raise SpecError("T must be at least 2")
        if len(self.assets) != self.n or len(self.categories) != self.n:
            raise SpecError("assets/categories must list one entry per series")
        return self

    def to_dict(self) -> dict:
        d = {
            "n": self.n,
            "p": self.p,
            "B": self.B.tolist(),
            "sigma": self.sigma.tolist(),
            "T": self.T,
            "seed": self.seed,
            "dist": self.dist,
            "common_shock": self.common_shock,
            "assets": list(self.assets),
            "categories": list(self.categories),
            "start": self.start,
            "freq": self.freq,
        }
        if self.dist == "t":
            d["df"] = self.df
        if self.regime_switch is not None:
            rs = self.regime_switch
            d["regime_switch"] = {"switch_time": rs.switch_time, "B": rs.B.tolist(), "sigma": rs.sigma.tolist()}
        return d

    @classmethod
    def from_dict(cls, d) -> "DgpSpec":
        d = dict(d)
        try:
            if "n" not in d:
                d["n"] = len(np.atleast_2d(d["sigma"]))
            if "p" not in d:
                d["p"] = 1 if np.ndim(d["B"]) == 2 else len(d["B"])
            for key in ("assets", "categories"):
                d[key] = tuple(d.get(key, ()))
            return cls(**d)
        except (TypeError, KeyError, ValueError) as exc:
            raise SpecError(f"invalid DGP spec: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "DgpSpec":
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise SpecError(f"{path}: {exc}") from exc


def _sqrtm(S):
    vals, vecs = np.linalg.eigh(S)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def simulate(spec: DgpSpec) -> DeviationPanel:
    """Draw ``T`` observations after a fixed burn-in; deterministic per seed."""
    spec.validate()
    n, p, T = spec.n, spec.p, spec.T
    total = T + BURN_IN
    rng = np.random.default_rng(spec.seed)
    if spec.dist == "t":
        z = rng.standard_t(spec.df, size=(total, n)) * np.sqrt((spec.df - 2.0) / spec.df)
    else:
        z = rng.standard_normal((total, n))
    L0 = _sqrtm(spec.sigma)
    L1 = _sqrtm(spec.regime_switch.sigma) if spec.regime_switch else L0
    B0 = spec.B
    B1 = spec.regime_switch.B if spec.regime_switch else B0
    switch = BURN_IN + (spec.regime_switch.switch_time if spec.regime_switch else T)
    scale = np.sqrt(max(np.mean(np.diag(spec.sigma)), 1e-300))

    Y = np.zeros((total + p, n))
    for t in range(total):
        B, L = (B0, L0) if t < switch else (B1, L1)
        row = t + p
        mean = np.zeros(n)
        for i in range(p):
            mean += B[i] @ Y[row - i - 1]
        mult = 1.0
        if spec.common_shock:
            mult = 1.0 + spec.common_shock * np.tanh(Y[row - 1].mean() / scale)
        Y[row] = mean + mult * (L @ z[t])
    diffs = Y[p + BURN_IN :]
    assets = [AssetMeta(a, Category(c)) for a, c in zip(spec.assets, spec.categories)]
    return DeviationPanel.from_diffs(diffs, assets, start=spec.start, freq=spec.freq)


def theoretical_fevd(spec: DgpSpec, H: int = 10, tau: float = 0.5) -> FevdMatrix:
    """Normalized generalized FEVD evaluated at the true parameters.

    Moving-average matrices come from powers of the companion matrix rather
    than the lag recursion, so this is a separate route to the same numbers.
    """
    if spec.regime_switch is not None:
        raise SpecError("theoretical FEVD needs a single-regime spec")
    n, p = spec.n, spec.p
    S = spec.sigma
    C = companion(spec.B)
    power = np.eye(n * p)
    num = np.zeros((n, n))
    den = np.zeros(n)
    for _ in range(H):
        A = power[:n, :n]
        for j in range(n):
            row = A[j] @ S
            den[j] += row @ A[j]
            for k in range(n):
                num[j, k] += row[k] ** 2 / S[k, k]
        power = C @ power
    raw = num / den[:, None]
    return FevdMatrix(raw, raw / raw.sum(axis=1, keepdims=True), H, tau, tuple(spec.assets))


def random_stable_B(rng, n, p=1, radius=0.7):
    """Random coefficient matrices rescaled to a given companion radius."""
    B = rng.normal(size=(p, n, n))
    r = float(np.max(np.abs(np.linalg.eigvals(companion(B)))))
    # companion radius of (c B_1, c^2 B_2, ...) is c times the original
    c = radius / r
    return np.stack([B[i] * c ** (i + 1) for i in range(p)])

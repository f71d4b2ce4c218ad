"""Equation-by-equation quantile VAR estimation."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import quantreg
from .errors import InsufficientDataError, SingularDesignError


@dataclass(frozen=True)
class QvarSpec:
    p: int = 1
    tau: float = 0.5

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"lag order must be an integer >= 1, got {self.p}")
        quantreg.check_tau(self.tau)


@dataclass(frozen=True)
class QvarModel:
    spec: QvarSpec
    alpha: np.ndarray  # (n,)
    B: np.ndarray  # (p, n, n); B[i] multiplies Y_{t-i-1}
    residuals: np.ndarray  # (T - p, n)
    sigma: np.ndarray  # (n, n)
    asset_order: tuple
    psd_repaired: bool = False
    converged: tuple = ()
    non_unique: tuple = ()
    flags: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.asset_order)

    @property
    def unstable(self) -> bool:
        return stability_check(self) >= 1.0


def lag_matrix(Y: np.ndarray, p: int) -> np.ndarray:
    """Rows ``[Y_{t-1}, ..., Y_{t-p}]`` for ``t = p .. T-1``."""
    T = len(Y)
    return np.hstack([Y[p - i : T - i] for i in range(1, p + 1)])


def residual_covariance(residuals: np.ndarray) -> np.ndarray:
    S = np.atleast_2d(np.cov(residuals, rowvar=False, ddof=1))
    return (S + S.T) / 2.0


def repair_psd(S: np.ndarray, tol: float = 1e-10):
    """Clip negative eigenvalues if the smallest is below ``-tol * trace``."""
    vals, vecs = np.linalg.eigh(S)
    if vals.min() >= -tol * max(np.trace(S), 0.0):
        return S, False
    fixed = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
    return (fixed + fixed.T) / 2.0, True


def fit_qvar(data, spec: QvarSpec = QvarSpec(), assets=None, opts=None, threads: int = 1) -> QvarModel:
    """Fit the QVAR(p) at ``spec.tau``.

    ``data`` is a DeviationPanel (its ``diffs`` are used) or a T x n array.
    Each equation is an independent quantile regression on the stacked lags.
    """
    if hasattr(data, "diffs"):
        Y = np.asarray(data.diffs, dtype=float)
        assets = assets or data.ids
    else:
        Y = np.asarray(data, dtype=float)
    if Y.ndim != 2:
        raise ValueError("expected a T x n array")
    T, n = Y.shape
    assets = tuple(assets) if assets is not None else tuple(f"A{j + 1}" for j in range(n))
    p = spec.p
    if T - p <= n * p + 1:
        raise InsufficientDataError(f"QVAR({p}) with {n} series needs T - p > {n * p + 1}, got T = {T}")
    if not np.all(np.isfinite(Y)):
        raise InsufficientDataError("panel is not balanced: non-finite values present")

    X = lag_matrix(Y, p)
    targets = Y[p:]

    def one(j):
        try:
            return quantreg.fit(targets[:, j], X, spec.tau, opts)
        except SingularDesignError as exc:
            raise SingularDesignError(f"equation {j} ({assets[j]}): {exc}", equation=j) from exc

    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fits = list(pool.map(one, range(n)))
    else:
        fits = [one(j) for j in range(n)]

    alpha = np.array([f.intercept for f in fits])
    coefs = np.vstack([f.coefficients for f in fits])  # n x (n p)
    B = np.stack([coefs[:, i * n : (i + 1) * n] for i in range(p)])
    residuals = targets - alpha - X @ coefs.T
    sigma, repaired = repair_psd(residual_covariance(residuals))
    return QvarModel(
        spec=spec,
        alpha=alpha,
        B=B,
        residuals=residuals,
        sigma=sigma,
        asset_order=assets,
        psd_repaired=repaired,
        converged=tuple(f.converged for f in fits),
        non_unique=tuple(f.non_unique for f in fits),
    )


def from_parameters(B, sigma, tau=0.5, alpha=None, assets=None) -> QvarModel:
    """Model built directly from known coefficients (no residuals)."""
    B = np.asarray(B, dtype=float)
    if B.ndim == 2:
        B = B[None]
    p, n, _ = B.shape
    sigma = np.asarray(sigma, dtype=float)
    return QvarModel(
        spec=QvarSpec(p, tau),
        alpha=np.zeros(n) if alpha is None else np.asarray(alpha, dtype=float),
        B=B,
        residuals=np.empty((0, n)),
        sigma=sigma,
        asset_order=tuple(assets) if assets is not None else tuple(f"A{j + 1}" for j in range(n)),
    )


def companion(B: np.ndarray) -> np.ndarray:
    p, n, _ = B.shape
    C = np.zeros((n * p, n * p))
    C[:n] = np.hstack(list(B))
    if p > 1:
        C[n:, :-n] = np.eye(n * (p - 1))
    return C


def stability_check(model) -> float:
    """Spectral radius of the companion matrix (>= 1 means unstable)."""
    B = model.B if hasattr(model, "B") else np.asarray(model, dtype=float)
    if B.ndim == 2:
        B = B[None]
    return float(np.max(np.abs(np.linalg.eigvals(companion(B)))))

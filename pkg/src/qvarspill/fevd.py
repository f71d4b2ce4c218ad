"""Moving-average coefficients and the generalized variance decomposition."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVarianceError


@dataclass(frozen=True)
class QvmaCoefficients:
    A: np.ndarray  # (H, n, n), A[0] = I
    horizon: int


@dataclass(frozen=True)
class FevdMatrix:
    raw: np.ndarray
    normalized: np.ndarray
    horizon: int
    tau: float
    asset_order: tuple

    @property
    def n(self) -> int:
        return len(self.asset_order)

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "horizon": self.horizon,
            "assets": list(self.asset_order),
            "normalized": self.normalized.tolist(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d) -> "FevdMatrix":
        norm = np.asarray(d["normalized"], dtype=float)
        return cls(norm, norm, int(d["horizon"]), float(d["tau"]), tuple(d["assets"]))

    @classmethod
    def from_normalized(cls, normalized, assets=None, tau=0.5, horizon=10) -> "FevdMatrix":
        """Wrap a hand-built row-stochastic matrix."""
        norm = np.asarray(normalized, dtype=float)
        n = norm.shape[0]
        assets = tuple(assets) if assets is not None else tuple(str(j + 1) for j in range(n))
        return cls(norm, norm, horizon, tau, assets)


def qvma(model, H: int) -> QvmaCoefficients:
    """``A_0 = I``, ``A_j = sum_{i=1}^{min(j,p)} B_i A_{j-i}`` for j < H."""
    if H < 1:
        raise ValueError("horizon must be >= 1")
    B = np.asarray(model.B if hasattr(model, "B") else model, dtype=float)
    if B.ndim == 2:
        B = B[None]
    p, n, _ = B.shape
    A = np.zeros((H, n, n))
    A[0] = np.eye(n)
    for j in range(1, H):
        for i in range(1, min(j, p) + 1):
            A[j] += B[i - 1] @ A[j - i]
    return QvmaCoefficients(A, H)


def generalized_fevd(model, H: int = 10) -> FevdMatrix:
    sigma = np.asarray(model.sigma, dtype=float)
    names = tuple(model.asset_order)
    diag = np.diag(sigma)
    bad = [names[k] for k in np.flatnonzero(~(diag > 0))]
    if bad:
        raise DegenerateVarianceError(f"zero residual variance for {', '.join(bad)}")
    A = qvma(model, H).A
    AS = A @ sigma  # (H, n, n): e_j' A_h Sigma e_k
    num = np.sum(AS**2, axis=0) / diag[None, :]
    den = np.einsum("hjk,hjk->j", AS, A)  # e_j' A_h Sigma A_h' e_j summed over h
    if np.any(den <= 0):
        raise DegenerateVarianceError("forecast-error variance is zero for some asset")
    raw = num / den[:, None]
    rows = raw.sum(axis=1)
    if np.any(rows <= 0):
        raise DegenerateVarianceError("zero FEVD row sum")
    return FevdMatrix(raw, raw / rows[:, None], H, float(model.spec.tau), names)

"""Linear quantile regression by a primal-dual interior-point method.

The check-loss problem ``min sum rho_tau(y - a - X b)`` is solved through its
bounded-variable dual linear program

    max y'd   s.t.  Z'd = (1 - tau) Z'1,  0 <= d <= 1,

with ``Z = [1, X]``, using Mehrotra predictor-corrector steps. The interior
point is then pushed to an exact basic solution (an interpolating vertex)
whenever that vertex passes the subgradient optimality check, so residuals
that should be zero are zero to machine precision.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularDesignError


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-8
    max_iter: int = 200
    step_frac: float = 0.99995
    rank_tol: float = 1e-10
    kkt_tol: float = 1e-8
    vertex: bool = True


@dataclass(frozen=True)
class QuantileFitResult:
    intercept: float
    coefficients: np.ndarray
    objective: float
    iterations: int
    converged: bool
    kkt_residual: float = 0.0
    non_unique: bool = False
    vertex: bool = False


def check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"quantile level must lie strictly in (0, 1), got {tau}")
    return tau


def quantile_loss(u, tau: float):
    """Check loss ``u * (tau - 1{u < 0})``; works elementwise on arrays."""
    tau = check_tau(tau)
    u = np.asarray(u, dtype=float)
    out = u * (tau - (u < 0))
    return float(out) if out.ndim == 0 else out


def objective(y, X, tau, intercept, coefficients) -> float:
    X = np.asarray(X, dtype=float).reshape(len(y), -1)
    r = np.asarray(y, dtype=float) - intercept - X @ np.asarray(coefficients, dtype=float)
    return float(np.sum(quantile_loss(r, tau)))


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def _interior_point(Z, y, tau, opts):
    """Solve the dual LP; return (coef, iterations, relative gap)."""
    m = Z.shape[0]
    A = Z.T
    c = -y
    b = (1.0 - tau) * Z.sum(axis=0)
    x = np.full(m, 1.0 - tau)
    s = 1.0 - x
    dual = np.linalg.lstsq(A.T, c, rcond=None)[0]
    r = c - A.T @ dual
    r = r + 0.001 * (r == 0)
    z = np.where(r > 0, r, 0.0)
    w = z - r
    # keep all complementarity pairs strictly positive
    z = z + 1e-3
    w = w + 1e-3

    def rel_gap():
        gap = x @ z + s @ w
        return gap / max(1.0, abs(c @ x))

    it = 0
    while rel_gap() > opts.gap_tol and it < opts.max_iter:
        it += 1
        q = 1.0 / (z / x + w / s)
        r = z - w
        rd = c - A.T @ dual - z + w
        Q = (A * q) @ A.T
        try:
            chol = np.linalg.cholesky(Q)
        except np.linalg.LinAlgError:
            chol = None

        def solve(rhs):
            if chol is None:
                return np.linalg.lstsq(Q, rhs, rcond=None)[0]
            return np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))

        # affine predictor: dx = q (A'dy + rho), A dx = 0
        rho = -r - rd
        dy = solve(-(A @ (q * rho)))
        dx = q * (A.T @ dy + rho)
        ds = -dx
        dz = -z - (z / x) * dx
        dw = -w - (w / s) * ds
        fp = min(opts.step_frac * min(_max_step(x, dx), _max_step(s, ds)), 1.0)
        fd = min(opts.step_frac * min(_max_step(z, dz), _max_step(w, dw)), 1.0)

        if min(fp, fd) < 1.0:
            # centring-corrector step
            mu = z @ x + w @ s
            g = (z + fd * dz) @ (x + fp * dx) + (w + fd * dw) @ (s + fp * ds)
            mu = mu * (g / mu) ** 3 / (2 * m)
            dxdz = dx * dz
            dsdw = ds * dw
            rho = (mu - dxdz) / x - (mu - dsdw) / s - r - rd
            dy = solve(-(A @ (q * rho)))
            dx = q * (A.T @ dy + rho)
            ds = -dx
            dz = (mu - dxdz) / x - z - (z / x) * dx
            dw = (mu - dsdw) / s - w - (w / s) * ds
            fp = min(opts.step_frac * min(_max_step(x, dx), _max_step(s, ds)), 1.0)
            fd = min(opts.step_frac * min(_max_step(z, dz), _max_step(w, dw)), 1.0)

        x = x + fp * dx
        s = s + fp * ds
        dual = dual + fd * dy
        z = z + fd * dz
        w = w + fd * dw

    return -dual, it, rel_gap()


def _vertex_refine(Z, y, tau, coef, opts):
    """Snap to the basic solution through the k+1 smallest residuals.

    Returns ``(coef, kkt_violation, non_unique)`` or ``None`` if the vertex is
    not optimal or not identifiable.
    """
    m, k1 = Z.shape
    r = y - Z @ coef
    order = np.argsort(np.abs(r), kind="stable")
    h = order[:k1]
    Zh = Z[h]
    try:
        vcoef = np.linalg.solve(Zh, y[h])
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(vcoef)):
        return None
    rv = y - Z @ vcoef
    scale = max(1.0, float(np.max(np.abs(y))))
    zero = np.abs(rv) <= 1e-10 * scale
    rest = np.ones(m, bool)
    rest[h] = False
    # sum over non-basic points of psi_tau(r_i) z_i; zero non-basic residuals
    # are degenerate and may take any subgradient, so handle them below
    psi = tau - (rv < 0)
    g = Z[rest & ~zero].T @ psi[rest & ~zero]
    try:
        a = -np.linalg.solve(Zh.T, g)
    except np.linalg.LinAlgError:
        return None
    lo, hi = tau - 1.0, tau
    viol = float(max(0.0, np.max(lo - a), np.max(a - hi)))
    degenerate = bool(np.any(rest & zero))
    if viol > opts.kkt_tol and not degenerate:
        return None
    if degenerate:
        # extra zero residuals: accept only if the vertex is no worse than the
        # interior point
        if np.sum(quantile_loss(rv, tau)) > np.sum(quantile_loss(r, tau)) + 1e-10 * scale:
            return None
        viol = 0.0
    non_unique = degenerate or bool(np.any(np.minimum(a - lo, hi - a) <= 1e-9))
    return vcoef, viol, non_unique


def fit(y, X, tau: float, opts: SolverOptions | None = None) -> QuantileFitResult:
    """Fit ``y ~ a + X b`` at quantile ``tau``.

    ``X`` may have zero columns (intercept-only). Regressors are centred and
    scaled internally and ``y`` is scaled by its mean absolute deviation from
    the median; coefficients are returned in original units.
    """
    opts = opts or SolverOptions()
    tau = check_tau(tau)
    y = np.asarray(y, dtype=float).ravel()
    m = len(y)
    X = np.asarray(X, dtype=float).reshape(m, -1)
    k = X.shape[1]
    if m <= k + 1:
        raise SingularDesignError(f"need more than {k + 1} observations, got {m}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in regression data")

    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    if np.any(sd == 0):
        bad = [int(j) for j in np.flatnonzero(sd == 0)]
        raise SingularDesignError(f"constant regressor column(s) {bad}")
    Xs = (X - mean) / sd
    Z = np.column_stack([np.ones(m), Xs])
    sv = np.linalg.svd(Z, compute_uv=False)
    if sv[-1] <= opts.rank_tol * sv[0]:
        raise SingularDesignError(f"rank-deficient design (condition {sv[0] / max(sv[-1], 1e-300):.3g})")

    y_scale = float(np.mean(np.abs(y - np.median(y))))
    if y_scale == 0.0:
        y_scale = max(1.0, abs(float(y[0])))
    ys = y / y_scale

    coef, iters, gap = _interior_point(Z, ys, tau, opts)
    converged = gap <= opts.gap_tol
    kkt = gap
    non_unique = False
    at_vertex = False
    if opts.vertex:
        refined = _vertex_refine(Z, ys, tau, coef, opts)
        if refined is not None:
            coef, kkt, non_unique = refined
            at_vertex = True
            converged = True

    slopes = y_scale * coef[1:] / sd
    intercept = y_scale * (coef[0] - float(coef[1:] @ (mean / sd)))
    obj = objective(y, X, tau, intercept, slopes)
    return QuantileFitResult(
        intercept=float(intercept),
        coefficients=slopes,
        objective=obj,
        iterations=iters,
        converged=bool(converged),
        kkt_residual=float(kkt),
        non_unique=non_unique,
        vertex=at_vertex,
    )

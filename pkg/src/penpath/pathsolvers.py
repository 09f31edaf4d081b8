"""Regularization paths ``t -> argmin_phi M_n(phi) + t J_n(phi)``.

* :func:`lasso_path` -- exact homotopy for least squares + l1, with breakpoints.
* :func:`ridge_path` -- closed form for least squares + squared l2.
* :func:`grid_path` -- certified solves on a t-grid for any supported contrast
  with gamma in {1, 2}.
* :func:`l0_path` -- exhaustive submodel enumeration and lower envelope for
  the counting penalty.

The path runs in the penalty weight ``t``; the penalty carries the
``n^((1 ^ gamma)/2 - 1)`` normalization (``lambda_n = n^{-1/2}`` for l1).
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.optimize import linprog, lsq_linear

from . import _homotopy
from .contrasts import ContrastSpec, eval_contrast, eval_gradient, eval_hessian
from .errors import CostLimitError, GuardError, SolverError, ValidationError
from .linmodel import DesignSample
from .penalties import PenaltySpec, eval_penalty

DEFAULT_GRID_POINTS = 201
L0_MAX_P = 15


@dataclass(frozen=True)
class TGrid:
    """Strictly increasing, finite, non-negative penalty weights."""

    points: np.ndarray
    kind: str = "explicit"

    def __post_init__(self):
        pts = np.atleast_1d(np.array(self.points, dtype=float))
        if pts.ndim != 1 or pts.size == 0:
            raise ValidationError("t-grid must be a non-empty vector")
        if not np.all(np.isfinite(pts)) or pts[0] < 0:
            raise ValidationError("t-grid points must be finite and >= 0")
        if np.any(np.diff(pts) <= 0):
            raise ValidationError("t-grid must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, t_max, count=DEFAULT_GRID_POINTS, t_min=0.0):
        if count < 1:
            raise ValidationError("t-grid needs at least one point")
        if count == 1:
            return cls(np.array([float(t_min)]), "uniform")
        if not t_max > t_min:
            raise ValidationError("t_max must exceed t_min")
        return cls(np.linspace(t_min, t_max, int(count)), "uniform")

    @property
    def t_max(self) -> float:
        return float(self.points[-1])

    def __len__(self):
        return self.points.size


@dataclass(frozen=True)
class PathSolution:
    """A solved path evaluated on ``tgrid`` (row i of ``coefficients`` is beta_hat(t_i))."""

    tgrid: TGrid
    coefficients: np.ndarray
    kkt_residuals: np.ndarray
    objective_values: np.ndarray
    support_sizes: np.ndarray
    breakpoints: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return self.coefficients.shape[1]


def penalized_objective(contrast: ContrastSpec, penalty: PenaltySpec, sample: DesignSample, phi, t) -> float:
    return eval_contrast(contrast, sample, phi) + t * eval_penalty(penalty, phi)


def _l1_kkt(grad, phi, weight) -> float:
    """Max violation of ``0 in grad + weight * d|phi|``."""
    nz = phi != 0
    res = np.where(nz, np.abs(grad + weight * np.sign(phi)), np.maximum(np.abs(grad) - weight, 0.0))
    return float(res.max()) if res.size else 0.0


def _gram(sample):
    x = sample.x
    return x.T @ x / sample.n, x.T @ sample.y / sample.n


# -- least squares, exact ---------------------------------------------------


def lasso_path(sample: DesignSample, lambda_n=None, t_max=None, tgrid: Optional[TGrid] = None) -> PathSolution:
    """Exact lasso homotopy for ``(1/n)|y - X phi|^2 + t lambda_n |phi|_1``.

    Without ``tgrid`` the solution is reported at every breakpoint in
    ``[0, t_max]`` plus ``t_max`` (``t_max=None`` means ``t_zero``); with a
    grid, at the grid points (values are exact evaluations of the
    piecewise-linear path). ``diagnostics`` carries ``t_zero``, the smallest
    weight with an all-zero solution.
    """
    lam = 1.0 / math.sqrt(sample.n) if lambda_n is None else float(lambda_n)
    if lam <= 0:
        raise ValidationError("lambda_n must be positive")
    if tgrid is None and t_max is not None and not t_max > 0:
        raise ValidationError("t_max must be positive")
    c, xty = _gram(sample)
    if np.linalg.eigvalsh(c).min() <= 1e-10:
        raise ValidationError("C_n is singular; use ridge_path or grid_path with a ridge penalty")
    path = _homotopy.follow(c, xty, np.ones(sample.p, dtype=bool))
    t_zero = 2.0 * float(np.max(np.abs(xty))) / lam
    knots_t = 2.0 * path.breakpoints / lam
    if tgrid is None:
        if t_max is None:
            t_max = t_zero
        pts = np.concatenate([[0.0], knots_t[knots_t < t_max], [t_max]])
        tgrid = TGrid(np.unique(pts), "breakpoints")
    ts = tgrid.points
    coef = path.at(ts * lam / 2.0)
    # past the last knot the path is identically zero
    coef[ts >= t_zero] = 0.0
    grads = 2.0 * (coef @ c - xty)
    kkt = np.array([_l1_kkt(g, b, t * lam) for g, b, t in zip(grads, coef, ts)])
    resid = sample.y[None, :] - coef @ sample.x.T
    obj = np.mean(resid**2, axis=1) + ts * lam * np.abs(coef).sum(axis=1)
    return PathSolution(
        tgrid=tgrid,
        coefficients=coef,
        kkt_residuals=kkt,
        objective_values=obj,
        support_sizes=np.count_nonzero(coef, axis=1),
        breakpoints=knots_t,
        diagnostics={"t_zero": t_zero, "lambda_n": lam, "solver": "homotopy"},
    )


def ridge_path(sample: DesignSample, lambda_n=None, tgrid: Optional[TGrid] = None) -> PathSolution:
    """Closed form ``(C_n + t lambda_n I)^{-1} X^T y / n`` on each grid weight."""
    lam = 1.0 / math.sqrt(sample.n) if lambda_n is None else float(lambda_n)
    if lam <= 0:
        raise ValidationError("lambda_n must be positive")
    if tgrid is None:
        raise ValidationError("ridge_path needs a t-grid")
    c, xty = _gram(sample)
    eye = np.eye(sample.p)
    coef = np.empty((len(tgrid), sample.p))
    for i, t in enumerate(tgrid.points):
        a = c + t * lam * eye
        if np.linalg.eigvalsh(a).min() <= 1e-10:
            raise ValidationError(f"C_n + t*lambda_n*I is singular at t={t}; ridge needs t > 0 here")
        coef[i] = np.linalg.solve(a, xty)
    ts = tgrid.points
    grads = 2.0 * (coef @ c - xty) + 2.0 * ts[:, None] * lam * coef
    resid = sample.y[None, :] - coef @ sample.x.T
    obj = np.mean(resid**2, axis=1) + ts * lam * np.sum(coef**2, axis=1)
    return PathSolution(
        tgrid=tgrid,
        coefficients=coef,
        kkt_residuals=np.max(np.abs(grads), axis=1),
        objective_values=obj,
        support_sizes=np.count_nonzero(coef, axis=1),
        diagnostics={"lambda_n": lam, "solver": "ridge"},
    )


# -- smooth contrasts ---------------------------------------------------------


class _Smooth:
    """M_n, its gradient and Hessian, with guard errors turned into +inf."""

    def __init__(self, contrast, sample):
        self.contrast, self.sample = contrast, sample

    def f(self, phi):
        try:
            return eval_contrast(self.contrast, self.sample, phi)
        except GuardError:
            return math.inf

    def grad(self, phi):
        return eval_gradient(self.contrast, self.sample, phi)

    def hess(self, phi):
        return eval_hessian(self.contrast, self.sample, phi)


_DIVERGED = 1e8


def _newton(fun, grad, hess, x, tol, max_iter=100):
    """Damped Newton with an adaptive step cap; returns (x, converged).

    The cap keeps near-singular Hessians (e.g. a Huber fit with few residuals
    in the quadratic zone) from proposing huge steps that would then be cut
    back by dozens of halvings.
    """
    fx = fun(x)
    radius = math.inf
    for _ in range(max_iter):
        g = grad(x)
        if np.max(np.abs(g)) <= tol:
            return x, True
        h = hess(x)
        try:
            step = -scipy.linalg.solve(h, g, assume_a="sym")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            step = -np.linalg.lstsq(h + 1e-12 * np.eye(len(x)), g, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            return x, False
        size = float(np.max(np.abs(step)))
        if size <= 1e-15 * (1.0 + np.max(np.abs(x))):
            return x, bool(np.max(np.abs(g)) <= tol)
        capped = size > radius
        if capped:
            step = step * (radius / size)
            size = radius
        slope = float(g @ step)
        if slope >= 0:
            step, slope = -g, -float(g @ g)
            size = float(np.max(np.abs(step)))
        s = 1.0
        while True:
            xn = x + s * step
            fn = fun(xn)
            if fn <= fx + 1e-4 * s * slope or s < 1e-12:
                break
            s *= 0.5
        if s < 1e-12 and fn > fx:
            return x, False
        radius = 2.0 * size if (s == 1.0 and capped) else (math.inf if s == 1.0 else s * size)
        x, fx = xn, fn
        if np.max(np.abs(x)) > _DIVERGED:
            return x, False
    return x, bool(np.max(np.abs(grad(x))) <= tol)


def _soft(z, thr):
    return np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)


def _fista(sm, x, weight, iters, lip):
    """Accelerated proximal gradient with backtracking and monotone restarts."""
    fx = sm.f(x) + weight * np.abs(x).sum()
    y, tk = x.copy(), 1.0
    for _ in range(iters):
        fy, gy = sm.f(y), sm.grad(y)
        while True:
            z = _soft(y - gy / lip, weight / lip)
            fz = sm.f(z)
            dz = z - y
            if fz <= fy + gy @ dz + 0.5 * lip * (dz @ dz) + 1e-15 * abs(fy):
                break
            lip *= 2.0
            if lip > 1e300:
                return x, lip
        Fz = fz + weight * np.abs(z).sum()
        if Fz > fx:
            if tk == 1.0:
                break
            y, tk = x.copy(), 1.0
            continue
        tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        y = z + ((tk - 1.0) / tn) * (z - x)
        x, fx, tk = z, Fz, tn
    return x, lip


def _signed_newton(sm, x, supp, signs, weight, tol):
    """Minimize ``M_n + weight * signs^T phi`` over coordinates ``supp`` (others at 0)."""
    p = x.size

    def embed(z):
        full = np.zeros(p)
        full[supp] = z
        return full

    def f(z):
        return sm.f(embed(z)) + weight * float(signs @ z)

    def g(z):
        return sm.grad(embed(z))[supp] + weight * signs

    def h(z):
        return sm.hess(embed(z))[np.ix_(supp, supp)]

    z, ok = _newton(f, g, h, x[supp].copy(), tol)
    return embed(z), ok


def _active_set_polish(sm, x, weight, tol):
    """Active-set Newton started from the support and signs of ``x``.

    Coordinates whose sign flips are dropped and the worst KKT violator
    outside the support is added, one change per round. Returns None when
    no certified point is reached within the round budget.
    """
    p = x.size
    if weight == 0:
        full, ok = _signed_newton(sm, x, np.arange(p), np.zeros(p), 0.0, 0.25 * tol)
        return full if ok else None
    sgn = np.sign(x)
    cur = x.copy()
    for _ in range(4 * p + 4):
        supp = np.flatnonzero(sgn)
        if supp.size:
            start = np.where(np.sign(cur) == sgn, cur, 0.0)
            full, ok = _signed_newton(sm, start, supp, sgn[supp], weight, 0.25 * tol)
            if not ok:
                return None
            flipped = supp[np.sign(full[supp]) != sgn[supp]]
            if flipped.size:
                sgn[flipped] = 0.0
                full[flipped] = 0.0
                cur = full
                continue
        else:
            full = np.zeros(p)
        grad = sm.grad(full)
        excess = np.where(sgn == 0, np.abs(grad) - weight, -np.inf)
        j = int(np.argmax(excess))
        if excess[j] <= 0.5 * tol:
            return full
        sgn[j] = -np.sign(grad[j])
        cur = full
    return None


def _smooth_l1_solve(sm, x0, weight, tol, max_outer=200):
    x = x0.copy()
    lip = max(float(np.linalg.eigvalsh(sm.hess(x)).max()), 1e-8)
    kkt = math.inf
    for _ in range(max_outer):
        cand = _active_set_polish(sm, x, weight, tol)
        if cand is not None:
            k = _l1_kkt(sm.grad(cand), cand, weight)
            if k <= tol:
                return cand, k
        x, lip = _fista(sm, x, weight, 50, lip)
        if np.max(np.abs(x)) > _DIVERGED:
            break
        kkt = _l1_kkt(sm.grad(x), x, weight)
        if kkt <= tol:
            return x, kkt
    raise SolverError(f"proximal solver did not converge (last KKT residual {kkt:.3g})", residual=kkt)


def _smooth_l2_solve(sm, x0, weight, tol):
    p = x0.size

    def f(z):
        return sm.f(z) + weight * float(z @ z)

    def g(z):
        return sm.grad(z) + 2.0 * weight * z

    def h(z):
        return sm.hess(z) + 2.0 * weight * np.eye(p)

    x, ok = _newton(f, g, h, x0.copy(), tol, max_iter=200)
    kkt = float(np.max(np.abs(g(x))))
    if not ok or kkt > tol:
        raise SolverError(f"Newton solver did not converge (last gradient norm {kkt:.3g})", residual=kkt)
    return x, kkt


def recession_direction(contrast: ContrastSpec, sample: DesignSample):
    """A direction along which the unpenalized GLM contrast keeps decreasing, or None.

    For logistic data this detects (quasi-)separation; for Poisson data a
    direction that drives the fitted mean of zero-count rows to zero. The
    infimum of M_n is then not attained and an unpenalized fit diverges.
    """
    if contrast.kind != "glm" or contrast.family.kind == "gaussian":
        return None
    x, y = sample.x, sample.y
    p = sample.p
    if contrast.family.kind == "logistic":
        sx = (2.0 * y - 1.0)[:, None] * x
        a_ub, b_ub, a_eq = -sx, np.zeros(sample.n), None
        obj = -sx.sum(axis=0)
    else:
        pos = y > 0
        a_ub, b_ub = x, np.zeros(sample.n)
        a_eq = x[pos] if pos.any() else None
        obj = x.sum(axis=0)
    res = linprog(
        obj,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=None if a_eq is None else np.zeros(a_eq.shape[0]),
        bounds=[(-1.0, 1.0)] * p,
        method="highs",
    )
    if res.status == 0 and -res.fun > 1e-9 * max(1.0, float(np.abs(x).max())):
        return res.x
    return None


# -- least absolute deviation ----------------------------------------------------


def _huber_parts(r, delta):
    a = np.abs(r)
    quad = a <= delta
    val = np.where(quad, r * r / (2 * delta), a - delta / 2)
    psi = np.clip(r / delta, -1.0, 1.0)
    return val, psi, quad


def _huber_newton(x_mat, y, weight, gamma, delta, phi, max_iter=20):
    n, p = x_mat.shape

    def fun(z):
        v, _, _ = _huber_parts(y - x_mat @ z, delta)
        out = v.mean()
        if gamma == 1:
            out += weight * _huber_parts(z, delta)[0].sum()
        elif gamma == 2:
            out += weight * float(z @ z)
        return out

    def grad(z):
        _, psi, _ = _huber_parts(y - x_mat @ z, delta)
        g = -x_mat.T @ psi / n
        if gamma == 1:
            g = g + weight * _huber_parts(z, delta)[1]
        elif gamma == 2:
            g = g + 2.0 * weight * z
        return g

    def hess(z):
        _, _, quad = _huber_parts(y - x_mat @ z, delta)
        xq = x_mat[quad]
        h = xq.T @ xq / (n * delta)
        if gamma == 1:
            h = h + np.diag(weight * (np.abs(z) <= delta) / delta)
        elif gamma == 2:
            h = h + 2.0 * weight * np.eye(p)
        scale = max(float(np.trace(h)) / p, 1.0 / delta)
        return h + 1e-10 * scale * np.eye(p)

    phi, _ = _newton(fun, grad, hess, phi, tol=1e-13 / delta, max_iter=max_iter)
    return phi


def lad_kkt(x_mat, y, weight, gamma, phi, kink_rows=None, kink_coords=None):
    """Subgradient certificate for ``mean|y - X phi| + weight * pen(phi)``.

    Rows in ``kink_rows`` (and exact-zero residuals) get a free sign
    multiplier in [-1, 1]; for gamma = 1 so do coordinates in
    ``kink_coords`` (and exact zeros). Returns the sup-norm of the best
    achievable subgradient, found by bounded least squares.
    """
    n, p = x_mat.shape
    r = y - x_mat @ phi
    krow = (r == 0) if kink_rows is None else (kink_rows | (r == 0))
    gfix = -x_mat[~krow].T @ np.sign(r[~krow]) / n
    cols = [-x_mat[krow].T / n]
    if gamma == 1 and weight > 0:
        kc = (phi == 0) if kink_coords is None else (kink_coords | (phi == 0))
        gfix = gfix + weight * np.where(kc, 0.0, np.sign(phi))
        eye = np.eye(p)[:, kc]
        cols.append(weight * eye)
    elif gamma == 2:
        gfix = gfix + 2.0 * weight * phi
    b = np.hstack(cols) if cols else np.zeros((p, 0))
    if b.shape[1] == 0:
        return float(np.max(np.abs(gfix)))
    sol = lsq_linear(b, -gfix, bounds=(-1.0, 1.0), method="bvls", lsq_solver="exact")
    return float(np.max(np.abs(gfix + b @ sol.x)))


def _lad_polish(x_mat, y, weight, gamma, phi_s, delta):
    n, p = x_mat.shape
    r = y - x_mat @ phi_s
    zrow = np.abs(r) <= delta * (1 + 1e-9)
    zcol = (np.abs(phi_s) <= delta) if (gamma == 1 and weight > 0) else np.zeros(p, dtype=bool)
    a_lin = -x_mat[~zrow].T @ np.sign(r[~zrow]) / n
    if gamma == 1 and weight > 0:
        a_lin = a_lin + weight * np.where(zcol, 0.0, np.sign(phi_s))
    h = 2.0 * weight * np.eye(p) if gamma == 2 else np.zeros((p, p))
    cons = np.vstack([x_mat[zrow], np.eye(p)[zcol]])
    rhs = np.concatenate([y[zrow], np.zeros(int(zcol.sum()))])
    if cons.shape[0]:
        u, sv, vt = np.linalg.svd(cons)
        rank = int(np.sum(sv > 1e-12 * sv[0])) if sv.size else 0
        phi0 = phi_s + np.linalg.pinv(cons, rcond=1e-12) @ (rhs - cons @ phi_s)
        if np.max(np.abs(cons @ phi0 - rhs)) > 1e-9 * (1.0 + np.max(np.abs(rhs))):
            return None, math.inf
        null = vt[rank:].T
    else:
        phi0, null = phi_s.copy(), np.eye(p)
    phi = phi0
    if null.shape[1]:
        m = null.T @ h @ null
        gn = null.T @ (a_lin + h @ phi0)
        if m.size and np.linalg.eigvalsh(m).min() > 1e-14 * max(1.0, np.abs(m).max()):
            phi = phi0 - null @ np.linalg.solve(m, gn)
    phi = phi.copy()
    phi[zcol] = 0.0
    return phi, lad_kkt(x_mat, y, weight, gamma, phi, kink_rows=zrow, kink_coords=zcol)


def _lad_solve(x_mat, y, weight, gamma, tol, phi0=None, delta0=None, max_halvings=60):
    n, p = x_mat.shape
    phi = np.zeros(p) if phi0 is None else phi0.copy()
    if delta0 is None:
        delta0 = max(float(np.std(y)), 1e-3)
    delta = delta0
    best = math.inf
    if phi0 is not None:
        # the kink set often survives a small change of t; try it before re-smoothing
        cand, res = _lad_polish(x_mat, y, weight, gamma, phi, 1e-9 * (1.0 + float(np.max(np.abs(y)))))
        if cand is not None and res <= tol:
            return cand, res, delta0 / 64.0
    for _ in range(max_halvings):
        phi = _huber_newton(x_mat, y, weight, gamma, delta, phi)
        cand, res = _lad_polish(x_mat, y, weight, gamma, phi, delta)
        if cand is not None:
            best = min(best, res)
            if res <= tol:
                return cand, res, delta
        delta *= 0.5
    raise SolverError(f"LAD smoothing did not certify a solution (best residual {best:.3g})", residual=best)


# -- grid solver -----------------------------------------------------------------


def grid_path(contrast: ContrastSpec, penalty: PenaltySpec, sample: DesignSample, tgrid: TGrid, tol=1e-8) -> PathSolution:
    """Certified near-minimizers of ``M_n + t J_n`` on each grid weight, warm-started in increasing t."""
    if penalty.gamma not in (1, 2):
        raise ValidationError("grid_path supports gamma in {1, 2}; use l0_path for gamma = 0")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    p = sample.p
    scale = penalty.scale
    ts = tgrid.points
    coef = np.zeros((ts.size, p))
    kkt = np.zeros(ts.size)
    x = np.zeros(p)
    delta = None
    sm = _Smooth(contrast, sample) if contrast.smooth else None
    for i, t in enumerate(ts):
        w = t * scale
        if w == 0 and contrast.kind == "glm":
            d = recession_direction(contrast, sample)
            if d is not None:
                raise SolverError(
                    f"at t={t:.6g}: unpenalized {contrast.name} minimum is not attained "
                    f"(contrast decreases along direction {np.round(d, 6).tolist()})",
                    residual=float(np.max(np.abs(eval_gradient(contrast, sample, x)))),
                )
        try:
            if contrast.smooth:
                if penalty.gamma == 1:
                    x, kkt[i] = _smooth_l1_solve(sm, x, w, tol)
                else:
                    x, kkt[i] = _smooth_l2_solve(sm, x, w, tol)
            else:
                x, kkt[i], delta = _lad_solve(
                    sample.x, sample.y, w, penalty.gamma, tol, x, None if delta is None else 64.0 * delta
                )
        except SolverError as exc:
            raise SolverError(f"at t={t:.6g}: {exc}", residual=exc.residual) from None
        coef[i] = x
    obj = np.array([penalized_objective(contrast, penalty, sample, b, t) for b, t in zip(coef, ts)])
    return PathSolution(
        tgrid=tgrid,
        coefficients=coef,
        kkt_residuals=kkt,
        objective_values=obj,
        support_sizes=np.count_nonzero(coef, axis=1),
        diagnostics={"solver": "grid", "tol": tol, "gamma": penalty.gamma, "contrast": contrast.name},
    )


# -- l0 -------------------------------------------------------------------------------


def minimize_on_support(contrast: ContrastSpec, sample: DesignSample, support, tol=1e-10):
    """Minimize M_n with coordinates outside ``support`` fixed at exactly zero.

    Returns ``(phi, value, residual)``.
    """
    p = sample.p
    support = np.asarray(support, dtype=int)
    phi = np.zeros(p)
    if support.size == 0:
        return phi, eval_contrast(contrast, sample, phi), 0.0
    sub = DesignSample(sample.x[:, support], sample.y)
    if contrast.kind == "least_squares":
        z = np.linalg.lstsq(sub.x, sub.y, rcond=None)[0]
        res = float(np.max(np.abs(eval_gradient(contrast, sub, z))))
    elif contrast.kind == "lad":
        z, res, _ = _lad_solve(sub.x, sub.y, 0.0, 1, tol)
    else:
        if recession_direction(contrast, sub) is not None:
            raise SolverError("submodel minimum is not attained (separable data)")
        sm = _Smooth(contrast, sub)
        z, ok = _newton(sm.f, sm.grad, sm.hess, np.zeros(support.size), tol, max_iter=200)
        res = float(np.max(np.abs(sm.grad(z))))
        if not ok:
            raise SolverError("submodel Newton solve failed", residual=res)
    phi[support] = z
    return phi, eval_contrast(contrast, sample, phi), res


def lower_envelope(intercepts, slopes, t_max):
    """Lower envelope of lines ``intercepts[k] + t * slopes[k]`` on ``[0, t_max]``.

    ``slopes`` must be strictly increasing in k. Ties go to the smaller slope.
    Returns ``(breakpoints, active)`` where ``active[i]`` is the line in force on
    ``[breakpoints[i-1], breakpoints[i])`` (with ``breakpoints[-1] = 0``).
    """
    intercepts = np.asarray(intercepts, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    finite = np.flatnonzero(np.isfinite(intercepts))
    best = intercepts[finite].min()
    cur = int(finite[np.flatnonzero(intercepts[finite] == best)[0]])
    bps, active = [], [cur]
    t = 0.0
    while True:
        nxt, tn = None, math.inf
        for k in range(cur):
            if not np.isfinite(intercepts[k]):
                continue
            tk = (intercepts[k] - intercepts[cur]) / (slopes[cur] - slopes[k])
            tk = max(tk, t)
            if tk < tn or (tk == tn and k < nxt):
                nxt, tn = k, tk
        if nxt is None or tn > t_max:
            break
        bps.append(tn)
        active.append(nxt)
        cur, t = nxt, tn
    return np.array(bps), active


def l0_path(contrast: ContrastSpec, sample: DesignSample, t_max, tgrid: Optional[TGrid] = None, tol=1e-10) -> PathSolution:
    """Exact path for ``M_n(phi) + t #{phi_k != 0} / n`` by enumerating all 2^p supports.

    The path is piecewise constant; at a breakpoint the smaller support is
    reported and the tie is recorded in ``diagnostics["ties"]``.
    ``diagnostics["aic"]`` holds the solution at t = 1.
    """
    n, p = sample.n, sample.p
    if p > L0_MAX_P:
        raise CostLimitError(
            f"l0 path needs 2^{p} = {2 ** p} submodel fits (refusing for p > {L0_MAX_P}; "
            f"at p={L0_MAX_P} it is {2 ** L0_MAX_P})"
        )
    if not t_max > 0:
        raise ValidationError("t_max must be positive")
    best_val = np.full(p + 1, math.inf)
    best_phi = [None] * (p + 1)
    best_res = np.zeros(p + 1)
    best_supp = [None] * (p + 1)
    for k in range(p + 1):
        for supp in itertools.combinations(range(p), k):
            try:
                phi, val, res = minimize_on_support(contrast, sample, supp, tol)
            except SolverError as exc:
                raise SolverError(f"submodel {list(supp)} failed: {exc}", residual=exc.residual) from None
            if val < best_val[k]:
                best_val[k], best_phi[k], best_res[k], best_supp[k] = val, phi, res, supp
    bps, active = lower_envelope(best_val, np.arange(p + 1) / n, t_max)
    if tgrid is None:
        tgrid = TGrid(np.unique(np.concatenate([[0.0], bps, [t_max]])), "breakpoints")
    ts = tgrid.points
    seg = np.searchsorted(bps, ts, side="right")
    which = [active[s] for s in seg]
    coef = np.array([best_phi[k] for k in which])
    ties = []
    for i, t in enumerate(bps):
        big, small = active[i], active[i + 1]
        gap = (best_val[big] + t * big / n) - (best_val[small] + t * small / n)
        ties.append({"t": float(t), "support_before": list(best_supp[big]), "support_after": list(best_supp[small]), "objective_gap": float(gap)})
    seg1 = int(np.searchsorted(bps, 1.0, side="right"))
    return PathSolution(
        tgrid=tgrid,
        coefficients=coef,
        kkt_residuals=np.array([best_res[k] for k in which]),
        objective_values=np.array([best_val[k] + t * k / n for k, t in zip(which, ts)]),
        support_sizes=np.count_nonzero(coef, axis=1),
        breakpoints=bps,
        diagnostics={
            "solver": "l0-enumeration",
            "ties": ties,
            "submodel_values": best_val.tolist(),
            "aic": best_phi[active[seg1]].tolist(),
        },
    )


# -- export -------------------------------------------------------------------------------


def write_path_csv(solution: PathSolution, csv_path, breakpoints_path=None):
    """Write ``t, beta_1..beta_p, objective, kkt_residual, support_size`` and a breakpoint sidecar."""
    csv_path = Path(csv_path)
    p = solution.p
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *[f"beta_{j}" for j in range(1, p + 1)], "objective", "kkt_residual", "support_size"])
        for t, b, o, k, s in zip(
            solution.tgrid.points, solution.coefficients, solution.objective_values, solution.kkt_residuals, solution.support_sizes
        ):
            w.writerow([f"{t:.17g}", *[f"{v:.17g}" for v in b], f"{o:.17g}", f"{k:.17g}", int(s)])
    if breakpoints_path is not None:
        bps = [] if solution.breakpoints is None else [float(v) for v in solution.breakpoints]
        Path(breakpoints_path).write_text(json.dumps(bps) + "\n")

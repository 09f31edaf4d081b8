"""Random limit contrasts and their minimizing paths.

The limit of ``sqrt(n) (beta_hat_n(t) - beta)`` is the path ``t -> u_hat(t)``
minimizing

    L(phi, t) = g^T phi + phi^T Q phi + t J_inf(phi)

where ``g`` is a centred Gaussian vector. Two parametrizations are stored in
the same :class:`LimitContrast`:

* least squares: ``g = -2 U`` with ``U ~ N(0, sigma^2 C)`` and ``Q = C``;
* general M-estimators: ``g = W`` with ``W ~ N(0, P(Delta Delta^T))`` and
  ``Q`` equal to half the Hessian of the population contrast at beta.

``linear_scale`` records the factor (-2 or 1) between the Gaussian draw and
``g``, and ``gaussian_cov`` is the covariance of the draw itself.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from . import _homotopy
from . import rng as _rng
from .contrasts import ContrastSpec, limit_curvature
from .errors import CostLimitError, IndefiniteMatrixError, ValidationError
from .linmodel import TrueModel
from .pathsolvers import TGrid
from .penalties import LimitPenaltySpec, eval_limit_penalty

Q_MIN_EIGENVALUE = 1e-10
TIE_TOL = 1e-12
# enumeration of zero patterns over the null coordinates
L0_MAX_NULL = 15
BRIDGE_MAX_P = 3


@dataclass(frozen=True)
class LimitContrast:
    linear: np.ndarray
    quadratic: np.ndarray
    limit_penalty: LimitPenaltySpec
    gaussian_cov: np.ndarray
    linear_scale: float = 1.0

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.quadratic, dtype=float))
        g = np.atleast_1d(np.asarray(self.linear, dtype=float))
        p = g.size
        if q.shape != (p, p) or self.limit_penalty.p != p:
            raise ValidationError("linear term, quadratic term and limit penalty disagree on dimension")
        if not np.allclose(q, q.T, rtol=1e-12, atol=1e-14):
            raise ValidationError("quadratic term must be symmetric")
        q = 0.5 * (q + q.T)
        lo = float(np.linalg.eigvalsh(q).min())
        if lo <= Q_MIN_EIGENVALUE:
            raise IndefiniteMatrixError(
                f"quadratic term is not positive definite (smallest eigenvalue {lo:.6g})", lo
            )
        object.__setattr__(self, "quadratic", q)
        object.__setattr__(self, "linear", g)

    @property
    def p(self) -> int:
        return self.linear.size

    @property
    def gamma(self) -> float:
        return self.limit_penalty.gamma

    def value(self, phi, t) -> float:
        phi = np.asarray(phi, dtype=float)
        return float(self.linear @ phi + phi @ self.quadratic @ phi) + t * eval_limit_penalty(self.limit_penalty, phi)


@dataclass(frozen=True)
class LimitPathDraw:
    tgrid: TGrid
    u_hat: np.ndarray
    draw_seed: int
    zero_mask: np.ndarray
    kkt_residuals: np.ndarray
    ties: list = field(default_factory=list)


def gaussian_root(cov) -> np.ndarray:
    """A factor ``R`` with ``R R^T = cov`` for a positive semidefinite ``cov``.

    Cholesky when the matrix is positive definite, otherwise an eigenvalue
    decomposition with eigenvalues floored at 0. Negative eigenvalues beyond
    rounding noise raise :class:`IndefiniteMatrixError`.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape[0] != cov.shape[1]:
        raise ValidationError("covariance must be square")
    if not np.all(np.isfinite(cov)):
        raise ValidationError("covariance has non-finite entries")
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
        raise ValidationError("covariance must be symmetric")
    cov = 0.5 * (cov + cov.T)
    w, v = np.linalg.eigh(cov)
    scale = max(1.0, float(np.abs(w).max())) if w.size else 1.0
    if w.size and w.min() < -1e-10 * scale:
        raise IndefiniteMatrixError(f"covariance is indefinite (eigenvalue {w.min():.6g})", float(w.min()))
    if w.size and w.min() > 1e-12 * scale:
        return scipy.linalg.cholesky(cov, lower=True)
    return v * np.sqrt(np.clip(w, 0.0, None))


def _limit_structure(model: TrueModel, contrast: ContrastSpec):
    """(Q, gaussian_cov, linear_scale) of the limit contrast for ``(contrast, model)``."""
    info = limit_curvature(contrast, model)
    if contrast.kind == "least_squares":
        c = info.fisher_like / 2.0
        return c, model.noise.sigma2 * c, -2.0
    return info.fisher_like / 2.0, info.score_cov, 1.0


def _assemble(q, cov, scale, lim, gen):
    root = gaussian_root(cov)
    z = gen.standard_normal(root.shape[1])
    draw = root @ z
    return LimitContrast(scale * draw, q, lim, np.asarray(cov, dtype=float), scale)


def build_limit_contrast(model: TrueModel, contrast: ContrastSpec, gamma, seed, stream=1) -> LimitContrast:
    """Draw one random limit contrast on substream ``stream`` of ``seed``."""
    q, cov, scale = _limit_structure(model, contrast)
    lim = LimitPenaltySpec.from_beta(gamma, model.beta)
    return _assemble(q, cov, scale, lim, _rng.substream(seed, _rng.LIMIT_DOMAIN, stream))


def lasso_limit_contrast(beta, c, sigma2, gamma, seed, stream=1) -> LimitContrast:
    """Least-squares-form limit contrast from a raw Gram limit ``c`` and noise variance."""
    c = np.atleast_2d(np.asarray(c, dtype=float))
    gaussian_root(c)  # raises on indefinite input
    lim = LimitPenaltySpec.from_beta(gamma, beta)
    if lim.p != c.shape[0]:
        raise ValidationError(f"beta has {lim.p} entries but the covariance is {c.shape[0]}x{c.shape[0]}")
    gen = _rng.substream(seed, _rng.LIMIT_DOMAIN, stream)
    return _assemble(c, sigma2 * c, -2.0, lim, gen)


# -- minimization -----------------------------------------------------------


def _kkt_linear(contrast, u, t):
    """Gradient residual for gamma > 1 (smooth objective)."""
    grad = contrast.linear + 2.0 * contrast.quadratic @ u + t * contrast.limit_penalty.linear_weights()
    return float(np.max(np.abs(grad)))


def _solve_l1(contrast, ts):
    lim = contrast.limit_penalty
    pen = lim.null_mask
    b = -contrast.linear / 2.0
    path = _homotopy.follow(contrast.quadratic, b, pen, weights=lim.linear_weights())
    u = path.at(ts / 2.0)
    kkt = np.array([2.0 * path.kkt_residual(t / 2.0, row) for t, row in zip(ts, u)])
    return u, kkt, []


def _solve_smooth_linear(contrast, ts):
    w = contrast.limit_penalty.linear_weights()
    rhs = -(contrast.linear[None, :] + ts[:, None] * w[None, :]) / 2.0
    chol = scipy.linalg.cho_factor(contrast.quadratic)
    u = scipy.linalg.cho_solve(chol, rhs.T).T
    kkt = np.array([_kkt_linear(contrast, row, t) for row, t in zip(u, ts)])
    return u, kkt, []


def _solve_l0(contrast, ts):
    lim = contrast.limit_penalty
    p = contrast.p
    null = np.flatnonzero(lim.null_mask)
    free = np.flatnonzero(~lim.null_mask)
    if null.size > L0_MAX_NULL:
        raise CostLimitError(f"l0 limit needs 2^{null.size} support fits (refusing above {L0_MAX_NULL} null coordinates)")
    q = contrast.quadratic
    b = -contrast.linear / 2.0
    subsets, values, sols = [], [], []
    for k in range(null.size + 1):
        for extra in itertools.combinations(null.tolist(), k):
            supp = np.sort(np.concatenate([free, np.array(extra, dtype=int)]))
            phi = np.zeros(p)
            if supp.size:
                phi[supp] = np.linalg.solve(q[np.ix_(supp, supp)], b[supp])
            subsets.append(extra)
            values.append(-float(b[supp] @ phi[supp]) if supp.size else 0.0)
            sols.append(phi)
    values = np.array(values)
    sizes = np.array([len(s) for s in subsets], dtype=float)
    u = np.zeros((ts.size, p))
    kkt = np.zeros(ts.size)
    ties = []
    for i, t in enumerate(ts):
        obj = values + t * sizes
        best = obj.min()
        near = np.flatnonzero(obj <= best + TIE_TOL * max(1.0, abs(best)))
        # candidates are ordered by support size, so the first is the smallest
        pick = int(near[0])
        if len(near) > 1 and len({sizes[j] for j in near}) > 1:
            ties.append({"t": float(t), "supports": [list(subsets[j]) for j in near], "chosen": list(subsets[pick])})
        u[i] = sols[pick]
        grad = contrast.linear + 2.0 * q @ u[i]
        on = u[i] != 0
        on[free] = True
        kkt[i] = float(np.max(np.abs(grad[on]))) if on.any() else 0.0
    return u, kkt, ties


def _bridge_local(contrast, t, zero_set, signs, starts):
    """Best local minimum over one orthant face (coordinates in ``zero_set`` pinned to 0)."""
    lim = contrast.limit_penalty
    g_pow = lim.gamma
    p = contrast.p
    q = contrast.quadratic
    g = contrast.linear
    null = lim.null_mask
    free = np.array([j for j in range(p) if j not in zero_set], dtype=int)
    if free.size == 0:
        return np.zeros(p), 0.0
    sgn = np.zeros(p)
    for j, s in signs.items():
        sgn[j] = s

    def embed(z):
        phi = np.zeros(p)
        phi[free] = z
        return phi

    def fun(z):
        phi = embed(z)
        pen = np.sum(np.abs(phi[null]) ** g_pow)
        return float(g @ phi + phi @ q @ phi + t * pen)

    def jac(z):
        phi = embed(z)
        grad = g + 2.0 * q @ phi
        mag = np.abs(phi)
        pen_grad = np.where(null & (mag > 0), g_pow * np.sign(phi) * np.where(mag > 0, mag, 1.0) ** (g_pow - 1.0), 0.0)
        return (grad + t * pen_grad)[free]

    def hess(z):
        phi = embed(z)
        mag = np.where(phi != 0, np.abs(phi), 1.0)
        curv = np.where(null & (phi != 0), g_pow * (g_pow - 1.0) * mag ** (g_pow - 2.0), 0.0)
        return (2.0 * q + t * np.diag(curv))[np.ix_(free, free)]

    bounds = []
    for j in free:
        if null[j]:
            bounds.append((1e-14, None) if sgn[j] > 0 else (None, -1e-14))
        else:
            bounds.append((None, None))
    best_z, best_val = None, math.inf
    for s0 in starts:
        z0 = np.array([sgn[j] * max(abs(s0[j]), 1e-6) if null[j] else s0[j] for j in free])
        res = minimize(fun, z0, jac=jac, method="L-BFGS-B", bounds=bounds, options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000})
        if res.fun < best_val:
            best_z, best_val = res.x, float(res.fun)
    best_z, best_val = _polish_in_orthant(fun, jac, hess, best_z, best_val, null[free])
    return embed(best_z), best_val


def _polish_in_orthant(fun, jac, hess, z, val, signed, max_iter=20):
    """Newton steps that keep the sign of every ``signed`` coordinate and do not increase ``fun``."""
    for _ in range(max_iter):
        grad = jac(z)
        if np.max(np.abs(grad)) <= 1e-14:
            break
        try:
            step = -np.linalg.solve(hess(z), grad)
        except np.linalg.LinAlgError:
            break
        if step @ grad >= 0:
            break
        scale = 1.0
        while scale > 1e-8:
            cand = z + scale * step
            if np.all(np.sign(cand[signed]) == np.sign(z[signed])):
                cand_val = fun(cand)
                # near the optimum the value change is below rounding; accept a smaller gradient then
                if cand_val <= val or (
                    cand_val <= val + 1e-13 * (1.0 + abs(val)) and np.max(np.abs(jac(cand))) < np.max(np.abs(grad))
                ):
                    break
            scale *= 0.5
        else:
            break
        z, val = cand, cand_val
    return z, val


def _solve_bridge(contrast, ts):
    """Global minimizer for 0 < gamma < 1 by enumerating zero patterns and orthants (p <= 3)."""
    p = contrast.p
    if p > BRIDGE_MAX_P:
        raise CostLimitError(
            f"limit minimization for 0 < gamma < 1 is only certified for p <= {BRIDGE_MAX_P} (got p={p})"
        )
    lim = contrast.limit_penalty
    null = np.flatnonzero(lim.null_mask).tolist()
    q = contrast.quadratic
    u = np.zeros((ts.size, p))
    kkt = np.zeros(ts.size)
    unpen = -np.linalg.solve(q, contrast.linear) / 2.0
    scale = max(1.0, float(np.abs(unpen).max()))
    for i, t in enumerate(ts):
        if t == 0:
            u[i] = unpen
            kkt[i] = _kkt_linear(contrast, unpen, 0.0)
            continue
        starts = [unpen] + [np.full(p, m * scale) for m in (1e-3, 0.3, 1.5)]
        best, best_val = None, math.inf
        for k in range(len(null) + 1):
            for zero_set in itertools.combinations(null, k):
                rest = [j for j in null if j not in zero_set]
                for sg in itertools.product((1.0, -1.0), repeat=len(rest)):
                    phi, val = _bridge_local(contrast, t, set(zero_set), dict(zip(rest, sg)), starts)
                    if phi is not None and val < best_val - TIE_TOL:
                        best, best_val = phi, val
        u[i] = best
        nz = best != 0
        grad = contrast.linear + 2.0 * q @ best
        mag = np.abs(best)
        pen_grad = np.where(lim.null_mask & nz, lim.gamma * np.sign(best) * np.where(nz, mag, 1.0) ** (lim.gamma - 1.0), 0.0)
        r = np.abs(grad + t * pen_grad)[nz]
        kkt[i] = float(r.max()) if r.size else 0.0
    return u, kkt, []


def minimize_limit(contrast: LimitContrast, tgrid: TGrid, draw_seed=0) -> LimitPathDraw:
    """Minimize ``L(., t)`` at every grid weight.

    gamma = 1 uses the exact homotopy (signed linear term on coordinates with
    beta_j != 0, absolute value on the others); gamma > 1 is a closed form
    because the limit penalty is linear; gamma = 0 enumerates supports over
    the null coordinates; 0 < gamma < 1 enumerates zero patterns and orthants
    with local solves (p <= 3 only).
    """
    ts = tgrid.points
    gamma = contrast.gamma
    if gamma == 1:
        u, kkt, ties = _solve_l1(contrast, ts)
    elif gamma > 1:
        u, kkt, ties = _solve_smooth_linear(contrast, ts)
    elif gamma == 0:
        u, kkt, ties = _solve_l0(contrast, ts)
    else:
        u, kkt, ties = _solve_bridge(contrast, ts)
    return LimitPathDraw(tgrid=tgrid, u_hat=u, draw_seed=draw_seed, zero_mask=(u == 0), kkt_residuals=kkt, ties=ties)


def sample_limit_paths(model: TrueModel, contrast: ContrastSpec, gamma, tgrid: TGrid, draws: int, seed: int, first=1):
    """``draws`` independent limit paths on substreams ``first .. first+draws-1`` of ``seed``.

    The default ``first=1`` gives streams 1..draws; other values let callers
    split one ensemble into shards that reproduce it exactly.
    """
    if int(draws) != draws or draws < 1:
        raise ValidationError(f"draws must be a positive integer, got {draws!r}")
    q, cov, scale = _limit_structure(model, contrast)
    lim = LimitPenaltySpec.from_beta(gamma, model.beta)
    out = []
    for i in range(int(first), int(first) + int(draws)):
        lc = _assemble(q, cov, scale, lim, _rng.substream(seed, _rng.LIMIT_DOMAIN, i))
        out.append(minimize_limit(lc, tgrid, draw_seed=i))
    return out


def sample_lasso_limit_paths(beta, c, sigma2, gamma, tgrid: TGrid, draws: int, seed: int):
    """Like :func:`sample_limit_paths` for a raw ``(beta, C, sigma^2)`` least-squares limit."""
    if int(draws) != draws or draws < 1:
        raise ValidationError(f"draws must be a positive integer, got {draws!r}")
    return [
        minimize_limit(lasso_limit_contrast(beta, c, sigma2, gamma, seed, i), tgrid, draw_seed=i)
        for i in range(1, int(draws) + 1)
    ]


def write_limit_csv(draws, path):
    """Write ``draw_id, t, u_1..u_p, zero_mask_1..zero_mask_p`` rows."""
    draws = list(draws)
    p = draws[0].u_hat.shape[1] if draws else 0
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["draw_id", "t", *[f"u_{j}" for j in range(1, p + 1)], *[f"zero_mask_{j}" for j in range(1, p + 1)]])
        for d in draws:
            for t, row, z in zip(d.tgrid.points, d.u_hat, d.zero_mask):
                w.writerow([d.draw_seed, f"{t:.17g}", *[f"{v:.17g}" for v in row], *[int(b) for b in z]])

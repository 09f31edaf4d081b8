"""Invariant suites shared by ``penpath check`` and the test-suite.

Each suite returns a list of result dicts ``{"name", "passed", "value",
"threshold"}``. Suites are deterministic and run in seconds.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from . import rng as _rng
from .contrasts import ContrastSpec, eval_contrast
from .limitprocess import LimitContrast, build_limit_contrast, minimize_limit, sample_limit_paths
from .linmodel import DesignSample, TrueModel, simulate
from .montecarlo import ks_two_sample
from .pathsolvers import TGrid, grid_path, l0_path, lasso_path, penalized_objective
from .penalties import (
    LimitPenaltySpec,
    PenaltySpec,
    check_limit_convergence,
    eval_limit_penalty,
    eval_penalty,
    penalty_increment_bound,
)

SUITES = ("oracle", "kkt", "lemma1", "convexity", "determinism")


def _result(name, value, threshold, passed):
    return {"name": name, "value": value, "threshold": threshold, "passed": bool(passed)}


# -- exact low-dimensional oracle -------------------------------------------------


def line_minimize(fun, kinks, lo, hi):
    """Minimize a convex scalar function that is quadratic between ``kinks`` on ``[lo, hi]``.

    Every kink and the stationary point of the quadratic through three points
    of each piece are evaluated, so the result is exact up to rounding.
    ``fun`` maps an array of abscissae to values.
    """
    knots = np.unique(np.clip(np.concatenate([np.asarray(kinks, dtype=float), [lo, hi]]), lo, hi))
    a, b = knots[:-1], knots[1:]
    mid = 0.5 * (a + b)
    fa, fm, fb = fun(a), fun(mid), fun(b)
    width = b - a
    curv = np.zeros_like(width)
    # pieces too narrow to fit are covered by their evaluated endpoints
    ok = width > 1e-13 * max(hi - lo, 1e-300)
    curv[ok] = 4.0 * (fa[ok] - 2.0 * fm[ok] + fb[ok]) / width[ok] ** 2
    good = ok & (curv > 0)
    stat = mid[good] - (fb[good] - fa[good]) / (width[good] * curv[good])
    stat = np.clip(stat, a[good], b[good])
    cand = np.concatenate([knots, stat])
    vals = fun(cand)
    k = int(np.argmin(vals))
    return float(cand[k]), float(vals[k])


def nested_minimize(fun, kinks, p, radius, xatol=1e-11):
    """Minimize a convex piecewise-quadratic ``fun`` over the box ``[-radius, radius]^p`` (``p <= 2``).

    ``fun`` maps an ``(m, p)`` array of points to values. ``kinks(head)``
    lists the kink locations of the last coordinate when the leading
    coordinates are fixed at ``head``. The last coordinate is minimized
    exactly; the convex profile in the first coordinate is minimized by
    bounded Brent search. Returns ``(argmin, value, on_boundary)``.
    """
    if p not in (1, 2):
        raise ValueError("nested oracle covers p in {1, 2}")

    def inner(head):
        def along(v):
            pts = np.empty((v.size, p))
            pts[:, :-1] = head
            pts[:, -1] = v
            return fun(pts)

        return line_minimize(along, kinks(head), -radius, radius)

    if p == 1:
        v, val = inner(np.empty(0))
        arg = np.array([v])
    else:
        res = optimize.minimize_scalar(
            lambda u: inner(np.array([u]))[1], bounds=(-radius, radius), method="bounded", options={"xatol": xatol}
        )
        head = np.array([float(res.x)])
        v, val = inner(head)
        arg = np.array([head[0], v])
    edge = bool(np.any(np.abs(arg) >= radius * (1.0 - 1e-9)))
    return arg, val, edge


def penalized_objective_batch(contrast: ContrastSpec, penalty: PenaltySpec, sample: DesignSample, phis, t):
    """``M_n(phi) + t J_n(phi)`` for each row of ``phis`` (least squares or LAD)."""
    r = sample.y[None, :] - phis @ sample.x.T
    if contrast.kind == "least_squares":
        m = np.mean(r**2, axis=1)
    elif contrast.kind == "lad":
        m = np.mean(np.abs(r), axis=1)
    else:
        raise ValueError("batch objective covers least squares and LAD only")
    if penalty.gamma == 0:
        pen = np.count_nonzero(phis, axis=1) / penalty.n
    else:
        pen = penalty.scale * np.sum(np.abs(phis) ** penalty.gamma, axis=1)
    return m + t * pen


def random_instance(seed, p, n, noise="gaussian"):
    """Continuous random regression data (unique LAD minimizers almost surely)."""
    gen = _rng.substream(seed, 0xC4EC)
    x = gen.standard_normal((n, p))
    beta = gen.uniform(-2.0, 2.0, p)
    eps = gen.laplace(0.0, 1.0, n) if noise == "laplace" else gen.standard_normal(n)
    return DesignSample(x, x @ beta + eps)


def path_kinks(contrast: ContrastSpec, gamma, sample: DesignSample):
    """Kinks of ``M_n + t J_n`` in the last coordinate given the leading ones."""
    x, y = sample.x, sample.y
    last = x[:, -1]
    rows = last != 0

    def kinks(head):
        out = [0.0] if gamma == 1 else []
        if contrast.kind == "lad":
            out.extend((y[rows] - x[rows, :-1] @ head) / last[rows])
        return np.asarray(out, dtype=float)

    return kinks


def path_oracle_errors(contrast, gamma, sample, tgrid, tol=1e-10):
    """Sup over the grid of ``|solver - oracle|_inf`` for one instance, and a boundary flag.

    The oracle minimizes over a box holding twice the l1 norm of the OLS fit.
    """
    penalty = PenaltySpec(gamma, sample.n)
    sol = grid_path(contrast, penalty, sample, tgrid, tol)
    radius = 2.0 * float(np.abs(np.linalg.lstsq(sample.x, sample.y, rcond=None)[0]).sum()) + 5.0
    kinks = path_kinks(contrast, gamma, sample)
    worst, hit = 0.0, False
    for t, coef in zip(tgrid.points, sol.coefficients):
        arg, _, edge = nested_minimize(
            lambda pts: penalized_objective_batch(contrast, penalty, sample, pts, t), kinks, sample.p, radius
        )
        worst = max(worst, float(np.max(np.abs(arg - coef))))
        hit = hit or edge
    return worst, hit


def limit_oracle(contrast: LimitContrast, t, radius=None):
    """Minimizer of the limit contrast by nested exact line search (``p <= 2``)."""
    lim = contrast.limit_penalty
    w = lim.linear_weights()
    null = lim.null_mask

    def fun(pts):
        val = pts @ contrast.linear + np.einsum("ij,jk,ik->i", pts, contrast.quadratic, pts)
        if lim.gamma == 0:
            pen = np.count_nonzero(pts[:, null], axis=1)
        else:
            pen = pts @ w
            if lim.gamma == 1:
                pen = pen + np.sum(np.abs(pts[:, null]), axis=1)
        return val + t * pen

    unpen = -np.linalg.solve(contrast.quadratic, contrast.linear + t * w) / 2.0
    if radius is None:
        radius = 2.0 * float(np.abs(unpen).max()) + 5.0
    if lim.gamma != 0:
        kink = np.array([0.0]) if lim.gamma == 1 and null[-1] else np.empty(0)
        return nested_minimize(fun, lambda head: kink, contrast.p, radius)[0]
    # on each zero pattern the counting penalty is charged as a constant, so
    # the restricted objective is a smooth quadratic; patterns are compared after
    best, best_val = None, math.inf
    idx = np.flatnonzero(null)
    for mask in range(2 ** idx.size):
        zero = [int(j) for b, j in enumerate(idx) if mask >> b & 1]
        free = [j for j in range(contrast.p) if j not in zero]
        charged = t * (idx.size - len(zero))
        arg = np.zeros(contrast.p)
        if free:

            def sub(pts, free=free, charged=charged):
                full = np.zeros((pts.shape[0], contrast.p))
                full[:, free] = pts
                return full @ contrast.linear + np.einsum("ij,jk,ik->i", full, contrast.quadratic, full) + charged

            arg[free] = nested_minimize(sub, lambda head: np.empty(0), len(free), radius)[0]
        val = float(contrast.linear @ arg + arg @ contrast.quadratic @ arg) + charged
        if val < best_val:
            best, best_val = arg, val
    return best


# -- suites -----------------------------------------------------------------------


def suite_oracle(instances=6, seed=1):
    out = []
    s = DesignSample(np.ones((4, 1)), np.array([0.5, 1.5, 1.0, 1.0]))
    v = float(lasso_path(s, tgrid=TGrid(np.array([2.0]))).coefficients[0, 0])
    out.append(_result("oracle/lasso_soft_threshold", v, 0.5, abs(v - 0.5) <= 1e-12))
    grid = TGrid.uniform(3.0, 7)
    for i in range(instances):
        p = 1 + i % 2
        sample = random_instance(_rng.mix64(seed, i), p, 25)
        for contrast in (ContrastSpec.least_squares(), ContrastSpec.lad()):
            for gamma in (1, 2):
                err, hit = path_oracle_errors(contrast, gamma, sample, grid)
                out.append(_result(f"oracle/path/{contrast.name}/gamma={gamma}/instance={i}", err, 1e-4, err <= 1e-4 and not hit))
    model = TrueModel(beta=[1.0, 0.0])
    for gamma in (0, 1, 2):
        lc = build_limit_contrast(model, ContrastSpec.least_squares(), gamma, seed)
        got = minimize_limit(lc, TGrid(np.array([0.0, 1.0, 3.0])))
        err = max(float(np.max(np.abs(limit_oracle(lc, t) - u))) for t, u in zip(got.tgrid.points, got.u_hat))
        out.append(_result(f"oracle/limit/gamma={gamma}", err, 1e-4, err <= 1e-4))
    gen = _rng.substream(seed, 0x45)
    worst = 0.0
    for _ in range(20):
        a = np.round(gen.standard_normal(gen.integers(1, 30)), 1)
        b = np.round(gen.standard_normal(gen.integers(1, 30)), 1)
        worst = max(worst, abs(ks_two_sample(a, b) - ks_brute_force(a, b)))
    out.append(_result("oracle/ks_brute_force", worst, 0.0, worst == 0.0))
    return out


def ks_brute_force(a, b):
    """Double loop over every observed threshold."""
    best = 0.0
    for x in list(a) + list(b):
        fa = sum(1 for v in a if v <= x) / len(a)
        fb = sum(1 for v in b if v <= x) / len(b)
        best = max(best, abs(fa - fb))
    return best


def lasso_knot_residuals(sol: "object", sample: DesignSample):
    """KKT residuals of the exact lasso path at every knot and every midpoint."""
    knots = np.concatenate([[0.0], sol.breakpoints])
    mids = 0.5 * (knots[1:] + knots[:-1])
    pts = np.unique(np.concatenate([knots, mids, [knots[-1] * 1.5 + 1.0]]))
    return lasso_path(sample, tgrid=TGrid(pts)).kkt_residuals


def suite_kkt(instances=10, seed=2):
    out = []
    for i in range(instances):
        p = 1 + i % 3
        sample = random_instance(_rng.mix64(seed, i), p, 40)
        sol = lasso_path(sample)
        res = float(lasso_knot_residuals(sol, sample).max())
        out.append(_result(f"kkt/lasso_knots/instance={i}", res, 1e-8, res <= 1e-8))
        grid = TGrid.uniform(4.0, 9)
        for contrast, gamma in ((ContrastSpec.least_squares(), 1), (ContrastSpec.lad(), 1), (ContrastSpec.lad(), 2)):
            g = grid_path(contrast, PenaltySpec(gamma, sample.n), sample, grid, 1e-9)
            r = float(g.kkt_residuals.max())
            out.append(_result(f"kkt/grid/{contrast.name}/gamma={gamma}/instance={i}", r, 1e-9, r <= 1e-9))
        gm = TrueModel(beta=np.linspace(0.5, -0.5, p), glm="logistic")
        gs = simulate(gm, 120, _rng.mix64(seed, 100 + i))
        g = grid_path(ContrastSpec.glm("logistic"), PenaltySpec(1, gs.n), gs, TGrid.uniform(2.0, 5, t_min=0.5), 1e-9)
        r = float(g.kkt_residuals.max())
        out.append(_result(f"kkt/grid/logistic/instance={i}", r, 1e-9, r <= 1e-9))
        gen = _rng.substream(seed, 7, i)
        gap = -math.inf
        pen = PenaltySpec(1, sample.n)
        for t, coef in zip(sol.tgrid.points, sol.coefficients):
            base = penalized_objective(ContrastSpec.least_squares(), pen, sample, coef, t)
            for _ in range(10):
                probe = coef + gen.standard_normal(p)
                gap = max(gap, base - penalized_objective(ContrastSpec.least_squares(), pen, sample, probe, t))
        out.append(_result(f"kkt/near_minimizer/instance={i}", gap, 2e-8, gap <= 2e-8))
    return out


def suite_penalty_limits(seed=3):
    out = []
    ns = [100, 1000, 10000]
    for gamma, beta, radius in ((1, [1.0, 0.0], 3.0), (0, [1.0, 0.0], 2.0)):
        rows = check_limit_convergence(gamma, beta, radius, ns, 0.25)
        worst = max(r["sup_discrepancy"] for r in rows)
        out.append(_result(f"lemma1/exact_zero/gamma={gamma}", worst, 0.0, worst == 0.0))
    for gamma, beta in ((2, [1.0]), (0.5, [1.0, 0.0])):
        rows = check_limit_convergence(gamma, beta, 3.0, ns, 0.1)
        vals = [r["sup_discrepancy"] for r in rows]
        dec = all(b < a for a, b in zip(vals, vals[1:]))
        out.append(_result(f"lemma1/decreasing/gamma={gamma}", vals, "strictly decreasing", dec))
    gen = _rng.substream(seed, 0x1E)
    worst = 0.0
    for _ in range(50):
        p = int(gen.integers(1, 4))
        gamma = float(gen.choice([0.0, 0.5, 1.0, 1.5, 2.0, 3.0]))
        beta = gen.uniform(-10, 10, p) * (gen.random(p) < 0.7)
        phi = beta + gen.standard_normal(p) * 10.0 ** gen.uniform(-3, 1)
        for n in (10, 1000):
            lhs, rhs = penalty_increment_bound(gamma, beta, phi, n)
            worst = max(worst, lhs / rhs)
    out.append(_result("lemma1/bound", worst, 1.0, worst <= 1.0))
    return out


def suite_convexity(seed=4):
    out = []
    gen = _rng.substream(seed, 0xC0)
    sample = random_instance(seed, 3, 30)
    for contrast in (ContrastSpec.least_squares(), ContrastSpec.lad(), ContrastSpec.glm("logistic")):
        data = sample if contrast.kind != "glm" else DesignSample(sample.x, (sample.y > 0).astype(float))
        worst = -math.inf
        for _ in range(100):
            a, b = gen.standard_normal((2, 3)) * 3.0
            mid = eval_contrast(contrast, data, (a + b) / 2)
            worst = max(worst, mid - 0.5 * (eval_contrast(contrast, data, a) + eval_contrast(contrast, data, b)))
        out.append(_result(f"convexity/contrast/{contrast.name}", worst, 1e-10, worst <= 1e-10))
    for gamma in (1, 2):
        lim = LimitPenaltySpec.from_beta(gamma, [1.5, 0.0, -2.0])
        worst = -math.inf
        for _ in range(100):
            a, b = gen.standard_normal((2, 3)) * 3.0
            mid = eval_limit_penalty(lim, (a + b) / 2)
            worst = max(worst, mid - 0.5 * (eval_limit_penalty(lim, a) + eval_limit_penalty(lim, b)))
        out.append(_result(f"convexity/limit_penalty/gamma={gamma}", worst, 1e-12, worst <= 1e-12))
    lc = build_limit_contrast(TrueModel(beta=[1.0, 0.0, 0.0]), ContrastSpec.least_squares(), 1, seed)
    worst = -math.inf
    for _ in range(100):
        a, b = gen.standard_normal((2, 3)) * 3.0
        t = float(gen.uniform(0, 5))
        worst = max(worst, lc.value((a + b) / 2, t) - 0.5 * (lc.value(a, t) + lc.value(b, t)))
    out.append(_result("convexity/limit_contrast/gamma=1", worst, 1e-10, worst <= 1e-10))
    pen = PenaltySpec(1, 30)
    worst = -math.inf
    for _ in range(100):
        a, b = gen.standard_normal((2, 3))
        worst = max(worst, eval_penalty(pen, (a + b) / 2) - 0.5 * (eval_penalty(pen, a) + eval_penalty(pen, b)))
    out.append(_result("convexity/penalty/gamma=1", worst, 1e-12, worst <= 1e-12))
    return out


def suite_determinism(seed=5):
    out = []
    model = TrueModel(beta=[1.0, -0.5])
    a, b = simulate(model, 50, seed), simulate(model, 50, seed)
    same = np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    out.append(_result("determinism/simulate", same, True, same))
    grid = TGrid.uniform(3.0, 11)
    d1 = sample_limit_paths(model, ContrastSpec.least_squares(), 1, grid, 5, seed)
    d2 = sample_limit_paths(model, ContrastSpec.least_squares(), 1, grid, 5, seed)
    same = all(np.array_equal(x.u_hat, y.u_hat) for x, y in zip(d1, d2))
    out.append(_result("determinism/limit_paths", same, True, same))
    shard = sample_limit_paths(model, ContrastSpec.least_squares(), 1, grid, 2, seed, first=4)
    same = all(np.array_equal(x.u_hat, y.u_hat) for x, y in zip(d1[3:], shard))
    out.append(_result("determinism/limit_shards", same, True, same))
    s = simulate(model, 40, seed)
    p1 = l0_path(ContrastSpec.least_squares(), s, 5.0)
    p2 = l0_path(ContrastSpec.least_squares(), s, 5.0)
    same = np.array_equal(p1.coefficients, p2.coefficients) and np.array_equal(p1.breakpoints, p2.breakpoints)
    out.append(_result("determinism/l0_path", same, True, same))
    return out


def run_suites(names=None):
    """Run the named suites (all by default); returns ``{suite: [results]}``."""
    names = list(SUITES) if names is None else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(unknown[0])
    funcs = {
        "oracle": suite_oracle,
        "kkt": suite_kkt,
        "lemma1": suite_penalty_limits,
        "convexity": suite_convexity,
        "determinism": suite_determinism,
    }
    return {name: funcs[name]() for name in names}

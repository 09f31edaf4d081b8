"""Monte Carlo experiments for consistency, the square-root rate and the pathwise CLT.

An experiment is described by one JSON document (see :data:`CONFIG_SCHEMA`).
Every replicate draws its data from its own random stream, derived from
``(seed, n, replicate index)``, so a report is a pure function of the config
and does not depend on how many worker processes computed it.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import rng as _rng
from .contrasts import ContrastSpec
from .errors import GuardError, PenpathError, SolverError, ValidationError
from .limitprocess import sample_limit_paths
from .linmodel import TrueModel, model_from_config, simulate
from .pathsolvers import TGrid, grid_path, l0_path, lasso_path, ridge_path
from .penalties import PenaltySpec

MIN_REPLICATES = 50
ZERO_SNAP = 1e-10
EXPERIMENTS = ("consistency", "nonuniformity", "clt")
LIMIT_SHARD = 500

_NUMBER = {"type": "number"}
_PROBE = {
    "type": "object",
    "required": ["coordinate", "t", "value"],
    "properties": {"coordinate": {"type": "integer", "minimum": 1}, "t": {"type": "number", "minimum": 0}, "value": _NUMBER},
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["model", "contrast", "gamma", "tgrid", "n_values", "replicates", "seed"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "model": {
            "type": "object",
            "required": ["beta"],
            "properties": {
                "beta": {"type": "array", "items": _NUMBER, "minItems": 1},
                "noise": {
                    "type": "object",
                    "properties": {
                        "kind": {"enum": ["gaussian", "laplace", "uniform"]},
                        "sigma2": {"type": "number", "minimum": 0},
                        "allow_degenerate": {"type": "boolean"},
                    },
                    "additionalProperties": False,
                },
                "design": {
                    "type": "object",
                    "properties": {
                        "kind": {"enum": ["gaussian", "fixed"]},
                        "cov": {"type": "array", "items": {"type": "array", "items": _NUMBER}},
                        "matrix": {"type": "array", "items": {"type": "array", "items": _NUMBER}},
                    },
                    "additionalProperties": False,
                },
                "glm": {"enum": ["logistic", "poisson", "gaussian", "gaussian-identity"]},
            },
            "additionalProperties": False,
        },
        "contrast": {"enum": ["ls", "least_squares", "lad", "logistic", "poisson", "gaussian", "gaussian-identity"]},
        "gamma": {"type": "number", "minimum": 0},
        "tgrid": {
            "type": "object",
            "oneOf": [{"required": ["t_max"]}, {"required": ["points"]}],
            "properties": {
                "t_max": {"type": "number", "exclusiveMinimum": 0},
                "count": {"type": "integer", "minimum": 1},
                "points": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "n_values": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "replicates": {"type": "integer", "minimum": MIN_REPLICATES},
        "limit_draws": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "solver_tol": {"type": "number", "exclusiveMinimum": 0},
        "experiments": {"type": "array", "items": {"enum": list(EXPERIMENTS)}, "minItems": 1, "uniqueItems": True},
        "clt": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "probe_t": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "thresholds": {
            "type": "object",
            "properties": {
                "median_decreasing": {"type": "boolean"},
                "rate_ratio_band": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
                "max_failure_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                "ks_marginal": _NUMBER,
                "ks_sup": _NUMBER,
                "zero_frequency_gap": _NUMBER,
                "zero_frequency_coordinates": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "support_monotone": {"type": "boolean"},
                "limit_zero_frequency_min": _PROBE,
                "observed_zero_frequency_max": _PROBE,
            },
            "additionalProperties": False,
        },
    },
}


class ConfigError(ValidationError):
    """Malformed experiment config; ``pointer`` is the JSON pointer of the offending field."""

    def __init__(self, message, pointer):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


@dataclass(frozen=True)
class ExperimentConfig:
    model: TrueModel
    contrast: ContrastSpec
    gamma: float
    tgrid: TGrid
    n_values: tuple
    replicates: int
    limit_draws: int
    seed: int
    solver_tol: float
    experiments: tuple = EXPERIMENTS
    probe_t: tuple = ()
    clt_n: Optional[int] = None
    thresholds: dict = field(default_factory=dict)
    name: str = "experiment"

    @property
    def uses_homotopy(self) -> bool:
        return self.contrast.kind == "least_squares" and self.gamma == 1

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
        errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), _pointer(e.absolute_path)))
        if errors:
            err = errors[0]
            raise ConfigError(err.message, _pointer(err.absolute_path))
        try:
            model = model_from_config(doc["model"])
        except PenpathError as exc:
            raise ConfigError(str(exc), "/model") from None
        try:
            contrast = ContrastSpec.parse(doc["contrast"])
        except PenpathError as exc:
            raise ConfigError(str(exc), "/contrast") from None
        gamma = float(doc["gamma"])
        if gamma not in (0.0, 1.0, 2.0):
            raise ConfigError("path experiments support gamma in {0, 1, 2}", "/gamma")
        tg = doc["tgrid"]
        try:
            if "points" in tg:
                tgrid = TGrid(np.array(tg["points"], dtype=float))
            else:
                tgrid = TGrid.uniform(float(tg["t_max"]), int(tg.get("count", 201)))
        except PenpathError as exc:
            raise ConfigError(str(exc), "/tgrid") from None
        if not math.isfinite(tgrid.t_max):
            raise ConfigError("t_max must be finite", "/tgrid")
        n_values = tuple(int(n) for n in doc["n_values"])
        if any(b <= a for a, b in zip(n_values, n_values[1:])):
            raise ConfigError("n_values must be strictly increasing", "/n_values")
        tol = float(doc.get("solver_tol", 1.0 / max(n_values) ** 2))
        if tol > 1.0 / min(n_values):
            raise ConfigError(f"solver_tol {tol} exceeds 1/min(n_values) = {1.0 / min(n_values)}", "/solver_tol")
        experiments = tuple(doc.get("experiments", EXPERIMENTS))
        if "nonuniformity" in experiments and not (contrast.kind == "least_squares" and gamma == 1):
            raise ConfigError("the non-uniformity check needs the least-squares l1 path", "/experiments")
        clt = doc.get("clt", {})
        clt_n = clt.get("n")
        if "clt" in experiments:
            if "limit_draws" not in doc:
                raise ConfigError("'limit_draws' is required for the clt experiment", "/limit_draws")
        probe = clt.get("probe_t")
        pts = tgrid.points
        if probe is None:
            # the third default probe is the grid point nearest 0.8 t_max
            near = float(pts[int(np.argmin(np.abs(pts - 0.8 * tgrid.t_max)))])
            probe = list(dict.fromkeys([float(pts[0]), float(pts[(pts.size - 1) // 2]), near]))
        for k, t in enumerate(probe):
            if _grid_index(pts, t) is None:
                raise ConfigError(f"probe t={t} is not a grid point", f"/clt/probe_t/{k}")
        th = dict(doc.get("thresholds", {}))
        for key in ("limit_zero_frequency_min", "observed_zero_frequency_max"):
            if key in th and _grid_index(pts, th[key]["t"]) is None:
                raise ConfigError(f"t={th[key]['t']} is not a grid point", f"/thresholds/{key}/t")
        p = model.p
        for key in ("limit_zero_frequency_min", "observed_zero_frequency_max"):
            if key in th and th[key]["coordinate"] > p:
                raise ConfigError(f"coordinate exceeds p={p}", f"/thresholds/{key}/coordinate")
        for k, j in enumerate(th.get("zero_frequency_coordinates", [])):
            if j > p:
                raise ConfigError(f"coordinate exceeds p={p}", f"/thresholds/zero_frequency_coordinates/{k}")
        return cls(
            model=model,
            contrast=contrast,
            gamma=gamma,
            tgrid=tgrid,
            n_values=n_values,
            replicates=int(doc["replicates"]),
            limit_draws=int(doc.get("limit_draws", 1)),
            seed=int(doc["seed"]),
            solver_tol=tol,
            experiments=experiments,
            probe_t=tuple(float(t) for t in probe),
            clt_n=None if clt_n is None else int(clt_n),
            thresholds=th,
            name=str(doc.get("name", "experiment")),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", "") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", "") from None
        return cls.from_dict(doc)


@dataclass(frozen=True)
class NormalizedPath:
    """``sqrt(n) (beta_hat_n(t) - beta)`` on the config grid for one replicate."""

    values: np.ndarray
    replicate_id: int
    n: int
    zero_mask: np.ndarray


def _grid_index(points, t):
    i = int(np.argmin(np.abs(points - t)))
    return i if abs(points[i] - t) <= 1e-9 * max(1.0, abs(t)) else None


def ks_two_sample(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance ``sup_x |F_a(x) - F_b(x)|``.

    Both empirical CDFs are evaluated right-continuously at every observed
    value, so tied values advance both step functions before comparison.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValidationError("KS distance needs two non-empty samples")
    if np.isnan(a).any() or np.isnan(b).any():
        raise ValidationError("KS distance is undefined for NaN samples")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


# -- replicate workers (module level so they pickle) -------------------------


def replicate_seed(seed: int, n: int, r: int) -> int:
    return _rng.mix64(seed, _rng.REPLICATE_DOMAIN, n, r)


def solve_path(cfg: ExperimentConfig, sample):
    """Path on the config grid with the solver implied by (contrast, gamma)."""
    if cfg.gamma == 0:
        return l0_path(cfg.contrast, sample, cfg.tgrid.t_max, tgrid=cfg.tgrid, tol=cfg.solver_tol)
    if cfg.contrast.kind == "least_squares" and cfg.gamma == 1:
        return lasso_path(sample, tgrid=cfg.tgrid)
    if cfg.contrast.kind == "least_squares" and cfg.gamma == 2 and cfg.tgrid.points[0] > 0:
        return ridge_path(sample, tgrid=cfg.tgrid)
    return grid_path(cfg.contrast, PenaltySpec(cfg.gamma, sample.n), sample, cfg.tgrid, cfg.solver_tol)


def _consistency_task(args):
    cfg, n, r = args
    sample = simulate(cfg.model, n, replicate_seed(cfg.seed, n, r))
    try:
        sol = solve_path(cfg, sample)
    except (SolverError, GuardError) as exc:
        return {"n": n, "r": r, "failed": True, "error": str(exc)}
    err = float(np.max(np.abs(sol.coefficients - cfg.model.beta[None, :])))
    full = None
    if "nonuniformity" in cfg.experiments:
        whole = lasso_path(sample)
        t_zero = whole.diagnostics["t_zero"]
        dist = np.linalg.norm(whole.coefficients - cfg.model.beta[None, :], axis=1)
        full = {"sup_full_path": float(dist.max()), "t_zero": float(t_zero), "zero_at_t_zero": bool(np.all(whole.coefficients[-1] == 0))}
    return {"n": n, "r": r, "failed": False, "sup_error": err, "residual": float(sol.kkt_residuals.max()), "full": full}


def _clt_task(args):
    cfg, n, r = args
    sample = simulate(cfg.model, n, replicate_seed(cfg.seed, n, r))
    try:
        sol = solve_path(cfg, sample)
    except (SolverError, GuardError) as exc:
        return {"r": r, "failed": True, "error": str(exc)}
    coef = sol.coefficients
    exact = cfg.gamma == 0 or cfg.uses_homotopy
    zero = (coef == 0) if exact else (np.abs(coef) <= ZERO_SNAP)
    sizes = sol.support_sizes
    return {
        "r": r,
        "failed": False,
        "path": NormalizedPath(math.sqrt(n) * (coef - cfg.model.beta[None, :]), r, n, zero),
        "residual": float(sol.kkt_residuals.max()),
        "support_monotone": bool(np.all(np.diff(sizes) <= 0)),
    }


def _limit_task(args):
    cfg, first, count = args
    draws = sample_limit_paths(cfg.model, cfg.contrast, cfg.gamma, cfg.tgrid, count, cfg.seed, first=first)
    return np.stack([d.u_hat for d in draws]), np.stack([d.zero_mask for d in draws]), max(float(d.kkt_residuals.max()) for d in draws)


def _map(fn, tasks, workers):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


# -- experiments ---------------------------------------------------------------------


def _check(name, value, threshold, passed, **extra):
    out = {"name": name, "value": value, "threshold": threshold, "passed": bool(passed)}
    out.update(extra)
    return out


def run_consistency(cfg: ExperimentConfig, workers=1, _records=None) -> dict:
    """Median and 0.9-quantile of ``sup_t |beta_hat_n(t) - beta|_inf`` per n, plus rate ratios."""
    records = _records if _records is not None else _map(
        _consistency_task, [(cfg, n, r) for n in cfg.n_values for r in range(cfg.replicates)], workers
    )
    table, checks = [], []
    max_fail = float(cfg.thresholds.get("max_failure_fraction", 0.01))
    for n in cfg.n_values:
        recs = [x for x in records if x["n"] == n]
        ok = [x for x in recs if not x["failed"]]
        errs = np.sort(np.array([x["sup_error"] for x in ok]))
        fails = len(recs) - len(ok)
        row = {
            "n": n,
            "replicates": len(recs),
            "failures": fails,
            "median": float(np.median(errs)) if errs.size else None,
            "quantile_90": float(np.quantile(errs, 0.9)) if errs.size else None,
            "max_residual": float(max(x["residual"] for x in ok)) if ok else None,
        }
        table.append(row)
        checks.append(_check(f"consistency/failures/n={n}", fails / len(recs), max_fail, fails / len(recs) <= max_fail))
        if ok:
            checks.append(_check(f"consistency/solver_tol/n={n}", row["max_residual"], cfg.solver_tol, row["max_residual"] <= cfg.solver_tol))
    meds = [row["median"] for row in table]
    ratios = [
        None if a is None or b is None or a == 0 else b / a for a, b in zip(meds, meds[1:])
    ]
    th = cfg.thresholds
    if th.get("median_decreasing", False):
        dec = all(a is not None and b is not None and b < a for a, b in zip(meds, meds[1:]))
        checks.append(_check("consistency/median_decreasing", meds, "strictly decreasing", dec))
    if "rate_ratio_band" in th:
        lo, hi = th["rate_ratio_band"]
        for (n0, n1), rr in zip(zip(cfg.n_values, cfg.n_values[1:]), ratios):
            checks.append(_check(f"consistency/rate_ratio/{n0}->{n1}", rr, [lo, hi], rr is not None and lo <= rr <= hi))
    return {"consistency_table": table, "rate_ratios": ratios, "checks": checks}


def run_nonuniformity(cfg: ExperimentConfig, workers=1, _records=None) -> dict:
    """Fraction of replicates whose full-path sup error reaches ``|beta|`` (evaluated through t_zero)."""
    if not cfg.uses_homotopy:
        raise ValidationError("the non-uniformity check needs the least-squares l1 path")
    if "nonuniformity" not in cfg.experiments:
        cfg = replace(cfg, experiments=cfg.experiments + ("nonuniformity",))
    records = _records if _records is not None else _map(
        _consistency_task, [(cfg, n, r) for n in cfg.n_values for r in range(cfg.replicates)], workers
    )
    bound = float(np.linalg.norm(cfg.model.beta))
    rows, checks = [], []
    for n in cfg.n_values:
        recs = [x for x in records if x["n"] == n and not x["failed"]]
        sups = np.array([x["full"]["sup_full_path"] for x in recs])
        frac = float(np.mean(sups >= bound - 1e-10)) if sups.size else 0.0
        rows.append({
            "n": n,
            "replicates": len(recs),
            "beta_norm": bound,
            "fraction_satisfied": frac,
            "min_sup_full_path": float(sups.min()) if sups.size else None,
            "all_zero_at_t_zero": all(x["full"]["zero_at_t_zero"] for x in recs),
        })
        checks.append(_check(f"nonuniformity/n={n}", frac, 1.0, frac == 1.0))
    return {"nonuniformity_check": rows, "checks": checks}


def _limit_ensemble(cfg, workers):
    shards = []
    first = 1
    while first <= cfg.limit_draws:
        count = min(LIMIT_SHARD, cfg.limit_draws - first + 1)
        shards.append((cfg, first, count))
        first += count
    parts = _map(_limit_task, shards, workers)
    u = np.concatenate([p[0] for p in parts])
    z = np.concatenate([p[1] for p in parts])
    return u, z, max(p[2] for p in parts)


def run_pathwise_clt(cfg: ExperimentConfig, workers=1) -> dict:
    """Compare normalized finite-n paths with limit-process draws.

    Reports per-coordinate KS distances at the probe weights, KS distances of
    ``sup_t |path_j(t)|`` (skipped for gamma = 0, whose limit only holds
    for finite-dimensional marginals), and zero-frequency curves.
    """
    n = cfg.clt_n or max(cfg.n_values)
    records = _map(_clt_task, [(cfg, n, r) for r in range(cfg.replicates)], workers)
    ok = [x for x in records if not x["failed"]]
    if len(ok) < MIN_REPLICATES:
        raise SolverError(f"only {len(ok)} usable replicates (< {MIN_REPLICATES}); refusing the CLT comparison")
    obs = np.stack([x["path"].values for x in ok])
    obs_zero = np.stack([x["path"].zero_mask for x in ok])
    lim, lim_zero, lim_res = _limit_ensemble(cfg, workers)
    pts = cfg.tgrid.points
    p = cfg.model.p
    th = cfg.thresholds
    checks = []
    failures = len(records) - len(ok)
    max_fail = float(th.get("max_failure_fraction", 0.01))
    checks.append(_check("clt/failures", failures / len(records), max_fail, failures / len(records) <= max_fail))
    res = max(x["residual"] for x in ok)
    checks.append(_check("clt/solver_tol", res, cfg.solver_tol, res <= cfg.solver_tol))

    marg = []
    for t in cfg.probe_t:
        i = _grid_index(pts, t)
        for j in range(p):
            d = ks_two_sample(obs[:, i, j], lim[:, i, j])
            marg.append({"t": float(pts[i]), "coordinate": j + 1, "ks": d})
            if "ks_marginal" in th:
                checks.append(_check(f"clt/ks_marginal/t={pts[i]:g}/coord={j + 1}", d, th["ks_marginal"], d <= th["ks_marginal"]))

    sup_rows = []
    if cfg.gamma != 0:
        so = np.max(np.abs(obs), axis=1)
        sl = np.max(np.abs(lim), axis=1)
        for j in range(p):
            d = ks_two_sample(so[:, j], sl[:, j])
            sup_rows.append({"coordinate": j + 1, "ks": d})
            if "ks_sup" in th:
                checks.append(_check(f"clt/ks_sup/coord={j + 1}", d, th["ks_sup"], d <= th["ks_sup"]))

    zf_obs = obs_zero.mean(axis=0)
    zf_lim = lim_zero.mean(axis=0)
    if "zero_frequency_gap" in th:
        for j in th.get("zero_frequency_coordinates", list(range(1, p + 1))):
            gap = float(np.max(np.abs(zf_obs[:, j - 1] - zf_lim[:, j - 1])))
            checks.append(_check(f"clt/zero_frequency_gap/coord={j}", gap, th["zero_frequency_gap"], gap <= th["zero_frequency_gap"]))
    if th.get("support_monotone", False):
        mono = float(np.mean([x["support_monotone"] for x in ok]))
        checks.append(_check("clt/support_monotone", mono, 1.0, mono == 1.0))
    if "limit_zero_frequency_min" in th:
        spec = th["limit_zero_frequency_min"]
        v = float(zf_lim[_grid_index(pts, spec["t"]), spec["coordinate"] - 1])
        checks.append(_check(f"clt/limit_zero_frequency/t={spec['t']:g}/coord={spec['coordinate']}", v, spec["value"], v >= spec["value"]))
    if "observed_zero_frequency_max" in th:
        spec = th["observed_zero_frequency_max"]
        v = float(zf_obs[_grid_index(pts, spec["t"]), spec["coordinate"] - 1])
        checks.append(_check(f"clt/observed_zero_frequency/t={spec['t']:g}/coord={spec['coordinate']}", v, spec["value"], v <= spec["value"]))

    return {
        "n": n,
        "replicates": len(ok),
        "limit_draws": int(lim.shape[0]),
        "limit_max_kkt_residual": lim_res,
        "ks_marginals": marg,
        "ks_sup_functional": sup_rows if cfg.gamma != 0 else "skipped (finite-dimensional mode for gamma = 0)",
        "zero_frequency": {
            "t": [float(t) for t in pts],
            "observed": zf_obs.T.tolist(),
            "limit": zf_lim.T.tolist(),
        },
        "checks": checks,
    }


def run_experiment(cfg: ExperimentConfig, workers=1) -> dict:
    """Run every configured experiment and collect the checks into one report."""
    report = {"name": cfg.name, "config": _config_summary(cfg)}
    checks = []
    need_cons = "consistency" in cfg.experiments or "nonuniformity" in cfg.experiments
    if need_cons:
        records = _map(_consistency_task, [(cfg, n, r) for n in cfg.n_values for r in range(cfg.replicates)], workers)
        if "consistency" in cfg.experiments:
            sec = run_consistency(cfg, _records=records)
            checks += sec.pop("checks")
            report["consistency"] = sec
        if "nonuniformity" in cfg.experiments:
            sec = run_nonuniformity(cfg, _records=records)
            checks += sec.pop("checks")
            report["nonuniformity"] = sec
    if "clt" in cfg.experiments:
        sec = run_pathwise_clt(cfg, workers)
        checks += sec.pop("checks")
        report["clt"] = sec
    report["checks"] = checks
    report["passed"] = all(c["passed"] for c in checks)
    return report


def _config_summary(cfg):
    return {
        "beta": cfg.model.beta.tolist(),
        "contrast": cfg.contrast.name,
        "gamma": cfg.gamma,
        "t_max": cfg.tgrid.t_max,
        "grid_points": len(cfg.tgrid),
        "n_values": list(cfg.n_values),
        "replicates": cfg.replicates,
        "limit_draws": cfg.limit_draws,
        "seed": cfg.seed,
        "solver_tol": cfg.solver_tol,
        "experiments": list(cfg.experiments),
        "probe_t": list(cfg.probe_t),
    }


def _fmt(v):
    return f"{v:.17g}" if isinstance(v, float) else ("" if v is None else str(v))


def write_report(report: dict, out_dir) -> list:
    """Write ``report.json`` and plot-ready CSVs into ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "report.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    written.append(path)

    def table(name, header, rows):
        p = out / name
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        written.append(p)

    if "consistency" in report:
        sec = report["consistency"]
        table(
            "consistency.csv",
            ["n", "median_sup_error", "quantile90_sup_error", "failures"],
            [(r["n"], r["median"], r["quantile_90"], r["failures"]) for r in sec["consistency_table"]],
        )
    if "clt" in report:
        sec = report["clt"]
        table("ks_marginals.csv", ["t", "coordinate", "ks"], [(r["t"], r["coordinate"], r["ks"]) for r in sec["ks_marginals"]])
        if isinstance(sec["ks_sup_functional"], list):
            table("ks_sup.csv", ["coordinate", "ks"], [(r["coordinate"], r["ks"]) for r in sec["ks_sup_functional"]])
        zf = sec["zero_frequency"]
        p = len(zf["observed"])
        rows = [
            (t, *[zf["observed"][j][i] for j in range(p)], *[zf["limit"][j][i] for j in range(p)])
            for i, t in enumerate(zf["t"])
        ]
        table(
            "zero_frequency.csv",
            ["t", *[f"observed_{j}" for j in range(1, p + 1)], *[f"limit_{j}" for j in range(1, p + 1)]],
            rows,
        )
    return written

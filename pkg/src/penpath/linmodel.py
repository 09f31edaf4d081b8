"""Regression data model, simulators and design statistics.

A :class:`TrueModel` couples a parameter ``beta`` with a noise law and a design
distribution, optionally replaced by a canonical GLM family. :func:`simulate`
turns a model into a :class:`DesignSample` deterministically from a 64-bit
seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import rng as _rng
from .errors import GuardError, ValidationError

POISSON_THETA_MAX = 30.0

NOISE_KINDS = ("gaussian", "laplace", "uniform")
GLM_KINDS = ("logistic", "poisson", "gaussian")


def _as_matrix(a, name):
    a = np.array(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValidationError(f"{name} must be two-dimensional")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True)
class NoiseSpec:
    """Centered i.i.d. noise law with variance ``sigma2``.

    ``sigma2 == 0`` (noiseless responses) must be requested explicitly with
    ``allow_degenerate=True``; it exists for exact-recovery tests.
    """

    kind: str = "gaussian"
    sigma2: float = 1.0
    allow_degenerate: bool = False

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValidationError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if not math.isfinite(self.sigma2) or self.sigma2 < 0:
            raise ValidationError("noise variance must be finite and non-negative")
        if self.sigma2 == 0 and not self.allow_degenerate:
            raise ValidationError("noise variance 0 requires allow_degenerate=True")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def density_at_zero(self) -> float:
        if self.sigma2 == 0:
            return math.inf
        if self.kind == "gaussian":
            return 1.0 / math.sqrt(2.0 * math.pi * self.sigma2)
        if self.kind == "laplace":
            return 1.0 / (self.sigma * math.sqrt(2.0))
        return 1.0 / (2.0 * self.sigma * math.sqrt(3.0))

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        if self.sigma2 == 0:
            return np.zeros(size)
        if self.kind == "gaussian":
            return gen.normal(0.0, self.sigma, size)
        if self.kind == "laplace":
            return gen.laplace(0.0, self.sigma / math.sqrt(2.0), size)
        a = self.sigma * math.sqrt(3.0)
        return gen.uniform(-a, a, size)


@dataclass(frozen=True)
class GlmFamily:
    """Canonical one-parameter exponential family ``h(y) exp(y*theta - b(theta))``.

    The ``gaussian`` family has unit dispersion, so ``b(theta) = theta**2 / 2``.
    """

    kind: str

    def __post_init__(self):
        kind = "gaussian" if self.kind == "gaussian-identity" else self.kind
        if kind not in GLM_KINDS:
            raise ValidationError(f"unknown GLM family {self.kind!r}; expected one of {GLM_KINDS}")
        object.__setattr__(self, "kind", kind)

    def check_theta(self, theta):
        if self.kind == "poisson":
            big = np.max(np.abs(theta)) if np.size(theta) else 0.0
            if big > POISSON_THETA_MAX:
                raise GuardError(
                    f"poisson natural parameter |theta|={big:.3g} exceeds {POISSON_THETA_MAX}; "
                    "exp(theta) would overflow after summation"
                )

    def log_partition(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "logistic":
            return np.logaddexp(0.0, theta)
        if self.kind == "poisson":
            self.check_theta(theta)
            return np.exp(theta)
        return 0.5 * theta**2

    def b_prime(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "logistic":
            return 0.5 * (1.0 + np.tanh(0.5 * theta))
        if self.kind == "poisson":
            self.check_theta(theta)
            return np.exp(theta)
        return theta

    def b_second(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "logistic":
            s = 0.5 * (1.0 + np.tanh(0.5 * theta))
            return s * (1.0 - s)
        if self.kind == "poisson":
            self.check_theta(theta)
            return np.exp(theta)
        return np.ones_like(theta)

    def sample(self, theta: np.ndarray, gen: np.random.Generator) -> np.ndarray:
        self.check_theta(theta)
        if self.kind == "logistic":
            return (gen.random(theta.shape) < self.b_prime(theta)).astype(float)
        if self.kind == "poisson":
            return gen.poisson(np.exp(theta)).astype(float)
        return theta + gen.standard_normal(theta.shape)


@dataclass(frozen=True)
class DesignDistribution:
    """How regressors are produced.

    ``kind="gaussian"`` draws i.i.d. rows from N(0, cov) (identity when ``cov``
    is None). ``kind="fixed"`` stores a matrix verbatim and cycles through its
    rows, so ``C_n`` converges to ``matrix.T @ matrix / rows``.
    """

    kind: str = "gaussian"
    p: int = 1
    cov: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "gaussian":
            cov = np.eye(self.p) if self.cov is None else _as_matrix(self.cov, "design covariance")
            if cov.shape != (self.p, self.p):
                raise ValidationError("design covariance must be p x p")
            if not np.allclose(cov, cov.T):
                raise ValidationError("design covariance must be symmetric")
            if np.linalg.eigvalsh(cov).min() < -1e-12:
                raise ValidationError("design covariance must be positive semidefinite")
            object.__setattr__(self, "cov", cov)
        elif self.kind == "fixed":
            if self.matrix is None:
                raise ValidationError("fixed design needs a matrix")
            m = _as_matrix(self.matrix, "design matrix")
            object.__setattr__(self, "matrix", m)
            object.__setattr__(self, "p", m.shape[1])
        else:
            raise ValidationError(f"unknown design kind {self.kind!r}")
        if self.p < 1:
            raise ValidationError("design dimension must be >= 1")

    @classmethod
    def gaussian(cls, p, cov=None):
        return cls(kind="gaussian", p=int(p), cov=cov)

    @classmethod
    def fixed(cls, matrix):
        m = _as_matrix(matrix, "design matrix")
        return cls(kind="fixed", p=m.shape[1], matrix=m)

    def sample(self, n: int, gen: np.random.Generator) -> np.ndarray:
        if self.kind == "fixed":
            idx = np.arange(n) % self.matrix.shape[0]
            return self.matrix[idx].copy()
        z = gen.standard_normal((n, self.p))
        if np.array_equal(self.cov, np.eye(self.p)):
            return z
        w, v = np.linalg.eigh(self.cov)
        root = v * np.sqrt(np.clip(w, 0.0, None))
        return z @ root.T

    def second_moment(self) -> np.ndarray:
        """E[x x^T] (the limit Gram matrix C)."""
        if self.kind == "fixed":
            return self.matrix.T @ self.matrix / self.matrix.shape[0]
        return self.cov.copy()

    def weighted_second_moment(self, weight, beta) -> np.ndarray:
        """E[weight(x^T beta) x x^T], exact for fixed designs, Gauss-Hermite for gaussian rows."""
        beta = np.asarray(beta, dtype=float)
        if self.kind == "fixed":
            m = self.matrix
            w = np.asarray(weight(m @ beta), dtype=float)
            return (m * w[:, None]).T @ m / m.shape[0]
        a = self.cov @ beta
        v = float(beta @ a)
        if v <= 0.0:
            return float(weight(np.zeros(1))[0]) * self.cov
        nodes, wts = np.polynomial.hermite.hermgauss(80)
        theta = math.sqrt(2.0 * v) * nodes
        wt = np.asarray(weight(theta), dtype=float) * wts / math.sqrt(math.pi)
        e0 = float(np.sum(wt))
        e2 = float(np.sum(wt * theta**2))
        proj = np.outer(a, a)
        return e0 * (self.cov - proj / v) + e2 * proj / v**2


@dataclass(frozen=True)
class TrueModel:
    """Ground truth ``y_k = x_k^T beta + eps_k`` or a canonical GLM with natural parameter ``x_k^T beta``."""

    beta: np.ndarray
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    design: Optional[DesignDistribution] = None
    glm: Optional[GlmFamily] = None

    def __post_init__(self):
        beta = np.atleast_1d(np.array(self.beta, dtype=float))
        if beta.ndim != 1 or beta.size < 1:
            raise ValidationError("beta must be a non-empty vector")
        if not np.all(np.isfinite(beta)):
            raise ValidationError("beta must be finite")
        object.__setattr__(self, "beta", beta)
        design = self.design or DesignDistribution.gaussian(beta.size)
        if design.p != beta.size:
            raise ValidationError(f"design dimension {design.p} does not match beta dimension {beta.size}")
        object.__setattr__(self, "design", design)
        if isinstance(self.glm, str):
            object.__setattr__(self, "glm", GlmFamily(self.glm))

    @property
    def p(self) -> int:
        return self.beta.size


@dataclass(frozen=True)
class DesignSample:
    """Observed regressors ``x`` (n x p) and responses ``y`` (length n)."""

    x: np.ndarray
    y: np.ndarray
    truth: Optional[TrueModel] = None

    def __post_init__(self):
        x = _as_matrix(self.x, "regressors")
        y = np.atleast_1d(np.array(self.y, dtype=float))
        if y.ndim != 1 or y.size != x.shape[0]:
            raise ValidationError("y must be a vector with one entry per regressor row")
        if y.size < 1:
            raise ValidationError("sample must contain at least one observation")
        if not np.all(np.isfinite(y)):
            raise ValidationError("responses have non-finite entries")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class DesignStats:
    c_n: np.ndarray
    c_limit: Optional[np.ndarray]
    max_row_norm_sq: float
    min_eigenvalue: float

    @property
    def singular(self) -> bool:
        return self.min_eigenvalue <= 1e-10


def simulate(model: TrueModel, n: int, seed: int) -> DesignSample:
    """Draw ``n`` observations from ``model``; a pure function of ``(model, n, seed)``."""
    if int(n) != n or n < 1:
        raise ValidationError(f"sample size must be a positive integer, got {n!r}")
    n = int(n)
    gen = _rng.generator(seed)
    x = model.design.sample(n, gen)
    theta = x @ model.beta
    if model.glm is not None:
        y = model.glm.sample(theta, gen)
    else:
        y = theta + model.noise.sample(gen, n)
    return DesignSample(x, y, truth=model)


def design_stats(sample: DesignSample, c_limit=None) -> DesignStats:
    x = sample.x
    c_n = x.T @ x / sample.n
    if c_limit is not None:
        c_limit = _as_matrix(c_limit, "c_limit")
        if c_limit.shape != c_n.shape:
            raise ValidationError("c_limit must be p x p")
    return DesignStats(
        c_n=c_n,
        c_limit=c_limit,
        max_row_norm_sq=float(np.max(np.einsum("ij,ij->i", x, x))),
        min_eigenvalue=float(np.linalg.eigvalsh(c_n).min()),
    )


def read_csv(path) -> DesignSample:
    """Load a sample from a CSV with header ``y,x1,...,xp``."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        p = len(header) - 1
        if p < 1 or header[0] != "y" or header[1:] != [f"x{j}" for j in range(1, p + 1)]:
            raise ValidationError(f"{path}: header must be y,x1,...,xp")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != p + 1:
                raise ValidationError(f"{path}:{lineno}: expected {p + 1} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise ValidationError(f"{path}:{lineno}: NaN/Inf not allowed")
            rows.append(vals)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    data = np.array(rows)
    return DesignSample(data[:, 1:], data[:, 0])


def model_from_config(cfg: dict) -> TrueModel:
    """Build a model from ``{"beta": [...], "noise": {...}, "design": {...}, "glm": "..."}``."""
    beta = np.array(cfg["beta"], dtype=float)
    noise_cfg = cfg.get("noise") or {}
    noise = NoiseSpec(
        kind=noise_cfg.get("kind", "gaussian"),
        sigma2=float(noise_cfg.get("sigma2", 1.0)),
        allow_degenerate=bool(noise_cfg.get("allow_degenerate", False)),
    )
    design_cfg = cfg.get("design") or {"kind": "gaussian"}
    if design_cfg.get("kind", "gaussian") == "fixed":
        design = DesignDistribution.fixed(design_cfg["matrix"])
    else:
        design = DesignDistribution.gaussian(beta.size, design_cfg.get("cov"))
    glm = cfg.get("glm")
    return TrueModel(beta=beta, noise=noise, design=design, glm=GlmFamily(glm) if glm else None)

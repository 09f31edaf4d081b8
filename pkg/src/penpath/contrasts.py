"""Unpenalized contrast processes M_n and their population curvature.

Three contrasts are supported, all written as sample averages of a loss
``g((x, y), phi)``:

* least squares, ``(y - x^T phi)^2``;
* least absolute deviation, ``|y - x^T phi|`` (non-smooth);
* canonical GLM negative log-likelihood, ``-y x^T phi + b(x^T phi)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import UnsupportedModelError, ValidationError
from .linmodel import DesignSample, GlmFamily, TrueModel, simulate

CONTRAST_KINDS = ("least_squares", "lad", "glm")

_ALIASES = {
    "ls": ("least_squares", None),
    "least_squares": ("least_squares", None),
    "lad": ("lad", None),
    "logistic": ("glm", "logistic"),
    "poisson": ("glm", "poisson"),
    "gaussian": ("glm", "gaussian"),
    "gaussian-identity": ("glm", "gaussian"),
}


@dataclass(frozen=True)
class ContrastSpec:
    kind: str
    family: Optional[GlmFamily] = None

    def __post_init__(self):
        if self.kind not in CONTRAST_KINDS:
            raise ValidationError(f"unknown contrast {self.kind!r}")
        if isinstance(self.family, str):
            object.__setattr__(self, "family", GlmFamily(self.family))
        if (self.kind == "glm") != (self.family is not None):
            raise ValidationError("a GLM family is required for, and only for, the glm contrast")

    @property
    def smooth(self) -> bool:
        return self.kind != "lad"

    @classmethod
    def least_squares(cls):
        return cls("least_squares")

    @classmethod
    def lad(cls):
        return cls("lad")

    @classmethod
    def glm(cls, family):
        return cls("glm", family if isinstance(family, GlmFamily) else GlmFamily(family))

    @classmethod
    def parse(cls, name: str) -> "ContrastSpec":
        """Parse a short name: ``ls``, ``lad``, ``logistic``, ``poisson`` or ``gaussian``."""
        try:
            kind, fam = _ALIASES[name]
        except KeyError:
            raise ValidationError(f"unknown contrast name {name!r}") from None
        return cls(kind, GlmFamily(fam) if fam else None)

    @property
    def name(self) -> str:
        return self.family.kind if self.kind == "glm" else self.kind


@dataclass(frozen=True)
class ScoreInfo:
    """Local quadratic structure of the limit contrast at the true parameter.

    ``fisher_like`` is the full Hessian of ``M(phi) = P g(., phi)`` at beta, and
    ``score_cov`` is ``P(Delta Delta^T)`` for the score ``Delta`` of the
    first-order expansion of ``g``.
    """

    score: Callable[[np.ndarray, np.ndarray], np.ndarray]
    fisher_like: np.ndarray
    score_cov: np.ndarray


def _check_phi(sample: DesignSample, phi) -> np.ndarray:
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if phi.shape != (sample.p,):
        raise ValidationError(f"phi has shape {phi.shape}, expected ({sample.p},)")
    return phi


def eval_contrast(spec: ContrastSpec, sample: DesignSample, phi) -> float:
    phi = _check_phi(sample, phi)
    theta = sample.x @ phi
    if spec.kind == "least_squares":
        r = sample.y - theta
        return float(r @ r / sample.n)
    if spec.kind == "lad":
        return float(np.mean(np.abs(sample.y - theta)))
    return float(np.mean(spec.family.log_partition(theta) - sample.y * theta))


def eval_gradient(spec: ContrastSpec, sample: DesignSample, phi) -> np.ndarray:
    """Gradient of M_n; for LAD the subgradient with ``sgn(0) = 0``."""
    phi = _check_phi(sample, phi)
    theta = sample.x @ phi
    if spec.kind == "least_squares":
        w = -2.0 * (sample.y - theta)
    elif spec.kind == "lad":
        w = -np.sign(sample.y - theta)
    else:
        w = spec.family.b_prime(theta) - sample.y
    return sample.x.T @ w / sample.n


def eval_hessian(spec: ContrastSpec, sample: DesignSample, phi) -> np.ndarray:
    if not spec.smooth:
        raise ValidationError("LAD contrast has no Hessian")
    phi = _check_phi(sample, phi)
    x = sample.x
    if spec.kind == "least_squares":
        return 2.0 * x.T @ x / sample.n
    w = spec.family.b_second(x @ phi)
    return (x * w[:, None]).T @ x / sample.n


def limit_curvature(spec: ContrastSpec, model: TrueModel) -> ScoreInfo:
    """Hessian of the population contrast at beta and covariance of the score.

    least squares: Hessian ``2C`` and score covariance ``4 sigma^2 C``;
    LAD: ``2 f(0) E[x x^T]`` and ``E[x x^T]``;
    GLM: both equal ``E[b''(x^T beta) x x^T]``.
    """
    beta = model.beta
    design = model.design
    if spec.kind == "least_squares":
        if model.glm is not None:
            raise UnsupportedModelError("no closed form: least squares on GLM responses")
        c = design.second_moment()

        def score(x, y):
            x = np.atleast_2d(x)
            return -2.0 * (np.asarray(y) - x @ beta)[:, None] * x

        return ScoreInfo(score, 2.0 * c, 4.0 * model.noise.sigma2 * c)

    if spec.kind == "lad":
        if model.glm is not None:
            raise UnsupportedModelError("no closed form: LAD on GLM responses")
        if model.noise.sigma2 == 0:
            raise UnsupportedModelError("no closed form: LAD curvature needs a continuous noise density")
        c = design.second_moment()

        def score(x, y):
            x = np.atleast_2d(x)
            return -np.sign(np.asarray(y) - x @ beta)[:, None] * x

        return ScoreInfo(score, 2.0 * model.noise.density_at_zero * c, c)

    if model.glm is None or model.glm.kind != spec.family.kind:
        raise UnsupportedModelError(
            f"no closed form: {spec.family.kind} contrast needs responses from the same GLM family"
        )
    fam = spec.family
    c = design.weighted_second_moment(fam.b_second, beta)

    def score(x, y):
        x = np.atleast_2d(x)
        return -(np.asarray(y) - fam.b_prime(x @ beta))[:, None] * x

    return ScoreInfo(score, c, c.copy())


def fd_hessian(fun: Callable, x, step: float) -> np.ndarray:
    """Central finite-difference Hessian of a scalar function.

    Entry ``(i, j)`` is ``[f(x+h e_i+h e_j) - f(x+h e_i-h e_j) - f(x-h e_i+h e_j)
    + f(x-h e_i-h e_j)] / (4 h^2)``; the result is symmetric by construction.
    """
    x = np.asarray(x, dtype=float)
    p = x.size
    hess = np.empty((p, p))
    basis = np.eye(p) * step
    for i in range(p):
        for j in range(i, p):
            a, b = basis[i], basis[j]
            val = fun(x + a + b) - fun(x + a - b) - fun(x - a + b) + fun(x - a - b)
            hess[i, j] = hess[j, i] = val / (4.0 * step * step)
    return hess


def simulated_curvature(spec: ContrastSpec, model: TrueModel, samples: int, seed: int, step: float = 0.01) -> np.ndarray:
    """Finite-difference Hessian at beta of the contrast averaged over one large simulated sample.

    All evaluations share the same draws, so the differences see no fresh
    sampling noise. For LAD the average is piecewise linear in ``phi`` and the
    step must be large against the kink spacing (about ``1 / samples``); a
    step of 0.01 at ``10^6`` samples keeps both the smoothing bias and the
    noise near 3%.
    """
    sample = simulate(model, samples, seed)
    return fd_hessian(lambda phi: eval_contrast(spec, sample, phi), model.beta, step)

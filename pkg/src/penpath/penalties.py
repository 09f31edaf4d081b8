"""Normalized bridge penalties and their local limits.

The finite-sample penalty is ``J_n(phi) = n^((1 ^ gamma)/2 - 1) * sum |phi_k|^gamma``
for ``gamma > 0`` and ``J_n(phi) = #{k : phi_k != 0} / n`` for ``gamma = 0``.
Around a true parameter beta, ``n J_n(beta + phi / sqrt(n)) - n J_n(beta)``
converges to a limit penalty ``J_inf(phi)`` that only depends on beta's sign
pattern (and on ``|beta_j|`` when ``gamma > 1``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ValidationError

MAX_GRID_POINTS = 10**7
# exact rational evaluation is used up to this many grid points
MAX_EXACT_POINTS = 400_000


def penalty_scale(gamma: float, n: int) -> float:
    """The normalizing factor ``n^((1 ^ gamma)/2 - 1)``."""
    return float(n) ** (min(1.0, gamma) / 2.0 - 1.0)


@dataclass(frozen=True)
class PenaltySpec:
    gamma: float
    n: int

    def __post_init__(self):
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValidationError("penalty exponent must be finite and >= 0")
        if self.n < 1:
            raise ValidationError("penalty sample size must be >= 1")

    @property
    def scale(self) -> float:
        return penalty_scale(self.gamma, self.n)


@dataclass(frozen=True)
class LimitPenaltySpec:
    """Limit penalty attached to the sign pattern of a true parameter."""

    gamma: float
    beta_sign: np.ndarray
    beta_abs: np.ndarray

    def __post_init__(self):
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValidationError("penalty exponent must be finite and >= 0")
        sign = np.sign(np.asarray(self.beta_sign, dtype=float))
        mag = np.abs(np.asarray(self.beta_abs, dtype=float))
        if sign.shape != mag.shape or sign.ndim != 1:
            raise ValidationError("sign pattern and magnitudes must be vectors of equal length")
        object.__setattr__(self, "beta_sign", sign)
        object.__setattr__(self, "beta_abs", mag)

    @classmethod
    def from_beta(cls, gamma, beta):
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        return cls(gamma, np.sign(beta), np.abs(beta))

    @property
    def p(self) -> int:
        return self.beta_sign.size

    @property
    def null_mask(self) -> np.ndarray:
        """True where the true coefficient is zero."""
        return self.beta_sign == 0

    def linear_weights(self) -> np.ndarray:
        """Coefficients of the linear part acting on coordinates with beta_j != 0."""
        g = self.gamma
        active = ~self.null_mask
        w = np.zeros(self.p)
        if g == 1:
            w[active] = self.beta_sign[active]
        elif g > 1:
            w[active] = g * self.beta_sign[active] * self.beta_abs[active] ** (g - 1.0)
        return w


def eval_penalty(spec: PenaltySpec, phi) -> float:
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if spec.gamma == 0:
        return float(np.count_nonzero(phi)) / spec.n
    return spec.scale * float(np.sum(np.abs(phi) ** spec.gamma))


def eval_limit_penalty(spec: LimitPenaltySpec, phi) -> float:
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if phi.shape != (spec.p,):
        raise ValidationError(f"phi has shape {phi.shape}, expected ({spec.p},)")
    null = spec.null_mask
    g = spec.gamma
    if g == 0:
        return float(np.count_nonzero(phi[null]))
    if g < 1:
        return float(np.sum(np.abs(phi[null]) ** g))
    value = float(spec.linear_weights() @ phi)
    if g == 1:
        value += float(np.sum(np.abs(phi[null])))
    return value


def penalty_increment_constant(gamma: float, beta) -> float:
    """A constant C for which, for every phi and n,

    ``n |J_n(phi) - J_n(beta)| <= C (1 + sqrt(n)|phi-beta| + sqrt(n)|phi-beta|^(1 v gamma))``.

    Derived from subadditivity of ``t^gamma`` (gamma < 1), the triangle
    inequality (gamma = 1) and the mean value theorem (gamma > 1).
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    p = beta.size
    if gamma == 0 or gamma < 1:
        return float(p)
    if gamma == 1:
        return math.sqrt(p)
    k = 2.0 ** max(gamma - 2.0, 0.0)
    bmax = float(np.max(np.abs(beta))) if p else 0.0
    return gamma * k * max(bmax ** (gamma - 1.0) * math.sqrt(p), p ** max(1.0 - gamma / 2.0, 0.0))


def penalty_increment_bound(gamma: float, beta, phi, n: int) -> tuple[float, float]:
    """Return ``(lhs, rhs)`` of the Lipschitz-type penalty bound at ``(phi, n)``."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    spec = PenaltySpec(gamma, n)
    lhs = n * abs(eval_penalty(spec, phi) - eval_penalty(spec, beta))
    d = float(np.linalg.norm(phi - beta))
    rn = math.sqrt(n)
    rhs = penalty_increment_constant(gamma, beta) * (1.0 + rn * d + rn * d ** max(1.0, gamma))
    return lhs, rhs


# -- local expansion discrepancy ---------------------------------------------


def _axis(radius, step):
    m = int(math.floor(2 * radius / step + 1e-9)) + 1
    return m


def _float_discrepancy(gamma, beta, lim, n, pts):
    s = math.sqrt(n)
    shifted = beta[None, :] + pts / s
    if gamma == 0:
        nj = np.count_nonzero(shifted, axis=1) - np.count_nonzero(beta)
    else:
        lead = float(n) ** (min(1.0, gamma) / 2.0)
        nj = lead * (np.sum(np.abs(shifted) ** gamma, axis=1) - np.sum(np.abs(beta) ** gamma))
    return np.abs(nj - _vector_jinf(lim, pts))


def _vector_jinf(lim, pts):
    null = lim.null_mask
    g = lim.gamma
    if g == 0:
        return np.count_nonzero(pts[:, null], axis=1).astype(float)
    if g < 1:
        return np.sum(np.abs(pts[:, null]) ** g, axis=1)
    val = pts @ lim.linear_weights()
    if g == 1:
        val = val + np.sum(np.abs(pts[:, null]), axis=1)
    return val


def _exact_discrepancy(gamma, beta_q, n, pt_q):
    """|n J_n(beta + phi/s) - n J_n(beta) - J_inf(phi)| in rational arithmetic, s = fl(sqrt(n))."""
    s = Fraction(math.sqrt(n))
    g = int(gamma)
    total = Fraction(0)
    for b, f in zip(beta_q, pt_q):
        shifted = b + f / s
        if g == 0:
            total += int(shifted != 0) - int(b != 0) - int(b == 0 and f != 0)
        elif g == 1:
            lim = (f if b > 0 else -f) if b != 0 else abs(f)
            total += s * (abs(shifted) - abs(b)) - lim
        else:
            lim = g * f * (1 if b > 0 else -1) * abs(b) ** (g - 1) if b != 0 else 0
            total += s * (abs(shifted) ** g - abs(b) ** g) - lim
    return abs(total)


def _ball_grid(p, radius, step):
    m = _axis(radius, step)
    axis = -radius + step * np.arange(m)
    pts = np.array(list(itertools.product(axis, repeat=p))) if p > 1 else axis[:, None]
    return pts[np.sum(pts**2, axis=1) <= radius**2 * (1 + 1e-12)]


def _ball_grid_exact(p, radius, step, centre=None, half=None):
    r = Fraction(str(radius))
    h = Fraction(str(step))
    if centre is None:
        lo = [-r] * p
        m = [int((2 * r) / h) + 1] * p
    else:
        lo = [c - half for c in centre]
        m = [int((2 * half) / h) + 1] * p
    axes = [[lo[j] + h * i for i in range(m[j])] for j in range(p)]
    out = []
    for q in itertools.product(*axes):
        if sum(v * v for v in q) <= r * r:
            out.append(q)
    return out


def check_limit_convergence(gamma, beta, compact_radius, n_values, grid_step, exact=None):
    """Sup over a ball of the local-expansion discrepancy, one row per sample size.

    The sup is taken over a cubic grid with spacing ``grid_step`` restricted to
    the ball of radius ``compact_radius``, then refined at ``grid_step / 10``
    in the cells around the coarse maximizer.

    Parameters
    ----------
    gamma : float
        Penalty exponent (>= 0).
    beta : array_like
        True parameter.
    compact_radius, grid_step : float
        Ball radius and grid spacing.
    n_values : sequence of int
        Increasing sample sizes.
    exact : bool, optional
        Evaluate in rational arithmetic (with sqrt(n) replaced by its
        double-precision value, for which the local identities hold exactly).
        Defaults to True for integer gamma in {0, 1, 2} on grids small enough.

    Returns
    -------
    list of dict
        Keys ``n``, ``sup_discrepancy``, ``argmax``.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    p = beta.size
    if compact_radius <= 0 or grid_step <= 0:
        raise ValidationError("radius and grid step must be positive")
    n_values = [int(n) for n in n_values]
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ValidationError("n_values must be strictly increasing")
    count = _axis(compact_radius, grid_step) ** p
    if count > MAX_GRID_POINTS:
        raise ValidationError(
            f"grid has {count:.3g} points (> {MAX_GRID_POINTS:.0e}); "
            f"increase grid_step to at least {2 * compact_radius / (MAX_GRID_POINTS ** (1 / p) - 1):.3g}"
        )
    if exact is None:
        exact = gamma in (0, 1, 2) and count <= MAX_EXACT_POINTS
    if exact and gamma not in (0, 1, 2):
        raise ValidationError("exact evaluation needs gamma in {0, 1, 2}")
    lim = LimitPenaltySpec.from_beta(gamma, beta)
    rows = []
    if exact:
        beta_q = [Fraction(float(b)) for b in beta]
        coarse = _ball_grid_exact(p, compact_radius, grid_step)
        for n in n_values:
            vals = [_exact_discrepancy(gamma, beta_q, n, q) for q in coarse]
            i = int(np.argmax([float(v) for v in vals]))
            best, arg = vals[i], coarse[i]
            h = Fraction(str(grid_step))
            fine = _ball_grid_exact(p, compact_radius, grid_step / 10, centre=arg, half=h)
            for q in fine:
                v = _exact_discrepancy(gamma, beta_q, n, q)
                if v > best:
                    best, arg = v, q
            rows.append({"n": n, "sup_discrepancy": float(best), "argmax": [float(v) for v in arg]})
        return rows
    pts = _ball_grid(p, compact_radius, grid_step)
    for n in n_values:
        d = _float_discrepancy(gamma, beta, lim, n, pts)
        i = int(np.argmax(d))
        best, arg = float(d[i]), pts[i]
        m = 21
        axis = np.linspace(-grid_step, grid_step, m)
        local = np.array(list(itertools.product(axis, repeat=p))) + arg
        local = local[np.sum(local**2, axis=1) <= compact_radius**2 * (1 + 1e-12)]
        if len(local):
            dl = _float_discrepancy(gamma, beta, lim, n, local)
            j = int(np.argmax(dl))
            if dl[j] > best:
                best, arg = float(dl[j]), local[j]
        rows.append({"n": n, "sup_discrepancy": best, "argmax": [float(v) for v in arg]})
    return rows

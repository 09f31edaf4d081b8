"""Exact path following for partially signed l1 problems.

For ``u >= 0`` the minimizer of

    phi^T Q phi - 2 b^T phi + 2u * ( sum_{j in F} w_j phi_j + sum_{j in P} |phi_j| )

is piecewise linear in ``u``. Coordinates in ``F`` carry a fixed linear weight
and are never set to zero; coordinates in ``P`` carry an absolute value and
enter/leave the support at breakpoints. ``Q`` must be positive definite.
The finite-sample lasso is the case ``F = {}``; the l1 limit contrast puts the
coordinates with a non-zero true value in ``F``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import SolverError

_EPS = 1e-13


@dataclass(frozen=True)
class _Segment:
    u_start: float
    support: np.ndarray
    a: np.ndarray
    d: np.ndarray


class HomotopyPath:
    """Piecewise-linear solution ``u -> phi(u)`` with exact breakpoints."""

    def __init__(self, p, segments, Q, b, weights, penalized):
        self.p = p
        self.segments = segments
        self.knots = np.array([s.u_start for s in segments])
        self._Q, self._b, self._w, self._pen = Q, b, weights, penalized

    @property
    def breakpoints(self) -> np.ndarray:
        """Distinct positive knots (active-set changes)."""
        k = np.unique(self.knots)
        return k[k > 0]

    def at(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.zeros((u.size, self.p))
        which = np.searchsorted(self.knots, u, side="right") - 1
        which = np.clip(which, 0, len(self.segments) - 1)
        for k in np.unique(which):
            seg = self.segments[k]
            rows = which == k
            if seg.support.size:
                out[np.ix_(rows, seg.support)] = seg.a[None, :] - u[rows, None] * seg.d[None, :]
        return out

    def kkt_residual(self, u, phi) -> float:
        """Max violation of ``b - Q phi in u * subdiff`` at one point."""
        r = self._b - self._Q @ phi
        pen = self._pen
        res = np.where(~pen, np.abs(r - u * self._w), 0.0)
        nz = pen & (phi != 0)
        res = np.where(nz, np.abs(r - u * np.sign(phi)), res)
        z = pen & (phi == 0)
        res = np.where(z, np.maximum(np.abs(r) - u, 0.0), res)
        return float(res.max()) if res.size else 0.0


def follow(Q, b, penalized, weights=None, u_max=np.inf, max_events=None) -> HomotopyPath:
    """Trace the solution path from ``u = 0`` up to ``u_max`` (or until it stops changing).

    Parameters
    ----------
    Q : (p, p) array
        Positive definite quadratic term.
    b : (p,) array
        Linear term (the objective contains ``-2 b^T phi``).
    penalized : (p,) bool array
        True for absolute-value coordinates, False for fixed-sign coordinates.
    weights : (p,) array, optional
        Linear weights of the fixed-sign coordinates (ignored where penalized).
    max_events : int, optional
        Cycling guard; defaults to ``50 p``.
    """
    Q = np.asarray(Q, dtype=float)
    b = np.asarray(b, dtype=float)
    p = b.size
    pen = np.asarray(penalized, dtype=bool)
    fixed_w = np.zeros(p) if weights is None else np.asarray(weights, dtype=float)
    max_events = 50 * p if max_events is None else max_events
    try:
        chol = scipy.linalg.cho_factor(Q)
    except np.linalg.LinAlgError:
        raise SolverError("quadratic term is not positive definite") from None
    phi0 = scipy.linalg.cho_solve(chol, b)

    support = ~pen | (phi0 != 0)
    w = np.where(pen, np.sign(phi0), fixed_w)
    u = 0.0
    segments = []
    last_left = last_entered = -1
    events = 0
    while True:
        idx = np.flatnonzero(support)
        if idx.size:
            Qs = Q[np.ix_(idx, idx)]
            a = np.linalg.solve(Qs, b[idx])
            d = np.linalg.solve(Qs, w[idx])
        else:
            a = d = np.zeros(0)
        segments.append(_Segment(u, idx, a, d))

        best_u, action, target, sign = np.inf, None, -1, 0.0
        for k, j in enumerate(idx):
            if not pen[j] or w[j] * d[k] <= 0:
                continue
            ue = max(a[k] / d[k], u)
            if j == last_entered and ue <= u + _EPS * max(1.0, u):
                continue
            if ue < best_u:
                best_u, action, target = ue, "leave", j
        inactive = np.flatnonzero(pen & ~support)
        if inactive.size:
            Qi = Q[np.ix_(inactive, idx)]
            alpha = b[inactive] - Qi @ a
            slope = Qi @ d
            for j, al, be in zip(inactive, alpha, slope):
                for sgn, rate in ((1.0, 1.0 - be), (-1.0, 1.0 + be)):
                    if rate >= -_EPS:
                        continue
                    ue = max(sgn * al / rate, u)
                    if j == last_left and ue <= u + _EPS * max(1.0, u):
                        continue
                    if ue < best_u:
                        best_u, action, target, sign = ue, "enter", j, sgn
        if action is None or best_u > u_max:
            break
        events += 1
        if events > max_events:
            raise SolverError(f"homotopy exceeded {max_events} breakpoints (cycling guard)")
        u = best_u
        if action == "leave":
            support[target] = False
            w[target] = 0.0
            last_left, last_entered = target, -1
        else:
            support[target] = True
            w[target] = sign
            last_entered, last_left = target, -1
    return HomotopyPath(p, segments, Q, b, fixed_w, pen)

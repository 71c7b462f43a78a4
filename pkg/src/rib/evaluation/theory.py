"""Numerical checks of the recognizability/KL relationship on Gaussian pairs.

For P = N(0, 1) and Q = N(mu, 1) the likelihood-ratio test has ROC
``psi(x) = Qbar(Qbar^{-1}(x) - mu)`` with ``Qbar`` the standard normal
upper tail, area ``Phi(mu / sqrt 2)`` and KL divergence ``mu^2 / 2``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .roc import RocCurve, convex_hull_curve

LOG_E_OVER_2 = 1.0 - math.log(2.0)


@dataclass
class Theorem1Row:
    mu: float
    recognizability: float
    kl: float
    bound: float
    passed: bool


def gaussian_recognizability(mu):
    return 2.0 * norm.cdf(mu / math.sqrt(2.0)) - 1.0


def theorem1_gaussian_check(mu_grid):
    """Check ``recognizability <= KL + log(e/2)`` for each mean shift in ``mu_grid``."""
    rows = []
    for mu in mu_grid:
        mu = float(mu)
        if mu < 0:
            raise ValueError("mean shift must be non-negative")
        rec = float(gaussian_recognizability(mu))
        kl = mu * mu / 2.0
        bound = kl + LOG_E_OVER_2
        rows.append(Theorem1Row(mu, rec, kl, bound, rec <= bound))
    return rows


def _upper_tail_diff(a, b):
    """Qbar(a) - Qbar(b) for a <= b, without cancellation in either tail."""
    return np.where(a > 0, norm.sf(a) - norm.sf(b), norm.cdf(b) - norm.cdf(a))


def lemma1_numeric(mu, grid_size=100_000, span=12.0):
    """Numerically integrate ``-int_0^1 log psi'(x) dx`` for the Gaussian ROC.

    The integral is taken over the threshold ``t`` (``x = Qbar(t)``), which
    keeps the grid away from the singular endpoints. ``psi'`` on each cell is
    the finite-difference slope of the sampled ROC, so the closed form of the
    likelihood ratio is never used. Returns (integral, analytic, abs_err).
    """
    if mu <= 0:
        raise ValueError("mean shift must be positive")
    if grid_size < 1000:
        raise ValueError("grid_size must be at least 1000")
    t = np.linspace(-span, span + mu, grid_size)
    dx = _upper_tail_diff(t[:-1], t[1:])  # P0 mass of each threshold cell
    dpsi = _upper_tail_diff(t[:-1] - mu, t[1:] - mu)  # P1 mass of each cell
    keep = (dx > 0) & (dpsi > 0)
    integral = float(-np.sum(dx[keep] * np.log(dpsi[keep] / dx[keep])))
    analytic = mu * mu / 2.0
    return integral, analytic, abs(integral - analytic)


def gaussian_roc(mu, num_points=1000):
    """Closed-form LRT ROC for N(0,1) vs N(mu,1), sampled on a uniform x grid."""
    x = np.linspace(0.0, 1.0, num_points)
    y = norm.sf(norm.isf(x) - mu)
    y[0], y[-1] = 0.0, 1.0
    return RocCurve(x, y, norm.isf(x[1:]))


@dataclass
class RocConditions:
    c1_err: float
    c2_ok: bool
    c3_ok: bool

    @property
    def passed(self):
        return self.c1_err <= 1e-12 and self.c2_ok and self.c3_ok


def roc_conditions_check(curve, use_hull=True, tol=1e-9):
    """Check unit total slope (C1), non-negative slope (C2) and concavity (C3).

    Empirical curves are checked on their convex hull; pass
    ``use_hull=False`` to test a sampled analytic curve as given.
    """
    if use_hull:
        curve = convex_hull_curve(curve)
    x, y = curve.fpr, curve.tpr
    c1_err = abs(float(y[-1] - y[0]) - 1.0) + abs(float(x[-1] - x[0]) - 1.0)
    dx, dy = np.diff(x), np.diff(y)
    c2_ok = bool(np.all(dx >= -tol) and np.all(dy >= -tol))
    # slopes compared by cross-multiplication so vertical segments are allowed
    cross = dy[1:] * dx[:-1] - dy[:-1] * dx[1:]
    c3_ok = bool(np.all(cross <= tol))
    return RocConditions(c1_err, c2_ok, c3_ok)

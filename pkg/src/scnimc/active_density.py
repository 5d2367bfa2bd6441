"""Active-BS density: bounds, closed-form approximation and the q* fit.

A BS serving at least one UE is active. The family
lambda0(q) = lam * [1 - (1 + rho/(q*lam))**-q] approximates the active
density; q = 3.5 gives the nearest-BS lower bound, while the upper bound
lam * (1 - Q_off) follows from the per-BS muting probability Q_off. The
exponent q* is fitted to simulated active densities by minimizing the MSE
over a density grid, searched inside the [3.5, q_ub] bracket.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

from .association import AssociationDensity
from .pathloss import LinkType, PathLossModel

__all__ = [
    "lambda0",
    "lower_bound",
    "pr_unassociated_given_r",
    "muting_probability",
    "upper_bound",
    "fit_q_star",
    "approx",
    "QStarFit",
    "ActiveDensityReport",
    "active_density_report",
    "DEFAULT_FIT_GRID",
]

Q_LOWER = 3.5
_Q_CAP = 64.0

# 20-point log grid over 1..1e4 BSs/km^2 used for the MMSE fit
DEFAULT_FIT_GRID = tuple(np.geomspace(1.0, 1.0e4, 20))


def lambda0(lam, rho, q):
    """Active density approximation lam * [1 - (1 + rho/(q lam))**-q]."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0.0):
        raise ValueError("BS density must be positive")
    if np.any(np.asarray(rho) < 0.0):
        raise ValueError("UE density must be non-negative")
    if q <= 0.0:
        raise ValueError("exponent q must be positive")
    # expm1/log1p keep the lam >> rho and lam << rho limits accurate
    out = lam * -np.expm1(-q * np.log1p(np.asarray(rho, dtype=float) / (q * lam)))
    return out if out.ndim else float(out)


def lower_bound(lam, rho):
    """Nearest-BS active density, a lower bound under the smallest-loss UAS."""
    return lambda0(lam, rho, Q_LOWER)


def pr_unassociated_given_r(ad: AssociationDensity, r):
    """P(a UE at distance r is not served by the BS there)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("distance must be positive")
    model = ad.model
    p = np.asarray(model.los_prob(r), dtype=float)
    r1 = model.equiv_nlos_distance(r)
    r2 = model.equiv_los_distance(r)
    los_term = ad.cdf(r, LinkType.LOS) + ad.cdf(r1, LinkType.NLOS)
    nlos_term = ad.cdf(r2, LinkType.LOS) + ad.cdf(r, LinkType.NLOS)
    out = np.clip(los_term * p + nlos_term * (1.0 - p), 0.0, 1.0)
    return out if out.ndim else float(out)


def muting_probability(ad: AssociationDensity, rho) -> float:
    """Probability Q_off that a BS has no associated UE.

    Evaluates the infinite-disk limit of the Poisson mixture in closed
    form: Q_off = exp(-2 pi rho * J) with
    J = integral over r of (1 - P[unassociated | r]) * r dr.
    """
    if rho < 0.0:
        raise ValueError("UE density must be non-negative")
    if rho == 0.0:
        return 1.0
    top = ad.support_radius
    pts = [b for b in ad.model.los_breaks if 0.0 < b < top]

    def integrand(r):
        return (1.0 - pr_unassociated_given_r(ad, r)) * r

    with warnings.catch_warnings():
        # the error estimate is checked explicitly below
        warnings.simplefilter("ignore", IntegrationWarning)
        j, err = quad(integrand, 0.0, top, points=pts or None, limit=300,
                      epsabs=1e-12, epsrel=1e-9)
    if not math.isfinite(j) or err > max(1e-8, 1e-4 * abs(j)):
        raise ArithmeticError(f"muting-probability quadrature failed (J={j}, err={err})")
    return float(math.exp(-2.0 * math.pi * rho * j))


def upper_bound(ad: AssociationDensity, rho) -> float:
    """Active-density upper bound lam * (1 - Q_off)."""
    return ad.lam * (1.0 - muting_probability(ad, rho))


def approx(lam, rho, q_star):
    """Fitted active-density approximation lambda0(q*)."""
    return lambda0(lam, rho, q_star)


@dataclass(frozen=True)
class QStarFit:
    q_star: float
    mse: float
    bracket: tuple[float, float]


def _mse(sim_table, rho, q):
    lams = np.array([row[0] for row in sim_table])
    sims = np.array([row[1] for row in sim_table])
    return float(np.mean((lambda0(lams, rho, q) - sims) ** 2))


def fit_q_star(
    sim_table: Sequence[tuple[float, float]],
    rho: float,
    make_density: Callable[[float], AssociationDensity] | None = None,
    q_tol: float = 1e-3,
) -> QStarFit:
    """MMSE fit of q* against simulated active densities.

    The bracket upper edge q_ub solves mean(lambda0(q)) = mean(upper bound)
    over the table's density grid; lambda0 saturates below the bound for
    some models, in which case the bracket is capped.
    """
    sim_table = list(sim_table)
    if not sim_table:
        raise ValueError("sim_table must be non-empty")
    lams = np.array([row[0] for row in sim_table])
    if np.any(lams <= 0.0):
        raise ValueError("densities must be positive")

    q_ub = _Q_CAP
    if make_density is not None:
        ubs = np.array([upper_bound(make_density(l), rho) for l in lams])

        def gap(q):
            return float(np.mean(lambda0(lams, rho, q) - ubs))

        if gap(_Q_CAP) > 0.0:
            if gap(Q_LOWER) > 0.0:
                raise ArithmeticError("upper bound below lambda0(3.5); bracket inverted")
            q_ub = brentq(gap, Q_LOWER, _Q_CAP, xtol=1e-6)

    # coarse pre-scan guards the unimodality assumption of the line search
    qs = np.linspace(Q_LOWER, q_ub, 32)
    errs = np.array([_mse(sim_table, rho, q) for q in qs])
    k = int(np.argmin(errs))
    lo = qs[max(k - 1, 0)]
    hi = qs[min(k + 1, len(qs) - 1)]
    if lo == hi:
        return QStarFit(float(lo), float(errs[k]), (Q_LOWER, q_ub))

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _mse(sim_table, rho, c)
    fd = _mse(sim_table, rho, d)
    while b - a > q_tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _mse(sim_table, rho, c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _mse(sim_table, rho, d)
    q_star = 0.5 * (a + b)
    return QStarFit(float(q_star), _mse(sim_table, rho, q_star), (Q_LOWER, q_ub))


@dataclass(frozen=True)
class ActiveDensityReport:
    """Bounds and approximation of the active density over a grid."""

    lambda_grid: tuple
    rho: float
    lb: tuple
    ub: tuple
    approx: tuple
    q_star: float
    sim: tuple | None = None

    def __post_init__(self):
        lb = np.asarray(self.lb)
        ub = np.asarray(self.ub)
        ap = np.asarray(self.approx)
        lam = np.asarray(self.lambda_grid)
        if np.any(lb < -1e-9) or np.any(lb > ub + 1e-9):
            raise ValueError("bound ordering violated: need 0 <= lb <= ub")
        if np.any(ap > np.minimum(lam, self.rho) + 1e-9):
            raise ValueError("approximation exceeds min(lambda, rho)")


def active_density_report(
    model: PathLossModel,
    lambda_grid: Sequence[float],
    rho: float,
    q_star: float,
    sim: Sequence[float] | None = None,
) -> ActiveDensityReport:
    lb = [lower_bound(l, rho) for l in lambda_grid]
    ub = [upper_bound(AssociationDensity(model, l), rho) for l in lambda_grid]
    ap = [approx(l, rho, q_star) for l in lambda_grid]
    return ActiveDensityReport(
        tuple(lambda_grid), float(rho), tuple(lb), tuple(ub), tuple(ap),
        float(q_star), None if sim is None else tuple(sim),
    )

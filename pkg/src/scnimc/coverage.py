"""SINR coverage probability and area spectral efficiency.

The coverage probability of the typical UE integrates, over the serving
distance and link type, the joint probability that Rayleigh fading beats
both noise and the aggregate interference. The association densities are
driven by the full BS density lam; the interference Laplace factors are
driven by the active density lam_tilde only. Keeping that asymmetry
explicit is what makes idle mode help coverage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .association import AssociationDensity
from .pathloss import LinkType, PathLossModel

__all__ = [
    "NetworkParams",
    "CoverageQuery",
    "laplace_los",
    "laplace_nlos",
    "coverage_probability",
    "sinr_ccdf_grid",
    "ase",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(16)
_TAIL_EPS = 1.0e-12
_ASE_GAMMA_CAP = 1.0e6
_ASE_TAIL_REL = 1.0e-9
_ASE_PANEL_RATIO = 8.0


@dataclass(frozen=True)
class NetworkParams:
    """Deployment and radio parameters; rho may be math.inf (all active)."""

    lam: float
    rho: float
    tx_power_mw: float = 10.0 ** 2.4       # 24 dBm
    noise_mw: float = 10.0 ** -9.5         # -95 dBm
    bandwidth_hz: float = 1.0e7

    def __post_init__(self):
        if self.lam <= 0.0 or self.rho < 0.0:
            raise ValueError("densities must be positive (rho may be inf)")
        if self.tx_power_mw <= 0.0 or self.noise_mw < 0.0 or self.bandwidth_hz <= 0.0:
            raise ValueError("powers and bandwidth must be positive (noise may be 0)")


@dataclass(frozen=True)
class CoverageQuery:
    """SINR threshold (linear) plus the active density driving interference."""

    gamma: float
    active_density: float

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("SINR threshold must be positive")
        if self.active_density < 0.0:
            raise ValueError("active density must be non-negative")


def _log_edges(lo, hi, breaks):
    """Panel edges over [lo, hi]: given breakpoints, log ratio <= e each."""
    pts = [lo] + sorted(b for b in breaks if lo < b < hi) + [hi]
    edges = [pts[0]]
    for a, b in zip(pts, pts[1:]):
        n = max(1, int(math.ceil(math.log(b / a))))
        edges.extend(a * (b / a) ** (np.arange(1, n + 1) / n))
    return np.asarray(edges)


def _gl_integrate(f, edges):
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = f(nodes.ravel()).reshape(nodes.shape)
    return float(np.sum(half * (vals @ _GL_W)))


def _branch_integral(model: PathLossModel, link: LinkType, a: float, sp: float,
                     lam_tilde: float) -> float:
    """Integral over (a, U) of w(u) * u / (1 + (sp * zeta(u))**-1) du.

    w is los_prob for the LoS branch and its complement for NLoS; sp = s*P.
    U is chosen so the neglected tail adds < 1e-12 to the final exponent.
    """
    if sp <= 0.0:
        return 0.0
    if link is LinkType.LOS and model.los_support_radius == 0.0:
        return 0.0
    hi = model.los_support_radius if link is LinkType.LOS else math.inf
    if not math.isfinite(hi):
        seg = model.segments[-1]
        alpha_t = seg.alpha_los if link is LinkType.LOS else seg.alpha_nlos
        a_t = seg.a_los if link is LinkType.LOS else seg.a_nlos
        if alpha_t <= 2.0:
            raise ArithmeticError("interference diverges: tail exponent must exceed 2")
        coef = 2.0 * math.pi * max(lam_tilde, 1e-12)
        hi = (coef * sp * a_t / ((alpha_t - 2.0) * _TAIL_EPS)) ** (1.0 / (alpha_t - 2.0))
    if hi <= a:
        return 0.0

    breaks = set(model.los_breaks)
    for s in model.segments:
        if math.isfinite(s.d_hi):
            breaks.add(s.d_hi)
        alpha = s.alpha_los if link is LinkType.LOS else s.alpha_nlos
        a_ref = s.a_los if link is LinkType.LOS else s.a_nlos
        breaks.add((sp * a_ref) ** (1.0 / alpha))  # knee where sp*zeta = 1
    edges = _log_edges(a, hi, breaks)

    def f(u):
        w = np.asarray(model.los_prob(u), dtype=float)
        if link is LinkType.NLOS:
            w = 1.0 - w
        t = sp * np.asarray(model.loss(u, link), dtype=float)
        frac = np.where(np.isfinite(t), t / (1.0 + t), 1.0)
        return w * u * frac

    return _gl_integrate(f, edges)


def _interference_exponent(model, lam_tilde, p_mw, s, a_los, a_nlos):
    if s <= 0.0 or lam_tilde <= 0.0:
        return 0.0
    sp = s * p_mw
    i_l = _branch_integral(model, LinkType.LOS, a_los, sp, lam_tilde)
    i_nl = _branch_integral(model, LinkType.NLOS, a_nlos, sp, lam_tilde)
    return 2.0 * math.pi * lam_tilde * (i_l + i_nl)


def laplace_los(model: PathLossModel, lam_tilde: float, p_mw: float, s: float, r: float) -> float:
    """Laplace transform of the interference seen by a LoS-served UE at r."""
    if s < 0.0 or r <= 0.0:
        raise ValueError("need s >= 0 and r > 0")
    r1 = float(model.equiv_nlos_distance(r))
    return math.exp(-_interference_exponent(model, lam_tilde, p_mw, s, r, r1))


def laplace_nlos(model: PathLossModel, lam_tilde: float, p_mw: float, s: float, r: float) -> float:
    """Laplace transform of the interference seen by an NLoS-served UE at r."""
    if s < 0.0 or r <= 0.0:
        raise ValueError("need s >= 0 and r > 0")
    r2 = float(model.equiv_los_distance(r))
    return math.exp(-_interference_exponent(model, lam_tilde, p_mw, s, r2, r))


def _effective_active_density(params: NetworkParams, active_density):
    if active_density is None:
        return params.lam
    if active_density < 0.0 or active_density > params.lam * (1.0 + 1e-9):
        raise ValueError("active density must lie in [0, lam]")
    return float(active_density)


def coverage_probability(
    model: PathLossModel,
    params: NetworkParams,
    gamma: float,
    active_density: float | None = None,
    assoc: AssociationDensity | None = None,
) -> float:
    """P(SINR > gamma) for the typical UE.

    active_density = None means every BS transmits (the rho = inf baseline).
    """
    if gamma <= 0.0:
        raise ValueError("SINR threshold must be positive")
    lam_t = _effective_active_density(params, active_density)
    ad = assoc if assoc is not None else AssociationDensity(model, params.lam)
    p_mw, noise = params.tx_power_mw, params.noise_mw

    total = 0.0
    for link in (LinkType.LOS, LinkType.NLOS):
        pdf = ad.pdf_los if link is LinkType.LOS else ad.pdf_nlos
        top = ad.support_radius
        if link is LinkType.LOS:
            top = min(top, model.los_support_radius)
        if top <= 0.0:
            continue

        def integrand(r):
            f = pdf(r)
            if f == 0.0:
                return 0.0
            zeta = model.loss(r, link)
            s = gamma / (p_mw * zeta)
            if link is LinkType.LOS:
                a_l, a_nl = r, float(model.equiv_nlos_distance(r))
            else:
                a_l, a_nl = float(model.equiv_los_distance(r)), r
            expo = _interference_exponent(model, lam_t, p_mw, s, a_l, a_nl)
            if noise > 0.0:
                expo += gamma * noise / (p_mw * zeta)
            return math.exp(-expo) * f

        lo = 0.0
        for seg in model.segments:
            hi = min(seg.d_hi, top)
            if hi <= lo:
                break
            pts = [b for b in ad.model.los_breaks if lo < b < hi]
            val, _ = quad(integrand, lo, hi, points=pts or None, limit=200,
                          epsabs=1e-9, epsrel=1e-8)
            total += val
            lo = hi

    return min(max(total, 0.0), 1.0)


def sinr_ccdf_grid(
    model: PathLossModel,
    params: NetworkParams,
    gamma_grid,
    active_density: float | None = None,
) -> np.ndarray:
    """Coverage probability at each threshold of a strictly increasing grid."""
    grid = np.asarray(gamma_grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0.0) or np.any(np.diff(grid) <= 0.0):
        raise ValueError("gamma grid must be positive and strictly increasing")
    ad = AssociationDensity(model, params.lam)
    return np.array([
        coverage_probability(model, params, g, active_density, assoc=ad) for g in grid
    ])


def ase(
    model: PathLossModel,
    params: NetworkParams,
    gamma0: float,
    active_density: float | None = None,
) -> float:
    """Area spectral efficiency in bps/Hz/km^2 above the working SINR gamma0.

    Uses the integration-by-parts form
    lam_tilde * [log2(1+g0) p(g0) + (1/ln 2) * integral of p(g)/(1+g) dg],
    truncating the tail once its running contribution falls below 1e-9.
    """
    if gamma0 <= 0.0:
        raise ValueError("gamma0 must be positive")
    lam_t = _effective_active_density(params, active_density)
    if lam_t == 0.0:
        return 0.0
    ad = AssociationDensity(model, params.lam)

    def pcov(g):
        return coverage_probability(model, params, g, active_density, assoc=ad)

    head = math.log2(1.0 + gamma0) * pcov(gamma0)
    acc = 0.0
    lo = gamma0
    while lo < _ASE_GAMMA_CAP:
        hi = min(lo * _ASE_PANEL_RATIO, _ASE_GAMMA_CAP)
        # Gauss-Legendre in ln gamma: dg = g dln(g)
        mid = 0.5 * (math.log(hi) + math.log(lo))
        half = 0.5 * (math.log(hi) - math.log(lo))
        g = np.exp(mid + half * _GL16_X)
        vals = np.array([pcov(x) for x in g]) * g / (1.0 + g)
        piece = half * float(vals @ _GL16_W)
        acc += piece
        if piece < _ASE_TAIL_REL * max(acc + head * math.log(2.0), 1e-300):
            break
        lo = hi
    return lam_t * (head + acc / math.log(2.0))

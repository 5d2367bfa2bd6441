"""Serving-distance distributions under smallest-path-loss association.

For a BS field of density lam, the chance that the serving link is LoS at
distance r combines three exclusion events: no NLoS BS inside the
equivalent radius r1, no LoS BS inside r, and the link at r being LoS.
The NLoS case mirrors it with the equivalent radius r2. Both densities and
their CDFs feed the coverage theorem and the active-density bounds.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .pathloss import LinkType, PathLossModel

__all__ = ["AssociationDensity"]

# survival exponent below exp(-36) ~ 2e-16 is treated as fully decayed
_EXP_FLOOR = 36.0
_GL4_X, _GL4_W = np.polynomial.legendre.leggauss(4)


class AssociationDensity:
    """Distance law of the serving BS for one (model, density) pair.

    Point evaluators are exact (closed-form inner integrals where the model
    allows); CDFs come from a cached cumulative tabulation on a log grid.
    """

    def __init__(self, model: PathLossModel, lam: float, grid_points: int = 2048):
        if lam <= 0.0 or not math.isfinite(lam):
            raise ValueError("BS density must be positive and finite")
        self.model = model
        self.lam = float(lam)
        self.grid_points = int(grid_points)
        self._cdf_los = None
        self._cdf_nlos = None
        self._grid_lo = None
        self._los_cum_inf = 2.0 * math.pi * self.lam * float(
            model.los_weighted_mass(max(model.los_support_radius, 1e-12))
            if model.los_support_radius > 0.0
            else 0.0
        )
        self.support_radius = max(
            model.los_support_radius * 1.05,
            math.sqrt((_EXP_FLOOR + self._los_cum_inf) / (math.pi * self.lam)),
        )

    # -- inner exclusion integrals -----------------------------------------

    def los_cum(self, r):
        """Integral over (0, r] of los_prob(u) * 2*pi*u*lam du."""
        return 2.0 * math.pi * self.lam * self.model.los_weighted_mass(r)

    def nlos_cum(self, r):
        r = np.asarray(r, dtype=float)
        out = math.pi * self.lam * r * r - self.los_cum(r)
        return out if out.ndim else float(out)

    # -- point densities -----------------------------------------------------

    def pdf_los(self, r):
        """Density (1/km) of serving at distance r over a LoS link."""
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0.0):
            raise ValueError("distance must be positive")
        p = np.asarray(self.model.los_prob(r), dtype=float)
        out = np.zeros_like(np.atleast_1d(np.asarray(r, dtype=float)))
        rr = np.atleast_1d(r)
        pp = np.atleast_1d(p)
        mask = pp > 0.0
        if np.any(mask):
            rm = rr[mask]
            r1 = np.atleast_1d(self.model.equiv_nlos_distance(rm))
            expo = self.nlos_cum(r1) + self.los_cum(rm)
            out[mask] = np.exp(-expo) * pp[mask] * 2.0 * math.pi * rm * self.lam
        return out if np.asarray(r).ndim else float(out[0])

    def pdf_nlos(self, r):
        """Density (1/km) of serving at distance r over an NLoS link."""
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0.0):
            raise ValueError("distance must be positive")
        p = np.asarray(self.model.los_prob(r), dtype=float)
        out = np.zeros_like(np.atleast_1d(np.asarray(r, dtype=float)))
        rr = np.atleast_1d(r)
        pp = np.atleast_1d(p)
        mask = pp < 1.0
        if np.any(mask):
            rm = rr[mask]
            r2 = np.atleast_1d(self.model.equiv_los_distance(rm))
            expo = self.los_cum(r2) + self.nlos_cum(rm)
            out[mask] = np.exp(-expo) * (1.0 - pp[mask]) * 2.0 * math.pi * rm * self.lam
        return out if np.asarray(r).ndim else float(out[0])

    def pdf(self, r):
        return self.pdf_los(r) + self.pdf_nlos(r)

    # -- cumulative law --------------------------------------------------------

    def _build_cdfs(self):
        lo = math.sqrt(1e-14 / (math.pi * self.lam))
        hi = self.support_radius
        grid = np.geomspace(lo, hi, self.grid_points)
        for b in list(self.model.los_breaks) + [self.model.los_support_radius]:
            if lo < b < hi:
                grid = np.append(grid, [b * (1 - 1e-12), b, b * (1 + 1e-12)])
        grid = np.unique(grid)
        mid = 0.5 * (grid[1:] + grid[:-1])
        half = 0.5 * (grid[1:] - grid[:-1])
        nodes = mid[:, None] + half[:, None] * _GL4_X[None, :]

        def cumulate(pdf):
            vals = pdf(nodes.ravel()).reshape(nodes.shape)
            pieces = half * (vals @ _GL4_W)
            return np.concatenate([[0.0], np.cumsum(pieces)])

        self._grid_lo = lo
        self._cdf_los = PchipInterpolator(grid, cumulate(self.pdf_los), extrapolate=False)
        self._cdf_nlos = PchipInterpolator(grid, cumulate(self.pdf_nlos), extrapolate=False)

    def cdf(self, r, link: LinkType, method: str = "interp"):
        """P(serving link of given type at distance <= r)."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0.0):
            raise ValueError("distance must be non-negative")
        if method == "quad":
            pdf = self.pdf_los if link is LinkType.LOS else self.pdf_nlos
            scalar = not r.ndim
            vals = []
            for x in np.atleast_1d(r):
                top = min(float(x), self.support_radius)
                if top <= 0.0:
                    vals.append(0.0)
                    continue
                pts = [b for b in self.model.los_breaks if 0 < b < top]
                v, _ = quad(pdf, 0.0, top, points=pts or None, limit=200,
                            epsabs=1e-12, epsrel=1e-10)
                vals.append(v)
            out = np.asarray(vals)
            return float(out[0]) if scalar else out
        if self._cdf_los is None:
            self._build_cdfs()
        interp = self._cdf_los if link is LinkType.LOS else self._cdf_nlos
        top = interp.x[-1]
        clipped = np.clip(r, self._grid_lo, top)
        out = np.asarray(interp(clipped))
        out = np.where(np.asarray(r) < self._grid_lo, 0.0, out)
        return out if out.ndim else float(out)

    def total_mass(self):
        """Integral of both densities over (0, inf); should be 1."""
        if self._cdf_los is None:
            self._build_cdfs()
        return float(self._cdf_los(self._cdf_los.x[-1]) + self._cdf_nlos(self._cdf_nlos.x[-1]))

    def los_fraction(self):
        """Probability that the serving link is LoS."""
        if self._cdf_los is None:
            self._build_cdfs()
        return float(self._cdf_los(self._cdf_los.x[-1]))

    def median(self):
        """Median of the combined serving-distance law."""
        if self._cdf_los is None:
            self._build_cdfs()
        f = lambda r: self.cdf(r, LinkType.LOS) + self.cdf(r, LinkType.NLOS) - 0.5
        return brentq(f, self._grid_lo, self.support_radius, xtol=1e-12)

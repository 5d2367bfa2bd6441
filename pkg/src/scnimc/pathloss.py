"""Piecewise LoS/NLoS path loss models.

Distances are in kilometers throughout (the reference gains A are defined
at r = 1 km), gains are linear. A model is a stack of contiguous power-law
segments, each carrying a LoS and an NLoS branch, plus a piecewise LoS
probability function. Three concrete builders cover the standard cases:
a two-slope model with a linear LoS probability (case 1), the same slopes
with a two-piece exponential LoS probability (case 2), and a single-slope
model that does not distinguish LoS from NLoS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

__all__ = [
    "LinkType",
    "PathSegment",
    "PathLossModel",
    "build_case1",
    "build_case2",
    "build_single_slope",
    "CASE1_D1_KM",
    "CASE2_R1_KM",
    "CASE2_R2_KM",
    "CASE2_D1_KM",
    "DEFAULT_ALPHA_LOS",
    "DEFAULT_ALPHA_NLOS",
    "DEFAULT_A_LOS",
    "DEFAULT_A_NLOS",
]

# two-slope urban-micro constants (reference gain at 1 km, linear)
DEFAULT_ALPHA_LOS = 2.09
DEFAULT_ALPHA_NLOS = 3.75
DEFAULT_A_LOS = 10.0 ** -10.38
DEFAULT_A_NLOS = 10.0 ** -14.54

CASE1_D1_KM = 0.3
CASE2_R1_KM = 0.156
CASE2_R2_KM = 0.030
CASE2_D1_KM = CASE2_R1_KM / math.log(10.0)

# LoS-dominance is only required at practical link distances; below a few
# meters the two-slope constants mathematically invert (NLoS gain exceeds
# LoS), so construction checks start at the conventional 10 m floor.
_DOMINANCE_FLOOR_KM = 0.01
_DOMINANCE_CEIL_KM = 1.0e3
_LOS_PROB_EPS = 1.0e-12


class LinkType(Enum):
    """Propagation condition of a single BS-UE link."""

    LOS = "los"
    NLOS = "nlos"


@dataclass(frozen=True)
class PathSegment:
    """One distance piece of the path loss model.

    Covers (d_lo, d_hi]; the last segment of a model has d_hi = inf.
    Gains follow A * r**-alpha with r in km.
    """

    d_lo: float
    d_hi: float
    a_los: float
    alpha_los: float
    a_nlos: float
    alpha_nlos: float

    def __post_init__(self):
        if not 0.0 <= self.d_lo < self.d_hi:
            raise ValueError(f"need 0 <= d_lo < d_hi, got [{self.d_lo}, {self.d_hi}]")
        if self.a_los <= 0.0 or self.a_nlos <= 0.0:
            raise ValueError("reference gains must be positive")
        if self.alpha_los <= 0.0 or self.alpha_nlos <= 0.0:
            raise ValueError("path loss exponents must be positive")
        lo = max(self.d_lo, _DOMINANCE_FLOOR_KM)
        hi = min(self.d_hi, max(_DOMINANCE_CEIL_KM, 2.0 * lo))
        # ratio zeta_L/zeta_NL is monotone in r, so endpoint checks suffice
        for r in (lo, hi):
            if self.a_los * r ** -self.alpha_los < self.a_nlos * r ** -self.alpha_nlos * (1.0 - 1e-12):
                raise ValueError(
                    f"LoS branch weaker than NLoS at r={r} km within segment "
                    f"[{self.d_lo}, {self.d_hi}]"
                )


class PathLossModel:
    """Immutable N-piece path loss model with a LoS probability function.

    los_prob must be vectorized over distance and return values in [0, 1];
    it is validated to be non-increasing within each piece. Discontinuities
    at piece joins are recorded in ``los_prob_jumps`` rather than rejected.
    """

    def __init__(
        self,
        segments: Sequence[PathSegment],
        los_prob: Callable[[np.ndarray], np.ndarray],
        los_breaks: Sequence[float] | None = None,
        los_kind: str = "generic",
        los_params: tuple = (),
    ):
        segments = tuple(segments)
        if not segments:
            raise ValueError("model needs at least one segment")
        if segments[0].d_lo != 0.0:
            raise ValueError("first segment must start at 0")
        if not math.isinf(segments[-1].d_hi):
            raise ValueError("last segment must be unbounded")
        for a, b in zip(segments, segments[1:]):
            if a.d_hi != b.d_lo:
                raise ValueError("segments must be contiguous and non-overlapping")

        self.segments = segments
        self._los_prob_fn = los_prob
        self.los_kind = los_kind
        self.los_params = tuple(los_params)

        inner = [s.d_hi for s in segments[:-1]]
        self._bounds = np.asarray(inner, dtype=float)
        self._a = {
            LinkType.LOS: np.array([s.a_los for s in segments]),
            LinkType.NLOS: np.array([s.a_nlos for s in segments]),
        }
        self._alpha = {
            LinkType.LOS: np.array([s.alpha_los for s in segments]),
            LinkType.NLOS: np.array([s.alpha_nlos for s in segments]),
        }

        if los_breaks is None:
            los_breaks = inner
        self.los_breaks = tuple(sorted(set(float(b) for b in los_breaks if math.isfinite(b))))

        # single global power law per branch? (true for all shipped builders)
        self.uniform_power_law = all(
            s.a_los == segments[0].a_los
            and s.alpha_los == segments[0].alpha_los
            and s.a_nlos == segments[0].a_nlos
            and s.alpha_nlos == segments[0].alpha_nlos
            for s in segments
        )
        if self.uniform_power_law:
            s0 = segments[0]
            self._r1_coef = (s0.a_nlos / s0.a_los) ** (1.0 / s0.alpha_nlos)
            self._r1_exp = s0.alpha_los / s0.alpha_nlos
            self._r2_coef = (s0.a_los / s0.a_nlos) ** (1.0 / s0.alpha_los)
            self._r2_exp = s0.alpha_nlos / s0.alpha_los

        self.los_prob_jumps = self._validate_los_prob()
        self._validate_loss_monotone()
        self.los_support_radius = self._find_los_support()
        self._los_mass_interp = None

    # -- basic evaluations ------------------------------------------------

    def _check_r(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0.0) or np.any(~np.isfinite(r)):
            raise ValueError("distance must be positive and finite")
        return r

    def segment_index(self, r):
        return np.searchsorted(self._bounds, np.asarray(r, dtype=float), side="left")

    def loss(self, r, link: LinkType):
        """Linear gain A * r**-alpha of the segment containing r."""
        r = self._check_r(r)
        idx = self.segment_index(r)
        out = self._a[link][idx] * r ** -self._alpha[link][idx]
        return out if out.ndim else float(out)

    def los_prob(self, r):
        """Probability that a link of length r km is line-of-sight."""
        r = self._check_r(r)
        p = np.asarray(self._los_prob_fn(r), dtype=float)
        return p if p.ndim else float(p)

    # -- equivalent distances ---------------------------------------------

    def equiv_nlos_distance(self, r):
        """r1 such that the NLoS gain at r1 equals the LoS gain at r."""
        r = self._check_r(r)
        if self.uniform_power_law:
            out = self._r1_coef * r ** self._r1_exp
            return out if out.ndim else float(out)
        out = self._invert_loss(np.atleast_1d(self.loss(r, LinkType.LOS)), LinkType.NLOS)
        return out if r.ndim else float(out[0])

    def equiv_los_distance(self, r):
        """r2 such that the LoS gain at r2 equals the NLoS gain at r."""
        r = self._check_r(r)
        if self.uniform_power_law:
            out = self._r2_coef * r ** self._r2_exp
            return out if out.ndim else float(out)
        out = self._invert_loss(np.atleast_1d(self.loss(r, LinkType.NLOS)), LinkType.LOS)
        return out if r.ndim else float(out[0])

    def _invert_loss(self, target, link: LinkType):
        """Solve loss(u, link) = target segment by segment (loss is monotone)."""
        out = np.empty_like(target)
        a = self._a[link]
        alpha = self._alpha[link]
        for k, t in enumerate(target):
            sol = None
            for i, seg in enumerate(self.segments):
                u = (a[i] / t) ** (1.0 / alpha[i])
                if u <= seg.d_lo:
                    # target falls in a join discontinuity: the exclusion
                    # radius is the join itself
                    sol = seg.d_lo
                    break
                if u <= seg.d_hi:
                    sol = u
                    break
            if sol is None:
                raise ArithmeticError(f"no equivalent distance for target gain {t}")
            out[k] = sol
        return out

    # -- LoS mass, used by the association distance law ---------------------

    def los_weighted_mass(self, r):
        """M(r) = integral over (0, r] of u * los_prob(u) du."""
        r = np.asarray(r, dtype=float)
        if self.los_kind == "zero":
            out = np.zeros_like(r)
        elif self.los_kind == "linear":
            (d1,) = self.los_params
            m = np.minimum(r, d1)
            out = m * m / 2.0 - m * m * m / (3.0 * d1)
        else:
            out = self._los_mass_interpolant()(np.minimum(r, self.los_support_radius))
        return out if out.ndim else float(out)

    def _los_mass_interpolant(self):
        if self._los_mass_interp is None:
            sup = self.los_support_radius
            edges = [0.0] + [b for b in self.los_breaks if b < sup] + [sup]
            grid = np.unique(np.concatenate(
                [np.linspace(lo, hi, 768) for lo, hi in zip(edges, edges[1:])]
            ))
            gl_x, gl_w = np.polynomial.legendre.leggauss(8)
            mid = 0.5 * (grid[1:] + grid[:-1])
            half = 0.5 * (grid[1:] - grid[:-1])
            u = mid[:, None] + half[:, None] * gl_x[None, :]
            u = np.maximum(u, 1e-300)
            vals = u * np.asarray(self._los_prob_fn(u), dtype=float)
            pieces = half * (vals @ gl_w)
            cum = np.concatenate([[0.0], np.cumsum(pieces)])
            self._los_mass_interp = PchipInterpolator(grid, cum, extrapolate=False)
        return self._los_mass_interp

    # -- construction-time validation ---------------------------------------

    def _validate_los_prob(self):
        jumps = []
        edges = [1e-6] + list(self.los_breaks) + [max(10.0, (self.los_breaks[-1] if self.los_breaks else 1.0) * 4)]
        for lo, hi in zip(edges, edges[1:]):
            g = np.linspace(lo * (1 + 1e-9), hi * (1 - 1e-9), 257)
            p = np.asarray(self._los_prob_fn(g), dtype=float)
            if np.any(p < -1e-12) or np.any(p > 1.0 + 1e-12):
                raise ValueError("los_prob must stay within [0, 1]")
            if np.any(np.diff(p) > 1e-12):
                raise ValueError("los_prob must be non-increasing within each piece")
        for b in self.los_breaks:
            left = float(self._los_prob_fn(np.asarray(b * (1 - 1e-12))))
            right = float(self._los_prob_fn(np.asarray(b * (1 + 1e-12))))
            if abs(right - left) > 1e-9:
                jumps.append((b, right - left))
        return tuple(jumps)

    def _validate_loss_monotone(self):
        for link in LinkType:
            for i, (a, b) in enumerate(zip(self.segments, self.segments[1:])):
                d = a.d_hi
                end = self._a[link][i] * d ** -self._alpha[link][i]
                start = self._a[link][i + 1] * d ** -self._alpha[link][i + 1]
                if start > end * (1 + 1e-12):
                    raise ValueError(f"{link.value} loss increases across the join at {d} km")

    def _find_los_support(self):
        """Smallest grid radius beyond which los_prob stays below ~1e-12.

        los_prob is non-increasing within pieces, so on a grid containing
        every break the last exceedance bounds the true support.
        """
        g = np.geomspace(1e-6, 1e5, 4097)
        for b in self.los_breaks:
            g = np.append(g, [b * (1 - 1e-9), b * (1 + 1e-9)])
        g = np.sort(g)
        p = np.asarray(self._los_prob_fn(g), dtype=float)
        above = np.nonzero(p > _LOS_PROB_EPS)[0]
        if above.size == 0:
            return 0.0
        if above[-1] + 1 >= g.size:
            return math.inf
        return float(g[above[-1] + 1])


# -- builders ---------------------------------------------------------------


class _LinearLosProb:
    """1 - r/d1 up to d1, then 0; picklable unlike a closure."""

    def __init__(self, d1):
        self.d1 = d1

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.d1, 1.0 - r / self.d1, 0.0)


class _TwoPieceExpLosProb:
    """1 - 5 exp(-R1/r) up to d1, then 5 exp(-r/R2)."""

    def __init__(self, r1, r2, d1):
        self.r1, self.r2, self.d1 = r1, r2, d1

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        near = 1.0 - 5.0 * np.exp(-self.r1 / np.maximum(r, 1e-300))
        far = 5.0 * np.exp(-r / self.r2)
        return np.clip(np.where(r <= self.d1, near, far), 0.0, 1.0)


class _ZeroLosProb:
    def __call__(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))


def build_case1() -> PathLossModel:
    """Two-slope model with the linear LoS probability (d1 = 300 m)."""
    d1 = CASE1_D1_KM
    segs = [
        PathSegment(0.0, d1, DEFAULT_A_LOS, DEFAULT_ALPHA_LOS, DEFAULT_A_NLOS, DEFAULT_ALPHA_NLOS),
        PathSegment(d1, math.inf, DEFAULT_A_LOS, DEFAULT_ALPHA_LOS, DEFAULT_A_NLOS, DEFAULT_ALPHA_NLOS),
    ]
    return PathLossModel(segs, _LinearLosProb(d1), los_breaks=[d1],
                         los_kind="linear", los_params=(d1,))


def build_case2() -> PathLossModel:
    """Two-slope model with the two-piece exponential LoS probability.

    The two branches do not agree at the break d1 = R1/ln 10; the upward
    jump (about 0.023) is kept as written and recorded in los_prob_jumps.
    """
    d1 = CASE2_D1_KM
    segs = [
        PathSegment(0.0, d1, DEFAULT_A_LOS, DEFAULT_ALPHA_LOS, DEFAULT_A_NLOS, DEFAULT_ALPHA_NLOS),
        PathSegment(d1, math.inf, DEFAULT_A_LOS, DEFAULT_ALPHA_LOS, DEFAULT_A_NLOS, DEFAULT_ALPHA_NLOS),
    ]
    return PathLossModel(
        segs, _TwoPieceExpLosProb(CASE2_R1_KM, CASE2_R2_KM, d1),
        los_breaks=[d1], los_kind="two_piece_exp",
        los_params=(CASE2_R1_KM, CASE2_R2_KM, d1),
    )


def build_single_slope(alpha: float = DEFAULT_ALPHA_NLOS, a_ref: float = DEFAULT_A_NLOS) -> PathLossModel:
    """Single-slope model; LoS and NLoS branches coincide, los_prob is 0."""
    if alpha <= 2.0:
        raise ValueError("single-slope exponent must exceed 2 for finite interference")
    if a_ref <= 0.0:
        raise ValueError("reference gain must be positive")
    segs = [PathSegment(0.0, math.inf, a_ref, alpha, a_ref, alpha)]
    return PathLossModel(segs, _ZeroLosProb(), los_breaks=[], los_kind="zero", los_params=())

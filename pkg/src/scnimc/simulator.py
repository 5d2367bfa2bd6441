"""Monte Carlo network simulator on a torus.

Each trial drops Poisson BS and UE fields on a wrap-around square, draws
one LoS flag per UE-BS pair, associates every UE to its smallest-path-loss
BS, mutes BSs that attracted no UE, and measures the SINR of one uniformly
chosen typical UE. No active-BS distribution is assumed anywhere: activity
emerges from the UEs' choices, which is what makes the simulator an
independent check of the analytic chain.

Reproducibility contract: positions, counts and the typical-UE choice come
from a counter-based Philox stream keyed by (seed, trial); all per-link
randomness is hashed from (seed, trial, kind, ue, bs). Results are
therefore identical across serial and parallel runs and across the NumPy
and numba association paths.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _hash, _kernels
from .association import AssociationDensity
from .pathloss import LinkType, PathLossModel

__all__ = [
    "SimConfig",
    "Realization",
    "TrialSample",
    "SimStats",
    "default_region_side",
    "generate_realization",
    "associate",
    "measure",
    "run",
]

_SINR_CAP = 1.0e12
_Z95 = 1.959963984540054


def default_region_side(model: PathLossModel, lam: float,
                        min_bs: float = 2000.0, assoc_multiple: float = 40.0) -> float:
    """Torus side: >= sqrt(min_bs/lam) and >= assoc_multiple * median distance."""
    med = AssociationDensity(model, lam).median()
    return max(math.sqrt(min_bs / lam), assoc_multiple * med)


@dataclass(frozen=True)
class SimConfig:
    model: PathLossModel
    lam: float
    rho: float
    region_side: float
    gamma_grid: tuple
    fading: str = "rayleigh"               # rayleigh | rician
    shadowing: tuple | None = None         # (sigma_db, tau)
    trials: int = 10000
    seed: int = 1
    all_active: bool = False
    tx_power_mw: float = 10.0 ** 2.4
    noise_mw: float = 10.0 ** -9.5
    gamma0: float | None = None            # ASE floor; defaults to gamma_grid[0]

    def __post_init__(self):
        if self.lam <= 0.0 or self.region_side <= 0.0:
            raise ValueError("BS density and region side must be positive")
        if not self.all_active and not (0.0 <= self.rho < math.inf):
            raise ValueError("UE density must be finite unless all_active is set")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.fading not in ("rayleigh", "rician"):
            raise ValueError(f"unknown fading kind {self.fading!r}")
        if self.shadowing is not None:
            sigma, tau = self.shadowing
            if sigma < 0.0 or not 0.0 <= tau <= 1.0:
                raise ValueError("need shadowing sigma >= 0 and tau in [0, 1]")
        g = np.asarray(self.gamma_grid, dtype=float)
        if g.size == 0 or np.any(g <= 0.0) or np.any(np.diff(g) <= 0.0):
            raise ValueError("gamma grid must be positive and strictly increasing")

    @property
    def gamma0_eff(self) -> float:
        return float(self.gamma_grid[0]) if self.gamma0 is None else float(self.gamma0)


@dataclass
class Realization:
    """One dropped network: positions, pair flags (lazy), association state."""

    seed: int
    trial_index: int
    side: float
    bs_xy: np.ndarray
    ue_xy: np.ndarray
    typical_index: int
    all_active: bool = False
    discarded: bool = False
    associations: np.ndarray | None = None
    active_mask: np.ndarray | None = None

    def los_flags(self, ue_indices, bs_indices, model: PathLossModel) -> np.ndarray:
        """LoS flags for given (ue, bs) index arrays (broadcast), drawn lazily."""
        d = self.torus_distances(ue_indices, bs_indices)
        u = _hash.pair_uniform(self.seed, self.trial_index, _hash.KIND_LOS,
                               np.asarray(ue_indices, dtype=np.uint64),
                               np.asarray(bs_indices, dtype=np.uint64))
        return u < np.asarray(model.los_prob(np.maximum(d, 1e-12)), dtype=float)

    def torus_distances(self, ue_indices, bs_indices) -> np.ndarray:
        delta = np.abs(self.ue_xy[ue_indices] - self.bs_xy[bs_indices])
        delta = np.minimum(delta, self.side - delta)
        return np.hypot(delta[..., 0], delta[..., 1])

    @property
    def active_set(self) -> np.ndarray:
        if self.active_mask is None:
            raise RuntimeError("associate() has not run yet")
        return np.nonzero(self.active_mask)[0]


@dataclass(frozen=True)
class TrialSample:
    sinr: float
    n_active: int
    has_coverage_sample: bool
    serving_index: int = -1
    serving_distance: float = math.nan
    serving_los: bool = False


def generate_realization(cfg: SimConfig, trial_index: int) -> Realization:
    """Drop one network; deterministic given (cfg.seed, trial_index)."""
    rng = np.random.Generator(np.random.Philox(key=np.array(
        [cfg.seed, trial_index], dtype=np.uint64)))
    area = cfg.region_side ** 2
    n_bs = int(rng.poisson(cfg.lam * area))
    if cfg.all_active:
        bs_xy = rng.random((n_bs, 2)) * cfg.region_side
        ue_xy = rng.random((1, 2)) * cfg.region_side
        typical = 0
    else:
        n_ue = int(rng.poisson(cfg.rho * area))
        bs_xy = rng.random((n_bs, 2)) * cfg.region_side
        ue_xy = rng.random((n_ue, 2)) * cfg.region_side
        typical = int(rng.integers(n_ue)) if n_ue > 0 else -1
    return Realization(
        seed=cfg.seed, trial_index=trial_index, side=cfg.region_side,
        bs_xy=bs_xy, ue_xy=ue_xy, typical_index=typical,
        all_active=cfg.all_active, discarded=(n_bs == 0),
    )


def _associate_reference(real: Realization, model: PathLossModel) -> np.ndarray:
    """Exact full-matrix association; the slow path and test oracle."""
    n_ue = real.ue_xy.shape[0]
    n_bs = real.bs_xy.shape[0]
    serving = np.empty(n_ue, dtype=np.int64)
    a_l = np.asarray([s.a_los for s in model.segments])
    chunk = max(1, int(4.0e6 // max(n_bs, 1)))
    js = np.arange(n_bs, dtype=np.uint64)
    for lo in range(0, n_ue, chunk):
        hi = min(lo + chunk, n_ue)
        idx = np.arange(lo, hi)
        d = real.torus_distances(idx[:, None], js.astype(np.int64)[None, :])
        d = np.maximum(d, 1e-12)
        u = _hash.pair_uniform(real.seed, real.trial_index, _hash.KIND_LOS,
                               idx[:, None].astype(np.uint64), js[None, :])
        flags = u < np.asarray(model.los_prob(d), dtype=float)
        d_los = np.where(flags, d, np.inf)
        d_nlos = np.where(flags, np.inf, d)
        jl = np.argmin(d_los, axis=1)
        jn = np.argmin(d_nlos, axis=1)
        dl = d_los[np.arange(len(idx)), jl]
        dn = d_nlos[np.arange(len(idx)), jn]
        zl = np.where(np.isfinite(dl), model.loss(np.minimum(dl, 1e300), LinkType.LOS), -1.0)
        zn = np.where(np.isfinite(dn), model.loss(np.minimum(dn, 1e300), LinkType.NLOS), -1.0)
        pick_los = (zl > zn) | ((zl == zn) & ((dl < dn) | ((dl == dn) & (jl < jn))))
        serving[lo:hi] = np.where(pick_los, jl, jn)
    return serving


def _associate_kernel(real: Realization, model: PathLossModel, kind: int) -> np.ndarray:
    n_bs = real.bs_xy.shape[0]
    side = real.side
    # about 1.4 BSs per cell keeps ring scans short
    m = max(1, min(int(math.sqrt(n_bs) / 1.2), 4096))
    h = side / m
    cx = np.minimum((real.bs_xy[:, 0] / h).astype(np.int64), m - 1)
    cy = np.minimum((real.bs_xy[:, 1] / h).astype(np.int64), m - 1)
    cell = cx * m + cy
    order = np.argsort(cell, kind="stable")
    cell_items = order.astype(np.int64)
    cell_start = np.searchsorted(cell[order], np.arange(m * m + 1)).astype(np.int64)
    p = list(model.los_params) + [0.0, 0.0, 0.0]
    seg = model.segments[0]
    serving = np.empty(real.ue_xy.shape[0], dtype=np.int64)
    _kernels.associate_kernel(
        real.bs_xy[:, 0], real.bs_xy[:, 1],
        real.ue_xy[:, 0], real.ue_xy[:, 1],
        side, m, cell_start, cell_items,
        kind, p[0], p[1], p[2],
        seg.a_los, seg.alpha_los, seg.a_nlos, seg.alpha_nlos,
        model.los_support_radius,
        np.uint64(real.seed), np.uint64(real.trial_index), serving,
    )
    return serving


def associate(real: Realization, model: PathLossModel) -> Realization:
    """Attach associations and the active set to a realization."""
    if real.discarded:
        return real
    n_bs = real.bs_xy.shape[0]
    if real.all_active:
        real.active_mask = np.ones(n_bs, dtype=bool)
        return real
    kind = _kernels.kernel_kind(model)
    if real.ue_xy.shape[0] == 0:
        serving = np.empty(0, dtype=np.int64)
    elif kind is None:
        serving = _associate_reference(real, model)
    else:
        serving = _associate_kernel(real, model, kind)
    real.associations = serving
    mask = np.zeros(n_bs, dtype=bool)
    mask[serving] = True
    real.active_mask = mask
    return real


def _fading_gain(cfg: SimConfig, real: Realization, t: int, js: np.ndarray,
                 dist: np.ndarray) -> np.ndarray:
    seed, k = real.seed, real.trial_index
    iu = np.uint64(t)
    ju = js.astype(np.uint64)
    if cfg.fading == "rayleigh":
        return _hash.pair_exponential(seed, k, _hash.KIND_FADE_A, iu, ju)
    # distance-dependent Rician: K[dB] = 13 - 0.03 * r_meters
    k_db = 13.0 - 0.03 * dist * 1000.0
    kf = 10.0 ** (k_db / 10.0)
    z1, z2 = _hash.pair_normal_pair(seed, k, iu, ju)
    mu = np.sqrt(kf / (kf + 1.0))
    s = np.sqrt(0.5 / (kf + 1.0))
    return (mu + s * z1) ** 2 + (s * z2) ** 2


def _shadow_factor(cfg: SimConfig, real: Realization, t: int, js: np.ndarray) -> np.ndarray:
    if cfg.shadowing is None:
        return np.ones(js.shape[0])
    sigma, tau = cfg.shadowing
    iu = np.uint64(t)
    zc, _ = _hash.pair_normal_pair(real.seed, real.trial_index, iu, np.uint64(0),
                                   _hash.KIND_SHADOW_COMMON_A, _hash.KIND_SHADOW_COMMON_B)
    zl, _ = _hash.pair_normal_pair(real.seed, real.trial_index, iu, js.astype(np.uint64),
                                   _hash.KIND_SHADOW_LINK_A, _hash.KIND_SHADOW_LINK_B)
    s_db = sigma * (math.sqrt(tau) * zc + math.sqrt(1.0 - tau) * zl)
    return 10.0 ** (s_db / 10.0)


def measure(real: Realization, cfg: SimConfig, model: PathLossModel | None = None) -> TrialSample:
    """SINR of the typical UE plus the trial's active count."""
    model = cfg.model if model is None else model
    if real.active_mask is None:
        raise RuntimeError("associate() must run before measure()")
    n_active = int(np.count_nonzero(real.active_mask))
    t = real.typical_index
    if t < 0:
        return TrialSample(math.nan, n_active, False)
    n_bs = real.bs_xy.shape[0]
    js = np.arange(n_bs, dtype=np.int64)
    d = np.maximum(real.torus_distances(np.full(n_bs, t), js), 1e-12)
    flags = real.los_flags(np.full(n_bs, t), js, model)
    zeta = np.where(flags, model.loss(d, LinkType.LOS), model.loss(d, LinkType.NLOS))

    # serving = smallest path loss, ties to nearer then lower index
    dl = np.where(flags, d, np.inf)
    dn = np.where(flags, np.inf, d)
    jl, jn = int(np.argmin(dl)), int(np.argmin(dn))
    zl = float(zeta[jl]) if math.isfinite(dl[jl]) else -1.0
    zn = float(zeta[jn]) if math.isfinite(dn[jn]) else -1.0
    if zl > zn or (zl == zn and (dl[jl] < dn[jn] or (dl[jl] == dn[jn] and jl < jn))):
        serving = jl
    else:
        serving = jn

    gains = _fading_gain(cfg, real, t, js, d)
    zeta_pow = zeta * _shadow_factor(cfg, real, t, js)
    interferers = real.active_mask.copy()
    interferers[serving] = False
    i_agg = float(np.sum(cfg.tx_power_mw * zeta_pow[interferers] * gains[interferers]))
    signal = cfg.tx_power_mw * zeta_pow[serving] * gains[serving]
    denom = i_agg + cfg.noise_mw
    sinr = math.inf if denom == 0.0 else signal / denom
    return TrialSample(
        sinr=sinr, n_active=n_active, has_coverage_sample=True,
        serving_index=serving, serving_distance=float(d[serving]),
        serving_los=bool(flags[serving]),
    )


@dataclass
class _Accum:
    gammas: np.ndarray
    n_trials: int = 0
    n_discarded: int = 0
    n_cov: int = 0
    n_inf: int = 0
    cov_counts: np.ndarray = None
    sum_act: float = 0.0
    sum_act2: float = 0.0
    sum_se: float = 0.0
    sum_se2: float = 0.0
    sum_act_se: float = 0.0

    def __post_init__(self):
        if self.cov_counts is None:
            self.cov_counts = np.zeros(self.gammas.size, dtype=np.int64)

    def add(self, sample: TrialSample | None, gamma0: float):
        self.n_trials += 1
        if sample is None:
            self.n_discarded += 1
            return
        self.sum_act += sample.n_active
        self.sum_act2 += sample.n_active ** 2
        if not sample.has_coverage_sample:
            return
        self.n_cov += 1
        sinr = sample.sinr
        if math.isinf(sinr):
            self.n_inf += 1
            sinr = _SINR_CAP
        self.cov_counts += (sinr > self.gammas)
        se = math.log2(1.0 + sinr) if sinr > gamma0 else 0.0
        self.sum_se += se
        self.sum_se2 += se * se
        self.sum_act_se += sample.n_active * se

    def merge(self, other: "_Accum"):
        self.n_trials += other.n_trials
        self.n_discarded += other.n_discarded
        self.n_cov += other.n_cov
        self.n_inf += other.n_inf
        self.cov_counts += other.cov_counts
        self.sum_act += other.sum_act
        self.sum_act2 += other.sum_act2
        self.sum_se += other.sum_se
        self.sum_se2 += other.sum_se2
        self.sum_act_se += other.sum_act_se


@dataclass(frozen=True)
class SimStats:
    """Monte Carlo estimates; CI fields are 95% half-widths."""

    gamma_grid: np.ndarray
    coverage: np.ndarray
    coverage_ci95: np.ndarray
    active_density: float
    active_density_ci95: float
    ase_estimate: float
    ase_ci95: float
    gamma0: float
    trials_used: int
    trials_discarded: int
    coverage_samples: int
    inf_sinr_count: int
    area: float
    seed: int


def _run_span(cfg: SimConfig, lo: int, hi: int) -> _Accum:
    acc = _Accum(np.asarray(cfg.gamma_grid, dtype=float))
    g0 = cfg.gamma0_eff
    for k in range(lo, hi):
        real = generate_realization(cfg, k)
        if real.discarded:
            acc.add(None, g0)
            continue
        associate(real, cfg.model)
        acc.add(measure(real, cfg), g0)
    return acc


def run(cfg: SimConfig, threads: int = 1) -> SimStats:
    """Aggregate cfg.trials independent trials into SimStats."""
    if threads <= 1 or cfg.trials < 4:
        acc = _run_span(cfg, 0, cfg.trials)
    else:
        n_chunks = min(max(threads * 4, 1), cfg.trials)
        edges = np.linspace(0, cfg.trials, n_chunks + 1).astype(int)
        acc = _Accum(np.asarray(cfg.gamma_grid, dtype=float))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futs = [pool.submit(_run_span, cfg, int(a), int(b))
                    for a, b in zip(edges, edges[1:]) if b > a]
            for f in futs:
                acc.merge(f.result())

    area = cfg.region_side ** 2
    n_ok = acc.n_trials - acc.n_discarded
    if n_ok == 0:
        raise ArithmeticError("every trial was discarded (no BSs in region)")
    lam_hat = acc.sum_act / n_ok / area
    var_act = max(acc.sum_act2 / n_ok - (acc.sum_act / n_ok) ** 2, 0.0)
    lam_ci = _Z95 * math.sqrt(var_act / n_ok) / area

    if acc.n_cov > 0:
        p = acc.cov_counts / acc.n_cov
        p_ci = _Z95 * np.sqrt(p * (1.0 - p) / acc.n_cov)
        se_mean = acc.sum_se / acc.n_cov
        var_se = max(acc.sum_se2 / acc.n_cov - se_mean ** 2, 0.0)
        cov_ase = acc.sum_act_se / acc.n_cov - (acc.sum_act / n_ok) * se_mean
        ase_hat = lam_hat * se_mean
        var_ase = (
            (acc.sum_act / n_ok) ** 2 * var_se
            + se_mean ** 2 * var_act
            + 2.0 * (acc.sum_act / n_ok) * se_mean * cov_ase
        ) / acc.n_cov
        ase_ci = _Z95 * math.sqrt(max(var_ase, 0.0)) / area
    else:
        p = np.full(acc.gammas.size, math.nan)
        p_ci = np.full(acc.gammas.size, math.nan)
        ase_hat, ase_ci = math.nan, math.nan

    return SimStats(
        gamma_grid=np.asarray(cfg.gamma_grid, dtype=float),
        coverage=p, coverage_ci95=p_ci,
        active_density=lam_hat, active_density_ci95=lam_ci,
        ase_estimate=ase_hat, ase_ci95=ase_ci, gamma0=cfg.gamma0_eff,
        trials_used=n_ok, trials_discarded=acc.n_discarded,
        coverage_samples=acc.n_cov, inf_sinr_count=acc.n_inf,
        area=area, seed=cfg.seed,
    )

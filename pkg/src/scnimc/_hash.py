"""Counter-based per-link randomness.

Every per-pair random quantity in the simulator (LoS flags, fading draws,
shadowing components) is a pure function of (seed, trial, kind, i, j).
This makes trials reproducible and order-independent: the same link gets
the same draw no matter which code path touches it, so the vectorized
NumPy reference and the numba kernel are bit-identical.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xFF51AFD7ED558CCD)
_MIX2 = np.uint64(0xC4CEB9FE1A85EC53)
_S33 = np.uint64(33)
_S11 = np.uint64(11)
_ONE = np.uint64(1)

# draw kinds; keep in sync with _kernels.py
KIND_LOS = 1
KIND_FADE_A = 2
KIND_FADE_B = 3
KIND_SHADOW_COMMON_A = 4
KIND_SHADOW_COMMON_B = 5
KIND_SHADOW_LINK_A = 6
KIND_SHADOW_LINK_B = 7

_INV_2_53 = 2.0 ** -53


def _mix64(x):
    # splitmix64 finalizer; works on uint64 scalars and arrays
    x = x ^ (x >> _S33)
    x = x * _MIX1
    x = x ^ (x >> _S33)
    x = x * _MIX2
    x = x ^ (x >> _S33)
    return x


def pair_uniform(seed, trial, kind, i, j):
    """Uniform in (0, 1) for link (i, j) of a trial; vectorized over i/j."""
    with np.errstate(over="ignore"):
        h = np.uint64(seed)
        h = _mix64(h ^ (_GOLDEN * (np.uint64(trial) + _ONE)))
        h = _mix64(h ^ (_GOLDEN * (np.uint64(kind) + _ONE)))
        h = _mix64(h ^ (_GOLDEN * (np.asarray(i, dtype=np.uint64) + _ONE)))
        h = _mix64(h ^ (_GOLDEN * (np.asarray(j, dtype=np.uint64) + _ONE)))
    u = ((h >> _S11).astype(np.float64) + 0.5) * _INV_2_53
    return u


def pair_exponential(seed, trial, kind, i, j):
    """Unit-mean exponential draw for link (i, j)."""
    return -np.log(pair_uniform(seed, trial, kind, i, j))


def pair_normal_pair(seed, trial, i, j, kind_a=KIND_FADE_A, kind_b=KIND_FADE_B):
    """Two independent standard normals per link via Box-Muller."""
    u1 = pair_uniform(seed, trial, kind_a, i, j)
    u2 = pair_uniform(seed, trial, kind_b, i, j)
    rad = np.sqrt(-2.0 * np.log(u1))
    return rad * np.cos(2.0 * np.pi * u2), rad * np.sin(2.0 * np.pi * u2)

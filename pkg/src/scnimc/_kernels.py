"""Numba association kernel used by the simulator's fast path.

The per-UE scan walks cell rings outward and stops once no unexamined BS
can beat the current best path loss. LoS flags come from the same
counter-based hash as the NumPy reference (_hash.pair_uniform), so both
paths produce identical associations.
"""

import math

import numpy as np

try:
    import numba as nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    nb = None
    HAVE_NUMBA = False

# LoS probability kinds understood by the kernel
LOS_KIND_ZERO = 0
LOS_KIND_LINEAR = 1
LOS_KIND_TWO_PIECE_EXP = 2

_KIND_CODES = {"zero": LOS_KIND_ZERO, "linear": LOS_KIND_LINEAR,
               "two_piece_exp": LOS_KIND_TWO_PIECE_EXP}


def kernel_kind(model):
    """Kernel LoS code for a model, or None when no fast path applies."""
    if not HAVE_NUMBA or not model.uniform_power_law:
        return None
    return _KIND_CODES.get(model.los_kind)


if HAVE_NUMBA:

    _U1 = np.uint64(1)
    _GOLDEN = np.uint64(0x9E3779B97F4A7C15)
    _M1 = np.uint64(0xFF51AFD7ED558CCD)
    _M2 = np.uint64(0xC4CEB9FE1A85EC53)
    _KIND_LOS = np.uint64(1)

    @nb.njit(nb.uint64(nb.uint64), cache=True, inline="always")
    def _mix64(x):
        x ^= x >> np.uint64(33)
        x *= _M1
        x ^= x >> np.uint64(33)
        x *= _M2
        x ^= x >> np.uint64(33)
        return x

    @nb.njit(nb.float64(nb.uint64, nb.uint64, nb.uint64, nb.uint64, nb.uint64),
             cache=True, inline="always")
    def pair_uniform_scalar(seed, trial, kind, i, j):
        h = seed
        h = _mix64(h ^ (_GOLDEN * (trial + _U1)))
        h = _mix64(h ^ (_GOLDEN * (kind + _U1)))
        h = _mix64(h ^ (_GOLDEN * (i + _U1)))
        h = _mix64(h ^ (_GOLDEN * (j + _U1)))
        return (np.float64(h >> np.uint64(11)) + 0.5) * (2.0 ** -53)

    @nb.njit(nb.float64(nb.float64, nb.int64, nb.float64, nb.float64, nb.float64),
             cache=True, inline="always")
    def _los_prob_scalar(d, kind, p0, p1, p2):
        if kind == LOS_KIND_ZERO:
            return 0.0
        if kind == LOS_KIND_LINEAR:
            return 1.0 - d / p0 if d <= p0 else 0.0
        # two-piece exponential: p0=R1, p1=R2, p2=d1
        if d <= p2:
            v = 1.0 - 5.0 * math.exp(-p0 / d)
            return v if v > 0.0 else 0.0
        v = 5.0 * math.exp(-d / p1)
        return v if v < 1.0 else 1.0

    @nb.njit(cache=True)
    def associate_kernel(bs_x, bs_y, ue_x, ue_y, side, m, cell_start, cell_items,
                         los_kind, p0, p1, p2, a_l, al_l, a_nl, al_nl,
                         r_los_eff, seed, trial, serving):
        """Fill serving[i] with the argmax-gain BS index for every UE."""
        n_ue = ue_x.shape[0]
        n_bs = bs_x.shape[0]
        h_cell = side / m
        half = 0.5 * side
        ring_cap = (m - 1) // 2
        for i in range(n_ue):
            x = ue_x[i]
            y = ue_y[i]
            cx = int(x / h_cell)
            cy = int(y / h_cell)
            if cx >= m:
                cx = m - 1
            if cy >= m:
                cy = m - 1
            best_ld = np.inf   # nearest LoS-flagged BS
            best_lj = -1
            best_nd = np.inf   # nearest NLoS-flagged BS
            best_nj = -1
            done = False
            ring = 0
            while ring <= ring_cap:
                for dx in range(-ring, ring + 1):
                    adx = dx if dx >= 0 else -dx
                    if adx == ring:
                        dy_lo, dy_hi, dy_step = -ring, ring, 1
                    else:
                        dy_lo, dy_hi, dy_step = -ring, ring, 2 * ring if ring > 0 else 1
                    dy = dy_lo
                    while dy <= dy_hi:
                        ccx = (cx + dx) % m
                        ccy = (cy + dy) % m
                        c = ccx * m + ccy
                        for k in range(cell_start[c], cell_start[c + 1]):
                            j = cell_items[k]
                            ddx = x - bs_x[j]
                            if ddx < 0.0:
                                ddx = -ddx
                            if ddx > half:
                                ddx = side - ddx
                            ddy = y - bs_y[j]
                            if ddy < 0.0:
                                ddy = -ddy
                            if ddy > half:
                                ddy = side - ddy
                            d = math.sqrt(ddx * ddx + ddy * ddy)
                            if d < 1e-12:
                                d = 1e-12
                            pl = _los_prob_scalar(d, los_kind, p0, p1, p2)
                            is_los = False
                            if pl > 0.0:
                                u = pair_uniform_scalar(seed, trial, _KIND_LOS,
                                                        np.uint64(i), np.uint64(j))
                                is_los = u < pl
                            if is_los:
                                if d < best_ld or (d == best_ld and j < best_lj):
                                    best_ld = d
                                    best_lj = j
                            else:
                                if d < best_nd or (d == best_nd and j < best_nj):
                                    best_nd = d
                                    best_nj = j
                        dy += dy_step
                # distance to any unexamined BS exceeds ring * h_cell
                dmin = ring * h_cell
                if dmin > 0.0 and (best_lj >= 0 or best_nj >= 0):
                    best_z = -1.0
                    if best_lj >= 0:
                        best_z = a_l * best_ld ** (-al_l)
                    if best_nj >= 0:
                        zn = a_nl * best_nd ** (-al_nl)
                        if zn > best_z:
                            best_z = zn
                    bound = a_nl * dmin ** (-al_nl)
                    if dmin < r_los_eff:
                        bl = a_l * dmin ** (-al_l)
                        if bl > bound:
                            bound = bl
                    if bound <= best_z:
                        done = True
                        break
                ring += 1
            if not done and ring > ring_cap:
                # rare fallback: brute force over every BS (flags re-hash
                # identically, so revisiting pairs is harmless)
                for j in range(n_bs):
                    ddx = x - bs_x[j]
                    if ddx < 0.0:
                        ddx = -ddx
                    if ddx > half:
                        ddx = side - ddx
                    ddy = y - bs_y[j]
                    if ddy < 0.0:
                        ddy = -ddy
                    if ddy > half:
                        ddy = side - ddy
                    d = math.sqrt(ddx * ddx + ddy * ddy)
                    if d < 1e-12:
                        d = 1e-12
                    pl = _los_prob_scalar(d, los_kind, p0, p1, p2)
                    is_los = False
                    if pl > 0.0:
                        u = pair_uniform_scalar(seed, trial, _KIND_LOS,
                                                np.uint64(i), np.uint64(j))
                        is_los = u < pl
                    if is_los:
                        if d < best_ld or (d == best_ld and j < best_lj):
                            best_ld = d
                            best_lj = j
                    else:
                        if d < best_nd or (d == best_nd and j < best_nj):
                            best_nd = d
                            best_nj = j
            # pick the stronger of the two per-type champions
            if best_lj < 0:
                serving[i] = best_nj
            elif best_nj < 0:
                serving[i] = best_lj
            else:
                zl = a_l * best_ld ** (-al_l)
                zn = a_nl * best_nd ** (-al_nl)
                if zl > zn:
                    serving[i] = best_lj
                elif zn > zl:
                    serving[i] = best_nj
                elif best_ld < best_nd or (best_ld == best_nd and best_lj < best_nj):
                    serving[i] = best_lj
                else:
                    serving[i] = best_nj
        return 0

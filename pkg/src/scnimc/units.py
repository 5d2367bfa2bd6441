"""dB/dBm conversions; internal computations stay linear (mW, km)."""

import numpy as np

__all__ = ["db_to_linear", "linear_to_db", "dbm_to_mw", "mw_to_dbm"]


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_mw(p_dbm):
    return 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


def mw_to_dbm(p_mw):
    return 10.0 * np.log10(np.asarray(p_mw, dtype=float))

"""Transmit power scaling, node power profiles and energy efficiency.

Transmit power follows the cell-edge SNR rule: each BS serves an
equivalent disk of area 1/lam and must deliver eta0 of SNR through the
NLoS loss at the disk edge, so P falls as the network densifies. Total
node power is profile-driven: either a parametric P0 + P(lam)/mu shape or
an explicit per-density table, with idle draw depending on the idle mode.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources

import numpy as np

from . import coverage as _coverage
from .pathloss import LinkType, PathLossModel

__all__ = [
    "ImcMode",
    "PowerProfile",
    "tx_power",
    "node_power",
    "energy_efficiency",
    "default_profile",
]

_W_TO_MW = 1.0e3

FUTURISTIC15_FRACTION = 0.15
FUTURISTIC1_FRACTION = 0.01


class ImcMode(Enum):
    """Idle-mode flavor of a muted BS; ALL_ACTIVE disables muting."""

    ALL_ACTIVE = "all_active"
    SLOW_IDLE = "slow_idle"
    SHUT_DOWN = "shut_down"
    FUTURISTIC_15 = "futuristic15"
    FUTURISTIC_1 = "futuristic1"


def _interp_loglog(table, lam):
    xs = np.log10([t[0] for t in table])
    ys = np.log10([t[1] for t in table])
    return 10.0 ** np.interp(np.log10(lam), xs, ys)


@dataclass(frozen=True)
class PowerProfile:
    """Per-BS total power vs density, for active and idle states (mW).

    Active power is either p0 + tx/amp_efficiency or a (lam, W) table with
    log-log interpolation. Idle powers for the two futuristic modes are
    fixed fractions (15% and 1%) of the slow-idle draw.
    """

    p0_mw: float | None = None
    amp_efficiency: float | None = None
    active_table: tuple | None = None
    slow_idle_mw: float = 400.0
    shut_down_mw: float = 250.0
    slow_idle_table: tuple | None = None
    shut_down_table: tuple | None = None

    def __post_init__(self):
        if self.active_table is None:
            if self.p0_mw is None or self.amp_efficiency is None:
                raise ValueError("profile needs either an active table or (p0, amp_efficiency)")
            if self.p0_mw <= 0.0 or not 0.0 < self.amp_efficiency <= 1.0:
                raise ValueError("p0 must be positive, amplifier efficiency in (0, 1]")
        if self.slow_idle_mw <= 0.0 or self.shut_down_mw <= 0.0:
            raise ValueError("idle powers must be positive")
        if self.shut_down_mw >= self.slow_idle_mw:
            raise ValueError("shut-down idle power must fall below slow idle")

    def active_total_mw(self, lam, tx_power_mw=None):
        if self.active_table is not None:
            return float(_interp_loglog(self.active_table, lam))
        if tx_power_mw is None:
            raise ValueError("parametric profile needs the transmit power")
        return self.p0_mw + tx_power_mw / self.amp_efficiency

    def idle_total_mw(self, mode: ImcMode, lam):
        slow = (
            float(_interp_loglog(self.slow_idle_table, lam))
            if self.slow_idle_table is not None
            else self.slow_idle_mw
        )
        if mode is ImcMode.ALL_ACTIVE:
            return 0.0
        if mode is ImcMode.SLOW_IDLE:
            return slow
        if mode is ImcMode.SHUT_DOWN:
            return (
                float(_interp_loglog(self.shut_down_table, lam))
                if self.shut_down_table is not None
                else self.shut_down_mw
            )
        if mode is ImcMode.FUTURISTIC_15:
            return FUTURISTIC15_FRACTION * slow
        if mode is ImcMode.FUTURISTIC_1:
            return FUTURISTIC1_FRACTION * slow
        raise ValueError(f"unknown idle mode {mode}")

    @staticmethod
    def _parse_table(text):
        rows = []
        for item in text.split(","):
            lam_s, w_s = item.split(":")
            rows.append((float(lam_s), float(w_s) * _W_TO_MW))
        rows.sort()
        if len(rows) < 2:
            raise ValueError("power table needs at least two (lam, W) pairs")
        return tuple(rows)

    @classmethod
    def from_ini(cls, text: str) -> "PowerProfile":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        known = {"active": {"p0_w", "amp_efficiency", "table"},
                 "idle": {"slow_idle_w", "shut_down_w", "slow_idle_table", "shut_down_table"}}
        for section in cp.sections():
            if section not in known:
                raise ValueError(f"unknown profile section [{section}]")
            extra = set(cp[section]) - known[section]
            if extra:
                raise ValueError(f"unknown keys in [{section}]: {sorted(extra)}")
        act = cp["active"] if cp.has_section("active") else {}
        idl = cp["idle"] if cp.has_section("idle") else {}
        kwargs = {}
        if "table" in act:
            kwargs["active_table"] = cls._parse_table(act["table"])
        else:
            kwargs["p0_mw"] = float(act.get("p0_w", "nan")) * _W_TO_MW
            kwargs["amp_efficiency"] = float(act.get("amp_efficiency", "nan"))
        if "slow_idle_table" in idl:
            kwargs["slow_idle_table"] = cls._parse_table(idl["slow_idle_table"])
        if "shut_down_table" in idl:
            kwargs["shut_down_table"] = cls._parse_table(idl["shut_down_table"])
        if "slow_idle_w" in idl:
            kwargs["slow_idle_mw"] = float(idl["slow_idle_w"]) * _W_TO_MW
        if "shut_down_w" in idl:
            kwargs["shut_down_mw"] = float(idl["shut_down_w"]) * _W_TO_MW
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "PowerProfile":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_ini(fh.read())


def default_profile() -> PowerProfile:
    """Profile shipped with the package, calibrated by scripts/calibrate_power_profile.py."""
    text = resources.files("scnimc").joinpath("data/default_power_profile.ini").read_text()
    return PowerProfile.from_ini(text)


def tx_power(lam: float, eta0: float, model: PathLossModel,
             noise_mw: float = 10.0 ** -9.5) -> float:
    """Transmit power (mW) giving linear SNR eta0 at the NLoS cell edge.

    The cell edge sits at r0 = sqrt(1/(lam*pi)), the radius of a disk of
    area 1/lam.
    """
    if lam <= 0.0 or eta0 <= 0.0 or noise_mw <= 0.0:
        raise ValueError("density, SNR target and noise must be positive")
    r0 = math.sqrt(1.0 / (lam * math.pi))
    return eta0 * noise_mw / float(model.loss(r0, LinkType.NLOS))


def node_power(profile: PowerProfile, mode: ImcMode, lam: float,
               tx_power_mw: float | None = None) -> tuple[float, float]:
    """(P_ACT_TOT, P_IMC_TOT) in mW for one BS at density lam."""
    act = profile.active_total_mw(lam, tx_power_mw)
    idle = profile.idle_total_mw(mode, lam)
    if mode is not ImcMode.ALL_ACTIVE and act <= idle:
        raise ValueError(f"active power {act} mW does not exceed idle power {idle} mW")
    return act, idle


def energy_efficiency(
    model: PathLossModel,
    params: _coverage.NetworkParams,
    gamma0: float,
    profile: PowerProfile,
    mode: ImcMode,
    active_density: float | None = None,
) -> float:
    """Network energy efficiency in bits/J.

    ALL_ACTIVE forces lam_tilde = lam in both the spectral term and the
    power term; otherwise idle BSs draw the mode's idle power.
    """
    lam = params.lam
    lam_t = lam if mode is ImcMode.ALL_ACTIVE else (
        lam if active_density is None else float(active_density)
    )
    spectral = _coverage.ase(model, params, gamma0,
                             None if mode is ImcMode.ALL_ACTIVE else active_density)
    act_mw, idle_mw = node_power(profile, mode, lam, params.tx_power_mw)
    area_power_w = (lam_t * act_mw + (lam - lam_t) * idle_mw) / _W_TO_MW
    if area_power_w <= 0.0:
        raise ArithmeticError("non-positive area power")
    return spectral * params.bandwidth_hz / area_power_w

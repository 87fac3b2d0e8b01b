"""Drive power at the device, circulating photon number, and Qc from Rabi rate."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import CONSTANTS, dbm_to_watt
from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class LineBudget:
    """VNA output power and the input-line attenuation table.

    ``attenuation_table`` is an (K, 2) array of ``(frequency_hz, attenuation_db)``
    interpolated linearly in dB.
    """

    vna_power_dbm: float
    attenuation_table: np.ndarray
    uncertainty_db: float = 1.0

    def __post_init__(self):
        t = np.array(self.attenuation_table, dtype=float)
        if t.ndim != 2 or t.shape[1] != 2 or t.shape[0] < 1:
            raise ValidationError("attenuation_table must be a list of [hz, db] pairs", "invalid-line-budget")
        if not np.all(np.isfinite(t)):
            raise ValidationError("attenuation_table contains NaN/Inf", "invalid-line-budget")
        if np.any(t[:, 1] < 0):
            raise ValidationError("attenuation values must be >= 0 dB", "invalid-line-budget")
        if np.any(np.diff(t[:, 0]) <= 0):
            raise ValidationError("attenuation table frequencies must increase", "invalid-line-budget")
        if not (self.uncertainty_db >= 0 and math.isfinite(self.vna_power_dbm)):
            raise ValidationError("uncertainty must be >= 0 and power finite", "invalid-line-budget")
        t.setflags(write=False)
        object.__setattr__(self, "attenuation_table", t)

    def __eq__(self, other):
        if not isinstance(other, LineBudget):
            return NotImplemented
        return (self.vna_power_dbm == other.vna_power_dbm
                and self.uncertainty_db == other.uncertainty_db
                and np.array_equal(self.attenuation_table, other.attenuation_table))

    __hash__ = None

    def attenuation_at(self, f):
        t = self.attenuation_table
        f = float(f)
        if not (t[0, 0] <= f <= t[-1, 0]):
            raise ValidationError(
                f"{f:.6g} Hz is outside the attenuation table [{t[0, 0]:.6g}, {t[-1, 0]:.6g}] Hz",
                "attenuation-unknown")
        return float(np.interp(f, t[:, 0], t[:, 1]))

    def to_dict(self):
        return {"vna_power_dbm": self.vna_power_dbm,
                "attenuation_table": self.attenuation_table.tolist(),
                "uncertainty_db": self.uncertainty_db}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(float(d["vna_power_dbm"]), d["attenuation_table"],
                       float(d.get("uncertainty_db", 1.0)))
        except KeyError as exc:
            raise ValidationError(f"line budget is missing {exc}", "invalid-line-budget") from None


def load_line_budget(path) -> LineBudget:
    return LineBudget.from_dict(json.loads(Path(path).read_text()))


def save_line_budget(path, budget: LineBudget):
    Path(path).write_text(json.dumps(budget.to_dict(), indent=2) + "\n")


def power_at_device(budget: LineBudget, f):
    """Power reaching the device in W and its spread from the dB uncertainty.

    The spread is the upward excursion ``P (10^{u/10} - 1)``, the larger of
    the two one-sided excursions of a +-u dB systematic.
    """
    p = float(dbm_to_watt(budget.vna_power_dbm - budget.attenuation_at(f)))
    return p, p * (10.0 ** (budget.uncertainty_db / 10.0) - 1.0)


def mean_photon_number(p_in, fr, f_drive, q_loaded, q_coupling, q_plus=None, hbar=CONSTANTS.hbar):
    """Average circulating photon number for a drive at ``f_drive``.

    ``q_plus`` is the coupling Q of the drive port; the symmetric hanger
    default is ``2 * q_coupling``.
    """
    if not (q_loaded > 0 and q_coupling > 0):
        raise ValidationError("quality factors must be > 0", "invalid-input")
    if np.any(np.asarray(p_in) < 0):
        raise ValidationError("power must be >= 0", "invalid-input")
    if q_plus is None:
        q_plus = 2.0 * q_coupling
    wr = 2.0 * np.pi * fr
    w = 2.0 * np.pi * np.asarray(f_drive, dtype=float)
    lorentz = 1.0 + 4.0 * q_loaded ** 2 * (w / wr - 1.0) ** 2
    return (4.0 * q_loaded ** 2 / (wr * q_plus)) / lorentz * np.asarray(p_in, dtype=float) / (hbar * w)


def qc_from_rabi(p_in, rabi_rate, hbar=CONSTANTS.hbar):
    """Coupling Q from the drive power and the Rabi rate (rad/s)."""
    if not rabi_rate > 0:
        raise ValidationError("rabi_rate must be > 0", "invalid-input")
    return 2.0 * p_in / (hbar * rabi_rate ** 2)

"""Shared value types, constants and the trace file format.

Units: frequencies in Hz, powers in W at the device, S21 as complex
(real, imag).  Angular frequencies only appear inside formulas.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import constants as _sc

from .errors import ValidationError

MIN_TRACE_POINTS = 7
HANGER_PARAMS = ("amplitude_a", "alpha", "tau", "fr", "q_loaded", "q_coupling_mag", "phi")


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = _sc.hbar
    mu0: float = _sc.mu_0


CONSTANTS = PhysicalConstants()


def dbm_to_watt(p_dbm):
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(p_w):
    return 10.0 * np.log10(np.asarray(p_w, dtype=float)) + 30.0


def from_db_deg(mag_db, phase_deg):
    """Convert VNA-style (dB, degrees) columns to complex S21."""
    mag = 10.0 ** (np.asarray(mag_db, dtype=float) / 20.0)
    return mag * np.exp(1j * np.deg2rad(phase_deg))


def to_db_deg(s21):
    s21 = np.asarray(s21)
    return 20.0 * np.log10(np.abs(s21)), np.rad2deg(np.angle(s21))


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FrequencyTrace:
    """Complex S21 samples on a strictly increasing frequency grid."""

    frequency: np.ndarray
    s21: np.ndarray
    drive_power: Optional[float] = None  # W at device
    label: str = ""

    def __post_init__(self):
        f = np.array(self.frequency, dtype=float).ravel()
        s = np.array(self.s21, dtype=complex).ravel()
        if f.size != s.size:
            raise ValidationError("frequency and s21 lengths differ", "invalid-trace")
        if f.size < MIN_TRACE_POINTS:
            raise ValidationError(
                f"trace has {f.size} points; at least {MIN_TRACE_POINTS} are required",
                "invalid-trace")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(s.real)) and np.all(np.isfinite(s.imag))):
            raise ValidationError("trace contains NaN or Inf", "invalid-trace")
        if np.any(np.diff(f) <= 0):
            raise ValidationError("frequencies must be strictly increasing", "invalid-trace")
        if np.any(np.abs(s) <= 0):
            raise ValidationError("S21 magnitudes must be > 0", "invalid-trace")
        if self.drive_power is not None and not (self.drive_power >= 0 and math.isfinite(self.drive_power)):
            raise ValidationError("drive power must be finite and >= 0", "invalid-trace")
        object.__setattr__(self, "frequency", _readonly(f))
        object.__setattr__(self, "s21", _readonly(s))

    def __len__(self):
        return self.frequency.size

    def __eq__(self, other):
        if not isinstance(other, FrequencyTrace):
            return NotImplemented
        return (np.array_equal(self.frequency, other.frequency)
                and np.array_equal(self.s21, other.s21)
                and self.drive_power == other.drive_power
                and self.label == other.label)

    __hash__ = None

    @property
    def omega(self):
        return 2.0 * np.pi * self.frequency

    def with_s21(self, s21):
        return FrequencyTrace(self.frequency, s21, self.drive_power, self.label)


@dataclass(frozen=True)
class HangerFit:
    """Fitted hanger-model parameters.

    ``sigma`` maps parameter name to its standard deviation and
    ``covariance`` is the full 7x7 matrix in :data:`HANGER_PARAMS` order.
    """

    fr: float
    q_loaded: float
    q_coupling_mag: float
    phi: float
    amplitude_a: float
    alpha: float
    tau: float
    sigma: dict = field(default_factory=dict)
    covariance: Optional[np.ndarray] = field(default=None, compare=False)
    residual_rms: float = 0.0

    def __post_init__(self):
        if not (self.q_loaded > 0 and self.q_coupling_mag > 0):
            raise ValidationError("q_loaded and q_coupling_mag must be > 0", "invalid-fit")

    @property
    def q_coupling_eff(self):
        """Real coupling Q entering 1/Q_L = 1/Q_int + 1/Q_c,eff."""
        return self.q_coupling_mag / math.cos(self.phi)

    def params(self):
        return np.array([getattr(self, k) for k in HANGER_PARAMS])

    def to_dict(self):
        d = {k: getattr(self, k) for k in HANGER_PARAMS}
        d["sigma"] = {k: self.sigma[k] for k in HANGER_PARAMS if k in self.sigma}
        d["residual_rms"] = self.residual_rms
        if self.covariance is not None:
            d["covariance"] = np.asarray(self.covariance).tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        cov = d.get("covariance")
        return cls(**{k: float(d[k]) for k in HANGER_PARAMS},
                   sigma={k: float(v) for k, v in d.get("sigma", {}).items()},
                   covariance=None if cov is None else np.array(cov, dtype=float),
                   residual_rms=float(d.get("residual_rms", 0.0)))


@dataclass(frozen=True)
class ModeRecord:
    mode_id: str
    frequency: float
    q_int: float
    q_int_sigma: float = 0.0
    photon_number: Optional[float] = None
    t1: Optional[float] = None
    t1_sigma: float = 0.0

    def __post_init__(self):
        if not self.q_int > 0:
            raise ValidationError(f"mode {self.mode_id}: q_int must be > 0", "invalid-mode")
        if not self.q_int_sigma >= 0:
            raise ValidationError(f"mode {self.mode_id}: q_int_sigma must be >= 0", "invalid-mode")

    @property
    def kappa(self):
        return 1.0 / self.q_int

    @property
    def kappa_sigma(self):
        return self.q_int_sigma / self.q_int ** 2

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


# ---------------------------------------------------------------------------
# Trace files
# ---------------------------------------------------------------------------

TRACE_HEADER = "frequency_hz,s21_real,s21_imag"
_DB_HEADER = "frequency_hz,s21_db,s21_deg"


def sidecar_path(csv_path):
    p = Path(csv_path)
    return p.with_name(p.stem + ".meta.json")


def read_trace(path, metadata=None) -> FrequencyTrace:
    """Read a trace CSV (and its ``.meta.json`` sidecar when present).

    Accepts either the canonical real/imag columns or ``s21_db,s21_deg``.
    """
    path = Path(path)
    header = None
    rows = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.replace(" ", "")
                if header not in (TRACE_HEADER, _DB_HEADER):
                    raise ValidationError(f"{path}: unexpected header {line!r}", "invalid-trace-file")
                continue
            try:
                row = [float(v) for v in line.split(",")]
                if len(row) != 3:
                    raise ValueError
                rows.append(row)
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: bad row {line!r}", "invalid-trace-file") from None
    if header is None:
        raise ValidationError(f"{path}: missing header", "invalid-trace-file")
    data = np.array(rows, dtype=float).reshape(-1, 3)
    if header == TRACE_HEADER:
        s21 = data[:, 1] + 1j * data[:, 2]
    else:
        s21 = from_db_deg(data[:, 1], data[:, 2])

    if metadata is None:
        side = sidecar_path(path)
        metadata = read_metadata(side) if side.exists() else {}
    power = None
    if metadata.get("power_dbm_at_vna") is not None:
        power = float(dbm_to_watt(float(metadata["power_dbm_at_vna"])
                                  - float(metadata.get("line_attenuation_db", 0.0))))
    return FrequencyTrace(data[:, 0], s21, power, str(metadata.get("label", path.stem)))


def write_trace(path, trace: FrequencyTrace, metadata=None):
    path = Path(path)
    lines = [TRACE_HEADER]
    for f, s in zip(trace.frequency.tolist(), trace.s21.tolist()):
        lines.append(f"{f!r},{s.real!r},{s.imag!r}")
    path.write_text("\n".join(lines) + "\n")
    meta = {"label": trace.label}
    if trace.drive_power is not None:
        meta["power_dbm_at_vna"] = float(watt_to_dbm(trace.drive_power)) if trace.drive_power > 0 else None
        meta["line_attenuation_db"] = 0.0
    if metadata:
        meta.update(metadata)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_metadata(path):
    try:
        meta = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: {exc}", "invalid-metadata") from None
    if not isinstance(meta, dict):
        raise ValidationError(f"{path}: metadata must be an object", "invalid-metadata")
    return meta

"""Synthetic traces and multi-power datasets from a known ground truth.

Used as the forward-model oracle in tests: the analysis chain must
recover what this module put in.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .domain import FrequencyTrace, HangerFit, dbm_to_watt
from .errors import NumericalError, ValidationError
from .factors import DEFAULT_PENETRATION_DEPTH, conductor_loss_factor
from .photon import mean_photon_number
from .sweep import SweepPlan, plan_phase_uniform

FIXED_POINT_DAMPING = 0.5
FIXED_POINT_MAXITER = 100
FIXED_POINT_RTOL = 1e-12


def noise_sigma_from_snr(amplitude, snr_db):
    """Total complex rms noise for a given SNR relative to the off-resonant level."""
    if snr_db is None:
        return 0.0
    return float(amplitude) * 10.0 ** (-float(snr_db) / 20.0)


def hanger_s21(hanger: HangerFit, f):
    """Noiseless hanger response at frequencies ``f``."""
    f = np.asarray(f, dtype=float)
    env = hanger.amplitude_a * np.exp(1j * (hanger.alpha - 2.0 * np.pi * f * hanger.tau))
    dip = (hanger.q_loaded / hanger.q_coupling_mag) * np.exp(1j * hanger.phi) \
        / (1.0 + 2j * hanger.q_loaded * (f / hanger.fr - 1.0))
    return env * (1.0 - dip)


def generate_trace(truth: HangerFit, plan, noise_sigma=0.0, seed=None,
                   drive_power=None, label="") -> FrequencyTrace:
    """Evaluate the hanger model on ``plan`` and add complex Gaussian noise.

    ``noise_sigma`` is the total complex rms; each quadrature gets
    ``noise_sigma / sqrt(2)``.  ``seed`` may be an int or a numpy Generator.
    """
    f = plan.points if isinstance(plan, SweepPlan) else np.asarray(plan, dtype=float)
    s = hanger_s21(truth, f)
    if noise_sigma > 0:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        q = noise_sigma / math.sqrt(2.0)
        s = s + rng.normal(0.0, q, f.size) + 1j * rng.normal(0.0, q, f.size)
    return FrequencyTrace(f, s, drive_power, label)


# ---------------------------------------------------------------------------
# Ground truth for whole datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelTruth:
    """Loss factor of one channel, optionally with TLS saturation.

    ``Gamma(n) = saturated + tls / sqrt(1 + (n/n_critical)^beta)``.  When
    ``surface_resistance`` is given, ``saturated`` is replaced by the
    conductor loss factor at the mode frequency.
    """

    saturated: float = 0.0
    tls: float = 0.0
    n_critical: float = 1.0
    beta: float = 1.0
    surface_resistance: Optional[float] = None
    penetration_depth: float = DEFAULT_PENETRATION_DEPTH

    def value(self, n, f):
        base = self.saturated
        if self.surface_resistance is not None:
            base = conductor_loss_factor(self.surface_resistance, f, self.penetration_depth)
        if self.tls == 0.0:
            return base
        return base + self.tls / math.sqrt(1.0 + (n / self.n_critical) ** self.beta)

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, (int, float)):
            return cls(saturated=float(d))
        return cls(**{k: (None if v is None else float(v)) for k, v in d.items()})


@dataclass(frozen=True)
class ModeTruth:
    q_coupling_mag: float
    phi: float = 0.0
    amplitude_a: float = 1.0
    alpha: float = 0.0
    tau: float = 0.0


@dataclass(frozen=True)
class GroundTruth:
    """Everything needed to simulate a power sweep of several modes."""

    modes: dict
    factors: dict
    snr_db: Optional[float] = 40.0
    seed: int = 0
    sweep_weight: float = 5.0
    sweep_points: int = 101
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, d):
        try:
            modes = {str(k): ModeTruth(**{a: float(b) for a, b in v.items()}) for k, v in d["modes"].items()}
            factors = {str(k): ChannelTruth.from_dict(v) for k, v in d["factors"].items()}
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"ground truth document is malformed: {exc}", "invalid-truth") from None
        return cls(modes, factors, d.get("snr_db", 40.0), int(d.get("seed", 0)),
                   float(d.get("sweep_weight", 5.0)), int(d.get("sweep_points", 101)),
                   {k: v for k, v in d.items()
                    if k not in ("modes", "factors", "snr_db", "seed", "sweep_weight", "sweep_points")})


def load_truth(path) -> GroundTruth:
    return GroundTruth.from_dict(json.loads(Path(path).read_text()))


def internal_loss(matrix, factors, mode_index, n):
    """True 1/Q_int of one mode at photon number n."""
    f = matrix.frequencies[mode_index]
    total = 0.0
    for i, cid in enumerate(matrix.channel_ids):
        p = matrix.values[mode_index, i]
        if p == 0.0:
            continue
        if cid not in factors:
            raise ValidationError(f"ground truth has no factor for channel {cid!r}", "invalid-truth")
        total += p * factors[cid].value(n, f)
    return total


@dataclass(frozen=True)
class PhotonSolution:
    photon_number: float
    q_int: float
    q_loaded: float
    iterations: int


def solve_photon_number(p_in, fr, q_coupling_eff, loss_of_n) -> PhotonSolution:
    """Self-consistent photon number on resonance.

    ``loss_of_n(n)`` returns 1/Q_int.  Iterates with damping 0.5.
    """
    def loaded(n):
        return 1.0 / (loss_of_n(n) + 1.0 / q_coupling_eff)

    n = 0.0
    ql = loaded(n)
    for it in range(1, FIXED_POINT_MAXITER + 1):
        target = float(mean_photon_number(p_in, fr, fr, ql, q_coupling_eff))
        n_new = target if it == 1 else FIXED_POINT_DAMPING * n + (1 - FIXED_POINT_DAMPING) * target
        ql_new = loaded(n_new)
        done = abs(ql_new - ql) <= FIXED_POINT_RTOL * ql and abs(n_new - n) <= FIXED_POINT_RTOL * max(n_new, 1e-300)
        n, ql = n_new, ql_new
        if done or p_in == 0:
            return PhotonSolution(n, 1.0 / loss_of_n(n), ql, it)
    raise NumericalError(f"photon-number fixed point did not converge in {FIXED_POINT_MAXITER} iterations",
                         "fixed-point-not-converged", photon_number=n)


@dataclass(frozen=True)
class SyntheticTrace:
    mode_id: str
    power_dbm: float
    trace: FrequencyTrace
    hanger: HangerFit
    photon_number: float
    q_int: float


def generate_dataset(truth: GroundTruth, powers_dbm, matrix):
    """Traces for every mode at every power (powers are at the device, dBm).

    Returns a list of :class:`SyntheticTrace` ordered by mode then power.
    Each trace uses its own generator seeded from ``(seed, mode, power)``.
    """
    missing = [m for m in matrix.mode_ids if m not in truth.modes]
    if missing:
        raise ValidationError(f"ground truth lacks modes {missing}", "invalid-truth")
    out = []
    for j, mid in enumerate(matrix.mode_ids):
        mt = truth.modes[mid]
        fr = matrix.frequencies[j]
        qc_eff = mt.q_coupling_mag / math.cos(mt.phi)

        def loss_of_n(n, j=j):
            return internal_loss(matrix, truth.factors, j, n)

        for k, pdbm in enumerate(powers_dbm):
            p_in = float(dbm_to_watt(pdbm))
            sol = solve_photon_number(p_in, fr, qc_eff, loss_of_n)
            hanger = HangerFit(fr=fr, q_loaded=sol.q_loaded, q_coupling_mag=mt.q_coupling_mag, phi=mt.phi,
                               amplitude_a=mt.amplitude_a, alpha=mt.alpha, tau=mt.tau)
            span = truth.sweep_weight * fr / sol.q_loaded
            plan = plan_phase_uniform(fr, span, truth.sweep_weight, truth.sweep_points)
            rng = np.random.default_rng([truth.seed, j, k])
            trace = generate_trace(hanger, plan, noise_sigma_from_snr(mt.amplitude_a, truth.snr_db),
                                   rng, drive_power=p_in, label=f"{mid}_{pdbm:+.1f}dBm")
            out.append(SyntheticTrace(mid, float(pdbm), trace, hanger, sol.photon_number, sol.q_int))
    return out

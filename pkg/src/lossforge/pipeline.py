"""Per-trace analysis and power-sweep aggregation."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .circlefit import fit_hanger, internal_q
from .domain import FrequencyTrace, HangerFit, dbm_to_watt
from .errors import ValidationError
from .photon import LineBudget, mean_photon_number
from .tls import TlsFit, fit_tls


@dataclass(frozen=True)
class TraceResult:
    label: str
    fit: HangerFit
    q_int: float
    q_int_sigma: float
    drive_power: Optional[float]
    photon_number: Optional[float]

    def to_dict(self):
        return {"label": self.label, "q_int": self.q_int, "q_int_sigma": self.q_int_sigma,
                "drive_power_w": self.drive_power, "photon_number": self.photon_number,
                "fit": {k: v for k, v in self.fit.to_dict().items() if k != "covariance"}}


def analyze_trace(trace: FrequencyTrace, line_budget: Optional[LineBudget] = None,
                  vna_power_dbm: Optional[float] = None) -> TraceResult:
    """Fit one trace and convert its drive power to a photon number.

    With a ``line_budget`` the attenuation is read at the fitted resonance
    frequency; ``vna_power_dbm`` then overrides the budget's own VNA power.
    Otherwise the trace's own ``drive_power`` is used.
    """
    fit = fit_hanger(trace)
    qi, sq = internal_q(fit)
    power = trace.drive_power
    if line_budget is not None:
        vna = line_budget.vna_power_dbm if vna_power_dbm is None else vna_power_dbm
        power = float(dbm_to_watt(vna - line_budget.attenuation_at(fit.fr)))
    n = None
    if power is not None:
        n = float(mean_photon_number(power, fit.fr, fit.fr, fit.q_loaded, fit.q_coupling_eff))
    return TraceResult(trace.label, fit, qi, sq, power, n)


def _analyze_args(args):
    return analyze_trace(*args)


def analyze_traces(traces, line_budget=None, vna_powers=None, jobs=1):
    """Analyze many traces, optionally in a process pool."""
    vna_powers = list(vna_powers) if vna_powers is not None else [None] * len(traces)
    args = [(t, line_budget, p) for t, p in zip(traces, vna_powers)]
    if jobs and jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_analyze_args, args))
    return [_analyze_args(a) for a in args]


def bin_by_photon_number(results, bins_per_decade=None):
    """Rows ``(n, q_int, q_int_sigma)`` sorted by photon number.

    With ``bins_per_decade`` results falling in the same log bin are merged
    by inverse-variance weighting in loss space.
    """
    rows = [(r.photon_number, r.q_int, r.q_int_sigma) for r in results if r.photon_number]
    if len(rows) != len(results):
        raise ValidationError("every trace needs a drive power to compute a photon number",
                              "missing-power")
    rows.sort()
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    if not bins_per_decade:
        return arr
    keys = np.floor(np.log10(arr[:, 0]) * bins_per_decade).astype(int)
    out = []
    for k in np.unique(keys):
        sel = arr[keys == k]
        kap = 1.0 / sel[:, 1]
        sk = sel[:, 2] / sel[:, 1] ** 2
        if np.all(sk > 0):
            w = 1.0 / sk ** 2
            km = float(np.sum(w * kap) / np.sum(w))
            skm = float(1.0 / math.sqrt(np.sum(w)))
        else:
            km, skm = float(kap.mean()), 0.0
        nm = float(np.exp(np.mean(np.log(sel[:, 0]))))
        out.append((nm, 1.0 / km, skm / km ** 2))
    return np.array(out)


@dataclass(frozen=True)
class PowerSweep:
    results: tuple
    table: np.ndarray   # rows (n, q_int, q_int_sigma)
    tls: Optional[TlsFit]


def power_sweep(traces, line_budget=None, vna_powers=None, jobs=1, bins_per_decade=None,
                fit_model=True) -> PowerSweep:
    results = analyze_traces(traces, line_budget, vna_powers, jobs)
    table = bin_by_photon_number(results, bins_per_decade)
    tls = fit_tls(table) if fit_model else None
    return PowerSweep(tuple(results), table, tls)

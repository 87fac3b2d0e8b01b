"""Frequency-point plans for resonator sweeps.

The phase-uniform plan places points so that consecutive samples are
equally spaced in resonance-circle phase when the weight ``W = span/kappa``
matches the resonator (``kappa = fr/QL``).  The half phase range is
``arctan(W)``; this form has no singularity at ``W = 1``.

All plans are built from a non-negative half of offsets that is then
mirrored, so ``f[-n] - center == -(f[n] - center)`` holds exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ValidationError

SCHEMES = ("linear", "quadratic", "phase-uniform")
MIN_PLAN_POINTS = 7


@dataclass(frozen=True, eq=False)
class SweepPlan:
    center: float
    span: float
    points: np.ndarray
    scheme: str
    weight: Optional[float] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}", "invalid-plan")
        if pts.size < 2 or np.any(np.diff(pts) <= 0):
            raise ValidationError("plan points must be strictly increasing", "invalid-plan")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    def offsets(self):
        return self.points - self.center


def _check_common(center, span, n_points, min_points=MIN_PLAN_POINTS):
    if not (math.isfinite(center) and center > 0):
        raise ValidationError("center must be a positive frequency", "invalid-plan")
    if not (math.isfinite(span) and 0 < span < 2 * center):
        raise ValidationError("span must be positive and smaller than 2*center", "invalid-plan")
    if int(n_points) != n_points or n_points < min_points or n_points % 2 == 0:
        raise ValidationError(f"n_points must be an odd integer >= {min_points}", "invalid-plan")


def _mirror(center, span, half_offsets):
    """Assemble a symmetric plan from offsets for n = 0..M (offset[0] == 0)."""
    # snap each offset onto the float grid around ``center`` so that
    # center - x is exact and the mirror image is exact too
    x = (center + np.asarray(half_offsets, dtype=float)) - center
    x[0] = 0.0
    x[-1] = (center + 0.5 * span) - center
    pts = np.concatenate([center - x[:0:-1], center + x])
    return pts


def plan_linear(center, span, n_points) -> SweepPlan:
    _check_common(center, span, n_points, min_points=3)
    m = (n_points - 1) // 2
    half = 0.5 * span * np.arange(m + 1) / m
    return SweepPlan(center, span, _mirror(center, span, half), "linear")


def quadratic_offsets(n_points):
    """Normalized offsets in [-1, 1] whose spacing grows as k^2 away from the centre.

    The k-th gap (k = 1..M) is proportional to k^2, so the offset of
    point j is j(j+1)(2j+1) / (M(M+1)(2M+1)).  Five points give
    ``[-1, -0.2, 0, 0.2, 1]``.
    """
    if int(n_points) != n_points or n_points < 3 or n_points % 2 == 0:
        raise ValidationError("n_points must be an odd integer >= 3", "invalid-plan")
    m = (n_points - 1) // 2
    j = np.arange(m + 1, dtype=float)
    half = j * (j + 1) * (2 * j + 1) / (m * (m + 1) * (2 * m + 1))
    return np.concatenate([-half[:0:-1], half])


def plan_quadratic(center, span, n_points) -> SweepPlan:
    _check_common(center, span, n_points)
    m = (n_points - 1) // 2
    half = 0.5 * span * quadratic_offsets(n_points)[m:]
    return SweepPlan(center, span, _mirror(center, span, half), "quadratic")


def phase_uniform_offsets(span, weight, n_points):
    """Offsets for n = 0..(N-1)/2 before mirroring."""
    m = (n_points - 1) // 2
    half_angle = math.atan(weight)          # half of the total phase step
    t = np.arange(m + 1) / (n_points - 1)   # 0 .. 1/2
    raw = span / (2.0 * weight) * np.tan(t * 2.0 * half_angle)
    rescale = (0.5 * span) / raw[-1]        # equals 1 up to rounding
    return rescale * raw


def plan_phase_uniform(center, span, weight, n_points) -> SweepPlan:
    if not (math.isfinite(weight) and weight > 0):
        raise ValidationError("weight must be > 0", "invalid-plan")
    _check_common(center, span, n_points)
    half = phase_uniform_offsets(span, weight, n_points)
    return SweepPlan(center, span, _mirror(center, span, half), "phase-uniform", float(weight))


def make_plan(scheme, center, span, n_points, weight=None) -> SweepPlan:
    if scheme == "phase-uniform":
        if weight is None:
            raise ValidationError("phase-uniform plans need a weight", "invalid-plan")
        return plan_phase_uniform(center, span, weight, n_points)
    if scheme == "quadratic":
        return plan_quadratic(center, span, n_points)
    if scheme == "linear":
        return plan_linear(center, span, n_points)
    raise ValidationError(f"unknown scheme {scheme!r}", "invalid-plan")


def circle_phase(frequency, center, q_loaded):
    """Resonance-circle phase relative to the centre frequency."""
    # f - center is exact for nearby floats; f / center - 1 is not
    return 2.0 * np.arctan(2.0 * q_loaded * (np.asarray(frequency) - center) / center)


def phase_gap_metric(plan: SweepPlan, q_loaded) -> float:
    """Largest phase step between adjacent plan points."""
    if not q_loaded > 0:
        raise ValidationError("q_loaded must be > 0", "invalid-plan")
    theta = circle_phase(plan.points, plan.center, q_loaded)
    return float(np.max(np.abs(np.diff(theta))))


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def plan_to_csv(plan: SweepPlan) -> str:
    lines = ["frequency_hz"] + [repr(float(f)) for f in plan.points]
    return "\n".join(lines) + "\n"


def plan_to_segment_table(plan: SweepPlan, ifbw_hz=None, power_dbm=None) -> str:
    """VNA segment table: one single-point segment per frequency, ascending."""
    head = ["# lossforge segment table",
            f"# scheme={plan.scheme} center_hz={plan.center!r} span_hz={plan.span!r}"
            + ("" if plan.weight is None else f" weight={plan.weight!r}"),
            "segment,start_hz,stop_hz,points"
            + (",ifbw_hz" if ifbw_hz is not None else "")
            + (",power_dbm" if power_dbm is not None else "")]
    rows = []
    for k, f in enumerate(plan.points, 1):
        row = f"{k},{float(f)!r},{float(f)!r},1"
        if ifbw_hz is not None:
            row += f",{float(ifbw_hz)!r}"
        if power_dbm is not None:
            row += f",{float(power_dbm)!r}"
        rows.append(row)
    return "\n".join(head + rows) + "\n"


def read_segment_table(path):
    """Frequencies from a segment table written by :func:`plan_to_segment_table`."""
    freqs = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("segment"):
            continue
        parts = line.split(",")
        start, stop, n = float(parts[1]), float(parts[2]), int(parts[3])
        freqs.extend(np.linspace(start, stop, n) if n > 1 else [start])
    return np.array(freqs)

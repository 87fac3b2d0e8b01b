"""Resolution maps: how small a loss factor a device design can resolve.

Two channels are swept over log grids while every other channel is held
at a fixed value.  At each grid point the forward model gives
``kappa = P Gamma``, the measurement error is taken as a fixed fraction
of ``kappa``, and the 2x2 weighted least-squares covariance gives the
fractional error of each swept factor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ValidationError
from .extraction import fixed_contributions
from .factors import as_factor
from .participation import ParticipationMatrix

DEFAULT_FRACTIONAL_SIGMA = 0.10
DEFAULT_GRID_POINTS = 64
DEFAULT_RANGES = {
    "surf": (1e-7, 1e-2),
    "surf_ta": (1e-7, 1e-2),
    "surf_al": (1e-7, 1e-2),
    "bulk": (1e-10, 1e-5),
    "pkg_ma": (1e-4, 1.0),
    "pkg_cond": (1e-6, 1e-2),
    "seam": (1e-5, 1.0),
    "seam_ta_al": (1e-14, 1e-9),
}


@dataclass(frozen=True, eq=False)
class SensitivityMap:
    axes: tuple
    grids: tuple                 # two 1-D arrays
    fractional_error: np.ndarray  # (2, n1, n2), one layer per axis channel
    meas_fractional_sigma: float

    @property
    def resolvable(self):
        return self.fractional_error < 1.0

    @property
    def both_resolvable(self):
        return self.resolvable[0] & self.resolvable[1]

    def floor(self, cid):
        """Smallest grid value of ``cid`` that is resolvable anywhere on the map."""
        k = self.axes.index(cid)
        ok = self.resolvable[k].any(axis=1 - k)
        if not ok.any():
            return float("inf")
        return float(self.grids[k][ok].min())

    def to_dict(self):
        return {"axes": list(self.axes),
                "grids": [g.tolist() for g in self.grids],
                "meas_fractional_sigma": self.meas_fractional_sigma,
                "fractional_error": {a: self.fractional_error[k].tolist() for k, a in enumerate(self.axes)},
                "floors": {a: self.floor(a) for a in self.axes}}


def default_grid(cid, n_points=DEFAULT_GRID_POINTS):
    lo, hi = DEFAULT_RANGES[cid]
    return np.geomspace(lo, hi, n_points)


def _check_grid(g, name):
    g = np.asarray(g, dtype=float).ravel()
    if g.size < 2 or not np.all(np.isfinite(g)) or np.any(g <= 0) or np.any(np.diff(g) <= 0):
        raise ValidationError(f"grid for {name} must have >= 2 positive increasing values", "degenerate-grid")
    return g


def sensitivity_map(matrix: ParticipationMatrix, fixed, axes, grids=None,
                    meas_fractional_sigma=DEFAULT_FRACTIONAL_SIGMA,
                    n_points=DEFAULT_GRID_POINTS) -> SensitivityMap:
    """Fractional errors of two swept channels over a log grid.

    Parameters
    ----------
    fixed : mapping
        Loss factors of every channel except the two ``axes``.
    grids : pair of arrays, optional
        Defaults to ``n_points`` log-spaced values over the usual range of
        each channel.
    """
    axes = tuple(axes)
    if len(axes) != 2 or axes[0] == axes[1]:
        raise ValidationError("exactly two distinct axis channels are required", "invalid-input")
    for a in axes:
        matrix.channel_index(a)
    fixed = {str(k): as_factor(v) for k, v in (fixed or {}).items() if k not in axes}
    others = [c for c in matrix.channel_ids if c not in axes]
    missing = [c for c in others if c not in fixed]
    if missing:
        raise ValidationError(f"channels {missing} must be fixed for a two-axis map", "missing-channel")
    fixed = {c: fixed[c] for c in others}
    if not meas_fractional_sigma > 0:
        raise ValidationError("meas_fractional_sigma must be > 0", "invalid-input")
    if len(matrix.modes) < 2:
        raise ValidationError("need at least two modes to separate two channels", "underdetermined")
    if grids is None:
        grids = (default_grid(axes[0], n_points), default_grid(axes[1], n_points))
    g1 = _check_grid(grids[0], axes[0])
    g2 = _check_grid(grids[1], axes[1])

    p_free = np.ascontiguousarray(np.column_stack([matrix.column(a) for a in axes]))
    kfix, _ = fixed_contributions(matrix, fixed)
    e1, e2 = kernels.sensitivity_grid(p_free, np.ascontiguousarray(kfix), g1, g2,
                                      float(meas_fractional_sigma))
    return SensitivityMap(axes, (g1, g2), np.stack([e1, e2]), float(meas_fractional_sigma))

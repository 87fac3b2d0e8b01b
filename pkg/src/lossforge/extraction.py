"""Weighted least-squares inversion of participations for loss factors.

Each mode gives one equation ``kappa_j = sum_i P_ji Gamma_i`` with
``kappa_j = 1/Q_int,j``.  Rows are divided by ``sigma_kappa_j`` and the
normal-equation covariance ``C = (P~^T P~)^-1`` is reported as is.
Channels with known factors are moved to the left-hand side first and
their uncertainties added to ``sigma_kappa`` in quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import ModeRecord
from .errors import NumericalError, ValidationError
from .factors import FixedFactor, as_factor
from .participation import ParticipationMatrix
from .tls import q_int_at

RANK_RCOND = 1e-10


@dataclass(frozen=True, eq=False)
class LossFactorSet:
    """Extracted loss factors of the free channels.

    ``sigma`` values are exactly ``sqrt(diag(covariance))``.  ``fixed`` keeps
    the factors that were held constant so that budgets can be rebuilt.
    """

    channels: tuple
    values: np.ndarray
    covariance: np.ndarray
    photon_number: Optional[float] = None
    fixed: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    chi2: float = 0.0
    dof: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        c = np.array(self.covariance, dtype=float)
        if c.shape != (v.size, v.size) or len(self.channels) != v.size:
            raise ValidationError("values/covariance/channel sizes disagree", "invalid-factors")
        if not np.all(np.isfinite(v)):
            raise ValidationError("loss factors must be finite", "invalid-factors")
        v.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "covariance", c)

    @property
    def sigmas(self):
        return np.sqrt(np.diag(self.covariance))

    @property
    def factors(self):
        """``{channel: (value, sigma)}`` for the free channels."""
        return {c: (float(v), float(s)) for c, v, s in zip(self.channels, self.values, self.sigmas)}

    def value(self, cid):
        return float(self.values[self.channels.index(cid)])

    def sigma(self, cid):
        return float(self.sigmas[self.channels.index(cid)])

    def as_library(self):
        """All channels (free and fixed) as factor objects, ignoring correlations."""
        lib = {c: FixedFactor(v, s, "extracted") for c, (v, s) in self.factors.items()}
        lib.update(self.fixed)
        return lib

    def to_dict(self):
        return {"photon_number": self.photon_number,
                "factors": {c: {"value": v, "sigma": s, "flags": list(self.flags.get(c, ()))}
                            for c, (v, s) in self.factors.items()},
                "channels": list(self.channels),
                "covariance": self.covariance.tolist(),
                "fixed": {c: as_factor(f).to_dict() for c, f in self.fixed.items()},
                "chi2": self.chi2, "dof": self.dof}


def _mode_rows(matrix: ParticipationMatrix, modes):
    recs = {}
    for m in modes:
        if not isinstance(m, ModeRecord):
            raise ValidationError("modes must be ModeRecord instances", "invalid-input")
        if m.mode_id in recs:
            raise ValidationError(f"mode {m.mode_id!r} given twice", "mode-mismatch")
        recs[m.mode_id] = m
    want, have = set(matrix.mode_ids), set(recs)
    if want != have:
        raise ValidationError(f"mode mismatch: matrix has {sorted(want)}, records have {sorted(have)}",
                              "mode-mismatch")
    return [recs[m] for m in matrix.mode_ids]


def fixed_contributions(matrix: ParticipationMatrix, fixed):
    """Per-mode loss and sigma from the fixed channels."""
    loss = np.zeros(len(matrix.modes))
    var = np.zeros(len(matrix.modes))
    for cid, fac in fixed.items():
        col = matrix.column(cid)
        for j, f in enumerate(matrix.frequencies):
            loss[j] += col[j] * fac.value_at(f)
            var[j] += (col[j] * fac.sigma_at(f)) ** 2
    return loss, np.sqrt(var)


def _collinear_columns(q, names):
    _, s, vt = np.linalg.svd(q, full_matrices=False)
    bad = set()
    for k in np.nonzero(s <= RANK_RCOND * s[0])[0]:
        v = np.abs(vt[k])
        bad.update(i for i in np.nonzero(v > 1e-6 * v.max())[0])
    if q.shape[0] < q.shape[1]:
        # more unknowns than equations: every column is involved in the null space
        bad.update(range(q.shape[1]))
    return [names[i] for i in sorted(bad)]


def extract(matrix: ParticipationMatrix, modes, fixed=None, photon_number=None,
            assumed_fractional_sigma=None) -> LossFactorSet:
    """Solve for the free loss factors.

    Parameters
    ----------
    matrix : ParticipationMatrix
    modes : list of ModeRecord
        One record per matrix mode (any order).
    fixed : mapping, optional
        ``{channel: factor}`` held constant; entries may be factor objects
        or ``(value, sigma)`` pairs.
    assumed_fractional_sigma : float, optional
        Used for modes whose ``q_int_sigma`` is zero.  Without it such modes
        are rejected since they cannot be weighted.
    """
    fixed = {str(k): as_factor(v) for k, v in (fixed or {}).items()}
    unknown = [c for c in fixed if c not in matrix.channel_ids]
    if unknown:
        raise ValidationError(f"fixed channels not in matrix: {unknown}", "invalid-channel")
    recs = _mode_rows(matrix, modes)
    free = [c for c in matrix.channel_ids if c not in fixed]
    if not free:
        raise ValidationError("every channel is fixed; nothing to extract", "invalid-input")
    if len(recs) < len(free):
        raise ValidationError(f"{len(recs)} modes cannot determine {len(free)} free channels {free}",
                              "underdetermined")

    kappa = np.array([r.kappa for r in recs])
    sk = np.array([r.kappa_sigma for r in recs])
    if np.any(sk == 0):
        if assumed_fractional_sigma is None:
            zero = [r.mode_id for r, s in zip(recs, sk) if s == 0]
            raise ValidationError(f"modes {zero} have zero q_int_sigma; give assumed_fractional_sigma",
                                  "zero-uncertainty")
        sk = np.where(sk == 0, assumed_fractional_sigma * kappa, sk)
    fl, fs = fixed_contributions(matrix, fixed)
    kappa_free = kappa - fl
    sk = np.sqrt(sk ** 2 + fs ** 2)

    P = np.column_stack([matrix.column(c) for c in free])
    Pt = P / sk[:, None]
    kt = kappa_free / sk
    norms = np.linalg.norm(Pt, axis=0)
    zero_cols = [free[i] for i in np.nonzero(norms == 0)[0]]
    if zero_cols:
        raise NumericalError(f"channels {zero_cols} have no participation in any mode",
                             "unidentifiable-channels", channels=zero_cols)
    Q = Pt / norms
    U, s, Vt = np.linalg.svd(Q, full_matrices=False)
    if s[-1] <= RANK_RCOND * s[0]:
        bad = _collinear_columns(Q, free)
        raise NumericalError(f"participation columns are collinear: {', '.join(bad)}",
                             "unidentifiable-channels", channels=bad)
    gamma = (Vt.T @ ((U.T @ kt) / s)) / norms
    cov = (Vt.T / s ** 2) @ Vt / np.outer(norms, norms)
    cov = 0.5 * (cov + cov.T)
    r = Pt @ gamma - kt
    sig = np.sqrt(np.diag(cov))
    flags = {}
    for c, g, sg in zip(free, gamma, sig):
        f = []
        if g < 0:
            f.append("negative")
        if abs(g) < 2 * sg:
            f.append("consistent-with-zero")
        if f:
            flags[c] = tuple(f)
    if photon_number is None:
        ns = {r.photon_number for r in recs}
        photon_number = ns.pop() if len(ns) == 1 else None
    return LossFactorSet(tuple(free), gamma, cov, photon_number, fixed, flags,
                         float(r @ r), len(recs) - len(free))


# ---------------------------------------------------------------------------
# Budgets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LossBudget:
    """Per-mode absolute loss ``p_i Gamma_i`` for every channel."""

    mode_ids: tuple
    channels: tuple
    contributions: np.ndarray  # (modes, channels)

    @property
    def total(self):
        return self.contributions.sum(axis=1)

    @property
    def fractions(self):
        return self.contributions / self.total[:, None]

    def fraction(self, mode_id, cid):
        return float(self.fractions[self.mode_ids.index(mode_id), self.channels.index(cid)])

    def as_dict(self):
        fr = self.fractions
        return {m: {"total_loss": float(self.total[j]),
                    "loss": {c: float(self.contributions[j, i]) for i, c in enumerate(self.channels)},
                    "fraction": {c: float(fr[j, i]) for i, c in enumerate(self.channels)}}
                for j, m in enumerate(self.mode_ids)}


def library_of(factors):
    if isinstance(factors, LossFactorSet):
        return factors.as_library()
    return {str(k): as_factor(v) for k, v in dict(factors).items()}


def budget(matrix: ParticipationMatrix, factors) -> LossBudget:
    """Fractional loss contributions; ``factors`` is a LossFactorSet or a library mapping."""
    lib = library_of(factors)
    missing = [c for c in matrix.channel_ids if c not in lib]
    if missing:
        raise ValidationError(f"no loss factor for channels {missing}", "missing-channel", channels=missing)
    contrib = np.empty(matrix.values.shape)
    for i, c in enumerate(matrix.channel_ids):
        for j, f in enumerate(matrix.frequencies):
            contrib[j, i] = matrix.values[j, i] * lib[c].value_at(f)
    return LossBudget(tuple(matrix.mode_ids), tuple(matrix.channel_ids), contrib)


# ---------------------------------------------------------------------------
# Outlier rule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MrdResult:
    values: np.ndarray
    mrd: np.ndarray
    flags: np.ndarray   # True where excluded
    median: float
    mean: float
    std: float

    @property
    def kept(self):
        return self.values[~self.flags]


def mrd_filter(values, threshold=3.0) -> MrdResult:
    """Drop entries whose median relative deviation ``|x - med|/med`` exceeds ``threshold``.

    The spread of the kept values is the population standard deviation.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 3:
        raise ValidationError("need at least 3 values", "invalid-input")
    med = float(np.median(x))
    if med == 0:
        raise ValidationError("median is zero; relative deviation undefined", "invalid-input")
    mrd = np.abs(x - med) / abs(med)
    flags = mrd > threshold
    kept = x[~flags]
    return MrdResult(x, mrd, flags, med, float(kept.mean()), float(kept.std(ddof=0)))


# ---------------------------------------------------------------------------
# Photon-number dependence
# ---------------------------------------------------------------------------

def extract_vs_power(matrix: ParticipationMatrix, tls_fits, n_grid, fixed=None, jobs=1):
    """Run :func:`extract` on interpolated Q_int at each photon number in ``n_grid``."""
    missing = [m for m in matrix.mode_ids if m not in tls_fits]
    if missing:
        raise ValidationError(f"no TLS fit for modes {missing}", "mode-mismatch")

    def one(n):
        recs = []
        for m, f in matrix.modes:
            q, s = q_int_at(tls_fits[m], n)
            recs.append(ModeRecord(m, f, q, s, photon_number=float(n)))
        return extract(matrix, recs, fixed, photon_number=float(n))

    grid = [float(n) for n in np.atleast_1d(n_grid)]
    if jobs and jobs > 1 and len(grid) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(one, grid))
    return [one(n) for n in grid]


def extraction_sigma_scale(fs: LossFactorSet):
    """sqrt(chi2/dof) for over-determined systems, else nan (diagnostic only)."""
    return math.sqrt(fs.chi2 / fs.dof) if fs.dof > 0 else float("nan")

"""Participation matrices, loss channels and closed-form seam/surface helpers."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.constants import epsilon_0

from .errors import ValidationError
from .factors import conductor_loss_factor  # noqa: F401  (re-exported)

DIELECTRIC = "dielectric-participation"
CONDUCTOR = "conductor-participation"
SEAM = "seam-admittance"
KINDS = (DIELECTRIC, CONDUCTOR, SEAM)

CHANNEL_KINDS = {
    "surf": DIELECTRIC,
    "surf_ta": DIELECTRIC,
    "surf_al": DIELECTRIC,
    "bulk": DIELECTRIC,
    "pkg_cond": CONDUCTOR,
    "pkg_ma": DIELECTRIC,
    "seam": SEAM,
    "seam_ta_al": SEAM,
}


@dataclass(frozen=True)
class LossChannel:
    id: str
    kind: str = ""

    def __post_init__(self):
        if self.id not in CHANNEL_KINDS:
            raise ValidationError(f"unknown channel id {self.id!r}; expected one of {sorted(CHANNEL_KINDS)}",
                                  "invalid-channel")
        kind = self.kind or CHANNEL_KINDS[self.id]
        if kind not in KINDS:
            raise ValidationError(f"unknown channel kind {kind!r}", "invalid-channel")
        object.__setattr__(self, "kind", kind)


@dataclass(frozen=True, eq=False)
class ParticipationMatrix:
    """Modes x channels participations (seam columns are admittances in 1/(Ohm m))."""

    modes: tuple
    channels: tuple
    values: np.ndarray

    def __post_init__(self):
        modes = tuple((str(m), float(f)) for m, f in self.modes)
        chans = tuple(c if isinstance(c, LossChannel) else LossChannel(*c) if isinstance(c, (tuple, list))
                      else LossChannel(str(c)) for c in self.channels)
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape != (len(modes), len(chans)):
            raise ValidationError(f"values shape {v.shape} does not match "
                                  f"{len(modes)} modes x {len(chans)} channels", "invalid-matrix")
        ids = [c.id for c in chans]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate channel ids", "invalid-matrix")
        mids = [m for m, _ in modes]
        if len(set(mids)) != len(mids):
            raise ValidationError("duplicate mode ids", "invalid-matrix")
        if any(not (f > 0 and math.isfinite(f)) for _, f in modes):
            raise ValidationError("mode frequencies must be positive", "invalid-matrix")
        if not np.all(np.isfinite(v)):
            raise ValidationError("participations contain NaN/Inf", "invalid-matrix")
        if np.any(v < 0):
            j, i = np.argwhere(v < 0)[0]
            raise ValidationError(f"negative entry for mode {mids[j]}, channel {ids[i]}", "invalid-matrix")
        for i, c in enumerate(chans):
            if c.kind == DIELECTRIC and np.any(v[:, i] > 1):
                raise ValidationError(f"dielectric participation of {c.id} exceeds 1", "invalid-matrix")
        v.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        if not isinstance(other, ParticipationMatrix):
            return NotImplemented
        return (self.modes == other.modes and self.channels == other.channels
                and np.array_equal(self.values, other.values))

    __hash__ = None

    @property
    def mode_ids(self):
        return [m for m, _ in self.modes]

    @property
    def channel_ids(self):
        return [c.id for c in self.channels]

    @property
    def frequencies(self):
        return np.array([f for _, f in self.modes])

    def channel_index(self, cid):
        try:
            return self.channel_ids.index(cid)
        except ValueError:
            raise ValidationError(f"channel {cid!r} not in matrix", "invalid-channel") from None

    def column(self, cid):
        return self.values[:, self.channel_index(cid)]

    def kind(self, cid):
        return self.channels[self.channel_index(cid)].kind

    def select_modes(self, mode_ids):
        idx = []
        for m in mode_ids:
            if m not in self.mode_ids:
                raise ValidationError(f"mode {m!r} not in matrix", "mode-mismatch")
            idx.append(self.mode_ids.index(m))
        return ParticipationMatrix([self.modes[i] for i in idx], self.channels, self.values[idx])

    def to_dict(self):
        return {"modes": [{"id": m, "freq_hz": f} for m, f in self.modes],
                "channels": [{"id": c.id, "kind": c.kind} for c in self.channels],
                "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d):
        try:
            modes = [(m["id"], m["freq_hz"]) for m in d["modes"]]
            chans = [LossChannel(c["id"], c.get("kind", "")) if isinstance(c, dict) else LossChannel(str(c))
                     for c in d["channels"]]
            return cls(modes, chans, d["values"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"participation document is malformed: {exc}", "invalid-matrix") from None


def load_participations(path) -> ParticipationMatrix:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: {exc}", "invalid-matrix") from None
    return ParticipationMatrix.from_dict(doc)


def save_participations(path, matrix: ParticipationMatrix, **extra):
    doc = dict(extra)
    doc.update(matrix.to_dict())
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


# ---------------------------------------------------------------------------
# Shipped data
# ---------------------------------------------------------------------------

def data_path(name) -> Path:
    """Path of a file shipped in ``lossforge/data``."""
    p = resources.files("lossforge") / "data" / name
    if not p.is_file():
        raise ValidationError(f"no shipped data file {name!r}", "unknown-fixture")
    return Path(str(p))


def list_fixtures():
    return sorted(p.name for p in (resources.files("lossforge") / "data").iterdir()
                  if p.name.endswith((".json", ".csv")))


def load_fixture_matrix(name) -> ParticipationMatrix:
    if not name.endswith(".json"):
        name += ".json"
    return load_participations(data_path(name))


# ---------------------------------------------------------------------------
# Seam admittances
# ---------------------------------------------------------------------------

def segmented_seam_admittance(length, width, z0, contact_positions):
    """Seam admittance of discrete contacts along a half-wave line.

    Each contact at position z contributes in proportion to the local
    current squared, ``sin^2(pi z / length)``.
    """
    if not (length > 0 and width > 0 and z0 > 0):
        raise ValidationError("length, width and z0 must be > 0", "invalid-input")
    z = np.asarray(contact_positions, dtype=float)
    if np.any(z < 0) or np.any(z > length):
        raise ValidationError("contact positions must lie within [0, length]", "invalid-input")
    return float(2.0 / np.pi * np.sum(np.sin(np.pi * z / length) ** 2) / (width * z0))


def lumped_contact_admittance(z0, seam_length):
    """Seam admittance ``2 / (z0 * w)`` of a single lumped contact."""
    if not (z0 > 0 and seam_length > 0):
        raise ValidationError("z0 and seam_length must be > 0", "invalid-input")
    return 2.0 / (z0 * seam_length)


def seam_display_factor(inverse_conductance, f):
    """Dimensionless seam factor ``w eps0 / g`` (display only, never used in a solve)."""
    return 2.0 * np.pi * np.asarray(f) * epsilon_0 * np.asarray(inverse_conductance)


# ---------------------------------------------------------------------------
# Surface-loss composition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceComposition:
    """Split of the surface participation over SA, MS and MA interfaces.

    The participations are simulated for a thin layer of
    ``assumed_thickness`` and ``assumed_eps_r``; actual layers are rescaled
    to those.  The default equal split is a placeholder, not a measured
    value.
    """

    weights: tuple = (1 / 3, 1 / 3, 1 / 3)
    assumed_thickness: float = 3e-9
    assumed_eps_r: float = 10.0

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) != 3 or any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
            raise ValidationError("surface weights must be 3 non-negative numbers summing to 1",
                                  "invalid-composition")
        if not (self.assumed_thickness > 0 and self.assumed_eps_r > 0):
            raise ValidationError("assumed thickness and eps_r must be > 0", "invalid-composition")
        object.__setattr__(self, "weights", w)


def compose_surface_factor(composition: SurfaceComposition, tan_deltas, true_thicknesses, true_eps_r):
    """Combine per-interface loss tangents into one surface loss factor.

    Each interface term is ``w_k (t_k / t_assumed) (eps_k / eps_assumed) tan_k``.
    ``true_eps_r`` may be one value or one per interface.
    """
    w = np.asarray(composition.weights)
    tan = np.asarray(tan_deltas, dtype=float)
    t = np.asarray(true_thicknesses, dtype=float)
    eps = np.broadcast_to(np.asarray(true_eps_r, dtype=float), (3,))
    if tan.shape != (3,) or t.shape != (3,):
        raise ValidationError("need three loss tangents and three thicknesses", "invalid-input")
    if np.any(t <= 0) or np.any(eps <= 0):
        raise ValidationError("thicknesses and eps_r must be > 0", "invalid-input")
    return float(np.sum(w * (t / composition.assumed_thickness)
                        * (eps / composition.assumed_eps_r) * tan))

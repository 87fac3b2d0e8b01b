"""Loss-factor values used as fixed inputs or as a prediction library.

Two shapes exist.  Dielectric loss tangents and seam resistivities are
plain numbers.  Conductor losses are stored as a surface resistance and
turned into a loss factor per mode frequency, since ``Gamma = Rs/(mu0 w lam)``
falls as ``1/f``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .domain import CONSTANTS
from .errors import ValidationError

DEFAULT_PENETRATION_DEPTH = 50e-9


def conductor_loss_factor(surface_resistance, f, penetration_depth=DEFAULT_PENETRATION_DEPTH,
                          mu0=CONSTANTS.mu0):
    """Conductor loss factor ``Rs / (mu0 * 2 pi f * lambda)``."""
    if surface_resistance < 0 or not (f > 0 and penetration_depth > 0):
        raise ValidationError("need Rs >= 0, f > 0 and penetration depth > 0", "invalid-input")
    return surface_resistance / (mu0 * 2.0 * math.pi * f * penetration_depth)


@dataclass(frozen=True)
class FixedFactor:
    value: float
    sigma: float = 0.0
    source: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.value) and math.isfinite(self.sigma) and self.sigma >= 0):
            raise ValidationError("factor value must be finite and sigma >= 0", "invalid-factor")

    def value_at(self, f):
        return self.value

    def sigma_at(self, f):
        return self.sigma

    def to_dict(self):
        d = {"value": self.value, "sigma": self.sigma}
        if self.source:
            d["source"] = self.source
        return d


@dataclass(frozen=True)
class SurfaceResistanceFactor:
    surface_resistance: float
    surface_resistance_sigma: float = 0.0
    penetration_depth: float = DEFAULT_PENETRATION_DEPTH
    source: str = ""

    def __post_init__(self):
        if not (self.surface_resistance >= 0 and self.surface_resistance_sigma >= 0
                and self.penetration_depth > 0):
            raise ValidationError("surface resistance terms must be >= 0 and depth > 0",
                                  "invalid-factor")

    def value_at(self, f):
        return conductor_loss_factor(self.surface_resistance, f, self.penetration_depth)

    def sigma_at(self, f):
        return conductor_loss_factor(self.surface_resistance_sigma, f, self.penetration_depth)

    def to_dict(self):
        d = {"surface_resistance_ohm": self.surface_resistance,
             "surface_resistance_sigma_ohm": self.surface_resistance_sigma,
             "penetration_depth_m": self.penetration_depth}
        if self.source:
            d["source"] = self.source
        return d


def factor_from_dict(d):
    if isinstance(d, (int, float)):
        return FixedFactor(float(d))
    if isinstance(d, (list, tuple)) and len(d) == 2:
        return FixedFactor(float(d[0]), float(d[1]))
    if not isinstance(d, dict):
        raise ValidationError(f"cannot read loss factor from {d!r}", "invalid-factor")
    src = str(d.get("source", ""))
    if "surface_resistance_ohm" in d:
        return SurfaceResistanceFactor(float(d["surface_resistance_ohm"]),
                                       float(d.get("surface_resistance_sigma_ohm", 0.0)),
                                       float(d.get("penetration_depth_m", DEFAULT_PENETRATION_DEPTH)),
                                       src)
    if "value" in d:
        return FixedFactor(float(d["value"]), float(d.get("sigma", 0.0)), src)
    raise ValidationError(f"loss factor entry needs 'value' or 'surface_resistance_ohm': {d!r}",
                          "invalid-factor")


def as_factor(x):
    if isinstance(x, (FixedFactor, SurfaceResistanceFactor)):
        return x
    return factor_from_dict(x)


def factors_from_mapping(mapping):
    """Normalize ``{channel: factor-like}`` to factor objects."""
    return {str(k): as_factor(v) for k, v in dict(mapping).items()}


def load_factors(path):
    """Read a fixed/library file: ``{"factors": {channel: entry}}`` or a bare mapping."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: {exc}", "invalid-factor-file") from None
    if isinstance(doc, dict) and "factors" in doc:
        doc = doc["factors"]
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected a mapping of channel -> factor", "invalid-factor-file")
    return factors_from_mapping(doc)


def save_factors(path, factors, **extra):
    doc = dict(extra)
    doc["factors"] = {k: as_factor(v).to_dict() for k, v in factors.items()}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")

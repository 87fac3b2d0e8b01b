"""Forward prediction of Q_int and T1 from participations and loss factors."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .domain import ModeRecord
from .errors import ValidationError
from .extraction import LossBudget, LossFactorSet, budget
from .factors import FixedFactor, SurfaceResistanceFactor, as_factor
from .participation import ParticipationMatrix, data_path


@dataclass(frozen=True)
class ModePrediction:
    mode_id: str
    frequency: float
    loss: float
    loss_sigma: float
    q_int: float
    q_int_sigma: float
    t1: float
    t1_sigma: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class Prediction:
    modes: tuple
    budget: LossBudget

    def mode(self, mode_id) -> ModePrediction:
        for m in self.modes:
            if m.mode_id == mode_id:
                return m
        raise ValidationError(f"no prediction for mode {mode_id!r}", "mode-mismatch")

    def to_dict(self):
        b = self.budget.as_dict()
        return {"modes": [dict(m.to_dict(), budget=b[m.mode_id]["fraction"]) for m in self.modes]}


def predict(matrix: ParticipationMatrix, library) -> Prediction:
    """Predict every mode of ``matrix``.

    ``library`` maps channel id to a factor, or is a :class:`LossFactorSet`
    in which case the correlated part uses ``p^T C p``.
    """
    b = budget(matrix, library)  # raises for missing channels
    loss = b.total
    var = np.zeros(len(matrix.modes))
    if isinstance(library, LossFactorSet):
        P = np.column_stack([matrix.column(c) for c in library.channels])
        var += np.einsum("ji,ik,jk->j", P, library.covariance, P)
        indep = library.fixed
    else:
        indep = {str(k): as_factor(v) for k, v in dict(library).items()}
    for c, fac in indep.items():
        if c not in matrix.channel_ids:
            continue
        col = matrix.column(c)
        var += np.array([(col[j] * fac.sigma_at(f)) ** 2 for j, f in enumerate(matrix.frequencies)])

    out = []
    for j, (m, f) in enumerate(matrix.modes):
        if not loss[j] > 0:
            raise ValidationError(f"mode {m}: library gives zero loss, Q would be infinite", "no-loss-model")
        sl = math.sqrt(var[j])
        q = 1.0 / loss[j]
        sq = q * q * sl
        w = 2.0 * math.pi * f
        out.append(ModePrediction(m, f, float(loss[j]), sl, q, sq, q / w, sq / w))
    return Prediction(tuple(out), b)


@dataclass(frozen=True)
class Comparison:
    mode_id: str
    q_loaded_measured: float
    q_int_measured: float
    q_int_measured_sigma: float
    q_int_predicted: float
    q_int_predicted_sigma: float
    z_score: float
    coupling_correction: float  # fractional change of Q from removing coupling loss

    def to_dict(self):
        return dict(self.__dict__)


def compare_measured(prediction: Prediction, measured: ModeRecord, q_coupling) -> Comparison:
    """Compare a measured T1 with the prediction after removing coupling loss.

    ``measured.t1`` (and ``t1_sigma``) must be set.  The z-score uses the
    prediction sigma and the measurement sigma in quadrature.
    """
    if not q_coupling > 0:
        raise ValidationError("q_coupling must be > 0", "invalid-input")
    if measured.t1 is None or not measured.t1 > 0:
        raise ValidationError("measured record needs a positive t1", "invalid-input")
    pm = prediction.mode(measured.mode_id)
    f = measured.frequency or pm.frequency
    w = 2.0 * math.pi * f
    ql = w * measured.t1
    k_int = 1.0 / ql - 1.0 / q_coupling
    if not k_int > 0:
        raise ValidationError(f"measured loss 1/QL={1 / ql:.4g} does not exceed coupling loss "
                              f"1/Qc={1 / q_coupling:.4g}", "nonphysical")
    qi = 1.0 / k_int
    # dQi/dQL = Qi^2 / QL^2
    sqi = (qi / ql) ** 2 * w * measured.t1_sigma
    tot = math.hypot(pm.q_int_sigma, sqi)
    diff = qi - pm.q_int
    if tot > 0:
        z = diff / tot
    else:
        z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return Comparison(measured.mode_id, ql, qi, sqi, pm.q_int, pm.q_int_sigma, z, qi / ql - 1.0)


# ---------------------------------------------------------------------------
# Shipped materials catalogue
# ---------------------------------------------------------------------------

def load_catalog():
    """Measured loss factors by material/process, as shipped with the package."""
    return json.loads(data_path("materials_catalog.json").read_text())


def catalog_factor(group, name):
    cat = load_catalog()
    try:
        return as_factor(cat[group][name])
    except KeyError:
        opts = {g: sorted(v) for g, v in cat.items() if isinstance(v, dict)}
        raise ValidationError(f"no catalogue entry {group}/{name}; available: {opts}",
                              "unknown-material") from None


def build_library(surface=None, bulk="hemex-annealed", surface_ta=None, surface_al=None,
                  package=True, contact=False):
    """Assemble a library from catalogue names.

    Parameters
    ----------
    surface : str, optional
        Catalogue name for the single ``surf`` channel.
    surface_ta, surface_al : str, optional
        Names for split Ta/Al surface channels.
    package : bool
        Include the package conductor, MA and seam factors.
    contact : bool
        Include the Ta/Al contact factor.
    """
    lib = {}
    if surface is not None:
        lib["surf"] = catalog_factor("surface", surface)
    if surface_ta is not None:
        lib["surf_ta"] = catalog_factor("surface", surface_ta)
    if surface_al is not None:
        lib["surf_al"] = catalog_factor("surface", surface_al)
    if bulk is not None:
        lib["bulk"] = catalog_factor("bulk", bulk)
    if package:
        for k in ("pkg_cond", "pkg_ma", "seam"):
            lib[k] = catalog_factor("package", k)
    if contact:
        lib["seam_ta_al"] = catalog_factor("contact", "seam_ta_al")
    return lib


__all__ = ["ModePrediction", "Prediction", "predict", "Comparison", "compare_measured",
           "load_catalog", "catalog_factor", "build_library", "FixedFactor", "SurfaceResistanceFactor"]

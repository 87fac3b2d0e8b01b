"""Resonator loss analysis: hanger fits, TLS fits, participation inversion and coherence prediction."""

__version__ = "0.1.0"

from .errors import LossforgeError, NumericalError, ValidationError
from .domain import (CONSTANTS, FrequencyTrace, HangerFit, ModeRecord, dbm_to_watt, read_trace,
                     watt_to_dbm, write_trace)
from .circlefit import algebraic_circle_fit, estimate_delay, fit_hanger, internal_q, phase_fit
from .photon import LineBudget, mean_photon_number, power_at_device, qc_from_rabi
from .tls import TlsFit, fit_tls, q_int_at
from .factors import FixedFactor, SurfaceResistanceFactor, conductor_loss_factor
from .participation import (LossChannel, ParticipationMatrix, SurfaceComposition, compose_surface_factor,
                            load_fixture_matrix, load_participations)
from .extraction import LossBudget, LossFactorSet, budget, extract, extract_vs_power, mrd_filter
from .sensitivity import SensitivityMap, sensitivity_map
from .prediction import build_library, compare_measured, predict
from .sweep import SweepPlan, make_plan, phase_gap_metric, plan_linear, plan_phase_uniform, plan_quadratic
from .synth import GroundTruth, generate_dataset, generate_trace
from .pipeline import analyze_trace, power_sweep

__all__ = [
    "__version__", "LossforgeError", "NumericalError", "ValidationError",
    "CONSTANTS", "FrequencyTrace", "HangerFit", "ModeRecord", "dbm_to_watt", "watt_to_dbm",
    "read_trace", "write_trace",
    "algebraic_circle_fit", "estimate_delay", "fit_hanger", "internal_q", "phase_fit",
    "LineBudget", "mean_photon_number", "power_at_device", "qc_from_rabi",
    "TlsFit", "fit_tls", "q_int_at",
    "FixedFactor", "SurfaceResistanceFactor", "conductor_loss_factor",
    "LossChannel", "ParticipationMatrix", "SurfaceComposition", "compose_surface_factor",
    "load_fixture_matrix", "load_participations",
    "LossBudget", "LossFactorSet", "budget", "extract", "extract_vs_power", "mrd_filter",
    "SensitivityMap", "sensitivity_map",
    "build_library", "compare_measured", "predict",
    "SweepPlan", "make_plan", "phase_gap_metric", "plan_linear", "plan_phase_uniform", "plan_quadratic",
    "GroundTruth", "generate_dataset", "generate_trace",
    "analyze_trace", "power_sweep",
]

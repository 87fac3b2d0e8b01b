import math

import numpy as np
import pytest

from lossforge.circlefit import fit_hanger, internal_q
from lossforge.domain import dbm_to_watt
from lossforge.errors import NumericalError, ValidationError
from lossforge.participation import ParticipationMatrix
from lossforge.photon import mean_photon_number
from lossforge.sweep import plan_linear
from lossforge.synth import (ChannelTruth, GroundTruth, ModeTruth, generate_dataset, generate_trace,
                             hanger_s21, noise_sigma_from_snr, solve_photon_number)

from conftest import hanger


def test_noiseless_matches_model(truth):
    plan = plan_linear(truth.fr, 1e5, 41)
    t = generate_trace(truth, plan)
    f = plan.points
    dip = (truth.q_loaded / truth.q_coupling_mag) * np.exp(1j * truth.phi) / (1 + 2j * truth.q_loaded * (f / truth.fr - 1))
    np.testing.assert_allclose(t.s21, truth.amplitude_a * (1 - dip), rtol=1e-14)
    np.testing.assert_array_equal(t.s21, hanger_s21(truth, f))


def test_seed_determinism(truth):
    plan = plan_linear(truth.fr, 1e5, 41)
    a = generate_trace(truth, plan, 0.01, seed=7)
    b = generate_trace(truth, plan, 0.01, seed=7)
    c = generate_trace(truth, plan, 0.01, seed=8)
    assert a == b and a != c


def test_noise_level():
    truth = hanger(a=0.3)
    plan = plan_linear(truth.fr, 1e5, 20001)
    sig = noise_sigma_from_snr(0.3, 40)
    assert sig == pytest.approx(3e-3)
    t = generate_trace(truth, plan, sig, seed=1)
    r = t.s21 - hanger_s21(truth, plan.points)
    assert np.sqrt(np.mean(np.abs(r) ** 2)) == pytest.approx(sig, rel=0.03)
    assert np.std(r.real) == pytest.approx(sig / math.sqrt(2), rel=0.03)
    assert noise_sigma_from_snr(1.0, None) == 0.0


def _matrix():
    return ParticipationMatrix([("a", 5e9), ("b", 6e9)], ["surf", "bulk"], [[1e-3, 0.9], [3e-4, 0.95]])


def _truth(surf, snr=40.0, seed=0):
    return GroundTruth(modes={"a": ModeTruth(2e6, 0.2), "b": ModeTruth(1e6, -0.1, 0.5, 1.0, 5e-11)},
                       factors={"surf": surf, "bulk": ChannelTruth(3e-8)}, snr_db=snr, seed=seed)


def test_power_independent_truth():
    data = generate_dataset(_truth(ChannelTruth(4e-4)), [-150, -120, -90], _matrix())
    assert [d.mode_id for d in data] == ["a"] * 3 + ["b"] * 3
    for mid, qtrue in (("a", 1 / (1e-3 * 4e-4 + 0.9 * 3e-8)), ("b", 1 / (3e-4 * 4e-4 + 0.95 * 3e-8))):
        for d in (d for d in data if d.mode_id == mid):
            assert d.q_int == pytest.approx(qtrue, rel=1e-12)
            qi, s = internal_q(fit_hanger(d.trace))
            assert abs(qi - qtrue) < 3 * s


def test_dataset_is_reproducible_and_self_consistent():
    tr = _truth(ChannelTruth(1e-5, 6e-4, 10.0, 0.8), seed=5)
    a = generate_dataset(tr, [-160, -100], _matrix())
    b = generate_dataset(tr, [-160, -100], _matrix())
    assert all(x.trace == y.trace for x, y in zip(a, b))
    for d in a:
        qc_eff = d.hanger.q_coupling_mag / math.cos(d.hanger.phi)
        n = mean_photon_number(float(dbm_to_watt(d.power_dbm)), d.hanger.fr, d.hanger.fr, d.hanger.q_loaded, qc_eff)
        assert n == pytest.approx(d.photon_number, rel=1e-9)
        assert 1 / d.hanger.q_loaded == pytest.approx(1 / d.q_int + 1 / qc_eff, rel=1e-12)
    # TLS: lower Q at low power
    assert a[0].q_int < a[1].q_int


def test_weak_drive_fixed_point():
    qc = 1e6
    loss = ChannelTruth(1e-6, 1e-5, 1.0, 1.0)
    sol = solve_photon_number(1e-28, 5e9, qc, lambda n: loss.value(n, 5e9))
    assert sol.photon_number < 1e-5
    ql0 = 1 / (loss.value(0.0, 5e9) + 1 / qc)
    assert abs(sol.q_loaded / ql0 - 1) < 1e-9
    # the first update already moves Q_L by less than 1e-9
    n1 = float(mean_photon_number(1e-28, 5e9, 5e9, ql0, qc))
    assert abs(1 / (loss.value(n1, 5e9) + 1 / qc) / ql0 - 1) < 1e-9


def test_zero_power():
    sol = solve_photon_number(0.0, 5e9, 1e6, lambda n: 1e-6)
    assert sol.photon_number == 0.0 and sol.iterations == 1


def test_fixed_point_failure():
    # a loss that switches across a threshold has no fixed point
    qc = 1e6
    p = 1e-16
    n_hi = float(mean_photon_number(p, 5e9, 5e9, 1 / (1e-9 + 1 / qc), qc))
    n_lo = float(mean_photon_number(p, 5e9, 5e9, 1 / (1e-4 + 1 / qc), qc))
    thr = math.sqrt(n_hi * n_lo)
    with pytest.raises(NumericalError) as exc:
        solve_photon_number(p, 5e9, qc, lambda n: 1e-4 if n > thr else 1e-9)
    assert exc.value.code == "fixed-point-not-converged"


def test_truth_validation():
    with pytest.raises(ValidationError) as exc:
        GroundTruth.from_dict({"modes": {"a": {"q_coupling_mag": 1e6}}})
    assert exc.value.code == "invalid-truth"
    t = GroundTruth.from_dict({"modes": {"a": {"q_coupling_mag": 1e6}}, "factors": {"surf": 1e-4}})
    with pytest.raises(ValidationError):
        generate_dataset(t, [-100], _matrix())
    t2 = GroundTruth.from_dict({"modes": {"a": {"q_coupling_mag": 1e6}, "b": {"q_coupling_mag": 1e6}},
                                "factors": {"surf": 1e-4}})
    with pytest.raises(ValidationError):
        generate_dataset(t2, [-100], _matrix())

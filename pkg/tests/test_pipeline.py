import math

import numpy as np
import pytest

from lossforge.domain import dbm_to_watt
from lossforge.errors import ValidationError
from lossforge.photon import LineBudget, mean_photon_number
from lossforge.pipeline import analyze_trace, analyze_traces, bin_by_photon_number, power_sweep
from lossforge.synth import ChannelTruth

from conftest import hanger, synth_trace


def test_line_budget_sets_power():
    truth = hanger(fr=5.5e9)
    tr = synth_trace(truth, power=1e-20)
    lb = LineBudget(-20.0, [[4e9, 70.0], [7e9, 76.0]])
    r = analyze_trace(tr, lb)
    att = 70.0 + 6.0 * 1.5 / 3.0
    assert r.drive_power == pytest.approx(float(dbm_to_watt(-20.0 - att)), rel=1e-9)
    r2 = analyze_trace(tr, lb, vna_power_dbm=-40.0)
    assert r2.photon_number == pytest.approx(r.photon_number / 100, rel=1e-9)
    # without a budget the trace's own power is used
    r3 = analyze_trace(tr)
    assert r3.photon_number == pytest.approx(
        mean_photon_number(1e-20, r3.fit.fr, r3.fit.fr, r3.fit.q_loaded, r3.fit.q_coupling_eff), rel=1e-12)
    with pytest.raises(ValidationError):
        analyze_trace(tr, LineBudget(-20.0, [[6e9, 70.0], [7e9, 76.0]]))


def _results(powers, seed=0):
    surf = ChannelTruth(1e-6, 5e-6, 30.0, 1.0)
    trs = []
    for k, p in enumerate(powers):
        # crude self-consistency is not needed here; any Q per power will do
        n = float(mean_photon_number(p, 5e9, 5e9, 5e5, 2e6))
        qi = 1 / surf.value(n, 5e9)
        ql = 1 / (1 / qi + 1 / 2e6)
        trs.append(synth_trace(hanger(ql=ql, qc=2e6, phi=0.0), 0.005, seed + k, power=p))
    return analyze_traces(trs)


def test_bins_merge_by_inverse_variance():
    res = _results([1e-19, 1.1e-19, 1e-16])
    raw = bin_by_photon_number(res)
    assert raw.shape == (3, 3) and np.all(np.diff(raw[:, 0]) > 0)
    binned = bin_by_photon_number(res, bins_per_decade=1)
    assert binned.shape == (2, 3)
    k, s = 1 / raw[:2, 1], raw[:2, 2] / raw[:2, 1] ** 2
    w = 1 / s ** 2
    km = np.sum(w * k) / np.sum(w)
    assert binned[0, 1] == pytest.approx(1 / km, rel=1e-12)
    assert binned[0, 2] / binned[0, 1] ** 2 == pytest.approx(1 / math.sqrt(np.sum(w)), rel=1e-12)
    assert binned[0, 0] == pytest.approx(math.sqrt(raw[0, 0] * raw[1, 0]), rel=1e-12)
    np.testing.assert_allclose(binned[1], raw[2], rtol=1e-14)


def test_missing_power():
    res = analyze_traces([synth_trace()])
    with pytest.raises(ValidationError) as exc:
        bin_by_photon_number(res)
    assert exc.value.code == "missing-power"


def test_power_sweep_parallel_matches_serial():
    powers = list(np.geomspace(1e-21, 1e-14, 8))
    surf = ChannelTruth(1e-6, 5e-6, 30.0, 1.0)
    trs = []
    for k, p in enumerate(powers):
        n = float(mean_photon_number(p, 5e9, 5e9, 5e5, 2e6))
        ql = 1 / (surf.value(n, 5e9) + 1 / 2e6)
        trs.append(synth_trace(hanger(ql=ql, qc=2e6, phi=0.0), 0.005, k, power=p))
    a = power_sweep(trs)
    b = power_sweep(trs, jobs=2)
    np.testing.assert_array_equal(a.table, b.table)
    assert a.tls.to_dict() == b.tls.to_dict()
    assert power_sweep(trs, fit_model=False).tls is None

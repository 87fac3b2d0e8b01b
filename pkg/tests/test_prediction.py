import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossforge.domain import ModeRecord
from lossforge.errors import ValidationError
from lossforge.extraction import budget, extract
from lossforge.factors import FixedFactor, load_factors
from lossforge.participation import ParticipationMatrix, data_path, load_fixture_matrix
from lossforge.prediction import build_library, catalog_factor, compare_measured, load_catalog, predict


def library(name):
    return load_factors(data_path(f"library_{name}.json"))


class TestPredict:
    def test_hairpin(self):
        p = predict(load_fixture_matrix("hairpin_stripline"), library("hairpin")).mode("memory")
        assert p.frequency == pytest.approx(3.95e9)
        assert p.t1 == pytest.approx(1.1e-3, rel=0.2)

    def test_hairpin_library_equals_catalogue(self):
        lib = build_library(surface="ta-annealed", bulk="hemex-annealed")
        assert lib == library("hairpin")

    @pytest.mark.parametrize("grade", ["efg-annealed", "hem-annealed", "hemex-annealed"])
    def test_ta_transmon_per_grade(self, grade):
        lib = build_library(surface_ta="ta-annealed", surface_al="al-annealed", bulk=grade, contact=True)
        p = predict(load_fixture_matrix("transmon_ta"), lib).mode("qubit")
        assert p.t1 > 240e-6

    def test_al_transmon(self):
        lib = build_library(surface_al="al-annealed", bulk="hem-annealed")
        assert lib == library("transmon_al")
        p = predict(load_fixture_matrix("transmon_al"), lib).mode("qubit")
        assert 150e-6 <= p.t1 <= 170e-6

    def test_contact_channel_limit(self):
        m = load_fixture_matrix("transmon_ta")
        y = m.column("seam_ta_al")[0]
        r = 260e-9
        inv_g = r * 10e-6  # 1/g = R w for a 10 um seam
        assert catalog_factor("contact", "seam_ta_al").value == pytest.approx(inv_g)
        assert 1 / (y * inv_g) > 5e8

    def test_t1_relation_and_budget_reconstruction(self):
        m = load_fixture_matrix("transmon_ta")
        lib = library("transmon_ta")
        pred = predict(m, lib)
        p = pred.modes[0]
        assert p.q_int == pytest.approx(2 * math.pi * p.frequency * p.t1, rel=1e-15)
        b = pred.budget
        np.testing.assert_allclose(b.fractions * b.total[:, None], b.contributions, rtol=1e-14)

    def test_independent_sigma(self):
        m = ParticipationMatrix([("a", 5e9)], ["surf", "bulk"], [[1e-3, 0.9]])
        p = predict(m, {"surf": (4e-4, 1e-4), "bulk": (3e-8, 1e-8)}).modes[0]
        assert p.loss_sigma == pytest.approx(math.hypot(1e-3 * 1e-4, 0.9 * 1e-8), rel=1e-12)
        assert p.q_int_sigma == pytest.approx(p.q_int ** 2 * p.loss_sigma, rel=1e-12)

    def test_covariance_form(self):
        m = load_fixture_matrix("tsl_bf22")
        fixed = load_factors(data_path("package_fixed.json"))
        recs = [ModeRecord(mid, f, q, 0.1 * q) for (mid, f), q in zip(m.modes, [2.38e6, 41.23e6, 10.8e6])]
        fs = extract(m, recs, fixed)
        pred = predict(m, fs)
        for j, p in enumerate(pred.modes):
            row = np.array([m.column(c)[j] for c in fs.channels])
            var = row @ fs.covariance @ row + sum((m.column(c)[j] * f.sigma_at(m.frequencies[j])) ** 2
                                                  for c, f in fixed.items())
            assert p.loss_sigma == pytest.approx(math.sqrt(var), rel=1e-10)
            # square system: prediction reproduces the measured Q's
            assert p.q_int == pytest.approx(recs[j].q_int, rel=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2 ** 31))
    def test_extract_recovers_library(self, seed):
        rng = np.random.default_rng(seed)
        vals = rng.uniform(0.05, 1, (4, 3))
        if np.linalg.cond(vals) > 1e4:
            return
        m = ParticipationMatrix([(f"m{j}", 5e9 + j) for j in range(4)], ["surf", "bulk", "pkg_ma"], vals)
        lib = dict(zip(["surf", "bulk", "pkg_ma"], rng.uniform(1e-5, 1e-4, 3)))
        pred = predict(m, lib)
        recs = [ModeRecord(p.mode_id, p.frequency, p.q_int, 0.1 * p.q_int) for p in pred.modes]
        fs = extract(m, recs)
        np.testing.assert_allclose(fs.values, [lib[c] for c in fs.channels], rtol=1e-10)

    def test_zero_loss(self):
        m = ParticipationMatrix([("a", 5e9)], ["surf"], [[0.3]])
        with pytest.raises(ValidationError) as exc:
            predict(m, {"surf": 0.0})
        assert exc.value.code == "no-loss-model"

    def test_missing_channel_named(self):
        with pytest.raises(ValidationError) as exc:
            predict(load_fixture_matrix("transmon_ta"), library("transmon_al"))
        assert exc.value.code == "missing-channel"
        assert "surf_ta" in str(exc.value)

    def test_report_is_json(self):
        d = json.loads(json.dumps(predict(load_fixture_matrix("hairpin_stripline"), library("hairpin")).to_dict()))
        assert sum(d["modes"][0]["budget"].values()) == pytest.approx(1.0)


class TestCompare:
    def _pred(self, q=8.7e6, sigma=1e6):
        m = ParticipationMatrix([("q", 5e9)], ["surf"], [[1.0]])
        loss = 1 / q
        return predict(m, {"surf": (loss, sigma * loss ** 2)})

    def test_exact_match(self):
        pred = self._pred()
        t1 = 8.7e6 / (2 * math.pi * 5e9)
        c = compare_measured(pred, ModeRecord("q", 5e9, 8.7e6, t1=t1, t1_sigma=1e-6), 1e300)
        assert c.z_score == pytest.approx(0.0, abs=1e-9)

    def test_coupling_correction(self):
        pred = self._pred()
        ql = 1 / (1 / 8.7e6 + 1 / 4e7)
        assert ql == pytest.approx(7e6, rel=0.03)
        t1 = ql / (2 * math.pi * 5e9)
        c = compare_measured(pred, ModeRecord("q", 5e9, ql, t1=t1), 4e7)
        assert c.q_int_measured == pytest.approx(8.7e6, rel=1e-9)
        assert 0.2 <= c.coupling_correction <= 0.3

    def test_sign_flip(self):
        pred = self._pred()
        w = 2 * math.pi * 5e9
        lo = compare_measured(pred, ModeRecord("q", 5e9, 1.0, t1=7e6 / w), 1e300)
        hi = compare_measured(pred, ModeRecord("q", 5e9, 1.0, t1=10e6 / w), 1e300)
        assert lo.z_score < 0 < hi.z_score

    def test_nonphysical(self):
        w = 2 * math.pi * 5e9
        with pytest.raises(ValidationError) as exc:
            compare_measured(self._pred(), ModeRecord("q", 5e9, 1.0, t1=5e7 / w), 4e7)
        assert exc.value.code == "nonphysical"

    def test_needs_t1(self):
        with pytest.raises(ValidationError):
            compare_measured(self._pred(), ModeRecord("q", 5e9, 1e6), 4e7)


def test_catalog():
    cat = load_catalog()
    assert {"surface", "bulk", "package", "contact"} <= set(cat)
    with pytest.raises(ValidationError) as exc:
        catalog_factor("surface", "unobtainium")
    assert exc.value.code == "unknown-material"

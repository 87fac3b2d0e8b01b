import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossforge.errors import ValidationError
from lossforge.photon import (LineBudget, load_line_budget, mean_photon_number, power_at_device, qc_from_rabi,
                              save_line_budget)

HBAR = 6.62607015e-34 / (2 * math.pi)  # exact SI definition, independent of scipy


def budget(vna=0.0, att=0.0, unc=1.0):
    return LineBudget(vna, [[4e9, att], [8e9, att]], unc)


class TestPowerAtDevice:
    def test_zero_attenuation(self):
        assert power_at_device(budget(), 5e9)[0] == pytest.approx(1e-3, rel=1e-12)

    def test_arithmetic(self):
        assert power_at_device(budget(-10, 70), 5e9)[0] == pytest.approx(1e-11, rel=1e-12)

    def test_one_db_spread(self):
        p, s = power_at_device(budget(-10, 70), 5e9)
        assert s == pytest.approx(1e-11 * (10 ** 0.1 - 1), rel=1e-12)
        assert s == pytest.approx(2.6e-12, rel=0.01)

    def test_linear_interpolation_in_db(self):
        b = LineBudget(0.0, [[4e9, 60.0], [6e9, 70.0]])
        assert b.attenuation_at(5e9) == pytest.approx(65.0)
        assert power_at_device(b, 5e9)[0] == pytest.approx(10 ** (-9.5), rel=1e-12)

    @pytest.mark.parametrize("f", [3.9e9, 8.1e9])
    def test_outside_table(self, f):
        with pytest.raises(ValidationError) as exc:
            power_at_device(budget(), f)
        assert exc.value.code == "attenuation-unknown"

    @pytest.mark.parametrize("table", [[[4e9, -1.0]], [[5e9, 1.0], [4e9, 1.0]], [[4e9]]])
    def test_table_validation(self, table):
        with pytest.raises(ValidationError):
            LineBudget(0.0, table)

    def test_file_roundtrip(self, tmp_path):
        b = LineBudget(-20.0, [[4e9, 60.0], [6e9, 70.5]], 0.5)
        save_line_budget(tmp_path / "b.json", b)
        assert load_line_budget(tmp_path / "b.json") == b
        assert json.loads((tmp_path / "b.json").read_text())["uncertainty_db"] == 0.5


class TestPhotonNumber:
    def test_reference_value(self):
        # closed form on resonance: 2 QL^2 P / (hbar wr^2 Qc)
        wr = 2 * math.pi * 5e9
        expected = 2 * 1e6 ** 2 * 1e-18 / (HBAR * wr ** 2 * 2e6)
        n = mean_photon_number(1e-18, 5e9, 5e9, 1e6, 2e6)
        assert n == pytest.approx(expected, rel=1e-9)
        assert n == pytest.approx(9.608, abs=1e-3)

    def test_zero_power(self):
        assert mean_photon_number(0.0, 5e9, 5e9, 1e6, 2e6) == 0.0

    def test_half_power_point(self):
        ql = 1e6
        fd = 5e9 * (1 + 0.5 / ql)
        ratio = mean_photon_number(1e-18, 5e9, fd, ql, 2e6) / mean_photon_number(1e-18, 5e9, 5e9, ql, 2e6)
        # the photon-energy factor adds a relative shift of 1/(2 QL)
        assert ratio == pytest.approx(0.5, rel=1e-6)

    @settings(max_examples=50)
    @given(p=st.floats(1e-22, 1e-8), fr=st.floats(1e9, 1e10), ql=st.floats(1e3, 1e8), k=st.floats(1.01, 100))
    def test_general_form_reduces_on_resonance(self, p, fr, ql, k):
        qc = k * ql
        wr = 2 * math.pi * fr
        closed = (2.0 / (HBAR * wr ** 2)) * (ql ** 2 / qc) * p
        assert mean_photon_number(p, fr, fr, ql, qc) == pytest.approx(closed, rel=1e-12)

    @settings(max_examples=50)
    @given(p=st.floats(1e-22, 1e-8), ql=st.floats(1e3, 1e7), g=st.floats(1.01, 10))
    def test_monotone(self, p, ql, g):
        qc = 1e8
        base = mean_photon_number(p, 5e9, 5e9, ql, qc)
        assert mean_photon_number(p * g, 5e9, 5e9, ql, qc) > base
        assert mean_photon_number(p, 5e9, 5e9, ql * g, qc) > base

    def test_array_input(self):
        n = mean_photon_number(np.array([1e-18, 2e-18]), 5e9, 5e9, 1e6, 2e6)
        assert n[1] == pytest.approx(2 * n[0])

    def test_validation(self):
        with pytest.raises(ValidationError):
            mean_photon_number(1e-18, 5e9, 5e9, 0.0, 2e6)
        with pytest.raises(ValidationError):
            mean_photon_number(-1.0, 5e9, 5e9, 1e6, 2e6)


class TestRabi:
    def test_linear_in_power(self):
        assert qc_from_rabi(2e-16, 1e6) == pytest.approx(2 * qc_from_rabi(1e-16, 1e6))

    def test_inverse_square(self):
        p = 1e-16
        omega = math.sqrt(2 * p / (HBAR * 4e7))
        assert qc_from_rabi(p, omega) == pytest.approx(4e7, rel=1e-12)
        assert qc_from_rabi(p, 2 * omega) == pytest.approx(1e7, rel=1e-12)

    def test_realistic_value(self):
        # 1e-16 W and 0.98 MHz give 5.0e4 (the formula, evaluated independently)
        omega = 2 * math.pi * 0.98e6
        assert qc_from_rabi(1e-16, omega) == pytest.approx(2e-16 / (HBAR * omega ** 2), rel=1e-9)
        assert qc_from_rabi(1e-16, omega) == pytest.approx(5.0e4, rel=0.01)

    def test_needs_positive_rate(self):
        with pytest.raises(ValidationError):
            qc_from_rabi(1e-16, 0.0)

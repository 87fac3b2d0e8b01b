import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossforge.errors import ValidationError
from lossforge.sweep import (circle_phase, make_plan, phase_gap_metric, plan_linear, plan_phase_uniform,
                             plan_quadratic, plan_to_csv, plan_to_segment_table, quadratic_offsets,
                             read_segment_table)

CENTER = 5.123456789e9
SPAN = 2.7e4


@settings(max_examples=60, deadline=None)
@given(w=st.floats(1e-4, 50), m=st.integers(3, 200),
       center=st.floats(1e9, 1e10), frac=st.floats(1e-7, 1e-2))
def test_phase_uniform_shape(w, m, center, frac):
    span = center * frac
    p = plan_phase_uniform(center, span, w, 2 * m + 1)
    x = p.points
    assert x[0] == center - span / 2 and x[-1] == center + span / 2
    assert x[m] == center
    assert np.all(np.diff(x) > 0)
    np.testing.assert_array_equal(x[m:] - center, -(x[m::-1] - center))


@pytest.mark.parametrize("w", [0.5, 0.999999, 1.0, 1.000001, 3.0])
def test_no_singularity_near_unit_weight(w):
    p = plan_phase_uniform(CENTER, SPAN, w, 21)
    assert np.all(np.isfinite(p.points))
    # continuous in W across W = 1
    q = plan_phase_uniform(CENTER, SPAN, 1.0, 21)
    assert np.max(np.abs(p.points - q.points)) < SPAN * abs(w - 1) + 1e-6


def test_linear_limit_is_quadratic_in_weight():
    lin = plan_linear(CENTER, SPAN, 101).points
    dev = [np.max(np.abs(plan_phase_uniform(CENTER, SPAN, w, 101).points - lin)) for w in (1e-3, 1e-2, 1e-1)]
    assert dev[0] < dev[1] < dev[2]
    # each decade in W shrinks the displacement by about a factor 100
    for a, b in zip(dev, dev[1:]):
        assert 60 < b / a < 140
    assert dev[2] / SPAN < 0.1 ** 2


def test_larger_weight_crowds_centre():
    gaps = [np.min(np.diff(plan_phase_uniform(CENTER, SPAN, w, 51).points)) for w in (0.5, 2, 5, 20)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


@settings(max_examples=40, deadline=None)
@given(w=st.floats(0.05, 30), m=st.integers(3, 100), ql=st.floats(1e3, 3e5))
def test_equal_phase_gaps_at_matched_weight(w, m, ql):
    # float64 spacing near 5 GHz is ~1e-6 Hz, i.e. ~4*QL*1e-6/f rad of phase,
    # so the 1e-9 rad check is only meaningful for QL up to a few 1e5
    span = w * CENTER / ql
    if span >= CENTER:
        return
    p = plan_phase_uniform(CENTER, span, w, 2 * m + 1)
    gaps = np.diff(circle_phase(p.points, CENTER, ql))
    assert np.max(gaps) - np.min(gaps) < 1e-9


def test_gap_metric_against_linear():
    ql = 1e6
    span = 5 * CENTER / ql
    pu = plan_phase_uniform(CENTER, span, 5.0, 101)
    lin = plan_linear(CENTER, span, 101)
    g_pu, g_lin = phase_gap_metric(pu, ql), phase_gap_metric(lin, ql)
    assert g_pu == pytest.approx(4 * np.arctan(5.0) / 100, rel=1e-7)
    assert g_pu <= g_lin / 3


def test_gap_continuum_limit():
    ql = 2e5
    span = 3 * CENTER / ql
    g = phase_gap_metric(plan_linear(CENTER, span, 20001), ql)
    assert g == pytest.approx(2 * 2 * 3 / 20000, rel=1e-3)  # steepest slope at centre


def test_quadratic():
    np.testing.assert_allclose(quadratic_offsets(5), [-1, -0.2, 0, 0.2, 1], rtol=0, atol=1e-15)
    p = plan_quadratic(CENTER, SPAN, 11)
    d = np.diff(p.points[5:])
    np.testing.assert_allclose(d / d[0], [1, 4, 9, 16, 25], rtol=1e-6)
    assert p.points[0] == CENTER - SPAN / 2 and p.points[-1] == CENTER + SPAN / 2
    np.testing.assert_array_equal(p.points[5:] - CENTER, -(p.points[5::-1] - CENTER))


def test_make_plan_dispatch():
    assert make_plan("linear", CENTER, SPAN, 9).scheme == "linear"
    assert make_plan("quadratic", CENTER, SPAN, 9).scheme == "quadratic"
    assert make_plan("phase-uniform", CENTER, SPAN, 9, 2.0).weight == 2.0
    with pytest.raises(ValidationError):
        make_plan("phase-uniform", CENTER, SPAN, 9)
    with pytest.raises(ValidationError):
        make_plan("log", CENTER, SPAN, 9)


@pytest.mark.parametrize("kw", [dict(weight=0.0), dict(weight=-1.0), dict(n_points=8), dict(n_points=5),
                                dict(span=0.0), dict(span=2 * CENTER), dict(center=-1.0)])
def test_validation(kw):
    args = dict(center=CENTER, span=SPAN, weight=2.0, n_points=11)
    args.update(kw)
    with pytest.raises(ValidationError) as exc:
        plan_phase_uniform(**args)
    assert exc.value.code == "invalid-plan"
    with pytest.raises(ValidationError):
        phase_gap_metric(plan_linear(CENTER, SPAN, 11), 0.0)


def test_exports(tmp_path):
    p = plan_phase_uniform(CENTER, SPAN, 5.0, 15)
    csv = plan_to_csv(p).splitlines()
    assert csv[0] == "frequency_hz"
    np.testing.assert_array_equal([float(v) for v in csv[1:]], p.points)
    table = plan_to_segment_table(p, ifbw_hz=100.0, power_dbm=-20.0)
    rows = [r for r in table.splitlines() if r and not r.startswith("#")]
    assert rows[0] == "segment,start_hz,stop_hz,points,ifbw_hz,power_dbm"
    assert len(rows) == 16
    assert rows[1].startswith("1,") and rows[1].endswith(",1,100.0,-20.0")
    f = tmp_path / "seg.txt"
    f.write_text(table)
    np.testing.assert_array_equal(read_segment_table(f), p.points)

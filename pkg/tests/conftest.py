import numpy as np
import pytest

from lossforge.domain import HangerFit
from lossforge.sweep import plan_phase_uniform
from lossforge.synth import generate_trace


def hanger(fr=5e9, ql=9e5, qc=2e6, phi=0.1, a=1.0, alpha=0.0, tau=0.0):
    return HangerFit(fr=fr, q_loaded=ql, q_coupling_mag=qc, phi=phi, amplitude_a=a, alpha=alpha, tau=tau)


def synth_trace(truth=None, noise=0.0, seed=0, weight=5.0, points=101, power=None):
    truth = truth or hanger()
    plan = plan_phase_uniform(truth.fr, weight * truth.fr / truth.q_loaded, weight, points)
    return generate_trace(truth, plan, noise, seed, drive_power=power)


@pytest.fixture
def truth():
    return hanger()


@pytest.fixture
def trace(truth):
    return synth_trace(truth)


def rel(a, b):
    return abs(a / b - 1.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])

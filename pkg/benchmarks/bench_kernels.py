"""Time the numba kernels against their numpy twins.

Usage::

    python3 benchmarks/bench_kernels.py            # kernel table + end-to-end fits
    python3 benchmarks/bench_kernels.py --quick    # fewer repeats

The end-to-end part fits the same batch of traces in two subprocesses,
one with ``LOSSFORGE_NO_JIT=1``, so the import-time backend switch is
exercised exactly as a user would hit it.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from lossforge import kernels

E2E = r"""
import json, time
import numpy as np
from lossforge._jit import backend
from lossforge.circlefit import fit_hanger
from lossforge.domain import HangerFit
from lossforge.sweep import plan_phase_uniform
from lossforge.synth import generate_trace
rng = np.random.default_rng(0)
traces = []
for k in range({n}):
    ql = 10 ** rng.uniform(4, 7)
    t = HangerFit(fr=5e9, q_loaded=ql, q_coupling_mag=ql * rng.uniform(1.2, 10), phi=rng.uniform(-0.8, 0.8),
                  amplitude_a=1.0, alpha=0.3, tau=5e-11)
    traces.append(generate_trace(t, plan_phase_uniform(5e9, 5 * 5e9 / ql, 5.0, 201), 0.01, k))
fit_hanger(traces[0])  # compile / warm caches
t0 = time.perf_counter()
for tr in traces:
    fit_hanger(tr)
print(json.dumps({{"backend": backend(), "seconds": time.perf_counter() - t0}}))
"""


def inputs():
    rng = np.random.default_rng(1)
    n = 401
    f = np.linspace(5e9 - 2e5, 5e9 + 2e5, n)
    p = np.array([1.0, 0.3, 5e-11, 5e9, 1e5, 3e5, 0.2])
    re, im = kernels.hanger_np(p, f, 5e9)
    re = re + rng.normal(0, 1e-3, n)
    im = im + rng.normal(0, 1e-3, n)
    taus = np.linspace(0, 2e-9, 2001)
    p_free = rng.uniform(0.01, 1, (6, 2))
    kfix = rng.uniform(1e-9, 1e-7, 6)
    g1 = np.geomspace(1e-7, 1e-3, 64)
    g2 = np.geomspace(1e-10, 1e-6, 64)
    return {
        "taubin": ((re, im), {}),
        "delay_scan": ((2 * np.pi * f, re, im, taus), {}),
        "hanger": ((p, f, 5e9), {}),
        "hanger_jac": ((p, f, 5e9), {}),
        "sensitivity_grid": ((p_free, kfix, g1, g2, 0.1), {}),
    }


def bench(number):
    rows = []
    for name, (args, kw) in inputs().items():
        f_np = getattr(kernels, name + "_np")
        f_nb = getattr(kernels, name + "_nb")
        f_nb(*args, **kw)  # compile outside the timing
        t_np = min(timeit.repeat(lambda: f_np(*args, **kw), number=number, repeat=3)) / number
        t_nb = min(timeit.repeat(lambda: f_nb(*args, **kw), number=number, repeat=3)) / number
        rows.append((name, t_np, t_nb))
    return rows


def end_to_end(n):
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, LOSSFORGE_NO_JIT=flag)
        res = subprocess.run([sys.executable, "-c", E2E.format(n=n)], env=env, capture_output=True,
                             text=True, check=True)
        doc = json.loads(res.stdout.strip().splitlines()[-1])
        out[doc["backend"]] = doc["seconds"]
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true")
    a = ap.parse_args(argv)
    number = 5 if a.quick else 50
    print(f"{'kernel':<18}{'numpy (us)':>14}{'numba (us)':>14}{'speed-up':>10}")
    for name, t_np, t_nb in bench(number):
        print(f"{name:<18}{t_np * 1e6:>14.1f}{t_nb * 1e6:>14.1f}{t_np / t_nb:>10.1f}")
    n = 10 if a.quick else 50
    e2e = end_to_end(n)
    print(f"\nfit_hanger on {n} traces: numpy {e2e['numpy']:.2f} s, numba {e2e['numba']:.2f} s "
          f"({e2e['numpy'] / e2e['numba']:.1f}x)")


if __name__ == "__main__":
    main()

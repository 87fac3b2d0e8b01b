"""Hanger-resonator fitting in the complex plane.

The pipeline is the usual geometric one: remove the cable delay, fit a
circle algebraically, fit the phase-vs-frequency arctangent around the
circle centre, read the environment prefactor off the point opposite
resonance, then polish all seven parameters together with
Levenberg-Marquardt on the complex residual.

Model::

    S21(f) = a e^{i alpha} e^{-i w tau} [1 - (QL/|Qc|) e^{i phi} / (1 + 2i QL (f/fr - 1))]
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from . import kernels
from .domain import HANGER_PARAMS, FrequencyTrace, HangerFit
from .errors import NumericalError, ValidationError

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
# coarse delay scan: +-DELAY_SCAN_HALFWIDTH / span around the end-slope guess
DELAY_SCAN_HALFWIDTH = 1.5
DELAY_SCAN_POINTS = 151
# a resonance circle must stand this far above the geometric residual
MIN_RADIUS_TO_RESIDUAL = 3.0


@dataclass(frozen=True)
class CircleGeometry:
    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError("circle radius must be > 0", "degenerate-circle")


def _wrap(angle):
    return (angle + np.pi) % (2.0 * np.pi) - np.pi


def algebraic_circle_fit(points) -> CircleGeometry:
    """Taubin fit of a circle to complex points."""
    z = np.asarray(points, dtype=complex).ravel()
    if z.size < 3:
        raise ValidationError("need at least 3 points for a circle", "degenerate-circle")
    xc, yc, r, ok = kernels.taubin(np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag))
    if not ok or not np.isfinite(r) or r <= 0:
        raise ValidationError("points are collinear or coincident", "degenerate-circle")
    return CircleGeometry(complex(xc, yc), float(r))


def _end_slope_delay(trace):
    n = len(trace)
    k = max(3, n // 10)
    w = trace.omega
    est = []
    for sl in (slice(0, k), slice(n - k, n)):
        ph = np.unwrap(np.angle(trace.s21[sl]))
        slope = np.polyfit(w[sl] - w[sl].mean(), ph, 1)[0]
        est.append(-slope)
    return 0.5 * (est[0] + est[1])


def _golden_min(fun, lo, hi, tol, maxiter=200):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(maxiter):
        if abs(b - a) <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def estimate_delay(trace: FrequencyTrace) -> float:
    """Electrical delay that makes the trace most circular.

    Coarse scan around the end-region phase slope, then golden-section
    refinement of the Taubin circle residual.
    """
    w = np.ascontiguousarray(trace.omega)
    re = np.ascontiguousarray(trace.s21.real)
    im = np.ascontiguousarray(trace.s21.imag)
    span = trace.frequency[-1] - trace.frequency[0]
    tau0 = _end_slope_delay(trace)
    step = 2.0 * DELAY_SCAN_HALFWIDTH / span / (DELAY_SCAN_POINTS - 1)
    taus = tau0 + step * np.arange(-(DELAY_SCAN_POINTS // 2), DELAY_SCAN_POINTS // 2 + 1)
    rss = kernels.delay_scan(w, re, im, taus)
    if not np.any(np.isfinite(rss)):
        raise NumericalError("no circular structure found at any delay", "no-resonance")
    k = int(np.argmin(rss))

    def objective(t):
        return kernels.delay_scan(w, re, im, np.array([t]))[0]

    tau = _golden_min(objective, taus[k] - step, taus[k] + step, tol=1e-9 * step)

    z = trace.s21 * np.exp(1j * w * tau)
    xc, yc, r, ok = kernels.taubin(np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag))
    if not ok:
        raise NumericalError("trace collapses to a point after delay removal", "no-resonance")
    rms = math.sqrt(objective(tau) / len(trace))
    # a physical hanger circle never encloses the origin (that needs Q_int < 0);
    # a flat trace wrapped by a delay gives a circle centred on it
    if math.hypot(xc, yc) < 0.5 * r:
        raise NumericalError("delay-corrected trace circles the origin; no resonance in span",
                             "no-resonance")
    if r < MIN_RADIUS_TO_RESIDUAL * rms:
        raise NumericalError(
            f"circle radius {r:.3g} is below the noise floor (residual rms {rms:.3g})",
            "no-resonance", radius=r, residual_rms=rms)
    return float(tau)


def _phase_model(p, f, f0, q0):
    theta0, eps, qs = p
    ql = qs * q0
    fr = f0 * (1.0 + eps / q0)
    return theta0 + 2.0 * np.arctan(2.0 * ql * (1.0 - f / fr))


def _phase_jac(p, f, f0, q0):
    theta0, eps, qs = p
    ql = qs * q0
    fr = f0 * (1.0 + eps / q0)
    u = 2.0 * ql * (1.0 - f / fr)
    g = 2.0 / (1.0 + u * u)
    J = np.empty((f.size, 3))
    J[:, 0] = 1.0
    # du/dfr = 2 ql f / fr^2 ; dfr/deps = f0 / q0
    J[:, 1] = g * 2.0 * ql * f / fr ** 2 * f0 / q0
    J[:, 2] = g * 2.0 * (1.0 - f / fr) * q0
    return J


def phase_fit(trace_on_circle: FrequencyTrace, geometry: CircleGeometry, max_nfev=400):
    """Fit theta(f) = theta0 + 2 arctan(2 QL (1 - f/fr)) around the circle centre.

    Returns ``(fr, q_loaded, theta0)``.
    """
    f = np.asarray(trace_on_circle.frequency)
    if np.any(np.diff(f) <= 0):
        raise ValidationError("frequencies must be strictly increasing", "invalid-trace")
    theta = np.unwrap(np.angle(trace_on_circle.s21 - geometry.center))

    df = np.diff(f)
    slope = np.diff(theta) / df
    k = int(np.argmax(np.abs(slope)))
    f0 = 0.5 * (f[k] + f[k + 1])
    q0 = abs(slope[k]) * f0 / 4.0
    q0 = max(q0, 2.0 * f0 / (f[-1] - f[0]) * 1e-3, 1.0)
    theta0 = 0.5 * (theta[k] + theta[k + 1])

    res = least_squares(
        lambda p: _phase_model(p, f, f0, q0) - theta,
        np.array([theta0, 0.0, 1.0]),
        jac=lambda p: _phase_jac(p, f, f0, q0),
        method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    rms = float(np.sqrt(np.mean(res.fun ** 2)))
    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise NumericalError(f"phase fit did not converge (residual rms {rms:.3g} rad)",
                             "phase-fit-failed", residual_rms=rms)
    th0, eps, qs = res.x
    ql = qs * q0
    fr = f0 * (1.0 + eps / q0)
    if ql <= 0 or not (f[0] <= fr <= f[-1]):
        raise NumericalError(
            f"phase fit landed outside the physical region (QL={ql:.3g}, fr={fr:.6g})",
            "phase-fit-failed", residual_rms=rms)
    return float(fr), float(ql), float(th0)


def _initial_guess(trace):
    tau = estimate_delay(trace)
    corrected = trace.with_s21(trace.s21 * np.exp(1j * trace.omega * tau))
    geom = algebraic_circle_fit(corrected.s21)
    fr, ql, theta0 = phase_fit(corrected, geom)
    p_res = geom.center + geom.radius * np.exp(1j * theta0)
    off = geom.center - geom.radius * np.exp(1j * theta0)
    a = abs(off)
    alpha = float(np.angle(off))
    de = 1.0 - p_res / off
    d = abs(de)
    phi = float(np.angle(de))
    return dict(amplitude_a=a, alpha=alpha, tau=tau, fr=fr, q_loaded=ql,
                q_coupling_mag=ql / d, phi=phi)


def _scaled_inverse(jtj):
    s = np.sqrt(np.diag(jtj))
    s[s == 0] = 1.0
    m = jtj / np.outer(s, s)
    try:
        inv = np.linalg.inv(m)
    except np.linalg.LinAlgError:
        inv = np.linalg.pinv(m)
    return inv / np.outer(s, s)


def fit_hanger(trace: FrequencyTrace, max_nfev=500) -> HangerFit:
    """Full hanger fit with per-parameter uncertainties."""
    g = _initial_guess(trace)
    f = np.ascontiguousarray(trace.frequency)
    y = np.concatenate([trace.s21.real, trace.s21.imag])
    f_ref = g["fr"]
    p0 = np.array([g["amplitude_a"], g["alpha"] - 2.0 * np.pi * f_ref * g["tau"], g["tau"],
                   0.0, g["q_loaded"], g["q_coupling_mag"], g["phi"]])

    def fun(p):
        re, im = kernels.hanger(p, f, f_ref)
        return np.concatenate([re, im]) - y

    res = least_squares(fun, p0, jac=lambda p: kernels.hanger_jac(p, f, f_ref),
                        method="lm", x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        max_nfev=max_nfev)
    p = res.x
    rss = float(res.fun @ res.fun)
    rms = math.sqrt(rss / f.size)
    if res.status <= 0 or not np.all(np.isfinite(p)):
        raise NumericalError(f"hanger refinement did not converge (rms {rms:.3g})",
                             "hanger-fit-failed", residual_rms=rms)
    a, alc, tau, delta, ql, qc, phi = p
    if a < 0:
        a, alc = -a, alc + np.pi
    if ql <= 0 or qc <= 0:
        raise NumericalError("refinement produced a non-positive quality factor",
                             "hanger-fit-failed", residual_rms=rms)
    fr = f_ref * (1.0 + delta)
    alpha = _wrap(alc + 2.0 * np.pi * f_ref * tau)
    phi = _wrap(phi)
    if abs(phi) >= np.pi / 2:
        raise NumericalError(f"asymmetry angle phi={phi:.3f} rad is outside (-pi/2, pi/2)",
                             "invalid-asymmetry", phi=phi)
    if not (f[0] <= fr <= f[-1]):
        raise NumericalError("fitted resonance lies outside the measured span",
                             "hanger-fit-failed", fr=fr)

    J = res.jac
    dof = max(y.size - 7, 1)
    cov_int = _scaled_inverse(J.T @ J) * (rss / dof)
    T = np.eye(7)
    T[1, 2] = 2.0 * np.pi * f_ref  # alpha = alpha_c + 2 pi f_ref tau
    T[3, 3] = f_ref                # fr = f_ref (1 + delta)
    cov = T @ cov_int @ T.T
    # internal order (a, alpha, tau, delta->fr, QL, Qc, phi) already matches HANGER_PARAMS
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return HangerFit(fr=float(fr), q_loaded=float(ql), q_coupling_mag=float(qc), phi=float(phi),
                     amplitude_a=float(a), alpha=float(alpha), tau=float(tau),
                     sigma=dict(zip(HANGER_PARAMS, map(float, sig))),
                     covariance=cov, residual_rms=rms)


def internal_q(fit: HangerFit):
    """Internal Q and its first-order standard deviation.

    Uses the full fit covariance when present so the strong QL/|Qc|
    correlation is accounted for.
    """
    ql, qc, phi = fit.q_loaded, fit.q_coupling_mag, fit.phi
    k = 1.0 / ql - math.cos(phi) / qc
    if not k > 0:
        raise NumericalError(
            f"1/QL={1 / ql:.4g} does not exceed cos(phi)/|Qc|={math.cos(phi) / qc:.4g}",
            "nonphysical-internal-loss")
    qi = 1.0 / k
    grad = -qi * qi * np.array([-1.0 / ql ** 2, math.cos(phi) / qc ** 2, math.sin(phi) / qc])
    idx = [HANGER_PARAMS.index(n) for n in ("q_loaded", "q_coupling_mag", "phi")]
    if fit.covariance is not None:
        c = np.asarray(fit.covariance)[np.ix_(idx, idx)]
        var = float(grad @ c @ grad)
    else:
        s = np.array([fit.sigma.get(n, 0.0) for n in ("q_loaded", "q_coupling_mag", "phi")])
        s = np.nan_to_num(s)
        var = float(np.sum((grad * s) ** 2))
    return qi, math.sqrt(max(var, 0.0))

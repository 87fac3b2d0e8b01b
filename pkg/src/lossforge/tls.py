"""TLS saturation fit of internal loss versus photon number.

Model in loss space::

    1/Q_int(n) = q0_inv + A / sqrt(1 + (n/n_c)^beta)

``A`` is the product of surface participation and TLS loss tangent; it is
split downstream once the participation is known.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import NumericalError, ValidationError

TLS_PARAMS = ("q0_inv", "tls_amplitude", "n_critical", "beta")
MIN_POINTS = 5
MIN_DECADES = 2.0
BETA_BOUNDS = (0.01, 10.0)


@dataclass(frozen=True)
class TlsFit:
    q0_inv: float
    tls_amplitude: float
    n_critical: float
    beta: float
    sigma: dict = field(default_factory=dict)
    covariance: np.ndarray = field(default=None, compare=False, repr=False)
    chi2_reduced: float = float("nan")
    flags: tuple = ()

    def __post_init__(self):
        if not (self.q0_inv >= 0 and self.tls_amplitude >= 0 and self.n_critical > 0 and self.beta > 0):
            raise ValidationError("TLS parameters must be non-negative (n_c, beta > 0)", "invalid-tls")

    def params(self):
        return np.array([self.q0_inv, self.tls_amplitude, self.n_critical, self.beta])

    def loss(self, n):
        n = np.asarray(n, dtype=float)
        return self.q0_inv + self.tls_amplitude / np.sqrt(1.0 + (n / self.n_critical) ** self.beta)

    def to_dict(self):
        d = {k: getattr(self, k) for k in TLS_PARAMS}
        d["sigma"] = {k: self.sigma[k] for k in TLS_PARAMS if k in self.sigma}
        d["chi2_reduced"] = self.chi2_reduced
        d["flags"] = list(self.flags)
        if self.covariance is not None:
            d["covariance"] = np.asarray(self.covariance).tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        cov = d.get("covariance")
        return cls(*(float(d[k]) for k in TLS_PARAMS),
                   sigma={k: float(v) for k, v in d.get("sigma", {}).items()},
                   covariance=None if cov is None else np.array(cov, dtype=float),
                   chi2_reduced=float(d.get("chi2_reduced", float("nan"))),
                   flags=tuple(d.get("flags", ())))


def _loss_grad(params, n):
    """d(1/Q)/d(q0_inv, A, n_c, beta) for each n, shape (len(n), 4)."""
    q0, a, nc, beta = params
    n = np.atleast_1d(np.asarray(n, dtype=float))
    r = n / nc
    with np.errstate(divide="ignore", invalid="ignore"):
        rb = r ** beta
        s = 1.0 + rb
        core = 1.0 / np.sqrt(s)
        dterm_drb = -0.5 * a * s ** -1.5
        lnr = np.where(r > 0, np.log(np.where(r > 0, r, 1.0)), 0.0)
    g = np.empty((n.size, 4))
    g[:, 0] = 1.0
    g[:, 1] = core
    g[:, 2] = dterm_drb * rb * (-beta / nc)
    g[:, 3] = dterm_drb * rb * lnr
    return g


def _unpack(points):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise ValidationError("points must be rows of (n, q_int[, q_int_sigma])", "invalid-input")
    n, q = arr[:, 0], arr[:, 1]
    s = arr[:, 2] if arr.shape[1] == 3 else np.zeros_like(q)
    if not (np.all(np.isfinite(arr)) and np.all(n > 0) and np.all(q > 0) and np.all(s >= 0)):
        raise ValidationError("need n > 0, q_int > 0 and sigma >= 0", "invalid-input")
    return n, q, s


def fit_tls(points, max_nfev=2000) -> TlsFit:
    """Weighted fit of the saturation model to ``(n, q_int, q_int_sigma)`` rows.

    Weights are inverse variance of ``1/Q``.  If every sigma is zero the fit
    uses relative weights (``sigma_{1/Q} = 1/Q``).  The parameter
    covariance is scaled by ``max(1, chi2_reduced)``.
    """
    n, q, s = _unpack(points)
    if n.size < MIN_POINTS:
        raise ValidationError(f"need at least {MIN_POINTS} points, got {n.size}", "insufficient-power-range")
    decades = math.log10(n.max() / n.min())
    if decades < MIN_DECADES:
        raise ValidationError(f"photon numbers span {decades:.2f} decades; need >= {MIN_DECADES}",
                              "insufficient-power-range")
    if np.all(s == 0):
        sk = 1.0 / q
    elif np.any(s == 0):
        raise ValidationError("either all or none of the q_int sigmas may be zero", "invalid-input")
    else:
        sk = s / q ** 2
    k = 1.0 / q
    order = np.argsort(n)
    n, k, sk = n[order], k[order], sk[order]

    q0 = max(float(np.mean(k[-3:])), 0.0)
    a0 = max(float(k[0] - q0), 0.0)
    nc0 = math.sqrt(n.min() * n.max())
    x0 = np.array([q0, max(a0, 1e-3 * max(q0, 1e-30)), math.log(nc0), 1.0])
    scale = max(k.max(), 1e-300)

    def model(x):
        return x[0] + x[1] / np.sqrt(1.0 + np.exp(x[3] * (np.log(n) - x[2])))

    def resid(x):
        return (model(x) - k) / sk

    def jac(x):
        p = (x[0], x[1], math.exp(x[2]), x[3])
        g = _loss_grad(p, n)
        g[:, 2] *= p[2]  # d/d ln(nc)
        return g / sk[:, None]

    lo = [0.0, 0.0, math.log(n.min()) - 10.0, BETA_BOUNDS[0]]
    hi = [np.inf, np.inf, math.log(n.max()) + 10.0, BETA_BOUNDS[1]]
    x0 = np.clip(x0, lo, hi)
    res = least_squares(resid, x0, jac=jac, bounds=(lo, hi), method="trf",
                        x_scale=np.array([scale, scale, 1.0, 1.0]),
                        xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=max_nfev)
    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise NumericalError(f"TLS fit did not converge: {res.message}", "tls-fit-failed",
                             residuals=res.fun.tolist())
    x = res.x
    dof = max(n.size - 4, 1)
    chi2r = float(res.fun @ res.fun / dof)

    J = jac(x)
    cov_x = np.linalg.pinv(J.T @ J) * max(1.0, chi2r)
    T = np.diag([1.0, 1.0, math.exp(x[2]), 1.0])
    cov = T @ cov_x @ T.T
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    flags = []
    if not (0.0 < x[3] <= 2.0):
        flags.append("beta-outside-typical-range")
    if x[1] == 0.0:
        flags.append("no-tls-amplitude")
    return TlsFit(float(x[0]), float(x[1]), float(math.exp(x[2])), float(x[3]),
                  sigma=dict(zip(TLS_PARAMS, map(float, sig))), covariance=cov,
                  chi2_reduced=chi2r, flags=tuple(flags))


def q_int_at(fit: TlsFit, n):
    """Internal Q and its first-order sigma at photon number(s) ``n``."""
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr <= 0):
        raise ValidationError("photon number must be > 0", "invalid-input")
    loss = fit.loss(n_arr)
    if fit.covariance is not None:
        g = _loss_grad(fit.params(), np.atleast_1d(n_arr))
        var = np.einsum("ij,jk,ik->i", g, np.asarray(fit.covariance), g)
    else:
        sig = np.array([fit.sigma.get(k, 0.0) for k in TLS_PARAMS])
        g = _loss_grad(fit.params(), np.atleast_1d(n_arr))
        var = np.sum((g * sig) ** 2, axis=1)
    q = 1.0 / loss
    sq = q * q * np.sqrt(np.clip(var, 0.0, None))
    if n_arr.ndim == 0:
        return float(q), float(sq[0])
    return q, sq.reshape(n_arr.shape)

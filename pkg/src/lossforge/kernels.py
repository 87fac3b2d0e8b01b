"""Hot numerical kernels.

Each kernel exists twice: a vectorised numpy version (``*_np``) and an
explicit-loop version compiled with numba (``*_nb``).  The public name
binds to whichever backend :mod:`lossforge._jit` selected at import time,
so the rest of the package never needs to know which one it is running.

Both paths must agree to rounding; ``tests/test_kernels.py`` checks that and
``benchmarks/bench_kernels.py`` times them against each other.
"""
import numpy as np

from ._jit import USE_NUMBA, njit

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# Taubin algebraic circle fit
# ---------------------------------------------------------------------------

def taubin_np(x, y):
    """Return ``(xc, yc, r, ok)`` for the Taubin fit of points ``(x, y)``.

    ``ok`` is False when the points are (numerically) collinear.
    """
    xm = x.mean()
    ym = y.mean()
    X = x - xm
    Y = y - ym
    Z = X * X + Y * Y
    zmean = Z.mean()
    if not zmean > 0.0:
        return xm, ym, 0.0, False
    s = 2.0 * np.sqrt(zmean)
    M = np.empty((x.size, 3))
    M[:, 0] = (Z - zmean) / s
    M[:, 1] = X
    M[:, 2] = Y
    _, sv, vt = np.linalg.svd(M, full_matrices=False)
    v = vt[2]
    A = v[0] / s
    if abs(A) <= 1e-12 * (abs(v[1]) + abs(v[2])) / np.sqrt(zmean):
        return xm, ym, 0.0, False
    D = -zmean * A
    xc = -v[1] / A / 2.0
    yc = -v[2] / A / 2.0
    r = np.sqrt(v[1] * v[1] + v[2] * v[2] - 4.0 * A * D) / abs(A) / 2.0
    return xc + xm, yc + ym, r, True


@njit
def taubin_nb(x, y):
    n = x.size
    xm = 0.0
    ym = 0.0
    for i in range(n):
        xm += x[i]
        ym += y[i]
    xm /= n
    ym /= n
    zmean = 0.0
    for i in range(n):
        dx = x[i] - xm
        dy = y[i] - ym
        zmean += dx * dx + dy * dy
    zmean /= n
    if not zmean > 0.0:
        return xm, ym, 0.0, False
    s = 2.0 * np.sqrt(zmean)
    M = np.empty((n, 3))
    for i in range(n):
        dx = x[i] - xm
        dy = y[i] - ym
        M[i, 0] = (dx * dx + dy * dy - zmean) / s
        M[i, 1] = dx
        M[i, 2] = dy
    _, sv, vt = np.linalg.svd(M, full_matrices=False)
    v0 = vt[2, 0]
    v1 = vt[2, 1]
    v2 = vt[2, 2]
    A = v0 / s
    if abs(A) <= 1e-12 * (abs(v1) + abs(v2)) / np.sqrt(zmean):
        return xm, ym, 0.0, False
    D = -zmean * A
    xc = -v1 / A / 2.0
    yc = -v2 / A / 2.0
    r = np.sqrt(v1 * v1 + v2 * v2 - 4.0 * A * D) / abs(A) / 2.0
    return xc + xm, yc + ym, r, True


# ---------------------------------------------------------------------------
# Electrical-delay scan: circle residual of S21 * exp(+i w tau) for many tau
# ---------------------------------------------------------------------------

def delay_scan_np(omega, re, im, taus):
    out = np.empty(taus.size)
    z = re + 1j * im
    for k in range(taus.size):
        zc = z * np.exp(1j * omega * taus[k])
        x = zc.real
        y = zc.imag
        xc, yc, r, ok = taubin_np(x, y)
        if not ok:
            out[k] = np.inf
            continue
        d = np.hypot(x - xc, y - yc) - r
        out[k] = np.dot(d, d)
    return out


@njit
def delay_scan_nb(omega, re, im, taus):
    n = omega.size
    out = np.empty(taus.size)
    x = np.empty(n)
    y = np.empty(n)
    for k in range(taus.size):
        for i in range(n):
            c = np.cos(omega[i] * taus[k])
            s = np.sin(omega[i] * taus[k])
            x[i] = re[i] * c - im[i] * s
            y[i] = re[i] * s + im[i] * c
        xc, yc, r, ok = taubin_nb(x, y)
        if not ok:
            out[k] = np.inf
            continue
        acc = 0.0
        for i in range(n):
            d = np.hypot(x[i] - xc, y[i] - yc) - r
            acc += d * d
        out[k] = acc
    return out


# ---------------------------------------------------------------------------
# Hanger model and Jacobian
#
# p = [a, alpha_c, tau, delta, q_loaded, q_coupling_mag, phi] with
#   fr = f_ref * (1 + delta),  alpha_c = alpha - 2 pi f_ref tau
# S(f) = a e^{i alpha_c} e^{-i 2 pi (f - f_ref) tau}
#        [1 - (QL/|Qc|) e^{i phi} / (1 + 2i QL (f/fr - 1))]
# ---------------------------------------------------------------------------

def hanger_np(p, f, f_ref):
    a, alc, tau, delta, ql, qc, phi = p
    fr = f_ref * (1.0 + delta)
    x = f / fr - 1.0
    g = 1.0 + 2j * ql * x
    E = a * np.exp(1j * (alc - TWO_PI * (f - f_ref) * tau))
    L = (ql / qc) * np.exp(1j * phi) / g
    S = E * (1.0 - L)
    return S.real.copy(), S.imag.copy()


def hanger_jac_np(p, f, f_ref):
    a, alc, tau, delta, ql, qc, phi = p
    fr = f_ref * (1.0 + delta)
    ratio = f / fr
    x = ratio - 1.0
    g = 1.0 + 2j * ql * x
    E = a * np.exp(1j * (alc - TWO_PI * (f - f_ref) * tau))
    eph = np.exp(1j * phi)
    L = (ql / qc) * eph / g
    S = E * (1.0 - L)
    n = f.size
    J = np.empty((2 * n, 7))
    cols = (
        S / a,
        1j * S,
        -1j * TWO_PI * (f - f_ref) * S,
        -E * (L / g) * (2j * ql * ratio / (1.0 + delta)),
        -E * eph * (1.0 / qc / g - (ql / qc) * 2j * x / (g * g)),
        E * L / qc,
        -1j * E * L,
    )
    for k, c in enumerate(cols):
        J[:n, k] = c.real
        J[n:, k] = c.imag
    return J


@njit
def hanger_nb(p, f, f_ref):
    a = p[0]
    alc = p[1]
    tau = p[2]
    delta = p[3]
    ql = p[4]
    qc = p[5]
    phi = p[6]
    fr = f_ref * (1.0 + delta)
    n = f.size
    re = np.empty(n)
    im = np.empty(n)
    d = ql / qc
    eph = complex(np.cos(phi), np.sin(phi))
    for i in range(n):
        x = f[i] / fr - 1.0
        g = complex(1.0, 2.0 * ql * x)
        ang = alc - TWO_PI * (f[i] - f_ref) * tau
        E = a * complex(np.cos(ang), np.sin(ang))
        S = E * (1.0 - d * eph / g)
        re[i] = S.real
        im[i] = S.imag
    return re, im


@njit
def hanger_jac_nb(p, f, f_ref):
    a = p[0]
    alc = p[1]
    tau = p[2]
    delta = p[3]
    ql = p[4]
    qc = p[5]
    phi = p[6]
    fr = f_ref * (1.0 + delta)
    n = f.size
    J = np.empty((2 * n, 7))
    d = ql / qc
    eph = complex(np.cos(phi), np.sin(phi))
    for i in range(n):
        ratio = f[i] / fr
        x = ratio - 1.0
        g = complex(1.0, 2.0 * ql * x)
        ang = alc - TWO_PI * (f[i] - f_ref) * tau
        E = a * complex(np.cos(ang), np.sin(ang))
        L = d * eph / g
        S = E * (1.0 - L)
        c0 = S / a
        c1 = 1j * S
        c2 = -1j * TWO_PI * (f[i] - f_ref) * S
        c3 = -E * (L / g) * (2j * ql * ratio / (1.0 + delta))
        c4 = -E * eph * (1.0 / qc / g - d * 2j * x / (g * g))
        c5 = E * L / qc
        c6 = -1j * E * L
        J[i, 0] = c0.real
        J[n + i, 0] = c0.imag
        J[i, 1] = c1.real
        J[n + i, 1] = c1.imag
        J[i, 2] = c2.real
        J[n + i, 2] = c2.imag
        J[i, 3] = c3.real
        J[n + i, 3] = c3.imag
        J[i, 4] = c4.real
        J[n + i, 4] = c4.imag
        J[i, 5] = c5.real
        J[n + i, 5] = c5.imag
        J[i, 6] = c6.real
        J[n + i, 6] = c6.imag
    return J


# ---------------------------------------------------------------------------
# Two-channel sensitivity grid
# ---------------------------------------------------------------------------

def sensitivity_grid_np(p_free, kappa_fixed, g1, g2, frac):
    """Fractional errors of two free loss factors over a grid.

    ``p_free`` is (modes, 2); returns two (len(g1), len(g2)) arrays.
    """
    kappa = (p_free[:, 0][:, None, None] * g1[None, :, None]
             + p_free[:, 1][:, None, None] * g2[None, None, :]
             + kappa_fixed[:, None, None])
    w = 1.0 / (frac * kappa) ** 2
    n00 = np.einsum("m,mij->ij", p_free[:, 0] ** 2, w)
    n11 = np.einsum("m,mij->ij", p_free[:, 1] ** 2, w)
    n01 = np.einsum("m,mij->ij", p_free[:, 0] * p_free[:, 1], w)
    det = n00 * n11 - n01 * n01
    with np.errstate(divide="ignore", invalid="ignore"):
        c00 = np.where(det > 0, n11 / det, np.inf)
        c11 = np.where(det > 0, n00 / det, np.inf)
    e1 = np.sqrt(c00) / g1[:, None]
    e2 = np.sqrt(c11) / g2[None, :]
    return e1, e2


@njit
def sensitivity_grid_nb(p_free, kappa_fixed, g1, g2, frac):
    m = p_free.shape[0]
    n1 = g1.size
    n2 = g2.size
    e1 = np.empty((n1, n2))
    e2 = np.empty((n1, n2))
    for i in range(n1):
        for j in range(n2):
            n00 = 0.0
            n11 = 0.0
            n01 = 0.0
            for k in range(m):
                kap = p_free[k, 0] * g1[i] + p_free[k, 1] * g2[j] + kappa_fixed[k]
                w = 1.0 / (frac * kap) ** 2
                n00 += p_free[k, 0] * p_free[k, 0] * w
                n11 += p_free[k, 1] * p_free[k, 1] * w
                n01 += p_free[k, 0] * p_free[k, 1] * w
            det = n00 * n11 - n01 * n01
            if det > 0.0:
                e1[i, j] = np.sqrt(n11 / det) / g1[i]
                e2[i, j] = np.sqrt(n00 / det) / g2[j]
            else:
                e1[i, j] = np.inf
                e2[i, j] = np.inf
    return e1, e2


if USE_NUMBA:
    taubin = taubin_nb
    delay_scan = delay_scan_nb
    hanger = hanger_nb
    hanger_jac = hanger_jac_nb
    sensitivity_grid = sensitivity_grid_nb
else:
    taubin = taubin_np
    delay_scan = delay_scan_np
    hanger = hanger_np
    hanger_jac = hanger_jac_np
    sensitivity_grid = sensitivity_grid_np

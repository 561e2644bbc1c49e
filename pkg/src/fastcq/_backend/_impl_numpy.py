"""Vectorized numpy implementations of the hot kernels.

Fallback path when numba is unavailable or FASTCQ_BACKEND=numpy.  The
function surface matches ``_impl_numba`` exactly.
"""

import math

import numpy as np

NAME = "numpy"

# phi2 series coefficients 1/(j+2)!, j = 0..10 (Horner order reversed)
_PHI2_COEFFS = np.array([1.0 / math.factorial(j + 2) for j in range(11)][::-1])
_SMALL = 0.15


def phi_pair(z):
    """phi1(z) = (e^z - 1)/z and phi2(z) = (e^z - 1 - z)/z^2, elementwise.

    Small |z| uses the Taylor series of phi2 and the identity
    phi1 = 1 + z*phi2, which avoids the subtractive cancellation of the
    direct formulas.
    """
    z = np.asarray(z, dtype=np.complex128)
    p1 = np.empty_like(z)
    p2 = np.empty_like(z)
    small = np.abs(z) < _SMALL
    big = ~small
    zb = z[big]
    ez = np.exp(zb) - 1.0
    p1[big] = ez / zb
    p2[big] = (ez - zb) / zb**2
    zs = z[small]
    acc = np.zeros_like(zs)
    for c in _PHI2_COEFFS:
        acc = acc * zs + c
    p2[small] = acc
    p1[small] = 1.0 + zs * acc
    return p1, p2


def advance_banks(data, lam, dt, gp, gn):
    """Exponential-Euler update of every ODE bank, in place.

    data[l, k, :] <- e^z data + dt (phi1(z) g_prev + phi2(z) (g_n - g_prev))
    with z = dt * lam[l, k]; exact for the linear interpolant of g.
    """
    z = lam * dt
    p1, p2 = phi_pair(z)
    ez = np.exp(z)
    dg = gn - gp
    data *= ez[:, :, None]
    data += dt * (p1[:, :, None] * gp[None, None, :] + p2[:, :, None] * dg[None, None, :])


def ode_sum_sym(data, lam, wf, tcur, tn, sel, out):
    """Accumulate sum_k wf_k e^((tn - tcur_l) lam_k) data_k over selected
    levels into real ``out``; wf carries the conjugate-pair doubling."""
    for l in np.nonzero(sel)[0]:
        e = np.exp((tn - tcur[l]) * lam[l])
        out += ((wf[l] * e) @ data[l]).real
    return out


def ode_sum_full(data, lam, wf, tcur, tn, sel, out):
    """Full-bank variant of ``ode_sum_sym`` with complex accumulation."""
    for l in np.nonzero(sel)[0]:
        e = np.exp((tn - tcur[l]) * lam[l])
        out += (wf[l] * e) @ data[l]
    return out


def f12_sum(wf1, wf2, lam, t):
    """(f1, f2)(t) on one contour from the cached w*F1 and w*F2 rows."""
    e = np.exp(t * lam)
    return complex(wf1 @ e), complex(wf2 @ e)

"""Numba-jitted implementations of the hot kernels.

Loop bodies are written scalar-wise so numba emits tight machine code; the
accumulation order matches the numpy path level-by-level so both backends
agree to rounding.
"""

import math

import numpy as np
from numba import njit

NAME = "numba"

_PHI2_COEFFS = np.array([1.0 / math.factorial(j + 2) for j in range(11)][::-1])
_SMALL = 0.15


@njit(cache=True, inline="always")
def _phi_scalar(z):
    if abs(z) < _SMALL:
        acc = 0.0 + 0.0j
        for c in _PHI2_COEFFS:
            acc = acc * z + c
        return 1.0 + z * acc, acc
    ez = np.exp(z) - 1.0
    return ez / z, (ez - z) / (z * z)


@njit(cache=True)
def phi_pair(z):
    flat = z.ravel()
    p1 = np.empty_like(flat)
    p2 = np.empty_like(flat)
    for i in range(flat.size):
        p1[i], p2[i] = _phi_scalar(flat[i])
    return p1.reshape(z.shape), p2.reshape(z.shape)


@njit(cache=True)
def advance_banks(data, lam, dt, gp, gn):
    L, Kd, m = data.shape
    for l in range(L):
        for k in range(Kd):
            z = lam[l, k] * dt
            p1, p2 = _phi_scalar(z)
            ez = np.exp(z)
            for j in range(m):
                data[l, k, j] = ez * data[l, k, j] + dt * (p1 * gp[j] + p2 * (gn[j] - gp[j]))


@njit(cache=True)
def ode_sum_sym(data, lam, wf, tcur, tn, sel, out):
    L, Kd, m = data.shape
    for l in range(L):
        if not sel[l]:
            continue
        d = tn - tcur[l]
        for k in range(Kd):
            c = wf[l, k] * np.exp(d * lam[l, k])
            for j in range(m):
                out[j] += (c * data[l, k, j]).real
    return out


@njit(cache=True)
def ode_sum_full(data, lam, wf, tcur, tn, sel, out):
    L, Kd, m = data.shape
    for l in range(L):
        if not sel[l]:
            continue
        d = tn - tcur[l]
        for k in range(Kd):
            c = wf[l, k] * np.exp(d * lam[l, k])
            for j in range(m):
                out[j] += c * data[l, k, j]
    return out


@njit(cache=True)
def f12_sum(wf1, wf2, lam, t):
    s1 = 0.0 + 0.0j
    s2 = 0.0 + 0.0j
    for k in range(lam.size):
        e = np.exp(t * lam[k])
        s1 += wf1[k] * e
        s2 += wf2[k] * e
    return s1, s2

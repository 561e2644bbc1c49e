"""Nonlinear complex Abel integral equation with finite-time blow-up.

Solves z(t) + gamma (sqrt(i)/2) integral_0^t (pi (t-tau))^(-1/2)
|z(tau)|^(2 sigma) z(tau) dtau = a(t), the reduction of a Schroedinger
equation with a point nonlinearity to its trace at the origin.  The kernel
is the half-order power kernel (F(s) = s^(-1/2)); g(tau) = |z|^(2 sigma) z
is complex, so the engine runs its full bank.  Each accepted step resolves
the implicit diagonal term by damped Newton on two real unknowns, with the
second-difference controller steering the step size.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..contour import ContourConstants, preset_constants
from ..control import MAX_REJECTS, ControllerConfig, DifferenceController
from ..engine import ConvolutionEngine
from ..errors import ControllerFailureError, NumericalFailureError
from ..harness.trajectory import Trajectory
from ..kernels import power_kernel

__all__ = ["AbelProblem", "abel_solve", "gaussian_packet_forcing"]


def gaussian_packet_forcing(t: float) -> complex:
    """a(t) = pi^(-1/4) / sqrt(1 + 2it): free evolution of a Gaussian
    packet evaluated at the origin."""
    return math.pi ** -0.25 / cmath.sqrt(1.0 + 2.0j * t)


@dataclass
class AbelProblem:
    """Coupling gamma, nonlinearity exponent sigma, forcing a(t), and the
    run controls.  |z| crossing ``blowup_cap`` terminates the run."""

    gamma: float
    sigma_exp: int = 1
    a: Callable[[float], complex] = gaussian_packet_forcing
    Tol: float = 1e-7
    t_end: float = 10.0
    h0: float = 1e-3
    h_min: float = 1e-13
    blowup_cap: float = 100.0
    B: int = 5
    constants: Optional[ContourConstants] = None
    newton_max_iter: int = 50

    def contour_constants(self) -> ContourConstants:
        return self.constants or preset_constants(0.8, 0.7, 50)


def _nonlinearity(z: complex, sigma_exp: int) -> complex:
    return abs(z) ** (2 * sigma_exp) * z


def _newton_solve(c0: complex, coef: complex, sigma_exp: int, z_start: complex,
                  tol: float, max_iter: int):
    """Solve z + c0 + coef*|z|^(2 sigma) z = 0 for complex z.

    Damped Newton on (Re z, Im z) with a numerical Jacobian; falls back to
    fixed-point iteration z <- -c0 - coef*G(z) if Newton stalls.  Returns
    (z, iterations).
    """

    def resid(z: complex) -> complex:
        return z + c0 + coef * _nonlinearity(z, sigma_exp)

    z = z_start
    r = resid(z)
    for it in range(max_iter):
        if abs(r) <= tol:
            return z, it
        step = math.sqrt(np.finfo(float).eps) * max(1.0, abs(z))
        r_x = (resid(z + step) - r) / step
        r_y = (resid(z + 1j * step) - r) / step
        jac = np.array([[r_x.real, r_y.real], [r_x.imag, r_y.imag]])
        try:
            dx = np.linalg.solve(jac, -np.array([r.real, r.imag]))
        except np.linalg.LinAlgError:
            break
        damp = 1.0
        for _ in range(8):
            z_new = z + damp * (dx[0] + 1j * dx[1])
            r_new = resid(z_new)
            if abs(r_new) < abs(r):
                z, r = z_new, r_new
                break
            damp *= 0.5
        else:
            break
    if abs(r) <= tol:
        return z, max_iter
    # fixed-point fallback (the diagonal coefficient is small for small h)
    z = z_start
    for it in range(2 * max_iter):
        z_new = -c0 - coef * _nonlinearity(z, sigma_exp)
        if abs(z_new - z) <= tol:
            return z_new, max_iter + it
        z = z_new
    raise NumericalFailureError(
        f"implicit Abel step did not converge (|r|={abs(resid(z)):.3e}, tol={tol:.3e})")


def abel_solve(problem: AbelProblem) -> Trajectory:
    """Adaptive run of the Abel equation; returns the trajectory with
    columns t, h, Re(z), Im(z), |z| plus controller diagnostics.

    meta["status"] is "completed" (reached t_end), "blowup" (cap crossed or
    the controller hit its floor) or "stalled" (Newton failure)."""
    prefactor = problem.gamma * cmath.exp(1j * math.pi / 4.0) / 2.0
    kernel = power_kernel(0.5)
    moment = kernel.moment_estimate(problem.t_end)
    cfg = ControllerConfig(
        Tol=problem.Tol,
        C=max(abs(prefactor) * moment / 8.0, 1e-30),
        h0=problem.h0,
        h_min_guard=2.0 * problem.h_min,
    )
    eng = ConvolutionEngine(
        kernel,
        h_min=problem.h_min,
        B=problem.B,
        horizon=problem.t_end,
        constants=problem.contour_constants(),
        dim=1,
        complex_g=True,
    )
    ctrl = DifferenceController(cfg, order=2)
    newton_tol = 0.01 * problem.Tol

    t = 0.0
    z = complex(problem.a(0.0))
    g = _nonlinearity(z, problem.sigma_exp)
    eng.begin(g)
    ctrl.push(0.0, [g.real, g.imag])

    traj = Trajectory(
        experiment="abel",
        columns=["t", "h", "re_z", "im_z", "abs_z", "gamma2", "rejects", "newton_iters"],
        meta={"gamma": problem.gamma, "Tol": problem.Tol, "status": "completed"},
    )
    status = "completed"
    h = problem.h0
    while t < problem.t_end:
        dist = problem.t_end - t
        h_prop = min(ctrl.propose(h), dist)
        if dist - h_prop < problem.h_min:
            h_prop = dist
        rejects = 0
        accepted = False
        while True:
            t_trial = t + h_prop
            try:
                hist = eng.history(t_trial)[0]
                f1, f2, hh = eng.diagonal_coeffs(t_trial)
            except Exception as exc:  # step scale problems surface upward
                raise ControllerFailureError(str(exc)) from exc
            a_t = complex(problem.a(t_trial))
            c0 = prefactor * (hist + f1 * g - (f2 / hh) * g) - a_t
            coef = prefactor * f2 / hh
            try:
                z_new, iters = _newton_solve(c0, coef, problem.sigma_exp, z,
                                             newton_tol, problem.newton_max_iter)
            except NumericalFailureError:
                status = "stalled"
                accepted = False
                break
            g_new = _nonlinearity(z_new, problem.sigma_exp)
            gam = ctrl.gamma_trial(t_trial, [g_new.real, g_new.imag])
            if ctrl.test(h_prop, gam):
                accepted = True
                break
            rejects += 1
            if rejects > MAX_REJECTS:
                status = "blowup"
                break
            try:
                h_prop = ctrl.reduced(h_prop, gam)
            except ControllerFailureError:
                status = "blowup"
                break
        if not accepted:
            break
        eng.commit(t_trial, g_new)
        ctrl.push(t_trial, [g_new.real, g_new.imag])
        t, z, g, h = t_trial, z_new, g_new, h_prop
        traj.append(t, h, z.real, z.imag, abs(z), gam, rejects, iters)
        if abs(z) > problem.blowup_cap:
            status = "blowup"
            break
    traj.meta["status"] = status
    traj.meta["t_final"] = t
    traj.counters = eng.counters.as_dict()
    traj.final_state = {"z": z}
    return traj

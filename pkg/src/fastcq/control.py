"""Adaptive step-size controllers.

Two interpolation-error controllers (second- and first-difference) propose
steps from C h^2 gamma = 0.8 Tol, clamped to [h/2, 2h], and accept a trial
step when C h^2 gamma_trial <= Tol; and an integrating controller for
variable-step Verlet, which evolves a step-density reciprocal z by
z <- z + eps*G and sets h = eps/z, preserving the reversible character of
the stepping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ControllerFailureError

__all__ = [
    "ControllerConfig",
    "propose_step",
    "second_difference",
    "first_difference",
    "DifferenceController",
    "IntegratorState",
    "sigma_tilde",
    "integrating_g",
    "IntegratingController",
]

SAFETY = 0.8
MAX_REJECTS = 25


@dataclass(frozen=True)
class ControllerConfig:
    """Tolerance, kernel constant C ~ (1/8) integral |f|, initial step and
    the smallest step the controller may propose before giving up."""

    Tol: float
    C: float
    h0: float
    h_min_guard: float
    grow: float = 2.0
    shrink: float = 0.5

    def __post_init__(self):
        if self.Tol <= 0 or self.C <= 0:
            raise ConfigurationError("Tol and C must be positive")
        if not (self.h0 >= self.h_min_guard > 0):
            raise ConfigurationError("need h0 >= h_min_guard > 0")


def propose_step(cfg: ControllerConfig, h_n: float, gamma: float) -> float:
    """New step from C h^2 gamma = 0.8 Tol, clamped to [shrink*h, grow*h].

    gamma is the controlled derivative estimate (gamma'' or gamma'); zero
    yields the upper clamp.
    """
    if gamma < 0:
        raise ConfigurationError(f"gamma must be nonnegative, got {gamma}")
    if gamma == 0.0:
        return cfg.grow * h_n
    h = math.sqrt(SAFETY * cfg.Tol / (cfg.C * gamma))
    return min(cfg.grow * h_n, max(cfg.shrink * h_n, h))


def accept_step(cfg: ControllerConfig, h: float, gamma_trial: float) -> bool:
    """Step test C h^2 gamma_trial <= Tol (inclusive)."""
    return cfg.C * h * h * gamma_trial <= cfg.Tol


def second_difference(ts, gs) -> float:
    """gamma'' = ||gtilde''(t_n)|| with gtilde the quadratic interpolant of
    g at the last three samples: twice the second divided difference."""
    (t0, t1, t2) = ts
    (g0, g1, g2) = gs
    d01 = (np.asarray(g1) - np.asarray(g0)) / (t1 - t0)
    d12 = (np.asarray(g2) - np.asarray(g1)) / (t2 - t1)
    dd = (d12 - d01) / (t2 - t0)
    return 2.0 * float(np.linalg.norm(np.atleast_1d(dd)))


def first_difference(ts, gs) -> float:
    """gamma' = ||gtilde'(t_n)|| with gtilde the linear interpolant of g at
    the last two samples."""
    (t0, t1) = ts
    (g0, g1) = gs
    d = (np.asarray(g1) - np.asarray(g0)) / (t1 - t0)
    return float(np.linalg.norm(np.atleast_1d(d)))


class DifferenceController:
    """Proposal/acceptance loop shared by the two difference controllers.

    The driver owns the trial evaluations: it asks for a proposal, computes
    the trial sample g(t_n + h), and reports the trial gamma back; on
    rejection a reduced step comes from the same formula with the trial
    gamma.  The first two steps use h0 (no differences available yet).
    """

    def __init__(self, cfg: ControllerConfig, order: int = 2):
        if order not in (1, 2):
            raise ConfigurationError("order must be 1 (gamma') or 2 (gamma'')")
        self.cfg = cfg
        self.order = order
        self._ts: list[float] = []
        self._gs: list[np.ndarray] = []
        self.rejects_last = 0

    def push(self, t: float, g) -> None:
        """Record an accepted sample."""
        self._ts.append(float(t))
        self._gs.append(np.atleast_1d(np.asarray(g)))
        if len(self._ts) > 3:
            del self._ts[0]
            del self._gs[0]

    @property
    def warmed_up(self) -> bool:
        return len(self._ts) >= self.order + 1

    def gamma_history(self) -> float:
        k = self.order + 1
        fn = second_difference if self.order == 2 else first_difference
        return fn(self._ts[-k:], self._gs[-k:])

    def gamma_trial(self, t_trial: float, g_trial) -> float:
        k = self.order
        ts = self._ts[-k:] + [float(t_trial)]
        gs = self._gs[-k:] + [np.atleast_1d(np.asarray(g_trial))]
        fn = second_difference if self.order == 2 else first_difference
        return fn(ts, gs)

    def propose(self, h_n: float) -> float:
        if not self.warmed_up:
            return self.cfg.h0
        return propose_step(self.cfg, h_n, self.gamma_history())

    def test(self, h: float, gamma_trial: float) -> bool:
        if not self.warmed_up:
            return True
        return accept_step(self.cfg, h, gamma_trial)

    def reduced(self, h: float, gamma_trial: float) -> float:
        """Rejected-step replacement from the proposal formula with the
        trial gamma; raises once it falls below the guard."""
        if gamma_trial <= 0:
            raise ControllerFailureError("rejected step with zero trial gamma")
        # a failed test means C h^2 gamma > Tol, so this is < h*sqrt(0.8)
        h_new = math.sqrt(SAFETY * self.cfg.Tol / (self.cfg.C * gamma_trial))
        if h_new < self.cfg.h_min_guard:
            raise ControllerFailureError(
                f"step fell below h_min_guard={self.cfg.h_min_guard:.3e} "
                f"(stiffness or blow-up)")
        return h_new


def sigma_tilde(M_inv_apply, A_apply, u, v, c, cdot) -> float:
    """sigma~ = (A M^-1 v - cdot)^T M^-1 (A M^-1 v - cdot)
              + (A u - c)^T M^-1 A M^-1 (A u - c)."""
    w = A_apply(M_inv_apply(v)) - cdot
    r = A_apply(u) - c
    mr = M_inv_apply(r)
    return float(w @ M_inv_apply(w) + mr @ A_apply(mr))


def integrating_g(M_inv_apply, A_apply, u, v, c, cdot, cddot) -> float:
    """G = -(1/(4 sigma~)) * 2 (A M^-1 v - cdot)^T M^-1 cddot."""
    st = sigma_tilde(M_inv_apply, A_apply, u, v, c, cdot)
    if st <= 0.0:
        return 0.0
    w = A_apply(M_inv_apply(v)) - cdot
    return float(-(2.0 * (w @ M_inv_apply(cddot))) / (4.0 * st))


@dataclass
class IntegratorState:
    """Step-density reciprocal z (z_{n+1/2} after an update), accuracy eps,
    and the last three convolution values for the divided differences."""

    eps: float
    z: float = 0.0
    c_hist: list = field(default_factory=list)
    t_hist: list = field(default_factory=list)


class IntegratingController:
    """Step-density controller for variable-step Verlet.

    z_{-1/2} = 1/sigma(u0,v0,t0) - eps G(u0,v0,t0)/2 with sigma =
    sigma~^(-1/4); per step z <- z + eps G and h = eps/z.  cdot and cddot
    come from divided differences of the recorded c history (the history is
    initialized with c_{-1} = c_{-2} = c_0, so both start at zero).
    """

    def __init__(self, eps: float, M_inv_apply, A_apply):
        if eps <= 0:
            raise ConfigurationError("eps must be positive")
        self.eps = eps
        self.M_inv = M_inv_apply
        self.A = A_apply
        self.state = IntegratorState(eps=eps)
        self._started = False

    def push_c(self, t: float, c: np.ndarray) -> None:
        self.state.t_hist.append(float(t))
        self.state.c_hist.append(np.asarray(c, dtype=float).copy())
        if len(self.state.c_hist) > 3:
            del self.state.c_hist[0]
            del self.state.t_hist[0]

    def _c_derivatives(self):
        ch, th = self.state.c_hist, self.state.t_hist
        if len(ch) < 2:
            z = np.zeros_like(ch[-1])
            return z, z
        if len(ch) == 2:
            cdot = (ch[1] - ch[0]) / (th[1] - th[0])
            return cdot, np.zeros_like(cdot)
        d01 = (ch[1] - ch[0]) / (th[1] - th[0])
        d12 = (ch[2] - ch[1]) / (th[2] - th[1])
        dd = (d12 - d01) / (th[2] - th[0])
        cdot = d12 + (th[2] - th[1]) * dd
        return cdot, 2.0 * dd

    def g_value(self, u, v) -> float:
        c = self.state.c_hist[-1]
        cdot, cddot = self._c_derivatives()
        return integrating_g(self.M_inv, self.A, u, v, c, cdot, cddot)

    def start(self, u0, v0, c0, t0: float = 0.0) -> None:
        self.push_c(t0, c0)
        st = sigma_tilde(self.M_inv, self.A, u0, v0, c0, np.zeros_like(c0))
        if st <= 0.0:
            raise ConfigurationError(
                "sigma~ vanishes at the initial state; the integrating "
                "controller needs a nonzero initial excitation")
        g0 = self.g_value(u0, v0)
        self.state.z = st ** 0.25 - self.eps * g0 / 2.0  # z_{-1/2}
        self._started = True

    def step_size(self, u, v) -> float:
        """Advance z by eps*G at the current state and return h = eps/z."""
        if not self._started:
            raise ControllerFailureError("controller not started")
        g = self.g_value(u, v)
        self.state.z += self.eps * g
        if self.state.z <= 0.0:
            raise ControllerFailureError(
                f"step density reciprocal z={self.state.z:.3e} nonpositive")
        return self.eps / self.state.z

"""Hyperbolic integration contours and truncated-trapezoidal Laplace inversion.

One contour serves one mosaic level: the left hyperbola branch
gamma(x) = mu (1 - sin(a + ix)) + sigma, discretized at x = k*tau for
k = -K..K.  Nodes, weights and the cached transform values are immutable
after construction, so contours are safe for concurrent reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, StepScaleError
from .kernels import SectorialTransform

__all__ = [
    "ContourConstants",
    "LevelPlan",
    "Contour",
    "level_bounds",
    "plan_level",
    "build_contour",
    "preset_constants",
    "CONSTANT_PRESETS",
]

# (a, d, K) -> (C1, C2): parameter triples reported alongside the method's
# error theorem; the optimization that produces them is out of scope.
CONSTANT_PRESETS = {
    (0.8, 0.7, 50): (6.567, 0.066),
    (1.0, 0.5, 40): (6.036, 0.0739),
    (0.8, 0.7, 35): (6.225, 0.097),
}


@dataclass(frozen=True)
class ContourConstants:
    """Hyperbola angle a, strip half-width d (metadata only), node count K
    per half-contour, and the trapezoid constants C1, C2."""

    a: float
    d: float
    K: int
    C1: float
    C2: float

    def __post_init__(self):
        if not (0.0 < self.a < math.pi / 2):
            raise ConfigurationError(f"contour angle a={self.a} outside (0, pi/2)")
        if self.K < 1:
            raise ConfigurationError(f"node count K={self.K} must be >= 1")
        if self.C1 <= 0 or self.C2 <= 0:
            raise ConfigurationError("C1 and C2 must be positive")

    def validate_sector(self, phi: float) -> None:
        if not (self.a < math.pi / 2 - phi):
            raise ConfigurationError(
                f"contour angle a={self.a} incompatible with kernel sector phi={phi}: "
                f"need a < pi/2 - phi = {math.pi / 2 - phi:.4f}"
            )


def preset_constants(a: float, d: float, K: int) -> ContourConstants:
    """Look up one of the built-in (a, d, K) -> (C1, C2) triples."""
    try:
        c1, c2 = CONSTANT_PRESETS[(a, d, K)]
    except KeyError:
        raise ConfigurationError(
            f"no constants preset for (a={a}, d={d}, K={K}); "
            f"available: {sorted(CONSTANT_PRESETS)}"
        ) from None
    return ContourConstants(a=a, d=d, K=K, C1=c1, C2=c2)


def _geom_sum(B: int, n: int) -> int:
    # sum_{k=0}^{n} B^k, zero for n < 0
    if n < 0:
        return 0
    return (B ** (n + 1) - 1) // (B - 1)


def level_bounds(level: int, h_min: float, B: int) -> tuple[float, float]:
    """Approximation interval [lb, ub] of one mosaic level.

    lb = h_min (1 + sum_{k=0}^{level-2} B^k),
    ub = h_min (1 + sum_{k=0}^{level} B^k); both exact integer multiples
    of h_min, which keeps the many float comparisons downstream reproducible.
    """
    if level < 1:
        raise ConfigurationError(f"level must be >= 1, got {level}")
    if B < 2:
        raise ConfigurationError(f"basis B must be >= 2, got {B}")
    if h_min <= 0:
        raise ConfigurationError(f"h_min must be positive, got {h_min}")
    lb = (1 + _geom_sum(B, level - 2)) * h_min
    ub = (1 + _geom_sum(B, level)) * h_min
    return lb, ub


@dataclass(frozen=True)
class LevelPlan:
    """Contour parameters for one level: interval [t_lo, t_hi], ratio
    Lambda = t_hi/t_lo, trapezoid step tau = C1/K and hyperbola scale
    mu = C2 K / (Lambda t_lo)."""

    level: int
    t_lo: float
    t_hi: float
    Lambda: float
    tau: float
    mu: float
    sigma: float


def plan_level(level: int, h_min: float, B: int, consts: ContourConstants,
               sigma: float = 0.0) -> LevelPlan:
    lb, ub = level_bounds(level, h_min, B)
    lam = ub / lb
    tau = consts.C1 / consts.K
    mu = consts.C2 * consts.K / (lam * lb)
    return LevelPlan(level=level, t_lo=lb, t_hi=ub, Lambda=lam, tau=tau, mu=mu, sigma=sigma)


@dataclass
class Contour:
    """Quadrature nodes, weights and cached transform values for one level.

    nodes[k] = gamma(k tau) and weights[k] = tau/(2 pi i) gamma'(k tau) for
    k = -K..K (stored in that order).  Fvals/F1vals/F2vals cache F, F/s and
    F/s^2 at the nodes; the counted expensive resource is the F evaluation,
    done exactly 2K+1 times here.
    """

    plan: LevelPlan
    consts: ContourConstants
    nodes: np.ndarray
    weights: np.ndarray
    Fvals: np.ndarray
    F1vals: np.ndarray
    F2vals: np.ndarray
    f_evaluations: int = 0
    oob_inversions: int = field(default=0, repr=False)

    @property
    def K(self) -> int:
        return self.consts.K

    def _cached(self, which: str) -> np.ndarray:
        try:
            return {"F": self.Fvals, "F1": self.F1vals, "F2": self.F2vals}[which]
        except KeyError:
            raise ConfigurationError(f"unknown transform cache {which!r}") from None

    def invert(self, which: str, t: float, real_symmetric: bool = True):
        """Evaluate sum_k w_k e^(t lambda_k) * cache(lambda_k).

        Calls with t outside [t_lo, t_hi] are permitted (accuracy degrades,
        validity does not) and are tallied in ``oob_inversions``.
        """
        if not (self.plan.t_lo <= t <= self.plan.t_hi):
            self.oob_inversions += 1
        vals = self._cached(which)
        total = np.sum(self.weights * np.exp(t * self.nodes) * vals)
        if real_symmetric:
            scale = abs(total) + 1.0
            if abs(total.imag) > 1e-12 * scale:
                raise AssertionError(
                    f"inversion lost conjugate symmetry: imag={total.imag:.3e} vs scale={scale:.3e}"
                )
            return float(total.real)
        return complex(total)

    def eval_f12(self, t: float, real_symmetric: bool = True):
        """(f1, f2)(t) with f1 = L^-1[F/s], f2 = L^-1[F/s^2]; exactly (0, 0) at t = 0."""
        if t < 0:
            raise StepScaleError(f"eval_f12 requires t >= 0, got {t}")
        if t == 0.0:
            return (0.0, 0.0) if real_symmetric else (0.0 + 0.0j, 0.0 + 0.0j)
        return self.invert("F1", t, real_symmetric), self.invert("F2", t, real_symmetric)


def build_contour(plan: LevelPlan, consts: ContourConstants, F: SectorialTransform) -> Contour:
    """Discretize the hyperbola for one level and cache F, F/s, F/s^2.

    gamma(x) = mu (1 - sin(a + ix)) + sigma.  As written this runs the
    hyperbola with decreasing imaginary part, opposite to the orientation
    of the inversion contour, so the orientation sign is absorbed into the
    weights: w_k = +tau mu cos(a + ik tau) / (2 pi).  Raises if any node
    leaves the kernel's declared sector of analyticity.
    """
    consts.validate_sector(F.phi)
    K = consts.K
    k = np.arange(-K, K + 1, dtype=np.float64)
    x = k * plan.tau
    arg = consts.a + 1j * x
    nodes = plan.mu * (1.0 - np.sin(arg)) + plan.sigma
    weights = plan.tau * plan.mu / (2.0 * math.pi) * np.cos(arg)

    rel = nodes - F.sigma
    if np.any(np.abs(np.angle(rel)) >= math.pi - F.phi):
        raise ConfigurationError(
            f"contour for level {plan.level} leaves the sector "
            f"|arg(s - sigma)| < pi - phi of the transform"
        )
    if np.any(np.abs(nodes) == 0.0):
        raise ConfigurationError("contour node at the origin; F/s and F/s^2 undefined")

    fvals = np.array([F.eval(s) for s in nodes], dtype=np.complex128)
    return Contour(
        plan=plan,
        consts=consts,
        nodes=nodes,
        weights=weights,
        Fvals=fvals,
        F1vals=fvals / nodes,
        F2vals=fvals / nodes ** 2,
        f_evaluations=2 * K + 1,
    )

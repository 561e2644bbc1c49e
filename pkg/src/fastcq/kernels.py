"""Sectorial Laplace transforms and the built-in kernel registry.

A kernel enters the algorithm only through its Laplace transform F, which
must be analytic in a sector |arg(s - sigma)| < pi - phi and bounded there
by |F(s)| <= M |s|^-nu.  Built-in transforms also carry closed-form time
domain references used by the test oracles.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import erfcx, gamma as _gamma

from .errors import ConfigurationError

__all__ = [
    "SectorialTransform",
    "power_kernel",
    "mittag_leffler_kernel",
    "user_kernel",
    "mittag_leffler",
    "kernel_from_spec",
]


@dataclass(frozen=True)
class SectorialTransform:
    """A Laplace transform F(s) plus the sector metadata the contours need.

    ``eval`` maps complex s to F(s).  ``real_symmetric`` declares
    F(conj s) = conj F(s), which holds for transforms of real kernels and
    lets inversions discard the imaginary part.  The optional closed forms
    are time-domain references for testing only; ``moment_estimate(T)``
    approximates the integral of |f| over [0, T] and feeds the controller
    constant C.
    """

    eval: Callable[[complex], complex]
    sigma: float
    phi: float
    nu: float
    M: float
    name: str = "user"
    real_symmetric: bool = True
    closed_f: Optional[Callable[[float], float]] = None
    closed_f1: Optional[Callable[[float], float]] = None
    closed_f2: Optional[Callable[[float], float]] = None
    moment_estimate: Optional[Callable[[float], float]] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.phi < math.pi / 2):
            raise ConfigurationError(f"sector half-angle complement phi={self.phi} must be < pi/2")
        if self.nu <= 0:
            raise ConfigurationError(f"decay exponent nu={self.nu} must be positive")
        if self.M <= 0:
            raise ConfigurationError(f"sector bound M={self.M} must be positive")

    def __call__(self, s: complex) -> complex:
        return self.eval(s)

    def sector_spot_check(self, radii=(1e-2, 1.0, 1e2), n_rays: int = 16, slack: float = 1.05) -> None:
        """Sample |F| on rays through the sector and flag bound violations.

        Raises ConfigurationError instead of silently accepting a transform
        that grows off-axis (e.g. F(s) = s^-0.3 * exp(-s)).
        """
        angle = math.pi - self.phi
        for theta in np.linspace(-angle * 0.98, angle * 0.98, n_rays):
            for r in radii:
                s = self.sigma + r * cmath.exp(1j * theta)
                val = abs(self.eval(s))
                bound = slack * self.M * abs(s) ** (-self.nu)
                if not (val <= bound or math.isnan(val)):
                    raise ConfigurationError(
                        f"transform violates sector bound at s={s:.4g}: "
                        f"|F|={val:.4g} > M|s|^-nu={bound:.4g}"
                    )


def power_kernel(nu: float) -> SectorialTransform:
    """Fractional-power kernel f(t) = t^(nu-1)/Gamma(nu), F(s) = s^-nu."""
    if nu <= 0:
        raise ConfigurationError(f"power kernel requires nu > 0, got {nu}")
    g1 = _gamma(1.0 + nu)
    g2 = _gamma(2.0 + nu)
    g0 = _gamma(nu)
    return SectorialTransform(
        eval=lambda s: s ** (-nu),
        sigma=0.0,
        phi=0.0,
        nu=nu,
        M=1.0,
        name="power",
        closed_f=lambda t: t ** (nu - 1.0) / g0,
        closed_f1=lambda t: t ** nu / g1,
        closed_f2=lambda t: t ** (nu + 1.0) / g2,
        moment_estimate=lambda T: T ** nu / g1,
        params={"nu": nu},
    )


def mittag_leffler(alpha: float, x: float, max_terms: int = 200) -> float:
    """E_alpha(x) by power series, with the erfcx shortcut at alpha = 1/2.

    The series converges for all x but loses digits for large negative
    arguments; adequate here since it only feeds moment estimates and
    small-t test references.
    """
    if alpha == 0.5 and x <= 0:
        # E_{1/2}(-y) = exp(y^2) erfc(y) for y >= 0
        return float(erfcx(-x))
    total = 0.0
    term_k = 0.0
    for j in range(max_terms):
        term = x ** j / _gamma(1.0 + alpha * j)
        total += term
        term_k = abs(term)
        if j > 2 and term_k < 1e-18 * max(1.0, abs(total)):
            break
    return total


def _ml_kernel_series(alpha: float, t: float, max_terms: int = 60) -> float:
    # f(t) = -d/dt E_alpha(-t^alpha) = sum_{j>=1} (-1)^(j+1) alpha j t^(alpha j - 1)/Gamma(1+alpha j)
    total = 0.0
    for j in range(1, max_terms):
        term = (-1.0) ** (j + 1) * alpha * j * t ** (alpha * j - 1.0) / _gamma(1.0 + alpha * j)
        total += term
        if j > 3 and abs(term) < 1e-18 * max(1.0, abs(total)):
            break
    return total


def mittag_leffler_kernel(alpha: float) -> SectorialTransform:
    """Viscoelastic relaxation kernel f(t) = -d/dt E_alpha(-t^alpha).

    Laplace transform F(s) = 1/(1 + s^alpha); f >= 0 integrates to
    1 - E_alpha(-T^alpha) over [0, T].  The series-based closed form is a
    small-t testing reference only.
    """
    if not (0.0 < alpha < 1.0):
        raise ConfigurationError(f"Mittag-Leffler kernel requires alpha in (0,1), got {alpha}")
    # |1 + s^alpha| >= min(1, sin(pi*alpha)) on |arg s| < pi
    m_bound = 1.0 / min(1.0, math.sin(math.pi * alpha)) + 0.5
    return SectorialTransform(
        eval=lambda s: 1.0 / (1.0 + s ** alpha),
        sigma=0.0,
        phi=0.0,
        nu=alpha,
        M=m_bound,
        name="mittag_leffler",
        closed_f=lambda t: _ml_kernel_series(alpha, t),
        moment_estimate=lambda T: 1.0 - mittag_leffler(alpha, -(T ** alpha)),
        params={"alpha": alpha},
    )


def user_kernel(
    eval: Callable[[complex], complex],
    *,
    nu: float = None,
    M: float = None,
    sigma: float = 0.0,
    phi: float = 0.0,
    moment_estimate: Optional[Callable[[float], float]] = None,
    real_symmetric: bool = True,
    spot_check: bool = True,
    name: str = "user",
) -> SectorialTransform:
    """Wrap a user-supplied transform; sector metadata is mandatory.

    The sector bound is spot-checked on a fan of rays at construction
    unless ``spot_check=False``.
    """
    if eval is None or not callable(eval):
        raise ConfigurationError("user kernel requires a callable transform")
    if nu is None:
        raise ConfigurationError("user kernel requires the decay exponent nu")
    if M is None:
        raise ConfigurationError("user kernel requires the sector bound M")
    tr = SectorialTransform(
        eval=eval,
        sigma=sigma,
        phi=phi,
        nu=nu,
        M=M,
        name=name,
        real_symmetric=real_symmetric,
        moment_estimate=moment_estimate,
    )
    if spot_check:
        tr.sector_spot_check()
    return tr


def kernel_from_spec(spec: dict) -> SectorialTransform:
    """Build a kernel from a config mapping: {"name": ..., parameters...}."""
    kind = spec.get("name")
    if kind == "power":
        return power_kernel(float(spec["nu"]))
    if kind == "mittag_leffler":
        return mittag_leffler_kernel(float(spec["alpha"]))
    raise ConfigurationError(f"unknown kernel name {kind!r} (expected 'power' or 'mittag_leffler')")

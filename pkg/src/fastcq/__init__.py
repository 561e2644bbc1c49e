"""fastcq: fast, oblivious, variable-step convolution quadrature.

Evaluates integral_0^t f(t - tau) g(tau) dtau on arbitrary increasing grids
for kernels f given only through a sectorial Laplace transform F, in
O(N log N) work and O(log N) memory, with adaptive step-size controllers
and application solvers built on top.
"""

from .errors import (
    ConfigurationError,
    ControllerFailureError,
    FastCQError,
    HorizonExceededError,
    NumericalFailureError,
    OrderingError,
    StepScaleError,
)
from .kernels import (
    SectorialTransform,
    mittag_leffler,
    mittag_leffler_kernel,
    power_kernel,
    user_kernel,
)
from .contour import (
    CONSTANT_PRESETS,
    Contour,
    ContourConstants,
    LevelPlan,
    build_contour,
    level_bounds,
    plan_level,
    preset_constants,
)

__version__ = "0.1.0"

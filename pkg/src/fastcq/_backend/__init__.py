"""Backend selection for the hot numeric kernels.

Set FASTCQ_BACKEND=numpy to force the pure-numpy path, FASTCQ_BACKEND=numba
to require the jitted path (ImportError if numba is missing).  The default
("auto") prefers numba and falls back to numpy.  ``benchmarks/backend_bench.py``
compares the two.
"""

import os

_choice = os.environ.get("FASTCQ_BACKEND", "auto").lower()

if _choice == "numpy":
    from . import _impl_numpy as impl
elif _choice == "numba":
    from . import _impl_numba as impl
elif _choice == "auto":
    try:
        from . import _impl_numba as impl
    except ImportError:
        from . import _impl_numpy as impl
else:
    raise ValueError(f"FASTCQ_BACKEND={_choice!r}; expected 'auto', 'numba' or 'numpy'")

BACKEND = impl.NAME


def get_impl(name: str = None):
    """Return a backend module by name (default: the active one)."""
    if name is None:
        return impl
    if name == "numpy":
        from . import _impl_numpy
        return _impl_numpy
    if name == "numba":
        from . import _impl_numba
        return _impl_numba
    raise ValueError(f"unknown backend {name!r}")


phi_pair = impl.phi_pair
advance_banks = impl.advance_banks
ode_sum_sym = impl.ode_sum_sym
ode_sum_full = impl.ode_sum_full
f12_sum = impl.f12_sum

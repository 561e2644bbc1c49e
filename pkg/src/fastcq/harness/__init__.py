from .trajectory import Trajectory
from .oracle import oracle_convolve

__all__ = ["Trajectory", "oracle_convolve"]

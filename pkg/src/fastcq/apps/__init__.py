from .abel import AbelProblem, abel_solve, gaussian_packet_forcing
from .fracrd import FracRDProblem, fracrd_solve
from .visco import ViscoProblem, assemble_cantilever, boundary_force, visco_solve

__all__ = [
    "AbelProblem",
    "abel_solve",
    "gaussian_packet_forcing",
    "FracRDProblem",
    "fracrd_solve",
    "ViscoProblem",
    "assemble_cantilever",
    "boundary_force",
    "visco_solve",
]

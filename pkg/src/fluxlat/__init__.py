"""Hamiltonian compact U(1) lattice gauge theory in 2+1 dimensions.

Exact diagonalisation of the Kogut-Susskind Hamiltonian on Gauss-law sectors,
and of the cold-atom rotor model whose low-energy limit it is.
"""

from .basis import ChargeConfig, Convention, Picture, enumerate_full, enumerate_gauss_sector, validate_charges
from .hamiltonian import CouplingParams, build_kogut_susskind, build_microscopic_rotor, derive_effective
from .lattice import Boundary, build_geometry
from .solver import SolverOptions, dense_spectrum, low_spectrum

__version__ = "0.1.0"

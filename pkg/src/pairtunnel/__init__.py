"""Ground states, variational fits and mode entanglement of a four-mode ring
of bosons dominated by pair-correlated tunneling."""
from .errors import ConvergenceError, InvariantError, PairTunnelError, ValidationError
from .fock_basis import Bipartition, StateVector, enumerate_basis
from .operators import HamiltonianParams, build_hamiltonian
from .solver import ground_state, ground_state_reduced

__version__ = "0.1.0"

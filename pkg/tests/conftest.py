import sys
import numpy as np
import pytest

from pairtunnel.fock_basis import StateVector, enumerate_basis


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_state(N, rng):
    b = enumerate_basis(N)
    v = rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim)
    return StateVector(b, v / np.linalg.norm(v))


def brute_partial_trace(psi, part):
    """rho_A from the full pure-state density matrix, indexed by (n_i, n_j) of A."""
    N = psi.N
    occ = psi.basis.occupations.astype(int)
    amps = psi.dense
    ia, ja = part.subsystem_a
    ib, jb = part.subsystem_b
    dA = (N + 1) ** 2
    mat = np.zeros((dA, dA), dtype=complex)
    keyA = occ[:, ia] * (N + 1) + occ[:, ja]
    keyB = occ[:, ib] * (N + 1) + occ[:, jb]
    for x in range(len(amps)):
        for y in range(len(amps)):
            if keyB[x] == keyB[y]:
                mat[keyA[x], keyA[y]] += amps[x] * np.conj(amps[y])
    return mat


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])

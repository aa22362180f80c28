import math

import numpy as np
import pytest
from scipy.linalg import expm

from pairtunnel.errors import ValidationError
from pairtunnel.fock_basis import StateVector, enumerate_basis
from pairtunnel.operators import (HamiltonianParams, apply, apply_beamsplitter,
                                  beamsplitter, build_hamiltonian, compose_perms,
                                  d8_permutations, mode_permutation, number_moments,
                                  number_operator, pair_hamiltonian, pair_symmetry_group,
                                  rotated_pair_hamiltonian, two_mode_column, w_unitary)


def hop_dense(basis, src, dst):
    """a_dst^dag a_src built entry by entry."""
    occ = basis.occupations.astype(int)
    out = np.zeros((basis.dim, basis.dim))
    for i, o in enumerate(occ):
        if o[src] == 0:
            continue
        new = o.copy()
        new[src] -= 1
        new[dst] += 1
        out[basis.rank(new[None])[0], i] = math.sqrt(o[src] * (o[dst] + 1))
    return out


def pair_hop_dense(basis, src, dst):
    occ = basis.occupations.astype(int)
    out = np.zeros((basis.dim, basis.dim))
    for i, o in enumerate(occ):
        if o[src] < 2:
            continue
        new = o.copy()
        new[src] -= 2
        new[dst] += 2
        amp = math.sqrt(o[src] * (o[src] - 1) * (o[dst] + 1) * (o[dst] + 2))
        out[basis.rank(new[None])[0], i] = amp
    return out


def test_hamiltonian_matches_entrywise_construction():
    b = enumerate_basis(5)
    U, J, T2 = 0.7, 0.3, 1.1
    ref = np.diag([U / 2 * sum(n * (n - 1) for n in o) for o in b.occupations.astype(int)])
    for j in range(4):
        k = (j + 1) % 4
        ref -= J * (hop_dense(b, j, k) + hop_dense(b, k, j))
        ref -= T2 * (pair_hop_dense(b, j, k) + pair_hop_dense(b, k, j))
    H = build_hamiltonian(HamiltonianParams(U, J, T2), b)
    assert np.abs(H.to_dense() - ref).max() < 1e-12
    assert H.hermiticity_error() < 1e-14


def test_params_validation():
    with pytest.raises(ValidationError):
        HamiltonianParams(U=-1.0)
    with pytest.raises(ValidationError):
        HamiltonianParams(T2=float("nan"))
    assert HamiltonianParams(J=-1.0, allow_negative=True).J == -1.0


@pytest.mark.parametrize("N", [2, 4, 7])
def test_w_flips_pair_term(N):
    b = enumerate_basis(N)
    H = pair_hamiltonian(b)
    W = w_unitary(b)
    assert np.abs((W.H @ H @ W + H).to_dense()).max() < 1e-12


def test_d8_group_closed_and_commutes():
    perms = d8_permutations()
    assert len(perms) == 8
    assert all(compose_perms(s, t) in perms for s in perms for t in perms)
    b = enumerate_basis(5)
    H = build_hamiltonian(HamiltonianParams(0.4, 0.9, 1.0), b)
    for p in perms:
        P = mode_permutation(p, b)
        assert np.abs((P @ H - H @ P).to_dense()).max() < 1e-12


def test_pair_symmetry_group_has_sixteen_elements():
    b = enumerate_basis(6)
    ops = pair_symmetry_group(b)
    assert len(ops) == 16
    H = pair_hamiltonian(b)
    dense = [op.to_dense() for op in ops]
    for i in range(16):
        for j in range(i):
            assert np.abs(dense[i] - dense[j]).max() > 1e-6
    for op in ops:
        assert np.abs((op @ H - H @ op).to_dense()).max() < 1e-12


def test_mode_permutation_moves_creation_operators():
    b = enumerate_basis(3)
    P = mode_permutation((1, 2, 3, 0), b)
    psi = StateVector.basis_state(b, (3, 0, 0, 0))
    out = apply(P, psi)
    assert abs(out.amplitude((0, 3, 0, 0))) == pytest.approx(1.0)


@pytest.mark.parametrize("N", [1, 2, 3, 4, 6])
def test_beamsplitter_matches_matrix_exponential(N):
    b = enumerate_basis(N)
    gen = hop_dense(b, 2, 0) + hop_dense(b, 0, 2) + hop_dense(b, 3, 1) + hop_dense(b, 1, 3)
    ref = expm(1j * math.pi / 4 * gen)
    V = beamsplitter(b).to_dense()
    assert np.abs(V - ref).max() < 1e-12
    assert np.abs(beamsplitter(b, inverse=True).to_dense() - ref.conj().T).max() < 1e-12


def test_beamsplitter_maps_creation_operator():
    b = enumerate_basis(1)
    out = apply(beamsplitter(b), StateVector.basis_state(b, (1, 0, 0, 0)))
    assert out.amplitude((1, 0, 0, 0)) == pytest.approx(1 / math.sqrt(2))
    assert out.amplitude((0, 0, 1, 0)) == pytest.approx(1j / math.sqrt(2))


@pytest.mark.parametrize("s", [1, 2, 5, 20, 60])
def test_hong_ou_mandel_closed_form(s):
    col = two_mode_column(s, s, inverse=True)
    expect = np.zeros(2 * s + 1, dtype=complex)
    for k in range(s + 1):
        expect[2 * k] = (-1j) ** s * math.sqrt(math.comb(2 * k, k) * math.comb(2 * s - 2 * k, s - k)) / 2 ** s
    assert np.abs(col - expect).max() < 1e-12


@pytest.mark.parametrize("n", [0, 3, 40, 150])
def test_two_mode_columns_are_orthonormal(n):
    cols = np.array([two_mode_column(p, n - p) for p in range(n + 1)]).T
    assert np.abs(cols.conj().T @ cols - np.eye(n + 1)).max() < 1e-10


def test_sparse_beamsplitter_matches_matrix(rng):
    b = enumerate_basis(6)
    v = rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim)
    psi = StateVector(b, v / np.linalg.norm(v))
    ref = beamsplitter(b).to_dense() @ psi.dense
    out = apply_beamsplitter(psi).dense
    assert np.abs(out - ref).max() < 1e-12
    back = apply_beamsplitter(apply_beamsplitter(psi), inverse=True).dense
    assert np.abs(back - psi.dense).max() < 1e-12


@pytest.mark.parametrize("N", [2, 4, 6, 8])
def test_rotated_pair_form(N):
    b = enumerate_basis(N)
    V = beamsplitter(b)
    diff = V @ pair_hamiltonian(b, 1.3) @ V.H - rotated_pair_hamiltonian(b, 1.3)
    assert np.abs(diff.to_dense()).max() < 1e-11


def test_number_moments():
    b = enumerate_basis(4)
    psi = StateVector.from_occupations(b, np.array([[4, 0, 0, 0], [0, 4, 0, 0]]),
                                       np.array([1, 1]) / math.sqrt(2))
    assert number_moments(psi, 0) == pytest.approx((2.0, 4.0))
    n0 = number_operator(0, b)
    assert np.vdot(psi.dense, (n0 @ psi).dense).real == pytest.approx(2.0)
    with pytest.raises(ValidationError):
        number_moments(psi.scaled(2.0), 0)


def test_export_coo_is_sorted(tmp_path):
    b = enumerate_basis(2)
    H = pair_hamiltonian(b)
    path = tmp_path / "h.txt"
    H.export_coo(path)
    lines = path.read_text().splitlines()
    keys = [tuple(int(x) for x in ln.split()[:2]) for ln in lines]
    assert keys == sorted(keys)
    assert len(keys) == H.matrix.nnz

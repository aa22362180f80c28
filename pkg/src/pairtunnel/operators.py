r"""Sparse operators on the four-mode Fock basis.

The Hamiltonian is

.. math::
    H = \sum_{j=0}^{3} \frac{U}{2} n_j (n_j - 1)
        - J (a^\dagger_{j+1} a_j + h.c.)
        - T_2 (a^{\dagger 2}_{j+1} a^2_j + h.c.)

with modes on a ring (``j + 1`` taken mod 4). Every matrix element is a
square root of an integer times a coupling, so nothing is pruned by
magnitude. Beamsplitter elements come from an exact integer expansion,
never from a matrix exponential.
"""
from dataclasses import dataclass
from functools import lru_cache
import itertools
import math

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .fock_basis import N_MODES, StateVector

# W = exp[-i pi/4 (n0 - n1 + n2 - n3)]
W_PHASES = (-math.pi / 4, math.pi / 4, -math.pi / 4, math.pi / 4)

CYCLE = (1, 2, 3, 0)
REFLECTION = (2, 1, 0, 3)


@dataclass(frozen=True)
class HamiltonianParams:
    """Couplings of the extended Bose-Hubbard ring, in units where ``T2 = 1`` by default.

    Negative values are rejected unless ``allow_negative`` is set.
    """

    U: float = 0.0
    J: float = 0.0
    T2: float = 1.0
    allow_negative: bool = False

    def __post_init__(self):
        for name in ("U", "J", "T2"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError(f"{name} must be finite, got {value}")
            if value < 0 and not self.allow_negative:
                raise ValidationError(
                    f"{name} = {value} is negative; pass allow_negative=True to override")
            object.__setattr__(self, name, value)


class SparseOperator:
    """A matrix acting within one :class:`BasisEnumeration`.

    ``hermitian`` records what the constructor promised; use
    :meth:`hermiticity_error` to check it.
    """

    def __init__(self, basis, matrix, hermitian=False, name=""):
        matrix = sp.csr_matrix(matrix, dtype=np.complex128)
        if matrix.shape != (basis.dim, basis.dim):
            raise ValidationError(
                f"matrix shape {matrix.shape} does not match basis dimension {basis.dim}")
        matrix.sum_duplicates()
        matrix.sort_indices()
        self.basis = basis
        self.matrix = matrix
        self.hermitian = hermitian
        self.name = name

    def __repr__(self):
        return f"SparseOperator({self.name or '?'}, N={self.basis.N}, nnz={self.matrix.nnz})"

    @property
    def dim(self):
        return self.basis.dim

    @property
    def H(self):
        return SparseOperator(self.basis, self.matrix.conj().T, self.hermitian,
                              self.name + "^dag")

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            if other.basis != self.basis:
                raise ValidationError("operators act on different bases")
            return SparseOperator(self.basis, self.matrix @ other.matrix)
        if isinstance(other, StateVector):
            return apply(self, other)
        return self.matrix @ other

    def __add__(self, other):
        return SparseOperator(self.basis, self.matrix + other.matrix,
                              self.hermitian and other.hermitian)

    def __sub__(self, other):
        return SparseOperator(self.basis, self.matrix - other.matrix,
                              self.hermitian and other.hermitian)

    def __neg__(self):
        return SparseOperator(self.basis, -self.matrix, self.hermitian, "-" + self.name)

    def to_dense(self):
        return self.matrix.toarray()

    def max_abs(self):
        return float(np.abs(self.matrix.data).max()) if self.matrix.nnz else 0.0

    def hermiticity_error(self):
        """``max |A - A^dag|`` relative to ``max |A|`` (0 for the zero matrix)."""
        scale = self.max_abs()
        if scale == 0.0:
            return 0.0
        diff = self.matrix - self.matrix.conj().T
        return (float(np.abs(diff.data).max()) if diff.nnz else 0.0) / scale

    def export_coo(self, path=None):
        """Coordinate-list text, one ``row col re im`` line per stored entry.

        Lines are sorted by ``(row, col)``. Returns the text and writes it to
        ``path`` when given.
        """
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        lines = [f"{coo.row[k]} {coo.col[k]} {coo.data[k].real:.17g} {coo.data[k].imag:.17g}"
                 for k in order]
        text = "\n".join(lines) + ("\n" if lines else "")
        if path is not None:
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
        return text


def apply(op, psi):
    """Return ``op |psi>`` as a dense state."""
    if op.basis != psi.basis:
        raise ValidationError(
            f"operator on N={op.basis.N} applied to state with N={psi.N}")
    return StateVector(op.basis, op.matrix @ psi.dense)


def _hop_terms(occ, src, dst, power):
    """Rows, cols and elements of ``a_dst^dag^power a_src^power`` on ``occ``."""
    n_src = occ[:, src]
    n_dst = occ[:, dst]
    ok = n_src >= power
    new = occ[ok].copy()
    new[:, src] -= power
    new[:, dst] += power
    val = np.ones(ok.sum())
    for k in range(power):
        val = val * (n_src[ok] - k) * (n_dst[ok] + 1 + k)
    return new, np.flatnonzero(ok), np.sqrt(val)


def build_hamiltonian(params, basis):
    """Sparse Hamiltonian of the four-mode ring for the given couplings."""
    if basis.dim == 0:
        raise ValidationError("empty basis")
    occ = basis.occupations.astype(np.int64)
    rows, cols, vals = [], [], []
    diag = 0.5 * params.U * (occ * (occ - 1)).sum(axis=1)
    rows.append(np.arange(basis.dim))
    cols.append(np.arange(basis.dim))
    vals.append(diag.astype(np.complex128))
    for power, coupling in ((1, params.J), (2, params.T2)):
        if coupling == 0.0:
            continue
        for j in range(N_MODES):
            new, src, elem = _hop_terms(occ, j, (j + 1) % N_MODES, power)
            tgt = basis.rank(new)
            # forward term and its hermitian conjugate
            rows += [tgt, src]
            cols += [src, tgt]
            vals += [-coupling * elem, -coupling * elem]
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(basis.dim, basis.dim))
    return SparseOperator(basis, mat, hermitian=True, name="H")


def pair_hamiltonian(basis, T2=1.0):
    """The pure pair-tunneling part (``U = J = 0``)."""
    return build_hamiltonian(HamiltonianParams(0.0, 0.0, T2, allow_negative=True), basis)


def rotated_pair_hamiltonian(basis, T2=1.0):
    """``-4 T2 (a0^dag a2^dag a1 a3 + h.c.)`` assembled directly in the Fock basis.

    This is the form the pair Hamiltonian takes after the beamsplitter
    :func:`beamsplitter`, i.e. ``V H_pair V^dag``.
    """
    occ = basis.occupations.astype(np.int64)
    ok = (occ[:, 1] > 0) & (occ[:, 3] > 0)
    src = np.flatnonzero(ok)
    n = occ[ok]
    new = n + np.array([1, -1, 1, -1])
    elem = -4.0 * T2 * np.sqrt((n[:, 0] + 1) * (n[:, 2] + 1) * n[:, 1] * n[:, 3])
    tgt = basis.rank(new)
    mat = sp.coo_matrix((np.r_[elem, elem], (np.r_[tgt, src], np.r_[src, tgt])),
                        shape=(basis.dim, basis.dim))
    return SparseOperator(basis, mat, hermitian=True, name="H_pair_rot")


def number_operator(j, basis):
    return SparseOperator(basis, sp.diags(basis.occupations[:, j].astype(float)),
                          hermitian=True, name=f"n{j}")


def identity(basis):
    return SparseOperator(basis, sp.identity(basis.dim), hermitian=True, name="1")


def phase_unitary(theta, basis):
    """Diagonal unitary ``exp(i sum_j theta_j n_j)``.

    ``phase_unitary(W_PHASES, basis)`` is the sublattice rotation W that
    flips the sign of the pair term.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (N_MODES,):
        raise ValidationError("need exactly four phases")
    phase = np.exp(1j * (basis.occupations @ theta))
    return SparseOperator(basis, sp.diags(phase), name="phase")


def w_unitary(basis):
    return phase_unitary(W_PHASES, basis)


def _check_perm(perm):
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(N_MODES)):
        raise ValidationError(f"{perm} is not a permutation of 0..3")
    return perm


def permute_occupations(occ, perm):
    """Occupations after sending mode ``j`` to mode ``perm[j]``."""
    occ = np.asarray(occ)
    new = np.empty_like(occ)
    new[:, list(perm)] = occ
    return new


def mode_permutation(perm, basis):
    """Unitary ``P`` with ``P a_j^dag P^dag = a_{perm[j]}^dag``.

    Composition follows ``P(s) P(t) = P(s o t)``.
    """
    perm = _check_perm(perm)
    occ = basis.occupations.astype(np.int64)
    rows = basis.rank(permute_occupations(occ, perm))
    mat = sp.coo_matrix((np.ones(basis.dim), (rows, np.arange(basis.dim))),
                        shape=(basis.dim, basis.dim))
    return SparseOperator(basis, mat, name=f"P{perm}")


def compose_perms(s, t):
    """``s o t`` as a tuple (apply ``t`` first)."""
    return tuple(s[t[j]] for j in range(N_MODES))


def d8_permutations():
    """The eight mode permutations generated by the ring rotation and ``0 <-> 2``."""
    group = {tuple(range(N_MODES))}
    frontier = list(group)
    while frontier:
        g = frontier.pop()
        for gen in (CYCLE, REFLECTION):
            h = compose_perms(gen, g)
            if h not in group:
                group.add(h)
                frontier.append(h)
    return sorted(group)


def pair_symmetry_group(basis):
    """The 16 unitaries ``P_g W^(2e)`` (g in D8, e in {0, 1}) commuting with the pair term.

    ``W^2`` flips the sign of every pair operator ``a_j^2``, which together
    with the D8 relabellings gives the full symmetry of the pair Hamiltonian.
    """
    w2 = phase_unitary(2 * np.asarray(W_PHASES), basis)
    ops = []
    for perm in d8_permutations():
        p = mode_permutation(perm, basis)
        ops.append(p)
        ops.append(p @ w2)
    return ops


@lru_cache(maxsize=4096)
def two_mode_column(n_p, n_q, inverse=False):
    r"""Amplitudes of ``B |n_p, n_q>`` over ``|a, n - a>``, ``a = 0..n``.

    ``B = exp(\pm i pi/4 (a_p^dag a_q + h.c.))``. Expanding
    ``(a_p^dag + i a_q^dag)^{n_p} (i a_p^dag + a_q^dag)^{n_q}`` gives

    .. math::
        \langle a, n-a | B | n_p, n_q \rangle = i^{n_p + a} T_a
        \sqrt{\frac{a! (n-a)!}{n_p! n_q! 2^n}}

    where ``T_a`` is the ``x^a`` coefficient of ``(1-x)^{n_p} (1+x)^{n_q}``.
    ``T_a`` and the square-root argument are exact integers/rationals;
    rounding happens once, at the end. The inverse rotation conjugates the
    phase.
    """
    n = n_p + n_q
    minus = [(-1) ** k * math.comb(n_p, k) for k in range(n_p + 1)]
    plus = [math.comb(n_q, k) for k in range(n_q + 1)]
    coeff = [0] * (n + 1)
    for k, x in enumerate(minus):
        for m, y in enumerate(plus):
            coeff[k + m] += x * y
    denom = math.factorial(n_p) * math.factorial(n_q) * 2**n
    unit = -1j if inverse else 1j
    out = np.zeros(n + 1, dtype=np.complex128)
    for a, t in enumerate(coeff):
        if t == 0:
            continue
        mag = math.sqrt(t * t * math.factorial(a) * math.factorial(n - a) / denom)
        out[a] = (unit ** ((n_p + a) % 4)) * math.copysign(mag, t)
    out.setflags(write=False)
    return out


def _rotate_pair(occ, p, q, inverse):
    """Expand every occupation row through the ``(p, q)`` beamsplitter.

    Returns ``(source_row, new_occ, coefficient)`` for all nonzero outputs.
    """
    occ = np.asarray(occ, dtype=np.int64)
    src_all, occ_all, coef_all = [], [], []
    keys = occ[:, [p, q]]
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.ravel()
    for g, (n_p, n_q) in enumerate(uniq):
        rows = np.flatnonzero(inv == g)
        col = two_mode_column(int(n_p), int(n_q), inverse)
        a = np.flatnonzero(col)
        n = n_p + n_q
        src = np.repeat(rows, a.size)
        new = occ[src].copy()
        new[:, p] = np.tile(a, rows.size)
        new[:, q] = n - new[:, p]
        src_all.append(src)
        occ_all.append(new)
        coef_all.append(np.tile(col[a], rows.size))
    if not src_all:
        return (np.zeros(0, np.int64), np.zeros((0, N_MODES), np.int64),
                np.zeros(0, np.complex128))
    return np.concatenate(src_all), np.concatenate(occ_all), np.concatenate(coef_all)


def beamsplitter_pair(p, q, basis, inverse=False):
    """Fock-space matrix of ``exp(i pi/4 (a_p^dag a_q + h.c.))``.

    Heisenberg action: ``a_p^dag -> (a_p^dag + i a_q^dag)/sqrt(2)`` and
    ``a_q^dag -> (i a_p^dag + a_q^dag)/sqrt(2)``. ``inverse=True`` gives the
    rotation by ``-pi/4``.
    """
    if p == q:
        raise ValidationError("beamsplitter needs two distinct modes")
    if not {p, q} <= set(range(N_MODES)):
        raise ValidationError(f"modes must lie in 0..3, got {(p, q)}")
    src, new, coef = _rotate_pair(basis.occupations, p, q, inverse)
    mat = sp.coo_matrix((coef, (basis.rank(new), src)), shape=(basis.dim, basis.dim))
    return SparseOperator(basis, mat, name=f"BS{p}{q}" + ("^-1" if inverse else ""))


def beamsplitter(basis, inverse=False):
    """The mode-hybridizing unitary ``V = BS(0,2) BS(1,3)`` (or ``V^dag``)."""
    return (beamsplitter_pair(0, 2, basis, inverse)
            @ beamsplitter_pair(1, 3, basis, inverse))


def apply_beamsplitter_pair(psi, p, q, inverse=False):
    """Apply one beamsplitter to a (possibly sparse) state without building a matrix."""
    if p == q:
        raise ValidationError("beamsplitter needs two distinct modes")
    occ, amps = psi.nonzero()
    src, new, coef = _rotate_pair(occ, p, q, inverse)
    return StateVector.from_occupations(psi.basis, new, amps[src] * coef)


def apply_beamsplitter(psi, inverse=False):
    """``V |psi>`` (or ``V^dag |psi>``) on a sparse or dense state; result is sparse."""
    out = apply_beamsplitter_pair(psi, 1, 3, inverse)
    return apply_beamsplitter_pair(out, 0, 2, inverse)


def number_moments(psi, j, tol=1e-10):
    """Mean and variance of ``n_j`` in a normalized state."""
    if abs(psi.norm() - 1.0) > tol:
        raise ValidationError(f"state is not normalized (norm {psi.norm():.3g})")
    occ, amps = psi.nonzero()
    w = np.abs(amps) ** 2
    n = occ[:, j].astype(float)
    mean = float(w @ n)
    var = float(w @ (n - mean) ** 2)
    return mean, max(var, 0.0)


def all_permutations():
    return list(itertools.permutations(range(N_MODES)))

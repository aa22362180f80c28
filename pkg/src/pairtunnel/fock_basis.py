"""Four-mode bosonic Fock basis at fixed particle number.

States are ordered lexicographically on ``(n0, n1, n2, n3)``, so at ``N = 2``
the first state is ``(0, 0, 0, 2)`` and the last is ``(2, 0, 0, 0)``.
Positions are computed by combinatorial ranking rather than a lookup
table; the basis has ``C(N+3, 3)`` members, i.e. it grows as ``N**3 / 6``.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ValidationError

N_MODES = 4


def _c2(x):
    return x * (x - 1) // 2


def _c3(x):
    return x * (x - 1) * (x - 2) // 6


def basis_dimension(N):
    """Number of ways to place ``N`` bosons in four modes."""
    return _c3(N + 3)


class BasisEnumeration:
    """Lexicographic enumeration of the ``N``-particle, four-mode Fock basis.

    The occupation table is only materialized on first access to
    :attr:`occupations`; ranking and unranking work without it, so very
    large ``N`` can still be addressed by sparse states.
    """

    def __init__(self, N):
        N = int(N)
        if N < 0:
            raise ValidationError(f"particle number must be non-negative, got {N}")
        self.N = N
        self.dim = basis_dimension(N)

    def __repr__(self):
        return f"BasisEnumeration(N={self.N}, dim={self.dim})"

    def __len__(self):
        return self.dim

    def __eq__(self, other):
        return isinstance(other, BasisEnumeration) and other.N == self.N

    def __hash__(self):
        return hash(("BasisEnumeration", self.N))

    @cached_property
    def occupations(self):
        """``(dim, 4)`` integer array of occupation vectors in basis order."""
        N = self.N
        dtype = np.int16 if N < 2**15 else np.int64
        blocks = []
        for n0 in range(N + 1):
            R = N - n0
            n1 = np.repeat(np.arange(R + 1), np.arange(R + 1, 0, -1))
            # n2 runs 0..R-n1 inside each n1 group
            starts = np.cumsum(np.r_[0, np.arange(R + 1, 1, -1)])
            n2 = np.arange(n1.size) - np.repeat(starts, np.arange(R + 1, 0, -1))
            blk = np.empty((n1.size, 4), dtype=dtype)
            blk[:, 0] = n0
            blk[:, 1] = n1
            blk[:, 2] = n2
            blk[:, 3] = R - n1 - n2
            blocks.append(blk)
        occ = np.concatenate(blocks)
        occ.setflags(write=False)
        return occ

    def rank(self, occ):
        """Vectorized :func:`index_of` for an ``(m, 4)`` array of occupations."""
        occ = np.asarray(occ, dtype=np.int64)
        if occ.ndim != 2 or occ.shape[1] != N_MODES:
            raise ValidationError("occupations must have shape (m, 4)")
        if np.any(occ < 0):
            raise ValidationError("occupation numbers must be non-negative")
        bad = occ.sum(axis=1) != self.N
        if np.any(bad):
            raise ValidationError(
                f"occupation {tuple(occ[bad][0])} is not in the N={self.N} sector")
        N = self.N
        n0, n1, n2 = occ[:, 0], occ[:, 1], occ[:, 2]
        R = N - n0
        return (_c3(N + 3) - _c3(R + 3)) + (_c2(R + 2) - _c2(R - n1 + 2)) + n2

    def unrank(self, idx):
        """Vectorized :func:`occ_of`; returns an ``(m, 4)`` int64 array."""
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        if np.any((idx < 0) | (idx >= self.dim)):
            raise ValidationError(f"index out of range for basis of size {self.dim}")
        N = self.N
        n0_grid = np.arange(N + 2, dtype=np.int64)
        off0 = _c3(N + 3) - _c3(N - n0_grid + 3)
        n0 = np.searchsorted(off0, idx, side="right") - 1
        r = idx - off0[n0]
        R = N - n0
        # offset of n1 inside the n0 block is n1*(2R+3-n1)/2; invert and repair rounding
        b = 2 * R + 3
        n1 = np.floor((b - np.sqrt(np.maximum(b * b - 8.0 * r, 0.0))) / 2).astype(np.int64)
        for _ in range(2):
            n1 = np.where(n1 * (b - n1) // 2 > r, n1 - 1, n1)
            n1 = np.where((n1 + 1) * (b - n1 - 1) // 2 <= r, n1 + 1, n1)
        n2 = r - n1 * (b - n1) // 2
        return np.stack([n0, n1, n2, R - n1 - n2], axis=1)


def enumerate_basis(N):
    """Return the lexicographic ``N``-particle basis (size ``C(N+3, 3)``)."""
    return BasisEnumeration(N)


def index_of(occ, basis):
    """Position of a single occupation vector in ``basis``.

    Raises
    ------
    ValidationError
        If ``occ`` does not hold ``basis.N`` particles.
    """
    return int(basis.rank(np.asarray(occ).reshape(1, N_MODES))[0])


def occ_of(i, basis):
    """Occupation vector at position ``i`` as a tuple of ints."""
    return tuple(int(x) for x in basis.unrank([i])[0])


@dataclass(frozen=True)
class Bipartition:
    """Split of the four modes into two pairs; ``subsystem_a`` is stored sorted."""

    subsystem_a: tuple

    def __post_init__(self):
        a = tuple(sorted(int(m) for m in self.subsystem_a))
        if len(a) != 2 or len(set(a)) != 2 or not set(a) <= {0, 1, 2, 3}:
            raise ValidationError(
                f"subsystem A must be two distinct modes out of 0..3, got {self.subsystem_a}")
        object.__setattr__(self, "subsystem_a", a)

    @property
    def subsystem_b(self):
        return tuple(m for m in range(N_MODES) if m not in self.subsystem_a)

    def label(self):
        a, b = self.subsystem_a, self.subsystem_b
        return f"{a[0]}{a[1]}|{b[0]}{b[1]}"

    @classmethod
    def parse(cls, text):
        """Parse ``"01"``, ``"0,1"`` or ``"01|23"`` into a bipartition."""
        head = str(text).split("|")[0]
        return cls(tuple(int(c) for c in head if c.isdigit()))


# the three distinct 2-2 splits, labelled by the subsystem holding mode 0
ALL_BIPARTITIONS = (Bipartition((0, 1)), Bipartition((0, 2)), Bipartition((0, 3)))


def sector_split(basis, part):
    """Group basis indices by the number of particles in subsystem A.

    Returns a dict ``{n_A: index array}`` covering ``n_A = 0..N``; sector
    ``n_A`` has ``(n_A + 1) * (N - n_A + 1)`` members.
    """
    occ = basis.occupations
    i, j = part.subsystem_a
    n_a = occ[:, i].astype(np.int64) + occ[:, j]
    order = np.argsort(n_a, kind="stable")
    counts = np.bincount(n_a, minlength=basis.N + 1)
    bounds = np.r_[0, np.cumsum(counts)]
    return {n: order[bounds[n]:bounds[n + 1]] for n in range(basis.N + 1)}


class StateVector:
    """Complex amplitudes over an N-particle Fock basis.

    Dense states hold one amplitude per basis index. Sparse states carry a
    sorted ``support`` index array next to their amplitudes, which is what
    makes states at large ``N`` (whose full basis would not fit in memory)
    usable by the entanglement routines.
    """

    def __init__(self, basis, amplitudes, support=None):
        amplitudes = np.asarray(amplitudes, dtype=np.complex128)
        if support is None:
            if amplitudes.shape != (basis.dim,):
                raise ValidationError(
                    f"expected {basis.dim} amplitudes, got shape {amplitudes.shape}")
        else:
            support = np.asarray(support, dtype=np.int64)
            if support.shape != amplitudes.shape:
                raise ValidationError("support and amplitudes differ in length")
            if support.size and (np.any(np.diff(support) <= 0)
                                 or support[0] < 0 or support[-1] >= basis.dim):
                raise ValidationError("support must be strictly increasing basis indices")
        self.basis = basis
        self.amplitudes = amplitudes
        self.support = support

    @classmethod
    def from_occupations(cls, basis, occ, amplitudes):
        """Sparse state from ``(m, 4)`` occupations; duplicate rows are summed."""
        idx = basis.rank(np.asarray(occ).reshape(-1, N_MODES))
        uniq, inv = np.unique(idx, return_inverse=True)
        amps = np.zeros(uniq.size, dtype=np.complex128)
        np.add.at(amps, inv, np.asarray(amplitudes, dtype=np.complex128))
        return cls(basis, amps, support=uniq)

    @classmethod
    def basis_state(cls, basis, occ):
        return cls(basis, [1.0], support=[index_of(occ, basis)])

    @property
    def N(self):
        return self.basis.N

    @property
    def is_sparse(self):
        return self.support is not None

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"StateVector(N={self.N}, {kind}, nnz={self.amplitudes.size})"

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self):
        nrm = self.norm()
        if nrm == 0.0:
            raise ValidationError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amplitudes / nrm, self.support)

    def scaled(self, factor):
        return StateVector(self.basis, self.amplitudes * factor, self.support)

    def to_dense(self):
        if not self.is_sparse:
            return self
        amps = np.zeros(self.basis.dim, dtype=np.complex128)
        amps[self.support] = self.amplitudes
        return StateVector(self.basis, amps)

    @property
    def dense(self):
        """Plain ndarray of all ``dim`` amplitudes."""
        return self.to_dense().amplitudes

    def nonzero(self):
        """Occupations and amplitudes of the stored nonzero entries."""
        if self.is_sparse:
            keep = self.amplitudes != 0
            return self.basis.unrank(self.support[keep]), self.amplitudes[keep]
        idx = np.flatnonzero(self.amplitudes)
        return self.basis.occupations[idx].astype(np.int64), self.amplitudes[idx]

    def amplitude(self, occ):
        i = index_of(occ, self.basis)
        if not self.is_sparse:
            return complex(self.amplitudes[i])
        pos = np.searchsorted(self.support, i)
        if pos < self.support.size and self.support[pos] == i:
            return complex(self.amplitudes[pos])
        return 0j

    def vdot(self, other):
        """Inner product ``<self|other>``."""
        if self.basis != other.basis:
            raise ValidationError(
                f"states live in different sectors (N={self.N} vs N={other.N})")
        if not self.is_sparse and not other.is_sparse:
            return complex(np.vdot(self.amplitudes, other.amplitudes))
        if self.is_sparse and other.is_sparse:
            common, ia, ib = np.intersect1d(self.support, other.support,
                                            assume_unique=True, return_indices=True)
            return complex(np.vdot(self.amplitudes[ia], other.amplitudes[ib]))
        if self.is_sparse:
            return complex(np.vdot(self.amplitudes, other.amplitudes[self.support]))
        return complex(np.vdot(self.amplitudes[other.support], other.amplitudes))

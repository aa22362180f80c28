"""Mode entanglement of four-mode states under 2|2 bipartitions.

Particle number in subsystem A is conserved by any local operation, so the
reduced density matrix is block diagonal in ``n_A``. With ``p_n`` the weight
of block ``n``::

    S_vN    = -sum_i lambda_i ln lambda_i      (all block eigenvalues)
    S_fluct = -sum_n p_n ln p_n
    S_acc   =  sum_n p_n S_vN(rho_n / p_n)     and  S_vN = S_fluct + S_acc

Entropies are in nats. Blocks are never assembled into the full ``rho_A``.
Bipartitions of beamsplitter-rotated modes are handled by applying the
beamsplitter to the state first.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ValidationError
from .fock_basis import Bipartition

# Block eigenvalues are squared singular values, so they are never negative
# and their absolute noise is of order 1e-32. A floor much above that
# truncates genuine binomial tails at large N.
EIG_FLOOR = 1e-30
NORM_TOL = 1e-10


@dataclass
class SectorBlock:
    """Block of ``rho_A`` with ``n`` particles in A.

    ``schmidt`` holds the singular values of the amplitude matrix, so the
    block eigenvalues are ``schmidt**2`` and its trace is ``p``.
    """

    n: int
    p: float
    amplitudes: np.ndarray = field(repr=False)
    schmidt: np.ndarray = field(repr=False)

    @property
    def rho(self):
        """The ``(n+1) x (n+1)`` density block over ``|a, n-a>_A``."""
        return self.amplitudes @ self.amplitudes.conj().T

    def eigenvalues(self):
        lam = self.schmidt ** 2
        return np.where(lam < EIG_FLOOR, 0.0, lam)


@dataclass
class EntanglementReport:
    s_vn: float
    s_acc: float
    s_fluct: float
    p: np.ndarray
    bipartition: Bipartition

    def to_record(self):
        return {
            "bipartition": self.bipartition.label(),
            "S_vN": self.s_vn,
            "S_acc": self.s_acc,
            "S_fluct": self.s_fluct,
            "p": [float(x) for x in self.p],
        }


def _check_norm(psi):
    nrm = psi.norm()
    if abs(nrm - 1.0) > NORM_TOL:
        raise ValidationError(f"state is not normalized (norm {nrm:.12g})")


def _singular_values(mat):
    """Singular values of a sparse-ish amplitude matrix, block by block.

    Rows and columns linked by nonzero entries form independent blocks;
    states confined to the pair subspace split into 1x1 pieces.
    """
    r, c = np.nonzero(mat)
    if r.size == 0:
        return np.zeros(0)
    nr, nc = mat.shape
    graph = coo_matrix((np.ones(r.size), (r, c + nr)), shape=(nr + nc, nr + nc))
    ncomp, label = connected_components(graph, directed=False)
    if ncomp == 1:
        return np.linalg.svd(mat, compute_uv=False)
    out = []
    comp_r = label[:nr]
    comp_c = label[nr:]
    used = np.unique(label[r])
    for g in used:
        rows = np.flatnonzero(comp_r == g)
        cols = np.flatnonzero(comp_c == g)
        sub = mat[np.ix_(rows, cols)]
        if sub.size == 1:
            out.append(np.abs(sub).ravel())
        else:
            out.append(np.linalg.svd(sub, compute_uv=False))
    return np.concatenate(out)


def reduced_density_blocks(psi, part):
    """Sector blocks of ``rho_A`` for the sectors where ``psi`` has weight.

    Returns a list of :class:`SectorBlock` sorted by ``n``; zero-weight
    sectors are omitted.
    """
    _check_norm(psi)
    occ, amps = psi.nonzero()
    N = psi.N
    ia, ja = part.subsystem_a
    ib, _ = part.subsystem_b
    n_a = occ[:, ia] + occ[:, ja]
    order = np.argsort(n_a, kind="stable")
    occ, amps, n_a = occ[order], amps[order], n_a[order]
    cuts = np.flatnonzero(np.diff(n_a)) + 1
    blocks = []
    for lo, hi in zip(np.r_[0, cuts], np.r_[cuts, n_a.size]):
        n = int(n_a[lo])
        mat = np.zeros((n + 1, N - n + 1), dtype=np.complex128)
        mat[occ[lo:hi, ia], occ[lo:hi, ib]] = amps[lo:hi]
        p = float(np.sum(np.abs(amps[lo:hi]) ** 2))
        if p == 0.0:
            continue
        blocks.append(SectorBlock(n, p, mat, _singular_values(mat)))
    return blocks


def _shannon(x):
    x = x[x > 0]
    # rounding can push a single weight just above one
    return max(float(-np.sum(x * np.log(x))), 0.0)


def entropies(psi, part):
    """Von Neumann, accessible and fluctuation entropy of ``psi`` across ``part``."""
    blocks = reduced_density_blocks(psi, part)
    p = np.zeros(psi.N + 1)
    s_vn = s_acc = 0.0
    for b in blocks:
        lam = b.eigenvalues()
        p[b.n] = b.p
        s_vn += _shannon(lam)
        s_acc += b.p * _shannon(lam / b.p)
    return EntanglementReport(s_vn, s_acc, _shannon(p), p, part)


def renyi2_accessible_bound(psi, part):
    """``-sum_n p_n ln Tr[(rho_n / p_n)^2]``, the sector average of Renyi-2 entropies.

    Renyi entropies do not increase with their order, so this quantity is
    never larger than the accessible entanglement it accompanies.
    """
    total = 0.0
    for b in reduced_density_blocks(psi, part):
        lam = b.eigenvalues() / b.p
        total -= b.p * np.log(np.sum(lam ** 2))
    return float(total)


def analytic_bound_variational(c, M):
    """Closed-form sector Renyi-2 average for ``V |psi(c)>`` across ``{0,1}|{2,3}``.

    After the beamsplitter the variational state sits in the single sector
    ``n_A = M`` with Schmidt weights ``w_j = |psi_j|^2``, where
    ``psi_j = (c_0 + (-1)^j c_{M/2})/sqrt(M+1) + sum_l 2 c_l cos(k_l j)/sqrt(2M+4)``
    and ``l`` runs over the terms with ``k_l`` not 0 or pi. The result is
    ``-ln sum_j w_j^2``. ``c`` must satisfy ``c^T G c = 1``.
    """
    from .ansatz import gram_matrix, n_terms

    c = np.asarray(c, dtype=float)
    if M < 1 or c.shape != (n_terms(M),):
        raise ValidationError(f"expected {n_terms(M)} coefficients for M={M}")
    if abs(c @ gram_matrix(M) @ c - 1.0) > 1e-10:
        raise ValidationError("coefficients are not normalized (c^T G c != 1)")
    j = np.arange(M + 1)
    sign = (-1.0) ** j
    edge = c[0] + (sign * c[M // 2] if M % 2 == 0 else 0.0)
    ells = np.arange(1, (M - 1) // 2 + 1)
    k = 2 * np.pi * ells / M
    cos = np.cos(np.outer(j, k))
    mixed = cos @ c[ells]
    w = (edge ** 2 / (M + 1)
         + 4 * mixed * edge / np.sqrt((2 * M + 4) * (M + 1))
         + 2 * mixed ** 2 / (M + 2))
    return float(-np.log(np.sum(w ** 2)))


def binomial_entropy(M):
    """Shannon entropy (nats) of a Binomial(M, 1/2) variable; grows as ``ln(M)/2``."""
    from .solver import log_binomial_pmf

    logp = log_binomial_pmf(M)
    return float(-np.sum(np.exp(logp) * logp))


def zero_accessible_check(psi, part, tol=1e-10):
    """Whether every conditional block of ``psi`` is pure.

    Returns ``(ok, worst)`` with ``worst`` the largest conditional entropy.
    """
    worst = 0.0
    for b in reduced_density_blocks(psi, part):
        worst = max(worst, _shannon(b.eigenvalues() / b.p))
    return worst < tol, worst

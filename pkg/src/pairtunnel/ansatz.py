r"""Variational pair states, the parameter-free model state, and fidelities.

The variational family for ``N = 2M`` particles is

.. math::
    |\psi(c)\rangle = \sum_{\ell=0}^{\lfloor M/2 \rfloor} c_\ell |\varphi_\ell\rangle,
    \qquad
    |\varphi_\ell\rangle \propto \left[(A_\ell^\dagger)^M + (A_{-\ell}^\dagger)^M\right]|0\rangle

with ``A_l^dag = a0^dag^2 + e^{ik} a1^dag^2 + a2^dag^2 + e^{ik} a3^dag^2`` and
``k = 2 pi l / M``. After the beamsplitter ``V`` every ``|phi_l>`` lies in the
pair subspace ``|j, M-j, j, M-j>``, where it equals ``i^M`` times the real
vector returned by :func:`reduced_phi`. All large-``M`` work is done on
those ``(M+1)``-component vectors.
"""
import math

import numpy as np
from scipy.linalg import eigh
from scipy.special import gammaln

from .errors import ValidationError
from .fock_basis import BasisEnumeration, StateVector
from .solver import (binomial_amplitudes, embed_reduced, reduced_pair_hamiltonian,
                     _half)

GRAM_COND_LIMIT = 1e13


def n_terms(M):
    return M // 2 + 1


def momentum(ell, M):
    return 2.0 * math.pi * ell / M


def is_self_conjugate(ell, M):
    """True when ``k_l`` is 0 or pi, i.e. ``e^{ik} = e^{-ik}``."""
    return ell == 0 or 2 * ell == M


def _check_ell(ell, M, signed=False):
    if M < 1:
        raise ValidationError("need at least one pair (M >= 1)")
    lo = -(M // 2) if signed else 0
    if not lo <= ell <= M // 2:
        raise ValidationError(f"ell={ell} outside {lo}..{M // 2} for M={M}")


def log_normalization_constant(ell, M):
    """Natural log of the normalization constant ``N_l``."""
    _check_ell(ell, M)
    if is_self_conjugate(ell, M):
        return (M + 1) * math.log(2) + math.lgamma(M + 1) + 0.5 * math.log(M + 1)
    return M * math.log(2) + math.lgamma(M + 1) + 0.5 * math.log(2 * M + 4)


def normalization_constant(ell, M):
    """``N_l`` such that ``|phi_l> = |beta_l> / N_l`` has unit norm.

    ``2^(M+1) M! sqrt(M+1)`` when ``k_l`` is 0 or pi, otherwise
    ``2^M M! sqrt(2M+4)``. Overflows a float beyond ``M`` of about 150; use
    :func:`log_normalization_constant` there.
    """
    return math.exp(log_normalization_constant(ell, M))


def build_phi(ell, M, basis=None):
    """``|phi_l>`` as a sparse state on the full ``N = 2M`` basis.

    Multinomial expansion: pair numbers ``m_j`` with ``sum m_j = M`` give
    ``|2 m_0, 2 m_1, 2 m_2, 2 m_3>`` with weight
    ``M!/prod(m_j!) prod sqrt((2 m_j)!) 2 cos(k (m_1 + m_3))``.
    """
    _check_ell(ell, M)
    basis = basis or BasisEnumeration(2 * M)
    if basis.N != 2 * M:
        raise ValidationError(f"basis has N={basis.N}, need N={2 * M}")
    pairs = BasisEnumeration(M).occupations.astype(np.int64)
    logmag = (math.lgamma(M + 1) - gammaln(pairs + 1).sum(axis=1)
              + 0.5 * gammaln(2 * pairs + 1).sum(axis=1)
              - log_normalization_constant(ell, M))
    amps = 2.0 * np.cos(momentum(ell, M) * (pairs[:, 1] + pairs[:, 3])) * np.exp(logmag)
    return StateVector.from_occupations(basis, 2 * pairs, amps)


def build_xi(ell_signed, M):
    """Amplitudes ``e^{i k (M - j)} / sqrt(M+1)`` of ``|xi_l>`` on the pair subspace."""
    _check_ell(ell_signed, M, signed=True)
    j = np.arange(M + 1)
    return np.exp(1j * momentum(ell_signed, M) * (M - j)) / math.sqrt(M + 1)


def reduced_phi(ell, M):
    """Real pair-subspace vector ``r_l`` with ``V |phi_l> = i^M r_l``."""
    _check_ell(ell, M)
    if is_self_conjugate(ell, M):
        return build_xi(ell, M).real
    j = np.arange(M + 1)
    return 2.0 * np.cos(momentum(ell, M) * (M - j)) / math.sqrt(2 * M + 4)


def variational_basis(M):
    """Rows ``r_l`` for ``l = 0..floor(M/2)``, shape ``(floor(M/2)+1, M+1)``."""
    return np.array([reduced_phi(ell, M) for ell in range(n_terms(M))])


def gram_entry(ell, r, M):
    if ell == r:
        return 1.0
    a, b = is_self_conjugate(ell, M), is_self_conjugate(r, M)
    if a and b:
        return 1.0 / (M + 1)
    if a or b:
        return math.sqrt(2.0 / ((M + 1) * (M + 2)))
    return 2.0 / (M + 2)


def gram_matrix(M):
    """Closed-form overlaps ``<phi_l|phi_r>``."""
    if M < 1:
        raise ValidationError("need at least one pair (M >= 1)")
    L = n_terms(M)
    return np.array([[gram_entry(l, r, M) for r in range(L)] for l in range(L)])


def _gram_solve(G, v):
    cond = np.linalg.cond(G)
    if not cond < GRAM_COND_LIMIT:
        raise ValidationError(f"Gram matrix is numerically singular (cond {cond:.3g})")
    return np.linalg.solve(G, v)


def overlaps(target, M):
    """``v_l = <phi_l|target>``.

    ``target`` is either a full-basis :class:`StateVector` or the
    ``M+1`` pair-subspace amplitudes of ``V |target>``.
    """
    if isinstance(target, StateVector):
        if target.N != 2 * M:
            raise ValidationError(f"target has N={target.N}, need N={2 * M}")
        return np.array([build_phi(ell, M).vdot(target) for ell in range(n_terms(M))])
    target = np.asarray(target)
    if target.shape != (M + 1,):
        raise ValidationError(f"reduced target needs {M + 1} amplitudes")
    return (-1j) ** (M % 4) * (variational_basis(M) @ target)


def optimal_fidelity(target, M, tol=1e-10):
    """Best overlap ``max_c |<psi(c)|target>|`` over real ``c`` with ``c^T G c = 1``.

    The constrained maximum is ``F = sqrt(v^T G^-1 v)`` at ``c = G^-1 v / F``.
    ``v`` is complex in general; its common phase is removed first, and
    ``c`` is only returned as real if the imaginary remainder is negligible.

    Returns
    -------
    F : float
    c : ndarray
        Optimal coefficients normalized so that ``c^T G c = 1``.
    """
    norm = (target.norm() if isinstance(target, StateVector)
            else float(np.linalg.norm(target)))
    if abs(norm - 1.0) > tol:
        raise ValidationError(f"target is not normalized (norm {norm:.3g})")
    G = gram_matrix(M)
    v = overlaps(target, M)
    k = int(np.argmax(np.abs(v)))
    if abs(v[k]) == 0.0:
        return 0.0, np.zeros_like(v.real)
    v = v * (abs(v[k]) / v[k])
    if np.max(np.abs(v.imag)) > 1e-10:
        raise ValidationError("overlaps are not real up to a common phase; "
                              "real coefficients are not optimal")
    v = v.real
    x = _gram_solve(G, v)
    F = math.sqrt(max(float(v @ x), 0.0))
    c = x / F
    if F > 1 + 1e-12:
        raise ValidationError(f"fidelity {F!r} exceeds one; target or Gram matrix is wrong")
    return min(F, 1.0), c


def ansatz_reduced_state(c, M):
    """Pair-subspace amplitudes of ``i^-M V |psi(c)>``."""
    c = np.asarray(c, dtype=float)
    if c.shape != (n_terms(M),):
        raise ValidationError(f"expected {n_terms(M)} coefficients for M={M}")
    return c @ variational_basis(M)


def subspace_hamiltonian(M, T2=1.0):
    """Rotated pair Hamiltonian projected on the variational basis."""
    R = variational_basis(M)
    h = reduced_pair_hamiltonian(M, T2)
    return np.array([h @ r for r in R]) @ R.T


def variational_ground_energy(M, T2=1.0):
    """Lowest root of ``H_sub c = E G c``; returns ``(E, c)`` with ``c^T G c = 1``."""
    w, vecs = eigh(subspace_hamiltonian(M, T2), gram_matrix(M))
    c = vecs[:, 0]
    return float(w[0]), c * np.sign(c[np.argmax(np.abs(c))])


def model_state(M, representation="full"):
    """The pair-condensate model state.

    ``"reduced"`` returns the binomial amplitudes ``sqrt(C(M,j))/2^(M/2)`` of
    ``V |Phi>`` on the pair subspace; ``"full"`` returns
    ``|Phi> = V^dag`` of that vector as a sparse full-basis state.
    """
    if M < 1:
        raise ValidationError("need at least one pair (M >= 1)")
    alpha = binomial_amplitudes(M)
    if representation == "reduced":
        return alpha
    if representation == "full":
        return embed_reduced(alpha, M)
    raise ValidationError(f"unknown representation {representation!r}")


def model_state_direct(M):
    """Build the model state straight from its pair-creation product.

    Applies ``(n0+n2)^(-1/2) (a0^dag^2 + a2^dag^2) + (n1+n3)^(-1/2) (a1^dag^2 + a3^dag^2)``
    ``M`` times to the vacuum (number operators evaluated after creation) and
    divides by ``2^M sqrt(M!)``. The result equals ``i^M`` times
    ``model_state(M, "full")``. Cost grows as ``M**4``; meant for checks.
    """
    amps = {(0, 0, 0, 0): 1.0}
    for _ in range(M):
        nxt = {}
        for occ, a in amps.items():
            for pair in ((0, 2), (1, 3)):
                total = occ[pair[0]] + occ[pair[1]] + 2
                for mode in pair:
                    n = occ[mode]
                    new = list(occ)
                    new[mode] += 2
                    new = tuple(new)
                    nxt[new] = nxt.get(new, 0.0) + a * math.sqrt((n + 1) * (n + 2) / total)
        amps = nxt
    scale = math.exp(-M * math.log(2) - 0.5 * math.lgamma(M + 1))
    occ = np.array(list(amps), dtype=np.int64)
    vals = np.array(list(amps.values())) * scale
    return StateVector.from_occupations(BasisEnumeration(2 * M), occ, vals)


def fidelity(a, b, tol=1e-10):
    """``|<a|b>|`` for two normalized states on the same basis."""
    for s in (a, b):
        if abs(s.norm() - 1.0) > tol:
            raise ValidationError(f"state is not normalized (norm {s.norm():.3g})")
    return min(abs(a.vdot(b)), 1.0)


def model_fidelity_reduced(M, T2=1.0):
    """``|<Phi|Psi0>|`` evaluated on the pair subspace."""
    from .solver import reduced_ground_state

    _, alpha = reduced_ground_state(M, T2)
    return float(alpha @ binomial_amplitudes(M))


def variational_record(M, c, F):
    """Rows ``(l, k_l, c_l)`` plus the fidelity, for the JSON result record."""
    return {
        "M": M,
        "F": F,
        "terms": [{"l": ell, "k": momentum(ell, M), "c": float(c[ell])}
                  for ell in range(n_terms(M))],
    }


def check_even(N):
    return _half(N)

"""Ground states of the four-mode ring.

Three routes are available:

* :func:`ground_state_dense` - full Hermitian diagonalization, small bases;
* :func:`ground_state_lanczos` - restarted Lanczos with full
  reorthogonalization, for bases up to a few times 1e5;
* :func:`ground_state_reduced` - the pure pair-tunneling limit, solved in
  the ``(M+1)``-dimensional pair subspace ``|s, M-s, s, M-s>`` reached by
  the beamsplitter and mapped back exactly.

States returned by every route use the same phase convention: the
amplitude of largest magnitude is real and positive (lowest index wins a
tie).
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from .errors import ConvergenceError, InvariantError, ValidationError
from .fock_basis import BasisEnumeration, StateVector
from .operators import apply_beamsplitter

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DENSE_CAP = 4000
DEGENERACY_GAP = 1e-8
AUTO_DENSE_MAX = 600


@dataclass
class GroundStateResult:
    energy: float
    state: StateVector
    residual: float
    method: str
    iterations: int = 0
    metadata: dict = field(default_factory=dict)

    def to_record(self, include_amplitudes=False):
        """JSON-ready dict with a fixed key order."""
        rec = {
            "method": self.method,
            "N": self.state.N,
            "energy": self.energy,
            "residual": self.residual,
            "iterations": self.iterations,
        }
        for key in sorted(self.metadata):
            rec[key] = self.metadata[key]
        if include_amplitudes:
            occ, amps = self.state.nonzero()
            rec["amplitudes"] = [
                {"occ": [int(x) for x in o], "re": float(a.real), "im": float(a.imag)}
                for o, a in zip(occ, amps)
            ]
        return rec


def fix_phase(vec, rel_tol=1e-12):
    """Rotate ``vec`` so its largest-magnitude entry is real and positive."""
    vec = np.asarray(vec, dtype=np.complex128)
    mag = np.abs(vec)
    top = mag.max() if mag.size else 0.0
    if top == 0.0:
        return vec
    k = int(np.flatnonzero(mag >= top * (1 - rel_tol))[0])
    return vec * (abs(vec[k]) / vec[k])


def _residual(op, vec, energy):
    return float(np.linalg.norm(op.matrix @ vec - energy * vec))


def ground_state_dense(op, cap=DENSE_CAP):
    """Lowest eigenpair by full diagonalization.

    A degenerate ground level (gap below 1e-8) is resolved by projecting the
    lowest-index basis vector with weight in the level onto it.
    """
    if op.dim > cap:
        raise ValidationError(
            f"dimension {op.dim} exceeds the dense-solver cap {cap}; use lanczos")
    A = op.to_dense()
    if not np.any(A.imag):
        A = A.real
    evals, evecs = np.linalg.eigh(A)
    e0 = float(evals[0])
    level = np.flatnonzero(evals - e0 < DEGENERACY_GAP)
    meta = {"gap": float(evals[level[-1] + 1] - e0) if level[-1] + 1 < evals.size else None,
            "degeneracy": int(level.size)}
    if level.size == 1:
        vec = evecs[:, 0]
    else:
        Q = evecs[:, level]
        weight = np.linalg.norm(Q, axis=1)
        i = int(np.flatnonzero(weight > 1e-8)[0])
        vec = Q @ Q[i].conj()
        vec = vec / np.linalg.norm(vec)
        log.warning("ground level is %d-fold degenerate; using canonical representative",
                    level.size)
    vec = fix_phase(vec)
    return GroundStateResult(e0, StateVector(op.basis, vec), _residual(op, vec, e0),
                             "dense", 1, meta)


def ground_state_lanczos(op, tol=DEFAULT_TOL, max_iter=20000, seed=0, krylov_dim=100):
    """Lowest eigenpair by restarted Lanczos.

    Each cycle builds up to ``krylov_dim`` fully reorthogonalized Lanczos
    vectors and restarts from the current Ritz vector. Convergence means
    ``||H psi - E psi|| <= tol * max(1, |E|)``, checked on the explicit
    vector.

    Raises
    ------
    ConvergenceError
        If ``max_iter`` matrix-vector products do not reach ``tol``.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    A = op.matrix
    n = op.dim
    real = not np.any(A.data.imag)
    if real:
        A = A.real.tocsr()
    dtype = np.float64 if real else np.complex128
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    if not real:
        v = v + 1j * rng.standard_normal(n)
    v = (v / np.linalg.norm(v)).astype(dtype)

    matvecs = 0
    best = math.inf
    restarts = 0
    while True:
        m = min(krylov_dim, n)
        Q = np.zeros((m, n), dtype=dtype)
        alphas, betas = [], []
        q, q_prev, b_prev = v, None, 0.0
        for k in range(m):
            Q[k] = q
            w = A @ q
            matvecs += 1
            a = float(np.vdot(q, w).real)
            w = w - a * q
            if q_prev is not None:
                w = w - b_prev * q_prev
            for _ in range(2):
                w = w - Q[:k + 1].T @ (Q[:k + 1].conj() @ w)
            b = float(np.linalg.norm(w))
            alphas.append(a)
            if len(alphas) > 1:
                theta, y = eigh_tridiagonal(np.array(alphas), np.array(betas))
            else:
                theta, y = np.array(alphas), np.ones((1, 1))
            scale = max(1.0, abs(theta[0]))
            if (b * abs(y[-1, 0]) <= 0.1 * tol * scale or b <= 1e-14 * scale
                    or k == m - 1 or matvecs >= max_iter):
                break
            betas.append(b)
            q_prev, q, b_prev = q, w / b, b
        x = Q[:k + 1].T @ y[:, 0]
        x = x / np.linalg.norm(x)
        energy = float(theta[0])
        res = float(np.linalg.norm(A @ x - energy * x))
        matvecs += 1
        best = min(best, res)
        if res <= tol * max(1.0, abs(energy)):
            break
        if matvecs >= max_iter:
            raise ConvergenceError(
                f"lanczos did not reach tol={tol:g} in {matvecs} matvecs "
                f"(best residual {best:.3g})", best, matvecs)
        v = x
        restarts += 1

    gap = float(theta[1] - theta[0]) if theta.size > 1 else None
    meta = {"gap": gap, "restarts": restarts, "seed": seed,
            "degenerate": bool(gap is not None and gap < DEGENERACY_GAP)}
    if meta["degenerate"]:
        log.warning("lanczos Ritz gap %.3g below %.0e; ground level may be degenerate",
                    gap, DEGENERACY_GAP)
    vec = fix_phase(x)
    return GroundStateResult(energy, StateVector(op.basis, vec), res, "lanczos",
                             matvecs, meta)


def ground_state(op, method="auto", **kwargs):
    if method == "auto":
        method = "dense" if op.dim <= AUTO_DENSE_MAX else "lanczos"
    if method == "dense":
        return ground_state_dense(op, **{k: v for k, v in kwargs.items() if k == "cap"})
    if method == "lanczos":
        return ground_state_lanczos(op, **kwargs)
    raise ValidationError(f"unknown solver {method!r}")


# --- pure pair tunneling in the rotated pair subspace -------------------------------

@dataclass(frozen=True)
class Tridiagonal:
    """Real symmetric tridiagonal matrix stored by its two diagonals."""

    diagonal: np.ndarray
    off_diagonal: np.ndarray

    @property
    def size(self):
        return self.diagonal.size

    def toarray(self):
        return (np.diag(self.diagonal) + np.diag(self.off_diagonal, 1)
                + np.diag(self.off_diagonal, -1))

    def __matmul__(self, x):
        x = np.asarray(x)
        out = self.diagonal * x
        out[:-1] += self.off_diagonal * x[1:]
        out[1:] += self.off_diagonal * x[:-1]
        return out

    def expectation(self, x):
        x = np.asarray(x)
        return float(np.vdot(x, self @ x).real)


def _half(N):
    if N % 2:
        raise ValidationError(f"the pair subspace needs even N, got {N}")
    return N // 2


def reduced_pair_hamiltonian(M, T2=1.0):
    """Rotated pair Hamiltonian on ``|s, M-s, s, M-s>``, ``s = 0..M``.

    ``a0^dag a2^dag a1 a3`` raises ``s`` by one with element ``(s+1)(M-s)``,
    so the matrix has zero diagonal and off-diagonal ``-4 T2 (s+1)(M-s)``.
    """
    if M < 0:
        raise ValidationError("M must be non-negative")
    s = np.arange(M, dtype=float)
    return Tridiagonal(np.zeros(M + 1), -4.0 * T2 * (s + 1) * (M - s))


def reduced_ground_state(M, T2=1.0):
    """Ground energy and amplitudes ``alpha_s`` (all positive) in the pair subspace."""
    if M < 1:
        raise ValidationError("need at least one pair (M >= 1)")
    h = reduced_pair_hamiltonian(M, T2)
    w, v = eigh_tridiagonal(h.diagonal, h.off_diagonal, select="i", select_range=(0, 0))
    alpha = v[:, 0]
    alpha = alpha * np.sign(alpha[np.argmax(np.abs(alpha))])
    return float(w[0]), alpha


def pair_subspace_state(amplitudes, M):
    """Sparse state ``sum_s amplitudes[s] |s, M-s, s, M-s>`` in the ``N = 2M`` basis."""
    amplitudes = np.asarray(amplitudes)
    if amplitudes.shape != (M + 1,):
        raise ValidationError(f"expected {M + 1} amplitudes, got {amplitudes.shape}")
    s = np.arange(M + 1)
    occ = np.stack([s, M - s, s, M - s], axis=1)
    return StateVector.from_occupations(BasisEnumeration(2 * M), occ, amplitudes)


def embed_reduced(alpha, M):
    """``V^dag sum_s alpha_s |s, M-s, s, M-s>`` as a sparse full-basis state.

    Work and storage scale as ``M**3``; exact zeros from the beamsplitter
    expansion are not stored.
    """
    return apply_beamsplitter(pair_subspace_state(alpha, M), inverse=True)


def ground_state_reduced(N, T2=1.0, embed=True):
    """Pure pair-tunneling ground state via the pair subspace.

    The residual is evaluated with the reduced matrix; since the subspace is
    invariant it equals the full-basis residual.
    """
    M = _half(N)
    if M == 0:
        basis = BasisEnumeration(0)
        return GroundStateResult(0.0, StateVector(basis, [1.0]), 0.0, "reduced", 0, {"M": 0})
    energy, alpha = reduced_ground_state(M, T2)
    h = reduced_pair_hamiltonian(M, T2)
    res = float(np.linalg.norm(h @ alpha - energy * alpha))
    state = embed_reduced(alpha, M) if embed else pair_subspace_state(alpha, M)
    state = StateVector(state.basis, fix_phase(state.amplitudes), state.support)
    meta = {"M": M, "representation": "full" if embed else "rotated"}
    return GroundStateResult(energy, state, res, "reduced", 1, meta)


EXACT_BINOMIAL_MAX = 4096


def log_binomial_pmf(M):
    """``ln(C(M, s) / 2^M)`` for ``s = 0..M``.

    Exact integer binomials up to ``M = 4096``; log-gamma beyond, where the
    three large terms cancel and cost about ``M * 1e-16`` in accuracy.
    """
    if M < 0:
        raise ValidationError("M must be non-negative")
    if M <= EXACT_BINOMIAL_MAX:
        logc = np.array([math.log(c) for c in _binomial_row(M)])
    else:
        s = np.arange(M + 1)
        logc = gammaln(M + 1) - gammaln(s + 1) - gammaln(M - s + 1)
    return logc - M * math.log(2.0)


def _binomial_row(M):
    row = [1]
    for s in range(M):
        row.append(row[-1] * (M - s) // (s + 1))
    return row


def binomial_amplitudes(M):
    """``sqrt(C(M, s)) / 2^(M/2)`` for ``s = 0..M``."""
    return np.exp(0.5 * log_binomial_pmf(M))


def jx_extremal_expectation(M, T2=1.0):
    """Energy of the ``J_x`` extremal spin coherent state in the pair subspace.

    In this basis the state has binomial amplitudes ``sqrt(C(M,s))/2^(M/2)``;
    its energy is a variational upper bound on ``E0(2M)`` and behaves as
    ``-2 M^2 + O(M)``.
    """
    if M < 1:
        raise ValidationError("need at least one pair (M >= 1)")
    return reduced_pair_hamiltonian(M, T2).expectation(binomial_amplitudes(M))


def check_reduced_block(N, T2=1.0, tol=1e-9):
    """Confirm on the full basis that the pair subspace holds the ground state.

    Raises
    ------
    InvariantError
        When full diagonalization disagrees with the reduced solve.
    """
    from .operators import pair_hamiltonian

    full = ground_state_dense(pair_hamiltonian(BasisEnumeration(N), T2), cap=10**5)
    red = ground_state_reduced(N, T2)
    overlap = abs(full.state.vdot(red.state))
    if abs(full.energy - red.energy) > tol or overlap < 1 - tol:
        raise InvariantError(
            f"N={N}: full E0={full.energy!r}, reduced E0={red.energy!r}, "
            f"overlap={overlap!r}")
    return full.energy, red.energy, overlap

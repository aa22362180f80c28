"""Parameter scans, scaling fits and CSV/JSON emission.

Scans run point by point, optionally across worker processes; rows are
always assembled in input order so output is byte-for-byte reproducible.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
import csv
import io
import json
import logging
import math
import os

import numpy as np

from . import ansatz
from .entanglement import entropies
from .errors import InvariantError, ValidationError
from .fock_basis import Bipartition, enumerate_basis
from .operators import HamiltonianParams, build_hamiltonian, number_moments
from .solver import (binomial_amplitudes, ground_state, ground_state_reduced,
                     pair_subspace_state, reduced_ground_state)

log = logging.getLogger(__name__)

WORKERS_ENV = "PAIRTUNNEL_WORKERS"
LANCZOS_N_CAP = 64
NEIGHBOUR_SPLIT = Bipartition((0, 1))
SERIES = ("psi0", "phi", "Vpsi0", "Vphi")


@dataclass
class FitResult:
    """Least-squares fit of a scaling law.

    ``model`` is ``"log"`` for ``S = a ln N + b + c/N`` (coefficients
    ``(a, b, c)``) or ``"inverse"`` for ``F = F_inf + slope/N``
    (coefficients ``(F_inf, slope)``).
    """

    model: str
    coefficients: tuple
    rss: float
    n_min: int
    n_max: int
    n_points: int

    def to_record(self):
        return asdict(self) | {"coefficients": [float(c) for c in self.coefficients]}


def _prepare(points, min_points):
    pts = sorted((float(n), float(s)) for n, s in points)
    ns = np.array([p[0] for p in pts])
    if len(pts) < min_points:
        raise ValidationError(f"need at least {min_points} points, got {len(pts)}")
    if np.unique(ns).size != ns.size:
        raise ValidationError("particle numbers must be distinct")
    if np.any(ns <= 0):
        raise ValidationError("particle numbers must be positive")
    return ns, np.array([p[1] for p in pts])


def _ols(X, y, model, ns):
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise ValidationError("design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    rss = float(np.sum((X @ coef - y) ** 2))
    return FitResult(model, tuple(float(c) for c in coef), rss,
                     int(ns.min()), int(ns.max()), int(ns.size))


def fit_log_model(points):
    """Fit ``S = a ln N + b + c/N`` to ``(N, S)`` pairs.

    Points are sorted first, so the result does not depend on input order.
    """
    ns, y = _prepare(points, 3)
    X = np.stack([np.log(ns), np.ones_like(ns), 1.0 / ns], axis=1)
    return _ols(X, y, "log", ns)


def fit_inverse_n(points):
    """Fit ``F = F_inf + slope / N``."""
    ns, y = _prepare(points, 2)
    X = np.stack([np.ones_like(ns), 1.0 / ns], axis=1)
    return _ols(X, y, "inverse", ns)


def fit_points(model, points):
    if model == "log":
        return fit_log_model(points)
    if model == "inverse":
        return fit_inverse_n(points)
    raise ValidationError(f"unknown fit model {model!r}")


# --- output ------------------------------------------------------------------------

def format_value(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def to_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(x) for x in row])
    return buf.getvalue()


def to_json(record):
    return json.dumps(record, indent=2) + "\n"


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return reader.fieldnames, [{k: float(v) for k, v in row.items()} for row in reader]


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ValidationError(f"{WORKERS_ENV} must be an integer")


def ordered_map(fn, items, workers=1):
    """``map`` that may fan out to processes but always returns input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def require_even(ns):
    odd = [n for n in ns if n % 2]
    if odd:
        raise ValidationError(f"even particle numbers required, got {odd}")
    if any(n < 2 for n in ns):
        raise ValidationError("particle numbers must be at least 2")


# --- ground state --------------------------------------------------------------------

def solve(N, params, solver="auto", tol=1e-10, seed=0):
    """Ground state for one parameter point with the requested route."""
    if solver == "reduced":
        if params.U != 0 or params.J != 0:
            raise ValidationError("the reduced solver needs U = J = 0")
        return ground_state_reduced(N, params.T2)
    op = build_hamiltonian(params, enumerate_basis(N))
    if solver == "auto":
        return ground_state(op, "auto", tol=tol, seed=seed)
    if solver == "dense":
        return ground_state(op, "dense")
    if solver == "lanczos":
        return ground_state(op, "lanczos", tol=tol, seed=seed)
    raise ValidationError(f"unknown solver {solver!r}")


def ground_state_record(N, params, solver="auto", tol=1e-10, seed=0,
                        bipartitions=("01", "02", "03")):
    res = solve(N, params, solver, tol, seed)
    moments = [number_moments(res.state, j) for j in range(4)]
    rec = {
        "N": N,
        "U": params.U,
        "J": params.J,
        "T2": params.T2,
    }
    rec.update(res.to_record())
    rec["mean_n"] = [m for m, _ in moments]
    rec["variance_n"] = [v for _, v in moments]
    rec["entropies"] = [entropies(res.state, Bipartition.parse(b)).to_record()
                        for b in bipartitions]
    return rec


# --- fig1: fidelities ------------------------------------------------------------

def fig1_row(N):
    M = N // 2
    _, alpha = reduced_ground_state(M)
    f_var, _ = ansatz.optimal_fidelity(alpha, M)
    if 1 - f_var > 1e-8:
        log.warning("N=%d: variational fidelity deficit %.3g exceeds 1e-8", N, 1 - f_var)
    f_model = float(alpha @ binomial_amplitudes(M))
    return (N, f_var, f_model)


def fig1(ns, workers=1, fit_min_n=None):
    """Rows ``(N, F_variational, F_model)`` and the ``1/N`` fit of ``F_model``."""
    require_even(ns)
    rows = ordered_map(fig1_row, ns, workers)
    lo = fit_min_n or 0
    fit = fit_inverse_n([(r[0], r[2]) for r in rows if r[0] >= lo])
    return ["N", "F_variational", "F_model"], rows, {"F_model": fit.to_record()}


# --- fig2: number variance ---------------------------------------------------------

def _fig2_point(args):
    N, J, U, T2, solver, tol, seed = args
    params = HamiltonianParams(U, J, T2)
    if solver == "auto" and U == 0 and J == 0:
        solver = "reduced"
    res = solve(N, params, solver, tol, seed)
    return (N, J, number_moments(res.state, 0)[1])


def fig2(ns, js, U=0.0, T2=1.0, solver="auto", tol=1e-10, seed=0, workers=1):
    """Rows ``(N, J, variance of n_0)`` over the ``N x J`` grid."""
    if any(j < 0 for j in js):
        raise ValidationError("J grid must be non-negative")
    big = [n for n in ns if n > LANCZOS_N_CAP]
    if big and (U != 0 or any(j > 0 for j in js)):
        raise ValidationError(
            f"N > {LANCZOS_N_CAP} is only supported on the reduced path (U = J = 0): {big}")
    pts = [(N, float(J), U, T2, solver, tol, seed) for N in ns for J in js]
    return ["N", "J", "variance"], ordered_map(_fig2_point, pts, workers), {}


def half_variance_crossover(js, variances, reference):
    """Smallest ``J`` where the variance drops to ``reference / 2``.

    Linear interpolation in ``ln J`` between bracketing grid points; ``None``
    if the grid never gets there.
    """
    js = np.asarray(js, dtype=float)
    v = np.asarray(variances, dtype=float)
    target = reference / 2
    below = np.flatnonzero(v <= target)
    if below.size == 0:
        return None
    k = int(below[0])
    if k == 0:
        return float(js[0])
    x0, x1 = math.log(js[k - 1]), math.log(js[k])
    t = (v[k - 1] - target) / (v[k - 1] - v[k])
    return math.exp(x0 + t * (x1 - x0))


# --- fig3: entanglement scaling ----------------------------------------------------

def fig3_row(N):
    M = N // 2
    _, alpha = reduced_ground_state(M)
    beta = binomial_amplitudes(M)
    states = {
        "psi0": ground_state_reduced(N).state,
        "phi": ansatz.model_state(M, "full"),
        "Vpsi0": pair_subspace_state(alpha, M),
        "Vphi": pair_subspace_state(beta, M),
    }
    row = [N]
    for name in SERIES:
        rep = entropies(states[name], NEIGHBOUR_SPLIT)
        row += [rep.s_vn, rep.s_acc, rep.s_fluct]
    return tuple(row)


def fig3_header():
    return ["N"] + [f"{q}_{s}" for s in SERIES for q in ("S_vN", "S_acc", "S_fluct")]


def fig3(ns, workers=1, fit_min_n=None, tol=1e-10):
    """Entropy series for ``|Psi0>``, ``|Phi>`` and their beamsplitter images.

    The rotated series are evaluated across ``{0~,1~}|{2~,3~}``, which is the
    ``{0,1}|{2,3}`` split of the rotated state.

    Raises
    ------
    InvariantError
        If a rotated state shows any fluctuation entropy.
    """
    require_even(ns)
    header = fig3_header()
    rows = ordered_map(fig3_row, ns, workers)
    for row in rows:
        rec = dict(zip(header, row))
        for s in ("Vpsi0", "Vphi"):
            if abs(rec[f"S_vN_{s}"] - rec[f"S_acc_{s}"]) > tol:
                raise InvariantError(f"N={row[0]}: S_vN != S_acc for {s}")
    lo = fit_min_n or 0
    fits = {}
    for s in SERIES:
        for q in ("S_vN", "S_acc"):
            col = header.index(f"{q}_{s}")
            fits[f"{q}_{s}"] = fit_log_model(
                [(r[0], r[col]) for r in rows if r[0] >= lo]).to_record()
    return header, rows, fits


# --- self check -----------------------------------------------------------------------

def check_decomposition(header, rows, tol=1e-10):
    """Worst violation of ``S_vN = S_fluct + S_acc`` over all series in a CSV."""
    suffixes = [h[len("S_vN"):] for h in header if h.startswith("S_vN")]
    worst = 0.0
    checked = 0
    for row in rows:
        for suf in suffixes:
            keys = ("S_vN" + suf, "S_acc" + suf, "S_fluct" + suf)
            if all(k in row for k in keys):
                worst = max(worst, abs(row[keys[0]] - row[keys[1]] - row[keys[2]]))
                checked += 1
    return worst, checked

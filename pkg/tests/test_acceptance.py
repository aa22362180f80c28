"""Acceptance suite.

Each criterion is a plain function returning ``(ok, detail)``; the pytest
wrappers print one ``PASS``/``FAIL`` line per criterion and then assert.
``python tests/test_acceptance.py`` runs the same checks without pytest.
"""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from pairtunnel import analysis, ansatz
from pairtunnel.entanglement import (analytic_bound_variational, binomial_entropy,
                                     entropies, renyi2_accessible_bound,
                                     zero_accessible_check)
from pairtunnel.fock_basis import ALL_BIPARTITIONS, Bipartition, StateVector, enumerate_basis
from pairtunnel.operators import (HamiltonianParams, beamsplitter, build_hamiltonian,
                                  d8_permutations, mode_permutation,
                                  pair_hamiltonian, pair_symmetry_group,
                                  rotated_pair_hamiltonian, w_unitary)
from pairtunnel.solver import (binomial_amplitudes, ground_state_dense, ground_state_reduced,
                               jx_extremal_expectation, pair_subspace_state,
                               reduced_ground_state)


RESULT_LINES = {}


def report(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULT_LINES[number] = line
    print(line)
    return line


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


# --- 1 -------------------------------------------------------------------------------

def criterion_1():
    with Timer() as t:
        e2 = ground_state_dense(pair_hamiltonian(enumerate_basis(2))).energy
        e4 = ground_state_dense(pair_hamiltonian(enumerate_basis(4))).energy
    err = max(abs(e2 + 4.0), abs(e4 + 8 * math.sqrt(2)))
    ok = err <= 1e-10 and t.elapsed < 1.0
    return ok, f"E0(2)={e2:.12f} E0(4)={e4:.12f} max|err|={err:.2e} t={t.elapsed:.2f}s"


# --- 2 -------------------------------------------------------------------------------

def criterion_2():
    worst_f = worst_e = 0.0
    with Timer() as t:
        for N in range(2, 17, 2):
            full = ground_state_dense(pair_hamiltonian(enumerate_basis(N)))
            red = ground_state_reduced(N)
            worst_f = max(worst_f, 1 - abs(full.state.vdot(red.state)))
            worst_e = max(worst_e, abs(full.energy - red.energy))
    ok = worst_f <= 1e-9 and worst_e <= 1e-9 and t.elapsed < 30
    return ok, (f"N=2..16 max(1-F)={worst_f:.2e} max|dE|={worst_e:.2e} "
                f"t={t.elapsed:.2f}s")


# --- 3 -------------------------------------------------------------------------------

def criterion_3():
    worst = 0.0
    with Timer() as t:
        for N in range(2, 101, 2):
            M = N // 2
            _, alpha = reduced_ground_state(M)
            F, _ = ansatz.optimal_fidelity(alpha, M)
            worst = max(worst, 1 - F)
    ok = worst <= 1e-8 and t.elapsed < 60
    return ok, f"N=2..100 max(1-F)={worst:.2e} t={t.elapsed:.2f}s"


# --- 4 -------------------------------------------------------------------------------

def criterion_4():
    with Timer() as t:
        ns = list(range(2, 1025, 2))
        fs = [ansatz.model_fidelity_reduced(N // 2) for N in ns]
        fit = analysis.fit_inverse_n(list(zip(ns, fs)))
    f_inf = fit.coefficients[0]
    ok = min(fs) > 0.99 and abs(f_inf - 0.9926) <= 0.001 and t.elapsed < 60
    return ok, (f"min F={min(fs):.6f} F(1024)={fs[-1]:.6f} "
                f"F_inf={f_inf:.5f} (fit N={fit.n_min}..{fit.n_max}) t={t.elapsed:.2f}s")


# --- 5 -------------------------------------------------------------------------------

def criterion_5():
    with Timer() as t:
        header, rows, fits = analysis.fig3(list(range(8, 257, 2)))
    a_vn = fits["S_vN_psi0"]["coefficients"][0]
    a_acc = fits["S_acc_psi0"]["coefficients"][0]
    a_acc_v = fits["S_acc_Vpsi0"]["coefficients"][0]
    col = {h: i for i, h in enumerate(header)}
    gap = max(abs(r[col[f"S_vN_{s}"]] - r[col[f"S_acc_{s}"]])
              for r in rows for s in ("Vpsi0", "Vphi"))
    parts = {
        "a_vN": abs(a_vn - 1.36) <= 0.05,
        "a_acc": abs(a_acc - 0.37) <= 0.05,
        "a_acc(V)": abs(a_acc_v - 0.50) <= 0.02,
        "S_vN=S_acc(V)": gap <= 1e-10,
        "time": t.elapsed < 600,
    }
    failed = [k for k, v in parts.items() if not v]
    return not failed, (f"a_vN={a_vn:.4f} a_acc={a_acc:.4f} a_acc(V psi0)={a_acc_v:.4f} "
                        f"max|S_vN-S_acc|(V)={gap:.1e} t={t.elapsed:.1f}s"
                        + (f" failed: {', '.join(failed)}" if failed else ""))


# --- 6 -------------------------------------------------------------------------------

def criterion_6():
    worst = 0.0
    pts = []
    part = Bipartition((0, 1))
    for M in range(1, 513):
        s = entropies(pair_subspace_state(binomial_amplitudes(M), M), part).s_vn
        worst = max(worst, abs(s - binomial_entropy(M)))
        pts.append((2 * M, s))
    a = analysis.fit_log_model(pts).coefficients[0]
    ok = worst <= 1e-12 and abs(a - 0.50) <= 0.01
    return ok, f"M=1..512 max|dS|={worst:.1e} a={a:.4f}"


# --- 7 -------------------------------------------------------------------------------

def criterion_7():
    ratios = {}
    for N in (16, 32, 64):
        _, rows, _ = analysis.fig2([N], [0.0])
        model = (N * N / 2 - N) / (16 * N * N)
        ratios[N] = (rows[0][2] / N ** 2) / model
    pair_ok = all(abs(r - 1) <= 0.10 for r in ratios.values())
    hop_err = 0.0
    for N in (4, 8, 12, 16):
        _, rows, _ = analysis.fig2([N], [1.0], U=0.0, T2=0.0)
        hop_err = max(hop_err, abs(rows[0][2] - 3 * N / 16))
    _, rows, _ = analysis.fig2([4], [1.0], U=1000.0, T2=1.0)
    mott = rows[0][2]
    ok = pair_ok and hop_err <= 1e-9 and mott < 0.01
    ratio_txt = " ".join(f"N={n}:{r:.3f}" for n, r in ratios.items())
    return ok, (f"GS/model variance ratio {ratio_txt}; U=T2=0 max|dvar|={hop_err:.1e}; "
                f"Mott var={mott:.2e}")


# --- 8 -------------------------------------------------------------------------------

def criterion_8():
    b6 = enumerate_basis(6)
    H = pair_hamiltonian(b6)
    W = w_unitary(b6)
    w_err = np.abs((W.H @ H @ W + H).to_dense()).max()

    sym_err = 0.0
    full = build_hamiltonian(HamiltonianParams(0.7, 0.4, 1.0), b6)
    for p in d8_permutations():
        P = mode_permutation(p, b6)
        sym_err = max(sym_err, np.abs((P @ full - full @ P).to_dense()).max())
    paired = build_hamiltonian(HamiltonianParams(0.7, 0.0, 1.0), b6)
    for op in pair_symmetry_group(b6):
        sym_err = max(sym_err, np.abs((op @ paired - paired @ op).to_dense()).max())

    spec_err = 0.0
    form_err = 0.0
    for N in range(1, 9):
        b = enumerate_basis(N)
        H = pair_hamiltonian(b)
        ev = np.linalg.eigvalsh(H.to_dense().real)
        spec_err = max(spec_err, np.abs(ev + ev[::-1]).max() / max(1.0, np.abs(ev).max()))
        V = beamsplitter(b)
        form_err = max(form_err, np.abs((V @ H @ V.H - rotated_pair_hamiltonian(b)).to_dense()).max())
    ok = w_err <= 1e-12 and sym_err <= 1e-12 and spec_err <= 1e-12 and form_err <= 1e-11
    return ok, (f"W={w_err:.1e} D8xZ2={sym_err:.1e} +-E(rel)={spec_err:.1e} "
                f"rotated form={form_err:.1e}")


# --- 9 -------------------------------------------------------------------------------

def _pair_power(phases, M, basis):
    amps = {(0, 0, 0, 0): 1.0 + 0j}
    for _ in range(M):
        nxt = {}
        for occ, a in amps.items():
            for j in range(4):
                n = occ[j]
                new = occ[:j] + (n + 2,) + occ[j + 1:]
                nxt[new] = nxt.get(new, 0) + a * phases[j] * math.sqrt((n + 1) * (n + 2))
        amps = nxt
    out = np.zeros(basis.dim, dtype=complex)
    occ = np.array(list(amps))
    np.add.at(out, basis.rank(occ), np.array(list(amps.values())))
    return out


def criterion_9():
    n_err = g_err = 0.0
    for M in range(1, 11):
        b = enumerate_basis(2 * M)
        phis = []
        for ell in range(ansatz.n_terms(M)):
            beta = sum(_pair_power((1, e, 1, e), M, b)
                       for e in (np.exp(2j * np.pi * ell / M), np.exp(-2j * np.pi * ell / M)))
            nrm = np.linalg.norm(beta)
            n_err = max(n_err, abs(nrm / ansatz.normalization_constant(ell, M) - 1))
            phis.append(beta / nrm)
        G = np.array([[np.vdot(p, q) for q in phis] for p in phis])
        g_err = max(g_err, np.abs(G - ansatz.gram_matrix(M)).max())
    ok = n_err <= 1e-12 and g_err <= 1e-12
    return ok, f"M=1..10 max rel err N_l={n_err:.1e} max Gram err={g_err:.1e}"


# --- 10 ------------------------------------------------------------------------------

def criterion_10():
    bound_ok = True
    for N in range(2, 65, 2):
        e0, _ = reduced_ground_state(N // 2)
        bound_ok &= e0 <= jx_extremal_expectation(N // 2) + 1e-12
    e64 = reduced_ground_state(32)[0] / 64 ** 2
    trend = [reduced_ground_state(N // 2)[0] / N ** 2 for N in (64, 256, 1024, 4096)]
    trend_ok = all(x <= -0.5 for x in trend) and all(np.diff(trend) > 0)
    a_ok = bound_ok and e64 <= -0.45 and trend_ok

    rng = np.random.default_rng(2024)
    b6 = enumerate_basis(6)
    violations = 0
    for _ in range(100):
        v = rng.standard_normal(b6.dim) + 1j * rng.standard_normal(b6.dim)
        psi = StateVector(b6, v / np.linalg.norm(v))
        for part in ALL_BIPARTITIONS:
            if renyi2_accessible_bound(psi, part) < entropies(psi, part).s_acc:
                violations += 1
    b_ok = violations == 0

    c_err = 0.0
    for M in range(2, 21):
        G = ansatz.gram_matrix(M)
        c = rng.standard_normal(ansatz.n_terms(M))
        c /= math.sqrt(c @ G @ c)
        amps = ansatz.ansatz_reduced_state(c, M)
        num = renyi2_accessible_bound(pair_subspace_state(amps, M), Bipartition((0, 1)))
        c_err = max(c_err, abs(analytic_bound_variational(c, M) - num))
    c_ok = c_err <= 1e-10

    d_ok = True
    for N in (4, 8, 16, 32):
        d_ok &= zero_accessible_check(ground_state_reduced(N).state, Bipartition((0, 2)))[0]
        rotated = ground_state_reduced(N, embed=False).state
        d_ok &= zero_accessible_check(rotated, Bipartition((0, 2)))[0]

    ok = a_ok and b_ok and c_ok and d_ok
    return ok, (f"E0<=Jx:{bound_ok} E0/N^2(64)={e64:.4f} trend={[round(x, 5) for x in trend]}; "
                f"renyi2>=S_acc violated {violations}/300; analytic err={c_err:.1e}; "
                f"zero-accessible:{d_ok}")


# --- 11 ------------------------------------------------------------------------------

DETERMINISM_COMMANDS = [
    ["ground-state", "--n", "10", "--j", "0.5", "--u", "0.2", "--solver", "lanczos",
     "--seed", "11", "--include-amplitudes"],
    ["ground-state", "--n", "8", "--solver", "reduced"],
    ["fig1", "--n-list", "4:40:2"],
    ["fig2", "--n-list", "8,12", "--j-grid", "geom:0:10:6", "--workers", "2", "--seed", "3"],
    ["fig3", "--n-list", "8:40:4", "--workers", "2"],
    ["self-check"],
]


def _cli(args, out):
    res = subprocess.run([sys.executable, "-m", "pairtunnel.cli", *args, "--out", str(out)],
                         capture_output=True)
    return res.returncode, out.read_bytes() if out.exists() else b""


def criterion_11(tmpdir):
    import pathlib
    tmpdir = pathlib.Path(tmpdir)
    bad = []
    for k, args in enumerate(DETERMINISM_COMMANDS):
        outs = []
        for rep in range(2):
            path = tmpdir / f"c{k}_{rep}.out"
            outs.append(_cli(args, path))
            fits = path.with_suffix(".fits.json")
            if fits.exists():
                outs[-1] += (fits.read_bytes(),)
        if outs[0] != outs[1] or outs[0][0] != 0:
            bad.append(args[0])
    fit_outs = [_cli(["fit", "--input", str(tmpdir / "c4_0.out"), "--column", "S_acc_psi0"],
                     tmpdir / f"fit{r}.json") for r in range(2)]
    if fit_outs[0] != fit_outs[1] or fit_outs[0][0] != 0:
        bad.append("fit")
    return not bad, f"{len(DETERMINISM_COMMANDS) + 1} commands run twice; differing: {bad or 'none'}"


# --- pytest wrappers -----------------------------------------------------------------

CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 11)}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    ok, detail = CRITERIA[number]()
    report(number, ok, detail)
    assert ok, detail


def test_criterion_11_determinism(tmp_path):
    ok, detail = criterion_11(tmp_path)
    report(11, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    import tempfile

    for number in sorted(CRITERIA):
        report(number, *CRITERIA[number]())
    with tempfile.TemporaryDirectory() as d:
        report(11, *criterion_11(d))

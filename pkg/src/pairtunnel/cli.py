"""Command-line driver.

Every flag mirrors a key of the optional JSON ``--config`` document; flags
win over the file. Exit codes: 0 success, 2 validation error, 3 solver
non-convergence, 4 invariant violation.
"""
import argparse
import json
import logging
import math
import sys

import numpy as np

from . import analysis
from .errors import InvariantError, PairTunnelError, ValidationError
from .operators import HamiltonianParams

log = logging.getLogger("pairtunnel")

DEFAULTS = {
    "n": 4,
    "n_list": None,
    "u": 0.0,
    "j": 0.0,
    "j_grid": None,
    "t2": 1.0,
    "solver": "auto",
    "tol": 1e-10,
    "seed": 0,
    "out": None,
    "workers": None,
    "fit_min_n": None,
    "bipartitions": "01,02,03",
    "include_amplitudes": False,
    "input": None,
    "column": None,
    "x_column": "N",
    "model": "log",
}


def parse_n_list(text):
    """``"4,8,16"`` or inclusive ranges ``"8:256:2"``; items may be mixed."""
    if isinstance(text, list):
        return [int(x) for x in text]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = [int(b) for b in part.split(":")]
            start, stop = bits[0], bits[1]
            step = bits[2] if len(bits) > 2 else 1
            if step <= 0:
                raise ValidationError(f"bad range {part!r}")
            out.extend(range(start, stop + 1, step))
        else:
            out.append(int(part))
    if not out:
        raise ValidationError("empty particle-number list")
    return out


def parse_grid(text):
    """Comma list of floats, or ``lin:a:b:n`` / ``geom:a:b:n`` (``geom`` may start at 0)."""
    if isinstance(text, list):
        return [float(x) for x in text]
    text = str(text)
    if text.startswith(("lin:", "geom:")):
        kind, a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
        if kind == "lin":
            return [float(x) for x in np.linspace(a, b, n)]
        if a == 0.0:
            return [0.0] + [float(x) for x in np.geomspace(b / 10 ** (n - 2), b, n - 1)]
        return [float(x) for x in np.geomspace(a, b, n)]
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="pairtunnel", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON document whose keys mirror the flags")
        sp.add_argument("--out", help="output file (stdout if omitted)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int,
                        help=f"worker processes (default ${analysis.WORKERS_ENV} or 1)")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--solver", choices=["auto", "dense", "lanczos", "reduced"])

    sp = sub.add_parser("ground-state", help="ground state, moments and entropies at one point")
    common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--u", type=float)
    sp.add_argument("--j", type=float)
    sp.add_argument("--t2", type=float)
    sp.add_argument("--bipartitions", help="comma list such as 01,02,03")
    sp.add_argument("--include-amplitudes", action="store_true", default=None)

    sp = sub.add_parser("fig1", help="variational and model-state fidelity versus N")
    common(sp)
    sp.add_argument("--n-list")
    sp.add_argument("--fit-min-n", type=int)

    sp = sub.add_parser("fig2", help="on-site number variance over an N x J grid")
    common(sp)
    sp.add_argument("--n-list")
    sp.add_argument("--j-grid")
    sp.add_argument("--u", type=float)
    sp.add_argument("--t2", type=float)

    sp = sub.add_parser("fig3", help="entanglement entropy scaling with fits")
    common(sp)
    sp.add_argument("--n-list")
    sp.add_argument("--fit-min-n", type=int)

    sp = sub.add_parser("fit", help="fit a column of a CSV against N")
    common(sp)
    sp.add_argument("--input", required=False)
    sp.add_argument("--column")
    sp.add_argument("--x-column")
    sp.add_argument("--model", choices=["log", "inverse"])
    sp.add_argument("--fit-min-n", type=int)

    sp = sub.add_parser("self-check", help="verify invariants (of a CSV if --input is given)")
    common(sp)
    sp.add_argument("--input")
    return p


def resolve(args):
    """Merge defaults, the config file and explicit flags (in that order)."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key, value in vars(args).items():
        if key in cfg and value is not None:
            cfg[key] = value
    if cfg["workers"] is None:
        cfg["workers"] = analysis.default_workers()
    if cfg["tol"] <= 0:
        raise ValidationError("tol must be positive")
    return cfg


def emit(text, out):
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fits_path(out):
    return None if out is None else out.rsplit(".", 1)[0] + ".fits.json"


def emit_table(header, rows, fits, cfg):
    emit(analysis.to_csv(header, rows), cfg["out"])
    if fits:
        text = analysis.to_json(fits)
        path = _fits_path(cfg["out"])
        if path:
            emit(text, path)
        else:
            sys.stderr.write(text)


def cmd_ground_state(cfg):
    params = HamiltonianParams(cfg["u"], cfg["j"], cfg["t2"])
    rec = analysis.ground_state_record(
        int(cfg["n"]), params, cfg["solver"], cfg["tol"], cfg["seed"],
        tuple(b for b in str(cfg["bipartitions"]).split(",") if b))
    if not cfg["include_amplitudes"]:
        return emit(analysis.to_json(rec), cfg["out"])
    res = analysis.solve(int(cfg["n"]), params, cfg["solver"], cfg["tol"], cfg["seed"])
    rec["amplitudes"] = res.to_record(include_amplitudes=True)["amplitudes"]
    emit(analysis.to_json(rec), cfg["out"])


def cmd_fig1(cfg):
    ns = parse_n_list(cfg["n_list"] or "4:96:2")
    emit_table(*analysis.fig1(ns, cfg["workers"], cfg["fit_min_n"]), cfg)


def cmd_fig2(cfg):
    ns = parse_n_list(cfg["n_list"] or "8,16,32")
    js = parse_grid(cfg["j_grid"] or "geom:0:10:21")
    emit_table(*analysis.fig2(ns, js, cfg["u"], cfg["t2"], cfg["solver"], cfg["tol"],
                              cfg["seed"], cfg["workers"]), cfg)


def cmd_fig3(cfg):
    ns = parse_n_list(cfg["n_list"] or "8:256:2")
    emit_table(*analysis.fig3(ns, cfg["workers"], cfg["fit_min_n"]), cfg)


def cmd_fit(cfg):
    if not cfg["input"] or not cfg["column"]:
        raise ValidationError("fit needs --input and --column")
    header, rows = analysis.read_csv(cfg["input"])
    for col in (cfg["x_column"], cfg["column"]):
        if col not in header:
            raise ValidationError(f"column {col!r} not in {header}")
    lo = cfg["fit_min_n"] or -math.inf
    pts = [(r[cfg["x_column"]], r[cfg["column"]]) for r in rows if r[cfg["x_column"]] >= lo]
    fit = analysis.fit_points(cfg["model"], pts)
    emit(analysis.to_json({"column": cfg["column"], **fit.to_record()}), cfg["out"])


def _builtin_checks():
    """Fast invariants on small systems; returns a list of (name, ok, detail)."""
    from .fock_basis import enumerate_basis
    from .operators import pair_hamiltonian, w_unitary, beamsplitter, rotated_pair_hamiltonian
    from .solver import ground_state_dense, check_reduced_block

    out = []
    for N, exact in ((2, -4.0), (4, -8 * math.sqrt(2))):
        e = ground_state_dense(pair_hamiltonian(enumerate_basis(N))).energy
        out.append((f"E0(N={N})", abs(e - exact) <= 1e-10, e))
    b = enumerate_basis(6)
    H = pair_hamiltonian(b)
    W = w_unitary(b)
    err = np.abs((W.H @ H @ W + H).to_dense()).max()
    out.append(("W antisymmetry N=6", err <= 1e-12, float(err)))
    V = beamsplitter(b)
    err = np.abs((V @ H @ V.H - rotated_pair_hamiltonian(b)).to_dense()).max()
    out.append(("beamsplitter rotation N=6", err <= 1e-11, float(err)))
    for N in (2, 4, 6, 8):
        try:
            check_reduced_block(N)
            out.append((f"pair subspace N={N}", True, ""))
        except InvariantError as exc:
            out.append((f"pair subspace N={N}", False, str(exc)))
    return out


def cmd_self_check(cfg):
    if cfg["input"]:
        header, rows = analysis.read_csv(cfg["input"])
        worst, checked = analysis.check_decomposition(header, rows)
        rec = {"input": cfg["input"], "checked": checked, "max_violation": worst,
               "ok": bool(worst <= 1e-10)}
    else:
        checks = _builtin_checks()
        rec = {"checks": [{"name": n, "ok": bool(ok), "detail": d} for n, ok, d in checks],
               "ok": all(ok for _, ok, _ in checks)}
    emit(analysis.to_json(rec), cfg["out"])
    if not rec["ok"]:
        raise InvariantError("self-check failed")


COMMANDS = {
    "ground-state": cmd_ground_state,
    "fig1": cmd_fig1,
    "fig2": cmd_fig2,
    "fig3": cmd_fig3,
    "fit": cmd_fit,
    "self-check": cmd_self_check,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        COMMANDS[args.command](cfg)
    except PairTunnelError as exc:
        log.error("%s", exc)
        if getattr(exc, "best_residual", None) is not None and exc.exit_code == 3:
            log.error("best residual %.3g after %d matvecs", exc.best_residual, exc.iterations)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())

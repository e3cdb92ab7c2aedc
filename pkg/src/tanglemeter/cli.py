"""Command-line front end.

Every command reads a state file ``{"dims": [...], "amps": [[re, im], ...]}``
(``sample-figpoly`` excepted) and writes JSON, CSV or DOT to stdout.
Coefficients are keyed by the decimal index of their monomial.

Exit status: 0 on success, 2 on domain errors, 1 on I/O or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys

import numpy as np

from . import canon, invariants, qudit, states
from .dynamics import Family, HamiltonianSpec, IntegratorCfg, evolve_nilpotential, evolve_state
from .errors import TanglemeterError

DIGITS = 12

def _num(z) -> list:
    z = complex(z)
    return [round(z.real, DIGITS) + 0.0, round(z.imag, DIGITS) + 0.0]


def _params(params) -> list:
    return [p if isinstance(p, (int, np.integer)) else _num(p) for p in params]


def _coeffs(d: dict) -> dict:
    return {str(k): _num(v) for k, v in sorted(d.items())}


def _dump(obj) -> str:
    return json.dumps(obj)


def _require_n(s: states.StateVector, allowed, qubits: bool = True) -> None:
    from .errors import DimensionError
    if qubits and not s.is_qubits:
        raise DimensionError(f"this command needs qubits, got dims {s.dims}")
    if s.n not in allowed:
        raise DimensionError(f"this command supports n in {sorted(allowed)}, got {s.n}")


# -- commands -------------------------------------------------------------------


def cmd_tanglemeter(args) -> str:
    s = states.load_state(args.state)
    if s.is_qubits:
        tm = canon.su_canonicalize(s, args.tol, args.max_iter)
    else:
        tm = qudit.qudit_su_canonicalize(s, args.tol, args.max_iter)
    return _dump({"beta": _coeffs(tm.beta(args.tol)), "group": "su"})


def cmd_sl_canon(args) -> str:
    s = states.load_state(args.state)
    _require_n(s, (2, 3, 4))
    tm, label = canon.sl_canonicalize(s, args.tol, args.max_iter, seed=args.seed)
    return _dump({"beta": _coeffs(tm.beta(args.tol)), "group": "sl",
                  "class": label.name, "params": _params(label.params)})


def cmd_classify(args) -> str:
    s = states.load_state(args.state)
    _require_n(s, (2, 3, 4))
    if s.n == 3:
        label = canon.classify3(s)
    else:
        label = canon.sl_canonicalize(s, args.tol, args.max_iter, seed=args.seed)[1]
    return _dump({"class": label.name, "params": _params(label.params)})


def cmd_invariants(args) -> str:
    s = states.load_state(args.state)
    _require_n(s, (2, 3, 4))
    if s.n == 2:
        out = {"I": _num(invariants.invariants2(s))}
    elif s.n == 3:
        out = {k: _num(v) for k, v in invariants.invariants3(s).as_dict().items()}
    else:
        out = {k: _num(v) for k, v in invariants.invariants4(s).as_dict().items()}
    return _dump(out)


def cmd_measures(args) -> str:
    s = states.load_state(args.state)
    _require_n(s, (2, 3, 4))
    if s.n == 2:
        vn, lin = states.entropies(s.normalized(), [0])
        out = {"concurrence": invariants.concurrence(s), "linear_entropy": lin, "von_neumann": vn}
    elif s.n == 3:
        beta = canon.su_canonicalize(s, args.tol, args.max_iter).beta()
        out = {"three_tangle": invariants.three_tangle(s)}
        for pair in ((1, 2), (1, 3), (2, 3)):
            out[f"concurrence_{pair[0]}{pair[1]}"] = invariants.concurrence_from_beta(beta, pair)
    else:
        m = invariants.measures4(s)
        out = {"nonunitarity": m.nonunitarity, "sl_measure": m.sl_measure,
               "poly_su": m.poly_su, "poly_sl": m.poly_sl}
    return _dump({k: round(float(v), DIGITS) for k, v in out.items()})


def load_hamiltonian(path: str) -> HamiltonianSpec:
    """Real drives ``px, py, pz`` (length n) and couplings ``G, Gzz, Gpp`` (n x n)."""
    with open(path) as fh:
        data = json.load(fh)
    n = int(data["n"])

    def field(key):
        return None if data.get(key) is None else np.asarray(data[key], dtype=float)

    return HamiltonianSpec.from_cartesian(n, field("px"), field("py"), field("pz"),
                                          G=field("G"), Gzz=field("Gzz"), Gpp=field("Gpp"),
                                          family=Family(data.get("family", "local")))


def cmd_evolve(args) -> str:
    s = states.load_state(args.state)
    H = load_hamiltonian(args.hamiltonian)
    cfg = IntegratorCfg(args.dt, args.stride)
    if args.schrodinger:
        traj = evolve_state(s, H, args.time, cfg)
    else:
        traj = evolve_nilpotential(states.nilpotential(s), H, args.time, cfg)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = traj.values.shape[1]
        w.writerow(["t"] + [f"{k}_{part}" for k in range(cols) for part in ("re", "im")])
        for t, row in zip(traj.times, traj.values):
            w.writerow([f"{t:.12g}"] + [f"{x:.17g}" for c in row for x in (c.real, c.imag)])
        return buf.getvalue().rstrip("\n")
    rows = [{"t": round(float(t), DIGITS),
             "coeffs": {str(k): _num(v) for k, v in enumerate(row) if abs(v) > args.tol}}
            for t, row in zip(traj.times, traj.values)]
    return _dump({"kind": "state" if args.schrodinger else "nilpotential", "trajectory": rows})


def _parse_groups(text: str) -> list:
    return [[int(x) - 1 for x in g.split(",") if x.strip()] for g in text.split(";")]


def cmd_merge(args) -> str:
    s = states.load_state(args.state)
    merged = states.merge(s, _parse_groups(args.groups))
    return json.dumps(states.state_to_json(merged))


def cmd_graph(args) -> str:
    s = states.load_state(args.state)
    if not s.is_qubits:
        from .errors import DimensionError
        raise DimensionError("graphs are drawn for qubit tanglemeters")
    tm = canon.su_canonicalize(s, args.tol, args.max_iter)
    g = invariants.graph_export(tm, max(args.tol, invariants.TAU_CRIT))
    return g.to_dot() if args.format == "dot" else g.to_json()


def cmd_sample_figpoly(args) -> str:
    rows = invariants.sample_figpoly(args.n, args.seed, args.jobs)
    if args.format == "json":
        return _dump([dict(zip(invariants.FIGPOLY_COLUMNS, r)) for r in rows])
    return invariants.figpoly_csv(rows).rstrip("\n")


def cmd_ghz_filter(args) -> str:
    s = states.load_state(args.state)
    _require_n(s, (3,))
    zf = invariants.zeta_filter(s, args.tol)
    return _dump({"zeta": _num(zf.zeta), "z_roots": [_num(z) for z in zf.z_roots], "z": _num(zf.z),
                  "scale": _num(zf.scale),
                  "ops": [{"qubit": op.element + 1, "abc": [_num(v) for v in op.abc],
                           "matrix": [[_num(v) for v in row] for row in op.matrix]}
                          for op in zf.ops]})


def cmd_genfun(args) -> str:
    s = states.load_state(args.state)
    F = qudit.generating_function(s)
    return _dump({"caps": list(F.caps), "F": _coeffs(F.to_dict(args.tol))})


COMMANDS = {
    "tanglemeter": (cmd_tanglemeter, "su-tanglemeter coefficients"),
    "sl-canon": (cmd_sl_canon, "sl-tanglemeter and class of 2-4 qubits"),
    "classify": (cmd_classify, "orbit class of 2-4 qubits"),
    "invariants": (cmd_invariants, "polynomial invariants of 2-4 qubits"),
    "measures": (cmd_measures, "entanglement measures of 2-4 qubits"),
    "evolve": (cmd_evolve, "evolve under a Hamiltonian file"),
    "merge": (cmd_merge, "regroup elements into compound elements"),
    "graph": (cmd_graph, "entanglement graph of the su-tanglemeter"),
    "sample-figpoly": (cmd_sample_figpoly, "polynomial versus tanglemeter measures on random 4-qubit states"),
    "ghz-filter": (cmd_ghz_filter, "zeta parameter and GHZ filter of 3 qubits"),
    "genfun": (cmd_genfun, "spin-1 generating function of qutrits"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tanglemeter", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (func, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        if name != "sample-figpoly":
            p.add_argument("state", help="state JSON file")
        p.add_argument("--tol", type=float, default=canon.TAU_CONV)
        p.add_argument("--max-iter", type=int, default=canon.MAX_ITER)
        p.add_argument("--seed", type=int, default=0, required=name == "sample-figpoly")
        p.add_argument("--jobs", type=int, default=1)
        fmts = {"graph": ("dot", "json"), "sample-figpoly": ("csv", "json"), "evolve": ("json", "csv")}
        choices = fmts.get(name, ("json",))
        p.add_argument("--format", choices=choices, default=choices[0])
        if name == "sample-figpoly":
            p.add_argument("--n", type=int, default=100, help="number of random states")
        if name == "evolve":
            p.add_argument("--hamiltonian", required=True, help="Hamiltonian JSON file")
            p.add_argument("--time", type=float, required=True)
            p.add_argument("--dt", type=float, default=1e-3)
            p.add_argument("--stride", type=int, default=100)
            p.add_argument("--schrodinger", action="store_true", help="evolve amplitudes instead")
        if name == "merge":
            p.add_argument("--groups", required=True, help='1-based groups, e.g. "1,2;3,4"')
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        out = args.func(args)
    except TanglemeterError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": "IO", "message": str(exc)}), file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())

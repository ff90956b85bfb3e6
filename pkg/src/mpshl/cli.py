"""Command line entry point: ``mpshl reduce|verify|sweep|solve|report``.

Exit codes: 0 ok, 1 verification failure, 2 usage, 3 I/O or input format,
4 dense cap exceeded.  Shared flags may also be set through ``MPSHL_SEED``,
``MPSHL_TOL``, ``MPSHL_DENSE_CAP`` and ``MPSHL_JSON``; flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO, EXIT_CAP = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def _env(name, cast, default):
    raw = os.environ.get("MPSHL_" + name)
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        raise UsageError(f"bad value for MPSHL_{name}: {raw!r}") from None


def _flag(raw: str) -> bool:
    if raw.lower() in ("1", "true", "yes", "on"):
        return True
    if raw.lower() in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(raw)


def _common() -> argparse.ArgumentParser:
    from .mps import DENSE_CAP

    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=_env("SEED", int, 0))
    p.add_argument("--tol", type=float, default=_env("TOL", float, 1e-12))
    p.add_argument("--dense-cap", type=int, default=_env("DENSE_CAP", int, DENSE_CAP))
    p.add_argument("--json", action="store_true", default=_env("JSON", _flag, False), help="machine-readable output")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="mpshl", description="MPS variational toolkit and BQP reduction compiler")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", parents=[common], help="compile a graph or QUBO file into an instance")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--penalty", type=float, default=2.0, help="non-edge penalty for graph inputs")
    p.add_argument("--pad", type=int, default=0, help="extra bond-1 sites after the right tail")

    p = sub.add_parser("verify", parents=[common], help="gauge, indicator and window checks")
    p.add_argument("instance")
    p.add_argument("--samples", type=int, default=_env("SAMPLES", int, 10**6), help="indicator words sampled for N >= 5")
    p.add_argument("--window-samples", type=int, default=_env("WINDOW_SAMPLES", int, 3))

    p = sub.add_parser("sweep", parents=[common], help="DMRG on a reference model")
    p.add_argument("--model", choices=["tfi"], default="tfi")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--D", type=int, required=True)
    p.add_argument("--max-sweeps", type=int, default=100)
    p.add_argument("--no-reference", action="store_true", help="skip the dense ground energy")

    p = sub.add_parser("solve", parents=[common], help="solve an instance")
    p.add_argument("instance")
    p.add_argument("--mode", choices=["enumerate", "alternating"], default="enumerate")

    p = sub.add_parser("report", parents=[common], help="summary of an instance")
    p.add_argument("instance")
    p.add_argument("--window-samples", type=int, default=_env("WINDOW_SAMPLES", int, 3))
    return parser


def _emit(args, doc: dict, lines) -> None:
    if args.json:
        print(json.dumps(doc, sort_keys=True, indent=2))
    else:
        for line in lines:
            print(line)


def _layout_doc(inst) -> dict:
    return {"N": inst.N, "D": inst.D, "m": inst.m, "n": inst.n, "kappa": inst.kappa, "gamma": inst.gamma}


# -- subcommands -----------------------------------------------------------


def cmd_reduce(args) -> int:
    from .frontends import clique_to_bqp, parse_dimacs, parse_qubo
    from .reduction import assemble_instance, save_instance

    with open(args.input) as fh:
        text = fh.read()
    first = next((ln.split() for ln in text.splitlines() if ln.split() and ln.split()[0] == "p"), None)
    if first is not None and len(first) > 1 and first[1] in ("edge", "col"):
        bqp = clique_to_bqp(parse_dimacs(text), args.penalty)
    else:
        bqp = parse_qubo(text)
    prov = {"input": os.path.basename(args.input), "format": bqp.meta.get("source")}
    inst = assemble_instance(bqp, pad=args.pad, provenance=prov)
    save_instance(inst, args.output)
    doc = {"output": os.path.basename(args.output), **_layout_doc(inst), "scale": bqp.scale}
    _emit(args, doc, [f"wrote {args.output}", f"N={inst.N} D={inst.D} m={inst.m} n={inst.n} scale={bqp.scale:g}"])
    return EXIT_OK


def _verify_reports(inst, args):
    from .oracles import gauge_report, verify_indicator_family, windows_decomposition_check

    tol = max(args.tol, 1e-12)
    reports = [gauge_report(inst, tol), verify_indicator_family(inst.family, samples=args.samples, seed=args.seed, tol=tol)]
    if args.window_samples > 0:
        reports.append(windows_decomposition_check(inst, args.window_samples, args.seed, tol, mpo_samples=0))
    return reports


def cmd_verify(args) -> int:
    from .reduction import load_instance

    inst = load_instance(args.instance)
    reports = _verify_reports(inst, args)
    ok = all(r.passed is not False for r in reports)
    doc = {"passed": ok, **_layout_doc(inst), "reports": [r.to_dict() for r in reports]}
    lines = []
    for r in reports:
        lines.append(f"{r.name:10s} {'PASS' if r.passed else 'FAIL'}" + ("" if r.exhaustive else " (sampled)"))
        for f in r.failures[:10]:
            where = f.get("site", f.get("word", f.get("sample", f.get("position"))))
            lines.append(f"  {f['check']} failed at {where}: " + json.dumps({k: v for k, v in f.items() if k != "check"}))
    lines.append("verification " + ("passed" if ok else "FAILED"))
    _emit(args, doc, lines)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sweep(args) -> int:
    from .dmrg import sweep
    from .hamiltonian import tfi_chain
    from .mps import CapExceeded, default_profile, left_canonicalize, random_mps
    from .oracles import dense_ground_energy

    if args.n < 2 or args.D < 1:
        raise UsageError("need n >= 2 and D >= 1")
    H = tfi_chain(args.n, args.g)
    reference = None
    if not args.no_reference:
        if H.d**H.n > args.dense_cap:
            raise CapExceeded(f"2^{args.n} exceeds dense cap {args.dense_cap}; use --no-reference")
        reference = dense_ground_energy(H, args.dense_cap)
    psi = left_canonicalize(random_mps(args.n, 2, default_profile(args.n, 2, args.D), seed=args.seed))
    _, rep = sweep(psi, H, max_sweeps=args.max_sweeps, tol_energy=args.tol)
    doc = {
        "model": args.model,
        "n": args.n,
        "g": args.g,
        "D": args.D,
        "seed": args.seed,
        **rep.to_dict(include_timing=False),
        "max_increase": rep.max_increase,
        "reference": reference,
        "error": None if reference is None else rep.final_energy - reference,
    }
    lines = [f"TFI n={args.n} g={args.g:g} D={args.D}: E = {rep.final_energy:.15f} after {rep.sweeps} sweeps"]
    if reference is not None:
        lines.append(f"dense ground energy {reference:.15f}, error {rep.final_energy - reference:.3e}")
    _emit(args, doc, lines)
    return EXIT_OK


def cmd_solve(args) -> int:
    from .frontends import clique_from_solution
    from .oracles import bqp_min
    from .reduction import load_instance, solve_instance

    inst = load_instance(args.instance)
    sol = solve_instance(inst, mode=args.mode, seed=args.seed)
    doc = {**sol.to_dict(), "scale": inst.bqp.scale, "source_value": inst.bqp.scale * sol.value}
    b = "".join(map(str, sol.b))
    lines = [f"b = {b}", f"value = {sol.value:g} (source units {inst.bqp.scale * sol.value:g})", f"energy = {sol.energy:.12g}"]
    if inst.bqp.meta.get("source") == "clique":
        clique = clique_from_solution(sol.b)
        doc["clique"] = clique
        lines.append(f"clique of size {len(clique)}: {' '.join(map(str, clique))}")
    if args.mode == "alternating" and inst.N - 1 <= 24:
        best, _ = bqp_min(inst.bqp.M)
        doc["optimal"] = abs(sol.value - best) <= 1e-12 * max(1.0, abs(best))
        lines.append("matches exact minimum" if doc["optimal"] else f"exact minimum is {best:g}")
    _emit(args, doc, lines)
    return EXIT_OK


def cmd_report(args) -> int:
    from .oracles import gauge_report, windows_decomposition_check
    from .reduction import load_instance

    inst = load_instance(args.instance)
    gauge = gauge_report(inst, max(args.tol, 1e-12))
    doc = {
        **_layout_doc(inst),
        "layout": inst.layout,
        "bqp": {"nvars": inst.bqp.nvars, "scale": inst.bqp.scale, "meta": inst.bqp.meta},
        "penalty_factor": inst.penalty_factor,
        "max_gauge_residual": gauge.payload["max_residual"],
        "provenance": inst.provenance,
    }
    lines = [
        f"N = {inst.N}   D = 2N^2+N = {inst.D}   m = ceil(log2 D) = {inst.m}   n = N^2+6+2m = {inst.n}",
        f"free sites {inst.free_sites}   kappa = {inst.kappa:.12g}   gamma = {inst.gamma:g}",
        f"penalty table factor {inst.penalty_factor:.12g}   max fixed-site gauge residual {gauge.payload['max_residual']:.2e}",
    ]
    for name, (a, b) in ((k, v) for k, v in inst.layout.items() if isinstance(v, list) and k != "free_sites"):
        lines.append(f"  {name:13s} {a}..{b}")
    if args.window_samples > 0:
        win = windows_decomposition_check(inst, args.window_samples, args.seed, mpo_samples=0)
        f = win.payload["findings"]
        doc["windows"] = win.payload
        lines += [
            f"window classes {win.payload['window_counts']}",
            f"tail windows max {win.payload['max_tail']:.1e}, additivity error {win.payload['max_additivity_error']:.1e}",
            f"right-center windows contribute {f['right_center_total']:.12g} (constant: {f['right_center_constant']})",
            f"energy = x Y y^T / N observed: {f['literal_identity_observed']} (max gap {f['max_literal_gap']:.3g})",
            f"center windows = shortcut observed: {f['center_equals_shortcut']} (max gap {f['max_center_shortcut_gap']:.3g})",
        ]
    _emit(args, doc, lines)
    return EXIT_OK


COMMANDS = {"reduce": cmd_reduce, "verify": cmd_verify, "sweep": cmd_sweep, "solve": cmd_solve, "report": cmd_report}


def main(argv=None) -> int:
    from .frontends import ParseError
    from .mps import CapExceeded

    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"mpshl: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mpshl: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapExceeded as exc:
        print(f"mpshl: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (OSError, ParseError, json.JSONDecodeError, KeyError) as exc:
        print(f"mpshl: cannot read input: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"mpshl: invalid input: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

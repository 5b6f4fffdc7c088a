"""Command line entry point.

``reinhardt run CONFIG`` executes a YAML experiment file (grammar in
``reinhardt.runner``).  Every experiment kind is also a subcommand whose flags
mirror the config fields; those print their CSV to stdout unless ``--out``
is given.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from reinhardt import runner
from reinhardt.errors import ConfigError, ReinhardtError
from reinhardt.moments import DEFAULT_TOL, load_table, save_table

EPILOG = f"""\
exit status:
  {runner.EXIT_OK}  every verification passed
  {runner.EXIT_VERIFICATION_FAILED}  a verification ran and failed
  {runner.EXIT_CONFIG}  configuration or argument error (parse errors carry file:line:column)
  {runner.EXIT_QUADRATURE}  quadrature failed to reach tolerance or broke log-convexity
  {runner.EXIT_RANGE}  a requested degree exceeds the moment table's max_degree
  {runner.EXIT_TABLE_FILE}  a saved moment table is malformed or has the wrong version
"""

DOMAIN_PRESETS = {
    "disc": {"family": "ball", "dimension": 1},
    "ball2": {"family": "ball", "dimension": 2},
    "polydisc2": {"family": "polydisc", "radii": [1.0, 1.0]},
    "ellipsoid21": {"family": "complex-ellipsoid", "exponents": [2.0, 1.0]},
}

WEIGHT_PRESETS = {
    "one": {"family": "constant-one"},
    "pow1": {"family": "power", "a": 1.0},
    "pow2": {"family": "power", "a": 2.0},
    "exp": {"family": "exponential", "b": 1.0, "c": 1.0},
}


def _record(text: str, presets: dict, what: str) -> dict:
    if text in presets:
        return dict(presets[text])
    try:
        rec = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"--{what}: {exc}") from None
    if not isinstance(rec, dict):
        raise ConfigError(f"--{what} must be a preset ({', '.join(presets)}) or a YAML mapping")
    return rec


def _yaml_value(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {text!r}: {exc}") from None


def _common(p: argparse.ArgumentParser):
    p.add_argument("--domain", default="disc",
                   help=f"preset ({', '.join(DOMAIN_PRESETS)}) or YAML mapping")
    p.add_argument("--weight", default="one",
                   help=f"preset ({', '.join(WEIGHT_PRESETS)}) or YAML mapping")
    p.add_argument("--max-degree", type=int, default=None,
                   help="table degree (default: the smallest that covers the request)")
    p.add_argument("--table", type=Path, help="load a saved moment table instead of computing")
    p.add_argument("--table-source", choices=("quadrature", "closed-form"), default="quadrature")
    p.add_argument("--out", type=Path, help="write CSV and manifest into this directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reinhardt",
        description="Weighted Bergman projection experiments on convex Reinhardt domains.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute an experiment config file", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("config", type=Path)
    p.add_argument("--out", type=Path, help="override the config's output directory")
    p.add_argument("--seed", type=int, help="override the config's seed")
    p.add_argument("--tol", type=float, help="override the config's tolerance")
    p.add_argument("--table", type=Path, help="use this saved moment table")
    p.add_argument("--no-cache", action="store_true", help="ignore and do not write the cache")

    def add(name, help_):
        sp = sub.add_parser(name, help=help_, epilog=EPILOG,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        _common(sp)
        return sp

    sp = add("moments", "tabulate log d_gamma^2")
    sp.add_argument("--save", type=Path, help="also save the table to this file")

    sp = add("verify-lemma", "scan the moment ratio d_a d_(a+2b) / d_(a+b)^2")
    sp.add_argument("--beta", required=True, help="multi-index, e.g. 1 or [1,0]")
    sp.add_argument("--alpha-max", dest="scan_degree", type=int)

    sp = add("verify-pl", "grid check of the Prekopa-Leindler inequality")
    sp.add_argument("--triple", choices=("indicator", "gaussian", "lemma-coeff"),
                    default="indicator")
    sp.add_argument("--zeta", default="0")
    sp.add_argument("--eta", default="0")
    sp.add_argument("--grid", type=int, default=2048)
    sp.add_argument("--t", type=float, default=0.5)
    sp.add_argument("--shift", type=float, default=0.0)

    sp = add("verify-scalar", "random sweep of the scalar midpoint bound")
    sp.add_argument("--samples", type=int, default=1_000_000)
    sp.add_argument("--u-max", type=float, default=10.0)
    sp.add_argument("--a-max", type=int, default=50)
    sp.add_argument("--b-max", type=int, default=5)

    sp = add("mbeta-scan", "M_beta norm ratios and adjoint residuals")
    sp.add_argument("--beta", required=True)
    sp.add_argument("--alpha-max", type=int, default=10)

    sp = add("project", "weighted Bergman projection of a polynomial")
    sp.add_argument("--input", required=True,
                    help="YAML list of [p, q, re, im] records, e.g. '[[1, 1, 1.0, 0.0]]'")

    sp = add("kernel-eval", "evaluate the truncated kernel")
    sp.add_argument("--j", type=int, required=True)
    sp.add_argument("--z", required=True, help="YAML list of coordinates, [re, im] or real")
    sp.add_argument("--w", required=True)

    sp = add("sobolev-bound", "boundedness experiment for d^beta B")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--beta", required=True)
    sp.add_argument("--degree", type=int, default=20, help="largest input degree")
    sp.add_argument("--family", choices=("pure-monomials", "random-mixed"),
                    default="pure-monomials")
    sp.add_argument("--count", type=int, default=20)
    return parser


def _as_list(v):
    return v if isinstance(v, list) else [v]


def _experiment(args) -> dict:
    cmd = args.command
    if cmd == "moments":
        return {"kind": cmd}
    if cmd == "verify-lemma":
        exp = {"kind": cmd, "beta": _as_list(_yaml_value(args.beta))}
        if args.scan_degree is not None:
            exp["max_degree"] = args.scan_degree
        return exp
    if cmd == "verify-pl":
        exp = {"kind": cmd, "triple": args.triple, "grid": args.grid, "t": args.t,
               "shift": args.shift}
        if args.triple == "lemma-coeff":
            exp["zeta"] = _as_list(_yaml_value(args.zeta))
            exp["eta"] = _as_list(_yaml_value(args.eta))
        return exp
    if cmd == "verify-scalar":
        return {"kind": cmd, "samples": args.samples, "u_max": args.u_max,
                "a_max": args.a_max, "b_max": args.b_max}
    if cmd == "mbeta-scan":
        return {"kind": cmd, "beta": _as_list(_yaml_value(args.beta)),
                "alpha_max": args.alpha_max}
    if cmd == "project":
        return {"kind": cmd, "input": _yaml_value(args.input)}
    if cmd == "kernel-eval":
        return {"kind": cmd, "j": args.j, "z": _as_list(_yaml_value(args.z)),
                "w": _as_list(_yaml_value(args.w))}
    if cmd == "sobolev-bound":
        return {"kind": cmd, "k": args.k, "beta": _as_list(_yaml_value(args.beta)),
                "max_degree": args.degree, "family": args.family, "count": args.count}
    raise ConfigError(f"unknown command {cmd!r}")


def _needed_degree(exp: dict) -> int:
    """Smallest table degree covering a direct-command request."""
    kind = exp["kind"]
    if kind in ("verify-lemma", "mbeta-scan"):
        top = exp.get("max_degree", exp.get("alpha_max", 10))
        return top + 2 * max(exp["beta"])
    if kind == "project":
        return max((max(_as_list(r[0])) for r in exp["input"]), default=0)
    if kind == "kernel-eval":
        return exp["j"]
    if kind == "sobolev-bound":
        return 2 * exp["max_degree"]
    return 20


def _direct(args) -> int:
    exp = _experiment(args)
    table = load_table(args.table) if args.table else None
    if table is not None:
        domain, weight = table.domain.record(), table.weight.record()
        degree, tol = table.max_degree, table.tolerance or args.tol
    else:
        domain = _record(args.domain, DOMAIN_PRESETS, "domain")
        weight = _record(args.weight, WEIGHT_PRESETS, "weight")
        degree = args.max_degree if args.max_degree is not None else _needed_degree(exp)
        tol = args.tol
    raw = {"version": runner.CONFIG_VERSION, "domain": domain, "weight": weight,
           "max_degree": degree, "tolerance": tol, "table": args.table_source,
           "experiments": [exp], "output": str(args.out or ".")}
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = runner.parse_config(yaml.safe_dump(raw), f"<{args.command}>")
    if args.out is not None:
        return runner.run_config(cfg, table)
    if table is None and exp["kind"] in runner.NEEDS_TABLE:
        table = runner.obtain_table(cfg, use_cache=False)[0]
    results, _ = runner.execute(cfg, table, use_cache=False)
    ok = True
    for _, outcome in results:
        sys.stdout.write(outcome.to_csv())
        ok &= outcome.passed
    if args.command == "moments" and args.save:
        save_table(table, args.save)
    return runner.EXIT_OK if ok else runner.EXIT_VERIFICATION_FAILED


def _run(args) -> int:
    cfg = runner.load_config(args.config)
    if args.out is not None:
        cfg.output = args.out
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.raw["seed"] = args.seed
    if args.tol is not None:
        cfg.tolerance = args.tol
        cfg.raw["tolerance"] = args.tol
    table = load_table(args.table) if args.table else None
    return runner.run_config(cfg, table, use_cache=not args.no_cache)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args) if args.command == "run" else _direct(args)
    except ReinhardtError as exc:
        print(f"reinhardt: error: {exc}", file=sys.stderr)
        return runner.exit_code_for(exc)
    except OSError as exc:
        print(f"reinhardt: error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""opquad command line: rule | sweep | table1 | check."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from .experiments import (EXPERIMENT_PRODUCT, ConfigError, RunConfig, convergence_table,
                          default_y_grid, property_report, rule_for, sweep, verified_reference)


def _load(args, required: bool = True) -> RunConfig | None:
    if args.config is None:
        if required:
            raise ConfigError("--config is required for this command")
        return None
    cfg = RunConfig.load(args.config)
    size = args.n + 1 if getattr(args, "n", None) is not None else None
    return cfg.replace(precision_bits=args.precision, expression=args.expr, basis_size=size)


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def cmd_rule(args) -> int:
    cfg = _load(args)
    name = args.inner or next(iter(cfg.inner_functions))
    if name not in cfg.inner_functions:
        raise ConfigError(f"unknown inner function {name!r}")
    rule = rule_for(cfg, name)
    out = args.out or cfg.output
    _emit(rule.to_csv(), out)
    summary = (f"{len(rule)}-point rule, basis {cfg.basis_kind}, g = {cfg.inner_functions[name]}"
               f"{', transform ' + rule.transform if rule.transform else ''}: "
               f"nodes in [{rule.nodes.min():.6g}, {rule.nodes.max():.6g}], "
               f"weight sum {rule.weights.sum():.17g}")
    print(summary, file=sys.stdout if out else sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    ys = default_y_grid(args.y_min, args.y_max, args.y_step)
    header, rows = sweep(cfg, ys)
    _emit(_csv(header, rows), args.out or cfg.output)
    return 0


def cmd_table1(args) -> int:
    cfg = _load(args, required=False)
    reference = None
    if cfg is None:
        cfg = RunConfig.from_dict(EXPERIMENT_PRODUCT).replace(
            precision_bits=args.precision, expression=args.expr)
        if args.expr is None:
            ref = verified_reference(cfg)
            print(f"reference {ref['reference']!r}, adaptive oracle {ref['oracle']!r}, "
                  f"difference {ref['difference']:.3e}", file=sys.stderr)
            if not ref["ok"]:
                print("opquad: reference value disagrees with the oracle", file=sys.stderr)
                return 1
            reference = ref["reference"]
    n_max = args.n if args.n is not None else 18
    rows = convergence_table(cfg, n_max, reference=reference, symmetrize=args.symmetrize)
    text = _csv(["n", "phi_n", "approximation", "error"],
                [[r.n, r.phi, r.approximation, r.error] for r in rows])
    _emit(text, args.out or cfg.output)
    return 0


def cmd_check(args) -> int:
    cfg = _load(args)
    report = property_report(cfg)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    _emit(text, args.out)
    return 0 if report["ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opquad", description=(
        "Quadrature from finite matrices of multiplication operators."))
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--expr", help="integrand expression, overrides the config")
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--n", type=int, help="largest matrix index n (basis size n+1)")
        sp.add_argument("--precision", type=int, help="working precision in bits")

    sp = sub.add_parser("rule", help="write nodes and weights as CSV")
    common(sp)
    sp.add_argument("--inner", help="inner function name (default: the first declared)")
    sp.set_defaults(func=cmd_rule)

    sp = sub.add_parser("sweep", help="relative error of x^y over a grid of y")
    common(sp)
    sp.add_argument("--y-min", type=float, default=0.0)
    sp.add_argument("--y-max", type=float, default=6.5)
    sp.add_argument("--y-step", type=float, default=0.05)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("table1", help="convergence of exp(M[xy]) log(I + M[x+y]) in n")
    common(sp)
    sp.add_argument("--symmetrize", action="store_true",
                    help="use (AB + BA)/2 for products")
    sp.set_defaults(func=cmd_table1)

    sp = sub.add_parser("check", help="range, interlacing and weight checks as JSON")
    common(sp)
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"opquad: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

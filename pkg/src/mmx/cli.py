"""Command line entry point ``mmx``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import certify, chebyshev, harness


def _writer(stream):
    return csv.writer(stream, lineterminator="\n")


def cmd_run(args) -> int:
    cfg = harness.ExperimentConfig.load(args.config)
    out = harness.run_experiment(cfg, args.out, gnuplot_stub=args.gnuplot_stub)
    print(out)
    return 0


def cmd_compare(args) -> int:
    configs = [harness.ExperimentConfig.load(p) for p in args.configs]
    summary = harness.compare(configs)
    text = summary.to_csv()
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        if args.gnuplot_stub:
            _write_compare_stub(out, list(summary.series))
    else:
        sys.stdout.write(text)
    return 0


def _write_compare_stub(csv_path: Path, labels) -> None:
    lines = ["set datafile separator ','", "set logscale y", "set xlabel 'gradient evaluations'", "set ylabel 'mean grad norm^2'"]
    plots = [
        f"'{csv_path.name}' using (strcol(1) eq '{lab}' ? $2 : NaN):3 with lines title '{lab}'" for lab in labels
    ]
    lines.append("plot " + ", \\\n     ".join(plots))
    csv_path.with_suffix(".gp").write_text("\n".join(lines) + "\n")


def cmd_verify(args) -> int:
    w = _writer(sys.stdout)
    w.writerow(["trial", "status", "residual_or_margin"])
    failed = 0
    for trial, status, value in certify.run_verification(args.check, args.trials, args.seed):
        w.writerow([trial, status, repr(float(value))])
        failed += status != "pass"
    return 1 if failed else 0


def cmd_roots(args) -> int:
    w = _writer(sys.stdout)
    w.writerow(["index", "root", "stepsize_magnitude"])
    if args.kind == "bilinear":
        if args.m is None or args.M is None:
            raise SystemExit("mmx roots --kind bilinear needs --m and --M")
        roots = chebyshev.bilinear_roots(args.T, args.m, args.M)
        mags = roots**-0.5
        rate = chebyshev.extremal_rate_bilinear(args.T, args.m, args.M)
    else:
        L = args.L if args.L is not None else (args.M**0.5 if args.M is not None else None)
        if L is None:
            raise SystemExit("mmx roots --kind quadratic needs --L (or --M, with L = sqrt(M))")
        roots = chebyshev.quadratic_roots(args.T, L)
        mags = 1.0 / abs(roots)
        rate = chebyshev.extremal_rate_quadratic(args.T, L)
    for i, (r, h) in enumerate(zip(roots, mags)):
        w.writerow([i, repr(float(r)), repr(float(h))])
    w.writerow(["extremal_rate", repr(float(rate)), ""])
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mmx", description="GDA stepsize schedules for min-max problems")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--gnuplot-stub", action="store_true", help="also write plot.gp")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several configs on one problem instance")
    p.add_argument("configs", nargs="+")
    p.add_argument("--out", help="write the comparison CSV here instead of stdout")
    p.add_argument("--gnuplot-stub", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", help="numerical checks of the convergence guarantees")
    p.add_argument("check", choices=certify.VERIFY_CHECKS)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("roots", help="print schedule roots and the extremal rate")
    p.add_argument("--kind", choices=("bilinear", "quadratic"), required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--m", type=float)
    p.add_argument("--M", type=float)
    p.add_argument("--L", type=float)
    p.set_defaults(func=cmd_roots)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (harness.ConfigError, ValueError) as exc:
        print(f"mmx: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

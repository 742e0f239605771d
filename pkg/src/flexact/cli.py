"""Command-line entry point: ``flexact {run,grid,count,ttest,gradcheck}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import complexity, gradcheck
from .experiment import (
    GRID_AXES,
    grid_search,
    load_config,
    read_final,
    run_experiment,
    write_grid,
    write_results,
)
from .stats import welch_ttest_onetail


def _apply_overrides(cfg, args):
    if getattr(args, "trials", None) is not None:
        cfg.n_trials = args.trials
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "epochs", None) is not None:
        cfg.epochs = args.epochs
    if getattr(args, "out", None) is not None:
        cfg.out = args.out
    cfg.validate()
    return cfg


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    result = run_experiment(cfg)
    for path in write_results(result, cfg.out):
        print(path)
    print(f"test mse {result.test_mean:.6g} +/- {result.test_se:.3g} over {cfg.n_trials} trial(s)")
    return 0


def cmd_grid(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    result = grid_search(cfg, args.axis, args.lo, args.hi, args.points)
    path = write_grid(result, Path(cfg.out) / f"grid_{args.axis}.csv")
    print(path)
    print(f"best {args.axis} = {result.best:.6g} (mean min val mse {result.scores[result.best_index]:.6g})")
    return 0


def cmd_count(args) -> int:
    rows = complexity.count_report()
    sys.stdout.write(complexity.render_text(rows))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "counts.csv").write_text(complexity.render_csv(rows), encoding="utf-8")
        print(out / "counts.csv")
    return 0


def cmd_ttest(args) -> int:
    a = read_final(args.a)
    b = read_final(args.b)
    res = welch_ttest_onetail(a, b)
    print("t,df,p,degenerate")
    print(f"{res.t!r},{res.df!r},{res.p!r},{int(res.degenerate)}")
    return 0


def cmd_gradcheck(args) -> int:
    results = gradcheck.run_suite(args.probes, args.seed if args.seed is not None else 0)
    ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        ok &= r.passed
        print(f"{status}  {r.name:22s} probes={r.probes:4d}  max_rel_err={r.max_rel_error:.3e}  tol={r.tolerance:g}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flexact", description="Trainable activation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-trial progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--trials", type=int, help="override n_trials")
        p.add_argument("--seed", type=int, help="override base seed")
        p.add_argument("--epochs", type=int, help="override epochs")

    p = sub.add_parser("run", help="train a multi-seed experiment and write CSV curves")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grid", help="log-scale grid search over one hyper-parameter")
    common(p)
    p.add_argument("--axis", choices=GRID_AXES, required=True)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--points", type=int, default=5)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("count", help="parameter-count tables")
    p.add_argument("--out", help="also write counts.csv here")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("ttest", help="one-tailed Welch test on two final.csv files (H0: mean A >= mean B)")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_ttest)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    p.add_argument("--probes", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except Exception as e:  # one-line diagnostic, nonzero exit
        print(f"flexact: error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands:

* ``run <config>`` — execute the experiment grid and write artifacts.
* ``validate <config>`` — parse and check a config without running it.
* ``grid <model.json>`` — decision-boundary grid CSV from a saved model.
* ``report <out_dir>`` — reprint the summary table of a finished run.

The output root defaults to ``--out``, then the EATCL_OUT environment
variable, then ``runs/<experiment>`` under the working directory.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import runner
from .runner import ConfigError


def _read_config(path: str) -> dict:
    with open(path) as fh:
        return runner.parse_config(fh.read())


def _cmd_run(args) -> int:
    cfg = _read_config(args.config)
    if args.out is not None:
        out_dir = args.out
    else:
        root = os.environ.get("EATCL_OUT", "runs")
        out_dir = os.path.join(root, cfg["experiment"])
    seeds = [args.seed] if args.seed is not None else None
    runner.run_experiment(cfg, out_dir, quiet=args.quiet, seeds=seeds)
    if not args.quiet:
        print(f"artifacts written to {out_dir}")
    return 0


def _cmd_validate(args) -> int:
    cfg = _read_config(args.config)
    print(f"ok: {cfg['experiment']} "
          f"({len(cfg['strategies'])} strategies x {len(cfg['seeds'])} seeds, "
          f"dataset={cfg['dataset']})")
    return 0


def _cmd_grid(args) -> int:
    model, bounds = runner.load_model_json(args.model)
    if args.bounds is not None:
        lo_x, hi_x, lo_y, hi_y = args.bounds
        bounds = {"x": [lo_x, hi_x], "y": [lo_y, hi_y]}
    if bounds is None:
        print("model artifact has no stored bounds; pass --bounds XLO XHI YLO YHI",
              file=sys.stderr)
        return 2
    if model.input_dim != 2:
        print(f"grids need a 2-d input model, this one takes {model.input_dim}",
              file=sys.stderr)
        return 2
    out = args.out or (os.path.splitext(args.model)[0] + ".grid.csv")
    runner.write_grid_csv(model, bounds, args.res, out)
    print(f"grid written to {out}")
    return 0


def _cmd_report(args) -> int:
    summary = runner.load_summary(args.out_dir)
    print(runner.format_summary_table(summary))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eatcl",
        description="Continual-learning robustness experiments on toy data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config", help="path to a key = value config file")
    p.add_argument("--seed", type=int, default=None,
                   help="run only this seed (overrides the config's list)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--quiet", action="store_true",
                   help="suppress progress lines and the final table")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("grid", help="boundary grid CSV from a saved model")
    p.add_argument("model", help="model artifact JSON")
    p.add_argument("--res", type=int, default=120, help="grid resolution per axis")
    p.add_argument("--out", default=None, help="output CSV path")
    p.add_argument("--bounds", type=float, nargs=4, default=None,
                   metavar=("XLO", "XHI", "YLO", "YHI"))
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("report", help="reprint the summary table of a run")
    p.add_argument("out_dir")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"not found: {exc.filename}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

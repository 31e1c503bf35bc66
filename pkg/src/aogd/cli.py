"""Command-line entry point: ``aogd {train,grid,curve,rff-profile,oracle}``.

Every subcommand writes into ``--out`` (default ``results/``).  CSV outputs
hold only seeded quantities, so reruns with the same config and seed are
byte-identical; wall-clock numbers go to ``timing.json``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from typing import Optional

from . import harness
from .features import rff_error_profile

log = logging.getLogger("aogd")


def _load_config(args) -> dict:
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.order is not None:
        cfg["order"] = args.order
    return cfg


def _configs(args) -> list:
    """Expand the base config over every ``--dataset`` x ``--learner`` combination."""
    base = _load_config(args)
    datasets = args.dataset or [base.get("dataset")]
    if datasets == [None]:
        raise SystemExit("no dataset: pass --dataset or set it in --config")
    learners = args.learner or [base.get("learner", "aogd")]
    out = []
    for ds in datasets:
        for lr in learners:
            d = dict(base, dataset=ds, learner=lr)
            if args.dataset:
                d.pop("name", None)
            cfg = harness.ExperimentConfig.from_dict(d)
            cfg.validate()
            out.append(cfg)
    return out


def _write(out_dir: str, name: str, text: str) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _write_timing(out_dir: str, timings: dict):
    path = os.path.join(out_dir, "timing.json")
    old = {}
    if os.path.exists(path):
        with open(path) as fh:
            old = json.load(fh)
    old.update(timings)
    _write(out_dir, "timing.json", json.dumps(old, indent=2, sort_keys=True) + "\n")


def _run_table(args, search: bool) -> int:
    rows, timings = [], {}
    for cfg in _configs(args):
        log.info("running %s / %s", cfg.run_name, cfg.learner)
        rows.append(harness.run_experiment(cfg, search=search, out_dir=args.out, timings=timings))
    _write(args.out, "results.csv", harness.report(rows, "csv"))
    _write(args.out, "results.json", harness.report(rows, "json"))
    md = harness.report(rows, "markdown")
    _write(args.out, "results.md", md)
    _write_timing(args.out, timings)
    print(md, end="")
    return 0


def cmd_train(args) -> int:
    return _run_table(args, search=False)


def cmd_grid(args) -> int:
    return _run_table(args, search=True)


def cmd_curve(args) -> int:
    checkpoints = [int(c) for c in args.checkpoints.split(",")]
    timings = {}
    for cfg in _configs(args):
        points = harness.run_curve(cfg, checkpoints, repeat=args.repeat)
        run = f"{cfg.run_name}_{cfg.learner}"
        _write(args.out, f"curve_{run}.csv", harness.curve_csv(points))
        timings[f"curve/{run}"] = {"examples_seen": [p.examples_seen for p in points],
                                   "seconds": [p.seconds for p in points]}
        for p in points:
            print(f"{run}\t{p.examples_seen}\t{p.test_auc:.4f}\t{p.seconds:.3f}s")
    _write_timing(args.out, timings)
    return 0


def cmd_rff_profile(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    seed = args.seed if args.seed is not None else 0
    rows = rff_error_profile(sizes, args.pairs, sigma=args.sigma, seed=seed, d=args.dim)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["D", "max_abs_error", "mean_abs_error", "mean_abs_error_x_sqrt_D"])
    for D, mx, mean in rows:
        w.writerow([D, repr(mx), repr(mean), repr(mean * D ** 0.5)])
    _write(args.out, "rff_profile.csv", buf.getvalue())
    print(buf.getvalue(), end="")
    return 0


def cmd_oracle(args) -> int:
    for cfg in _configs(args):
        res = harness.run_oracle(cfg, jensen_every=args.jensen_every)
        run = f"{cfg.run_name}_{cfg.learner}"
        _write(args.out, f"regret_{run}.csv", res.curve.to_csv())
        if res.jensen:
            _write(args.out, f"jensen_{run}.csv", harness.jensen_csv(res.jensen))
        per = res.curve.per_round(effective=True)
        print(f"{run}: R_T={res.curve.regret[-1]:.6g}  R_T/T_eff={per[-1]:.6g}  "
              f"paired rounds={int(res.curve.paired.sum())}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", default="results", help="output directory")
    common.add_argument("--order", help="stream order: shuffled, asis, sorted or blocks:<n>")
    common.add_argument("--learner", action="append", choices=harness.LEARNERS,
                        help="learner (repeatable)")
    common.add_argument("--dataset", action="append",
                        help="LIBSVM path or synthetic:<n_per_class>:<dim>:<sep> (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="aogd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common],
                   help="train/test at the first value of each grid").set_defaults(func=cmd_train)
    sub.add_parser("grid", parents=[common],
                   help="cross-validated grid search, repeated splits").set_defaults(func=cmd_grid)
    c = sub.add_parser("curve", parents=[common], help="test AUC at checkpoints of one pass")
    c.add_argument("--checkpoints", default="10,100,1000")
    c.add_argument("--repeat", type=int, default=0, help="which train/test split to use")
    c.set_defaults(func=cmd_curve)
    r = sub.add_parser("rff-profile", parents=[common], help="RFF pairwise-kernel error table")
    r.add_argument("--sizes", default="64,256,1024,4096")
    r.add_argument("--pairs", type=int, default=1000)
    r.add_argument("--sigma", type=float, default=1.0)
    r.add_argument("--dim", type=int, default=5)
    r.set_defaults(func=cmd_rff_profile)
    o = sub.add_parser("oracle", parents=[common], help="regret and Jensen-gap diagnostics")
    o.add_argument("--jensen-every", type=int, default=0)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    os.makedirs(args.out, exist_ok=True)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

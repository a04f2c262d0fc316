"""Command line entry point: ``threedpg run|compare|plot|check-aoi|gradcheck``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import nn
from .aoi import dominance_check, policy_aoi_bound
from .compare import compare, read_aoi
from .config import Mode, RunConfig, load_config
from .errors import ThreeDPGError


def check_aoi(run_dir, q: float = 1.0, level: float = 0.99, seed: int | None = None) -> list[tuple]:
    """Dominance check of every ``tau_i_j`` series against the analytic tail for sender ``j``.

    Returns ``(seed, column, report, q-th moment of the bound)`` tuples.
    """
    run_dir = Path(run_dir)
    config: RunConfig = load_config(run_dir / "config.yaml")
    if config.mode is not Mode.NETWORKED:
        raise ThreeDPGError("check-aoi needs a networked run (centralized runs have tau == 0)")
    net, env = config.network, config.env
    actor_size = nn.param_count(nn.build_shape(env.obs_dim, config.hyper.actor_hidden, env.action_dim))
    seeds = [seed] if seed is not None else list(config.seeds)
    results = []
    for s in seeds:
        cols = read_aoi(run_dir / f"seed_{s}" / "aoi.csv")
        for name, values in cols.items():
            if not name.startswith("tau_"):
                continue
            sender = int(name.split("_")[2]) - 1
            bound = policy_aoi_bound(net.lambda_for(sender), net.policy_bits(actor_size),
                                     net.tuple_bits(2 * env.obs_dim + env.action_dim),
                                     net.budget_bits, net.tuples_per_cycle)
            report = dominance_check(values.astype(np.int64), bound, level=level)
            results.append((s, name, report, bound.moment(q)))
    return results


def _cmd_run(args) -> int:
    config = load_config(args.config)
    changes = {}
    if args.epochs is not None:
        changes["epochs"] = args.epochs
    if args.seeds:
        changes["seeds"] = tuple(args.seeds)
    if changes:
        config = config.with_(**changes)
    from .runner import run

    out = Path(args.out) if args.out else Path("runs") / config.name
    statuses = run(config, out, jobs=args.jobs)
    for seed, status in sorted(statuses.items()):
        print(f"seed {seed}: {status}")
    print(f"results in {out}")
    return 0 if all(s == "ok" for s in statuses.values()) else 1


def _cmd_compare(args) -> int:
    report = compare(args.dir_a, args.dir_b, args.window, check_config=not args.no_config_check)
    print(report.summary(Path(args.dir_a).name, Path(args.dir_b).name))
    return 0


def _cmd_plot(args) -> int:
    from .plotting import plot_aoi, plot_rewards

    out = Path(args.out)
    print(plot_rewards(args.dirs, out / "reward.png"))
    for d in args.dirs:
        if any(Path(d).glob("seed_*/aoi.csv")):
            cols = read_aoi(next(iter(sorted(Path(d).glob("seed_*/aoi.csv")))))
            if any(k.startswith("tau_") for k in cols):
                print(plot_aoi(d, out / f"aoi_{Path(d).name}.png", start=args.aoi_start, length=args.aoi_length))
    return 0


def _cmd_check_aoi(args) -> int:
    ok = True
    for seed, name, report, moment in check_aoi(args.run_dir, args.q, args.level, args.seed):
        ok &= report.dominated
        print(f"seed {seed} {name}: {'dominated' if report.dominated else 'NOT dominated'} "
              f"(worst margin {report.worst_margin:+.4f} at m={report.worst_at}, eps={report.epsilon:.4f}, "
              f"n={report.n_samples}); E[bound^{args.q:g}] = {moment:.3f}")
    return 0 if ok else 1


def _cmd_gradcheck(args) -> int:
    from .gradcheck import run_gradcheck, run_onpolicy_equivalence

    report = run_gradcheck(args.cases, args.seed, args.tolerance)
    print(report.summary())
    gap = run_onpolicy_equivalence(args.onpolicy_cases, args.seed + 1)
    gap_ok = gap <= 1e-12
    print(f"on-policy 3DPG vs MADDPG actor gradient: max abs diff {gap:.3e} over {args.onpolicy_cases} cases; "
          f"{'PASS' if gap_ok else 'FAIL'}")
    return 0 if report.passed and gap_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="threedpg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train every seed of a config file")
    p.add_argument("config")
    p.add_argument("--out", help="run directory (default runs/<name>)")
    p.add_argument("--jobs", type=int, default=1, help="seeds run in parallel processes")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seeds", type=int, nargs="+")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="per-seed final-window comparison of two runs")
    p.add_argument("dir_a")
    p.add_argument("dir_b")
    p.add_argument("--window", type=float, default=0.1, help="final window as a fraction of epochs")
    p.add_argument("--no-config-check", action="store_true")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("plot", help="reward curves and AoI traces from run directories")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--out", default="plots")
    p.add_argument("--aoi-start", type=int, default=0)
    p.add_argument("--aoi-length", type=int, default=500)
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("check-aoi", help="stochastic dominance check of a networked run's policy AoI")
    p.add_argument("run_dir")
    p.add_argument("--q", type=float, default=1.0, help="moment order reported for the bound")
    p.add_argument("--level", type=float, default=0.99)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_check_aoi)

    p = sub.add_parser("gradcheck", help="finite-difference oracle suite for the gradients")
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--onpolicy-cases", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=_cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ThreeDPGError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

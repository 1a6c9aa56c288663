"""Command line entry point: ``umppi {run,bench,oracle,gen-world}``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import ConfigError, build_bench_settings, build_episode_config, load_config
from .controller import Mode
from .costs import CostParams, risk_sensitive_cost, mc_rs_oracle
from .harness import (
    EpisodeRecord,
    load_world,
    run_benchmark,
    run_episode,
    write_records,
    write_trajectory,
)
from .world import build_global_costmap

ORACLE_GAMMAS = (-0.5, 1.0, 2.0)
ORACLE_SIGMAS = (0.0, 0.1, 0.5)
ORACLE_ERRORS = (0.0, 1.0, 2.0)


def _values(args) -> dict:
    return load_config(args.config) if args.config else {}


def _episode_cfg(args):
    cfg = build_episode_config(_values(args))
    if args.scheme:
        cfg = cfg.with_scheme(args.scheme)
    return cfg


def cmd_run(args) -> int:
    cfg = _episode_cfg(args)
    seed = args.seed if args.seed is not None else cfg.controller.seed
    res = run_episode(cfg, seed)
    m = res.metrics
    rec = EpisodeRecord(0, cfg.controller.mode.value, seed, res.outcome, m.T_c, m.d, m.v_av, m.t_exec_ms, m.J_acc, m.zeta_acc)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_records(out / "episodes.csv", [rec])
        write_trajectory(out / "ep_0.csv", res.log)
    print(f"{rec.scheme} seed={seed} outcome={rec.outcome} T_c={m.T_c:.2f}% d={m.d:.2f} m v_av={m.v_av:.3f} m/s t_exec={m.t_exec_ms:.1f} ms")
    if res.note:
        print(res.note, file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    values = _values(args)
    cfg = build_episode_config(values)
    bench = build_bench_settings(values)
    seeds = bench.seeds
    if args.seed is not None:
        # shift the seed list so that it starts at --seed
        seeds = tuple(args.seed + s - seeds[0] for s in seeds)
    schemes = (Mode(args.scheme),) if args.scheme else bench.schemes
    summaries, _ = run_benchmark(cfg, schemes, seeds, out=args.out, workers=bench.workers)
    for s in summaries:
        print(
            f"{s.scheme:10s} n={s.n_episodes} S_R={s.S_R:.1f}% T_c={s.T_c:.2f}% N_c={s.N_c} R_lm={s.R_lm} "
            f"d_av={s.d_av:.2f}+-{s.d_sd:.2f} m v_av={s.v_av:.3f}+-{s.v_sd:.3f} m/s t_exec={s.t_exec_ms:.1f}+-{s.t_exec_sd:.1f} ms"
        )
    return 0


def oracle_sweep(n_samples: int = 10**6, seed: int = 0, Q: float = 2.0):
    """Closed form against Monte-Carlo over the scalar grid; yields row dicts."""
    for gamma in ORACLE_GAMMAS:
        p = CostParams(Q=[Q], R=[1.0], gamma=gamma, goal=[0.0], heading_index=None)
        for sigma in ORACLE_SIGMAS:
            for err in ORACLE_ERRORS:
                closed = risk_sensitive_cost([err], [[sigma]], p)
                mc = mc_rs_oracle([err], [[sigma]], p, n_samples, seed=seed)
                rel = abs(closed - mc) / abs(closed) if closed != 0 else abs(closed - mc)
                yield {"Q": Q, "gamma": gamma, "Sigma": sigma, "error": err, "closed_form": closed, "monte_carlo": mc, "rel_err": rel}


def cmd_oracle(args) -> int:
    rows = list(oracle_sweep(args.samples, seed=args.seed or 0))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
    out = open(Path(args.out) / "oracle.csv", "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows({k: repr(v) for k, v in r.items()} for r in rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_gen_world(args) -> int:
    cfg = _episode_cfg(args)
    seed = args.seed if args.seed is not None else 0
    world = load_world(cfg, seed)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    world.save(out / f"world_{seed}.txt")
    build_global_costmap(world, cfg.world.costmap).to_pgm(out / f"world_{seed}.pgm")
    print(f"{len(world)} obstacles -> {out / f'world_{seed}.txt'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="umppi", description="MPPI / U-MPPI navigation experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="flat key/value config file")
        p.add_argument("--seed", type=int, metavar="N")
        p.add_argument("--scheme", choices=[m.value for m in Mode])
        p.add_argument("--out", metavar="DIR")
        return p

    common(sub.add_parser("run", help="single episode")).set_defaults(func=cmd_run)
    common(sub.add_parser("bench", help="paired-seed benchmark suite")).set_defaults(func=cmd_bench)
    p = common(sub.add_parser("oracle", help="closed-form vs Monte-Carlo risk-sensitive cost sweep"))
    p.add_argument("--samples", type=int, default=10**6)
    p.set_defaults(func=cmd_oracle)
    common(sub.add_parser("gen-world", help="generate and save a forest")).set_defaults(func=cmd_gen_world)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points: train, benchmark, test, activity."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .agents import (AGENT_KINDS, IncompatibleCheckpoint, NotAnOptionAgent,
                     make_agent, restore_agent)
from .config import ConfigError, load_config
from .env import HighwayEnv
from .metrics import CsvLogger, SchemaMismatch, read_csv
from .options import ALL_OPTIONS, LAT_OPTIONS, VEL_OPTIONS, OptionId
from .scenarios import (DENSITY_GRID, OvertakingScenario, install_overtaking,
                        summarize)
from .training import NoEligibleCheckpoint, Trainer, run_episode, select_best

OPTION_NAMES = {
    OptionId.EMERGENCY: "emergency",
    OptionId.MAINTAIN: "maintain",
    OptionId.VEL_DOWN: "vel_decrease",
    OptionId.VEL_UP: "vel_increase",
    OptionId.LANE_LEFT: "lane_left",
    OptionId.LANE_RIGHT: "lane_right",
}

_AXIS_OPTIONS = {"single": ALL_OPTIONS, "velocity": VEL_OPTIONS,
                 "lateral": LAT_OPTIONS}


def _option_labels(kind: str, store: dict) -> tuple[str, str]:
    """(velocity label, lateral label) of one decision for trace rows."""
    if kind == "single":
        name = OPTION_NAMES[ALL_OPTIONS[store["act"]]]
        return name, name
    if kind == "combined":
        return (OPTION_NAMES[VEL_OPTIONS[store["act_v"]]],
                OPTION_NAMES[LAT_OPTIONS[store["act_d"]]])
    if kind == "hybrid":
        return "actor", OPTION_NAMES[LAT_OPTIONS[store["act_d"]]]
    if kind == "continuous":
        return "actor", "actor"
    return "scripted", "scripted"


def _add_config_arg(sub):
    sub.add_argument("--config", help="INI config file")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="optiondrive",
        description="Safe hierarchical decision making for highway driving")
    sp = ap.add_subparsers(dest="command", required=True)

    tr = sp.add_parser("train", help="train one agent over one or more seeds")
    _add_config_arg(tr)
    tr.add_argument("--out", required=True, help="output directory")
    tr.add_argument("--agent", choices=[k for k in AGENT_KINDS
                                        if k != "idm-mobil"])
    tr.add_argument("--seeds", help="comma-separated seeds, e.g. 0,1,2")
    tr.add_argument("--episodes", type=int)
    tr.add_argument("--horizon", type=int)
    tr.add_argument("--density", type=float)
    tr.add_argument("--eval-every", type=int)
    tr.add_argument("--eval-episodes", type=int)
    tr.add_argument("--warmup", type=int)

    bm = sp.add_parser("benchmark",
                       help="run the overtaking scenario, write a trace CSV")
    _add_config_arg(bm)
    bm.add_argument("--out", required=True)
    group = bm.add_mutually_exclusive_group(required=True)
    group.add_argument("--checkpoint")
    group.add_argument("--agent", choices=["idm-mobil"])
    bm.add_argument("--steps", type=int, default=600)
    bm.add_argument("--gap", type=float, default=OvertakingScenario.gap)
    bm.add_argument("--leader-factor", type=float,
                    default=OvertakingScenario.leader_speed_factor)

    te = sp.add_parser("test",
                       help="density sweep over checkpoints and the baseline")
    _add_config_arg(te)
    te.add_argument("--out", required=True)
    te.add_argument("--checkpoint", action="append", default=[])
    te.add_argument("--idm-mobil", action="store_true",
                    help="include the scripted reference driver")
    te.add_argument("--densities",
                    default=",".join(str(d) for d in DENSITY_GRID))
    te.add_argument("--episodes", type=int, default=10)
    te.add_argument("--horizon", type=int)

    ac = sp.add_parser("activity",
                       help="option active-time fractions of a checkpoint")
    _add_config_arg(ac)
    ac.add_argument("--out", required=True)
    ac.add_argument("--checkpoint", required=True)
    ac.add_argument("--episodes", type=int, default=10)
    ac.add_argument("--density", type=float)
    ac.add_argument("--horizon", type=int)

    pl = sp.add_parser("plot-data",
                       help="merge run CSVs into one plot-ready table")
    pl.add_argument("--kind", required=True,
                    choices=["training", "benchmark", "sweep", "activity"])
    pl.add_argument("--in", dest="inputs", action="append", required=True,
                    metavar="CSV", help="input CSV (repeatable)")
    pl.add_argument("--out", required=True)
    return ap


def _env_params(cfg, horizon: int | None = None, density: float | None = None):
    env = cfg.env
    if horizon is not None:
        env = env.with_(horizon=horizon)
    if density is not None:
        env = env.with_(density=density)
    return env


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.agent:
        cfg = cfg.with_(agent=args.agent)
    env = _env_params(cfg, args.horizon, args.density)
    tcfg = cfg.train
    for name in ("episodes", "eval_every", "eval_episodes", "warmup"):
        val = getattr(args, name)
        if val is not None:
            tcfg = replace(tcfg, **{name: val})
    if args.seeds:
        tcfg = replace(tcfg, seeds=tuple(int(s) for s in
                                         args.seeds.split(",")))
    if cfg.agent == "idm-mobil":
        raise ConfigError("the scripted idm-mobil driver does not train")
    out = Path(args.out)
    tables = []
    run_dirs = []
    for seed in tcfg.seeds:
        run_dir = out / f"run_{seed}"
        trainer = Trainer(env, cfg.agent, cfg.agent_cfg, tcfg, seed, run_dir)
        metrics_path = trainer.train()
        tables.append(read_csv(metrics_path)[1])
        run_dirs.append(run_dir)
        print(f"seed {seed}: {metrics_path}")
    run_idx, episode = select_best(tables, tcfg.episodes)
    best = {"seed": tcfg.seeds[run_idx],
            "run_dir": str(run_dirs[run_idx]),
            "episode": episode,
            "checkpoint": str(run_dirs[run_idx] / "checkpoints"
                              / f"ckpt_ep{episode:05d}.npz")}
    (out / "best.json").write_text(json.dumps(best, indent=2, sort_keys=True)
                                   + "\n", encoding="utf-8")
    print(f"best: seed {best['seed']} episode {episode} "
          f"-> {best['checkpoint']}")
    return 0


def _load_driver(args, env_params):
    if getattr(args, "checkpoint", None):
        agent, _ = restore_agent(args.checkpoint, env_params)
        return agent
    return make_agent("idm-mobil", None, env_params, 26,
                      np.random.default_rng(0))


def cmd_benchmark(args) -> int:
    cfg = load_config(args.config)
    env_params = _env_params(cfg, horizon=args.steps)
    env = HighwayEnv(env_params, seed=0)
    agent = _load_driver(args, env_params)
    sc = OvertakingScenario(gap=args.gap, leader_speed_factor=args.leader_factor)
    rows = []

    def per_step(t, ctx, decision, step):
        ov, od = _option_labels(agent.kind, decision.store)
        b = ctx.bounds
        rows.append({"t": t, "v": ctx.v, "d": ctx.d, "option_v": ov,
                     "option_d": od, "dv": decision.ref.dv,
                     "dd": decision.ref.dd, "dv_lo": b.dv_lo,
                     "dv_hi": b.dv_hi, "dd_lo": b.dd_lo, "dd_hi": b.dd_hi,
                     "reward": step.reward})

    run_episode(env, agent, np.random.default_rng(0), explore=False,
                reset_fn=lambda: install_overtaking(env, sc),
                per_step=per_step)
    with CsvLogger(args.out, "trace-v1") as log:
        for row in rows:
            log.write(row)
    print(f"{len(rows)} steps -> {args.out}")
    return 0


def cmd_test(args) -> int:
    cfg = load_config(args.config)
    env_params = _env_params(cfg, horizon=args.horizon)
    densities = [float(x) for x in args.densities.split(",") if x.strip()]
    drivers = []
    for path in args.checkpoint:
        agent, _ = restore_agent(path, env_params)
        label = agent.kind
        if any(lbl == label for lbl, _ in drivers):
            label = f"{label}-{len(drivers)}"
        drivers.append((label, agent))
    if args.idm_mobil or not drivers:
        drivers.append(("idm-mobil",
                        make_agent("idm-mobil", None, env_params, 26,
                                   np.random.default_rng(0))))
    env = HighwayEnv(env_params, seed=0)
    base = cfg.train.eval_seed_base
    with CsvLogger(args.out, "summary-v1") as log:
        for label, agent in drivers:
            for density in densities:
                results = [run_episode(env, agent, np.random.default_rng(0),
                                       seed=base + j, density=density,
                                       explore=False)
                           for j in range(args.episodes)]
                log.write(summarize(label, density, results, env_params.road,
                                    env_params.options.eps_d, env_params.dt,
                                    env_params.d_max))
                print(f"{label} density {density:g}: "
                      f"mean return {np.mean([r.ret for r in results]):.3f}")
    return 0


def cmd_activity(args) -> int:
    cfg = load_config(args.config)
    env_params = _env_params(cfg, args.horizon, args.density)
    agent, _ = restore_agent(args.checkpoint, env_params)
    if agent.kind == "continuous":
        raise NotAnOptionAgent(
            "the continuous baseline has no option activity to report")
    env = HighwayEnv(env_params, seed=0)
    base = cfg.train.eval_seed_base
    totals: dict[str, np.ndarray] = {}
    for j in range(args.episodes):
        res = run_episode(env, agent, np.random.default_rng(0),
                          seed=base + j, explore=False)
        for axis, counts in res.axis_counts.items():
            totals[axis] = totals.get(axis, 0) + counts
    with CsvLogger(args.out, "activity-v1") as log:
        for axis in sorted(totals):
            counts = totals[axis]
            steps = counts.sum()
            for opt in _AXIS_OPTIONS[axis]:
                log.write({"axis": axis, "option": OPTION_NAMES[opt],
                           "fraction": counts[int(opt)] / steps})
    print(f"activity over {args.episodes} episodes -> {args.out}")
    return 0


_PLOT_SCHEMAS = {"benchmark": "trace-v1", "sweep": "summary-v1",
                 "activity": "activity-v1"}


def cmd_plot_data(args) -> int:
    """Merge per-run CSVs into the single table a plotting tool consumes.

    ``training`` extracts the per-episode training returns of each input
    file into ``curve-v1`` rows tagged with the input's position; the other
    kinds validate that all inputs share the expected schema and
    concatenate their rows unchanged.
    """
    if args.kind == "training":
        with CsvLogger(args.out, "curve-v1") as log:
            for series, path in enumerate(args.inputs):
                schema, rows = read_csv(path)
                if schema != "training-v1":
                    raise SchemaMismatch(
                        f"{path}: expected training-v1, found {schema}")
                for r in rows:
                    if r["phase"] == "train":
                        log.write({"episode": r["episode"], "series": series,
                                   "return": r["return"]})
        print(f"training curves from {len(args.inputs)} run(s) -> {args.out}")
        return 0
    expected = _PLOT_SCHEMAS[args.kind]
    with CsvLogger(args.out, expected) as log:
        for path in args.inputs:
            schema, rows = read_csv(path)
            if schema != expected:
                raise SchemaMismatch(
                    f"{path}: expected {expected}, found {schema}")
            for r in rows:
                log.write(r)
    print(f"merged {len(args.inputs)} file(s) -> {args.out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"train": cmd_train, "benchmark": cmd_benchmark,
                "test": cmd_test, "activity": cmd_activity,
                "plot-data": cmd_plot_data}
    try:
        return handlers[args.command](args)
    except (ConfigError, IncompatibleCheckpoint, NotAnOptionAgent,
            NoEligibleCheckpoint, FileNotFoundError, SchemaMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

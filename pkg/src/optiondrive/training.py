"""Training loop, evaluation protocol and best-checkpoint selection."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .agents import AgentConfig, make_agent
from .env import HighwayEnv
from .metrics import CsvLogger
from .options import ALL_OPTIONS, LAT_OPTIONS, VEL_OPTIONS
from .replay import LinearSchedule


class NoEligibleCheckpoint(Exception):
    """No evaluated checkpoint lies past two thirds of the training run."""


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 300
    eval_every: int = 10            # evaluate/checkpoint every K episodes
    eval_episodes: int = 10
    warmup: int = 6400              # env steps before gradient steps begin
    eps_start: float = 1.0
    eps_end: float = 0.05
    sigma_start: float = 0.4
    sigma_end: float = 0.05
    explore_fraction: float = 0.5   # share of nominal total steps to anneal over
    seeds: tuple[int, ...] = (0,)
    eval_seed_base: int = 987_654_321


def option_activity(kind: str, store: dict) -> tuple[tuple[str, int], ...]:
    """(axis, option id) pairs active in one decision."""
    if kind == "single":
        return (("single", int(ALL_OPTIONS[store["act"]])),)
    if kind == "combined":
        return (("velocity", int(VEL_OPTIONS[store["act_v"]])),
                ("lateral", int(LAT_OPTIONS[store["act_d"]])))
    if kind == "hybrid":
        return (("lateral", int(LAT_OPTIONS[store["act_d"]])),)
    return ()


@dataclass
class EpisodeResult:
    ret: float = 0.0
    length: int = 0
    collision: bool = False
    lane_changes: int = 0
    option_counts: np.ndarray = field(
        default_factory=lambda: np.zeros(len(ALL_OPTIONS)))
    axis_counts: dict = field(default_factory=dict)
    v_trace: np.ndarray | None = None
    d_trace: np.ndarray | None = None
    lead_trace: np.ndarray | None = None

    @property
    def mean_speed(self) -> float:
        return float(np.mean(self.v_trace)) if self.length else 0.0

    def option_fractions(self) -> np.ndarray:
        return self.option_counts / max(self.length, 1)


def run_episode(env: HighwayEnv, agent, rng: np.random.Generator, *,
                seed: int = 0, density: float | None = None, explore: bool,
                record: bool = False, schedule=None, learn=None,
                per_step=None, reset_fn=None) -> EpisodeResult:
    """Roll one episode.

    ``schedule(step_in_episode) -> (eps, sigma)`` supplies exploration
    parameters, ``learn()`` runs after every recorded step, and
    ``per_step(t, ctx, decision, result)`` observes each transition.
    ``reset_fn`` replaces the default seeded reset (scripted scenarios).
    """
    if reset_fn is None:
        env.reset(seed=seed, density=density)
    else:
        reset_fn()
    agent.reset_episode()
    ctx = env.ego_context()
    res = EpisodeResult()
    vs, ds, leads = [], [], []
    lane_prev = ctx.offsets.lane
    t = 0
    while True:
        eps, sigma = schedule(t) if schedule else (0.0, 0.0)
        decision = agent.act(ctx, rng, explore, eps=eps, sigma=sigma)
        step = env.step(decision.ref)
        ctx_next = env.ego_context()
        if record:
            agent.record(ctx, decision, step.reward, step.terminated, ctx_next)
        if per_step is not None:
            per_step(t, ctx, decision, step)
        res.ret += step.reward
        res.length += 1
        vs.append(ctx_next.v)
        ds.append(ctx_next.d)
        leads.append(ctx_next.lead_gap)
        if ctx_next.offsets.lane != lane_prev:
            res.lane_changes += 1
            lane_prev = ctx_next.offsets.lane
        seen = set()
        for axis, oid in option_activity(agent.kind, decision.store):
            counts = res.axis_counts.setdefault(axis,
                                                np.zeros(len(ALL_OPTIONS)))
            counts[oid] += 1
            seen.add(oid)
        for oid in sorted(seen):
            res.option_counts[oid] += 1
        if learn is not None:
            learn()
        ctx = ctx_next
        t += 1
        if step.terminated or step.truncated:
            res.collision = bool(step.info["collision"])
            break
    res.v_trace = np.array(vs)
    res.d_trace = np.array(ds)
    res.lead_trace = np.array(leads)
    return res


def _metrics_row(step: int, episode: int, phase: str,
                 res: EpisodeResult) -> dict:
    frac = res.option_fractions()
    return {"step": step, "episode": episode, "phase": phase,
            "return": res.ret, "collisions": int(res.collision),
            "lane_changes": res.lane_changes, "mean_speed": res.mean_speed,
            "f_emergency": frac[0], "f_maintain": frac[1],
            "f_vel_dec": frac[2], "f_vel_inc": frac[3],
            "f_lane_left": frac[4], "f_lane_right": frac[5]}


class Trainer:
    """Single-seed training run writing metrics and checkpoints under a
    run directory."""

    def __init__(self, env_params, agent_kind: str, agent_cfg: AgentConfig,
                 tcfg: TrainConfig, seed: int, out_dir: str | Path):
        self.env = HighwayEnv(env_params, seed=seed)
        self.eval_env = HighwayEnv(env_params, seed=seed)
        self.kind = agent_kind
        self.agent_cfg = agent_cfg
        self.tcfg = tcfg
        self.seed = seed
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.agent = make_agent(agent_kind, agent_cfg, env_params,
                                obs_dim=26, rng=np.random.default_rng(seed))
        total = tcfg.episodes * env_params.horizon
        self._eps = LinearSchedule(tcfg.eps_start, tcfg.eps_end, total,
                                   tcfg.explore_fraction)
        self._sigma = LinearSchedule(tcfg.sigma_start, tcfg.sigma_end, total,
                                     tcfg.explore_fraction)
        self.global_step = 0

    def _episode_seed(self, episode: int) -> int:
        return self.seed * 1_000_003 + episode

    def train(self) -> Path:
        """Run the configured episodes; returns the metrics CSV path."""
        tcfg = self.tcfg
        rng_act = np.random.default_rng(self.seed + 101)
        rng_train = np.random.default_rng(self.seed + 202)
        metrics_path = self.out_dir / "metrics.csv"
        ckpt_dir = self.out_dir / "checkpoints"
        with CsvLogger(metrics_path, "training-v1") as log:
            for ep in range(1, tcfg.episodes + 1):

                def schedule(_t):
                    return (self._eps.value(self.global_step),
                            self._sigma.value(self.global_step))

                def learn():
                    self.global_step += 1
                    if (self.agent.trains
                            and self.global_step >= tcfg.warmup):
                        self.agent.train_step(rng_train)

                res = run_episode(
                    self.env, self.agent, rng_act,
                    seed=self._episode_seed(ep), explore=True,
                    record=self.agent.trains, schedule=schedule, learn=learn)
                log.write(_metrics_row(self.global_step, ep, "train", res))
                if ep % tcfg.eval_every == 0 or ep == tcfg.episodes:
                    self._evaluate(ep, log, ckpt_dir)
        return metrics_path

    def _evaluate(self, episode: int, log: CsvLogger, ckpt_dir: Path) -> None:
        tcfg = self.tcfg
        if self.agent.trains:
            ckpt_dir.mkdir(parents=True, exist_ok=True)
            self.agent.save(ckpt_dir / f"ckpt_ep{episode:05d}.npz",
                            {"episode": episode, "step": self.global_step,
                             "seed": self.seed,
                             "agent_config": asdict(self.agent_cfg)})
        rng = np.random.default_rng(0)
        for j in range(tcfg.eval_episodes):
            res = run_episode(self.eval_env, self.agent, rng,
                              seed=tcfg.eval_seed_base + j, explore=False)
            log.write(_metrics_row(self.global_step, episode, "eval", res))


def eval_table(metrics_rows: list[dict]) -> dict[int, float]:
    """Mean eval return per checkpoint episode from a training-v1 table."""
    sums: dict[int, list[float]] = {}
    for row in metrics_rows:
        if row["phase"] == "eval":
            sums.setdefault(int(row["episode"]), []).append(
                float(row["return"]))
    return {ep: float(np.mean(vals)) for ep, vals in sorted(sums.items())}


def select_best(runs: list[list[dict]], total_episodes: int
                ) -> tuple[int, int]:
    """Best (run index, checkpoint episode) by mean eval return.

    Only checkpoints at two thirds of the training run or later are
    eligible; ties break toward the earliest episode, then lowest run
    index.
    """
    cutoff = 2.0 * total_episodes / 3.0
    candidates = []
    for run_idx, rows in enumerate(runs):
        for ep, mean_ret in eval_table(rows).items():
            if ep >= cutoff:
                candidates.append((ep, run_idx, mean_ret))
    if not candidates:
        raise NoEligibleCheckpoint(
            f"no eval checkpoints at episode >= {cutoff:.1f}")
    candidates.sort(key=lambda c: (c[0], c[1]))
    best = max(candidates, key=lambda c: c[2])
    return best[1], best[0]

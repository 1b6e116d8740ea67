"""Decision-making agents over the highway environment.

Four learning architectures share one protocol (``act`` / ``record`` /
``train_step`` / ``save``):

* ``SingleOptionAgent``  — one critic pair over all six options; exactly one
  option runs at a time and keeps running until its termination set is hit.
* ``CombinedOptionsAgent`` — one critic pair over velocity x lateral option
  pairs; the two axes terminate and re-select independently.
* ``HybridOptionsAgent`` — a continuous actor proposes the velocity change
  while a critic pair with one head per lateral option picks the manoeuvre;
  the critic consumes the network action appended to the state.
* ``ContinuousAgent``   — twin-critic deterministic policy gradient over the
  full relative-reference square, made safe by rescaling into the per-step
  action bounds.

All critics learn intra-option style: the bootstrap value at the next state
continues the running option unless it terminated there, in which case the
argmax over the options then available is taken — selected with the online
first critic, evaluated with the elementwise minimum of the target twins.

A scripted ``IdmMobilDriver`` provides the non-learning reference driver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Protocol

import numpy as np

from .dynamics import ActionRef
from .env import EgoContext, EnvParams
from .nets import CriticLayout, Mlp, actor_spec, critic_spec, load_mlps, save_mlps
from .options import (ALL_OPTIONS, LAT_OPTIONS, VEL_OPTIONS, OptionId,
                      availability, can_initiate, combined_policy,
                      option_policy, should_terminate)
from .replay import ReplayBuffer
from .safety import pwl_rescale
from .traffic import idm_accel


class IncompatibleCheckpoint(Exception):
    """Checkpoint metadata does not describe a loadable agent."""


class NotAnOptionAgent(Exception):
    """The operation needs option activity, which this agent does not have."""


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.99
    batch_size: int = 64
    buffer_capacity: int = 1_000_000
    lr: float = 5e-4
    tau: float = 1e-3
    policy_delay: int = 2
    sigma_target: float = 0.2
    noise_clip: float = 0.5
    lambda_s: float = 0.1
    critic_hidden: tuple[int, ...] = (64, 32)
    actor_hidden: tuple[int, ...] = (32, 16, 8)


class Decision(NamedTuple):
    ref: ActionRef
    store: dict


class Agent(Protocol):
    kind: str
    trains: bool

    def reset_episode(self) -> None: ...

    def act(self, ctx: EgoContext, rng: np.random.Generator, explore: bool,
            eps: float = 0.0, sigma: float = 0.0) -> Decision: ...

    def record(self, ctx: EgoContext, decision: Decision, reward: float,
               terminated: bool, ctx_next: EgoContext) -> None: ...

    def train_step(self, rng: np.random.Generator) -> dict: ...

    def save(self, path, meta: dict | None = None) -> None: ...


def trunc_gauss(rng: np.random.Generator, mu: float, sigma: float,
                lo: float = -1.0, hi: float = 1.0) -> float:
    """Gaussian restricted to [lo, hi] by resampling (clamp as last resort)."""
    for _ in range(100):
        x = mu + sigma * rng.standard_normal()
        if lo <= x <= hi:
            return x
    return min(max(mu, lo), hi)


def _pick(rng: np.random.Generator, q: np.ndarray, mask: np.ndarray,
          explore: bool, eps: float) -> int:
    """Epsilon-greedy argmax over the masked entries of q."""
    idx = np.nonzero(mask)[0]
    if explore and rng.random() < eps:
        return int(idx[rng.integers(len(idx))])
    qm = np.where(mask, q, -np.inf)
    return int(np.argmax(qm))


def option_continuation_mask(term: np.ndarray, acts: np.ndarray,
                             avail: np.ndarray) -> np.ndarray:
    """Selection mask at the next state for intra-option bootstrapping.

    Each row stays pinned to the taken option where it does not terminate;
    where it does, the row opens up to the options then available.
    """
    b, h = avail.shape
    onehot = np.zeros((b, h), dtype=bool)
    onehot[np.arange(b), acts] = True
    return np.where(term[:, None], avail, onehot)


def clipped_double_backup(q1_next: np.ndarray, q1t_next: np.ndarray,
                          q2t_next: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Bootstrap values: argmax over the mask by the online first critic,
    evaluated with the elementwise minimum of the target twins."""
    rows = np.arange(q1_next.shape[0])
    sel = np.argmax(np.where(mask, q1_next, -np.inf), axis=1)
    return np.minimum(q1t_next, q2t_next)[rows, sel]


def _critic_pair(spec, rng) -> tuple[Mlp, Mlp, Mlp, Mlp]:
    q1 = Mlp.build(spec, rng)
    q2 = Mlp.build(spec, rng)
    return q1, q2, q1.copy(), q2.copy()


def _mse_head_update(net: Mlp, x: np.ndarray, heads: np.ndarray,
                     y: np.ndarray, lr: float) -> float:
    """One Adam step of mean squared error on selected output heads."""
    q = net.forward(x)
    b = x.shape[0]
    rows = np.arange(b)
    diff = q[rows, heads] - y
    gy = np.zeros_like(q)
    gy[rows, heads] = 2.0 * diff / b
    grads, _ = net.backward(x, gy)
    net.update(grads, lr)
    return float(np.mean(diff * diff))


# --------------------------------------------------------------------- single


class SingleOptionAgent:
    """One option at a time from the full six-option set."""

    kind = "single"
    trains = True

    def __init__(self, cfg: AgentConfig, obs_dim: int,
                 rng: np.random.Generator):
        self.cfg = cfg
        self.obs_dim = obs_dim
        spec = critic_spec(CriticLayout.DISCRETE, obs_dim,
                           n_actions=len(ALL_OPTIONS), hidden=cfg.critic_hidden)
        self.q1, self.q2, self.q1t, self.q2t = _critic_pair(spec, rng)
        self.buffer = ReplayBuffer(
            {"obs": obs_dim, "act": 1, "rew": 1, "nobs": obs_dim, "done": 1,
             "term": 1, "avail": len(ALL_OPTIONS)}, cfg.buffer_capacity)
        self.active: int | None = None

    def reset_episode(self) -> None:
        self.active = None

    def act(self, ctx, rng, explore, eps=0.0, sigma=0.0) -> Decision:
        octx = ctx.option_ctx
        if (self.active is not None
                and not should_terminate(ALL_OPTIONS[self.active], octx)):
            o = self.active
        else:
            mask = np.array(availability(ALL_OPTIONS, octx))
            o = _pick(rng, self.q1.forward(ctx.obs_scaled), mask, explore, eps)
        self.active = o
        dv, dd = option_policy(ALL_OPTIONS[o], octx)
        return Decision(ActionRef(dv, dd), {"act": o})

    def record(self, ctx, decision, reward, terminated, ctx_next) -> None:
        o = decision.store["act"]
        no = ctx_next.option_ctx
        self.buffer.add(
            obs=ctx.obs_scaled, act=o, rew=reward, nobs=ctx_next.obs_scaled,
            done=float(terminated),
            term=float(should_terminate(ALL_OPTIONS[o], no)),
            avail=np.array(availability(ALL_OPTIONS, no), dtype=float))

    def train_step(self, rng) -> dict:
        cfg = self.cfg
        if len(self.buffer) < cfg.batch_size:
            return {}
        b = self.buffer.sample(cfg.batch_size, rng)
        acts = b["act"][:, 0].astype(np.int64)
        mask = option_continuation_mask(b["term"][:, 0] > 0.5, acts,
                                        b["avail"] > 0.5)
        u = clipped_double_backup(self.q1.forward(b["nobs"]),
                                  self.q1t.forward(b["nobs"]),
                                  self.q2t.forward(b["nobs"]), mask)
        y = b["rew"][:, 0] + cfg.gamma * (1.0 - b["done"][:, 0]) * u
        l1 = _mse_head_update(self.q1, b["obs"], acts, y, cfg.lr)
        l2 = _mse_head_update(self.q2, b["obs"], acts, y, cfg.lr)
        self.q1t.polyak_from(self.q1, cfg.tau)
        self.q2t.polyak_from(self.q2, cfg.tau)
        return {"loss_q1": l1, "loss_q2": l2}

    def _nets(self) -> dict[str, Mlp]:
        return {"q1": self.q1, "q2": self.q2, "q1t": self.q1t, "q2t": self.q2t}

    def save(self, path, meta=None) -> None:
        save_mlps(path, self._nets(), {"kind": self.kind, **(meta or {})})

    def load(self, path) -> dict:
        nets, meta = load_mlps(path)
        for name, net in nets.items():
            setattr(self, name, net)
        return meta


# ------------------------------------------------------------------- combined


class CombinedOptionsAgent:
    """Simultaneous velocity and lateral options with a joint pair critic."""

    kind = "combined"
    trains = True

    def __init__(self, cfg: AgentConfig, obs_dim: int,
                 rng: np.random.Generator):
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.n_v = len(VEL_OPTIONS)
        self.n_d = len(LAT_OPTIONS)
        spec = critic_spec(CriticLayout.DISCRETE, obs_dim,
                           n_actions=self.n_v * self.n_d,
                           hidden=cfg.critic_hidden)
        self.q1, self.q2, self.q1t, self.q2t = _critic_pair(spec, rng)
        self.buffer = ReplayBuffer(
            {"obs": obs_dim, "act_v": 1, "act_d": 1, "rew": 1,
             "nobs": obs_dim, "done": 1, "term_v": 1, "term_d": 1,
             "avail_v": self.n_v, "avail_d": self.n_d}, cfg.buffer_capacity)
        self.active_v: int | None = None
        self.active_d: int | None = None

    def reset_episode(self) -> None:
        self.active_v = None
        self.active_d = None

    def _pair_mask(self, allowed_v: np.ndarray,
                   allowed_d: np.ndarray) -> np.ndarray:
        return (allowed_v[:, None] & allowed_d[None, :]).reshape(-1)

    def act(self, ctx, rng, explore, eps=0.0, sigma=0.0) -> Decision:
        octx = ctx.option_ctx
        term_v = (self.active_v is None
                  or should_terminate(VEL_OPTIONS[self.active_v], octx))
        term_d = (self.active_d is None
                  or should_terminate(LAT_OPTIONS[self.active_d], octx))
        if term_v or term_d:
            if term_v:
                allowed_v = np.array([can_initiate(o, octx)
                                      for o in VEL_OPTIONS])
            else:
                allowed_v = np.zeros(self.n_v, dtype=bool)
                allowed_v[self.active_v] = True
            if term_d:
                allowed_d = np.array([can_initiate(o, octx)
                                      for o in LAT_OPTIONS])
            else:
                allowed_d = np.zeros(self.n_d, dtype=bool)
                allowed_d[self.active_d] = True
            mask = self._pair_mask(allowed_v, allowed_d)
            h = _pick(rng, self.q1.forward(ctx.obs_scaled), mask, explore, eps)
            self.active_v, self.active_d = divmod(h, self.n_d)
        dv, dd = combined_policy(VEL_OPTIONS[self.active_v],
                                 LAT_OPTIONS[self.active_d], octx)
        return Decision(ActionRef(dv, dd),
                        {"act_v": self.active_v, "act_d": self.active_d})

    def record(self, ctx, decision, reward, terminated, ctx_next) -> None:
        iv, jd = decision.store["act_v"], decision.store["act_d"]
        no = ctx_next.option_ctx
        self.buffer.add(
            obs=ctx.obs_scaled, act_v=iv, act_d=jd, rew=reward,
            nobs=ctx_next.obs_scaled, done=float(terminated),
            term_v=float(should_terminate(VEL_OPTIONS[iv], no)),
            term_d=float(should_terminate(LAT_OPTIONS[jd], no)),
            avail_v=np.array([can_initiate(o, no) for o in VEL_OPTIONS],
                             dtype=float),
            avail_d=np.array([can_initiate(o, no) for o in LAT_OPTIONS],
                             dtype=float))

    def train_step(self, rng) -> dict:
        cfg = self.cfg
        if len(self.buffer) < cfg.batch_size:
            return {}
        b = self.buffer.sample(cfg.batch_size, rng)
        bsz = cfg.batch_size
        iv = b["act_v"][:, 0].astype(np.int64)
        jd = b["act_d"][:, 0].astype(np.int64)
        heads = iv * self.n_d + jd
        # per-axis allowed sets at the next state: the running option if it
        # continues there, otherwise everything then available
        mask_v = option_continuation_mask(b["term_v"][:, 0] > 0.5, iv,
                                          b["avail_v"] > 0.5)
        mask_d = option_continuation_mask(b["term_d"][:, 0] > 0.5, jd,
                                          b["avail_d"] > 0.5)
        mask = (mask_v[:, :, None] & mask_d[:, None, :]).reshape(bsz, -1)
        u = clipped_double_backup(self.q1.forward(b["nobs"]),
                                  self.q1t.forward(b["nobs"]),
                                  self.q2t.forward(b["nobs"]), mask)
        y = b["rew"][:, 0] + cfg.gamma * (1.0 - b["done"][:, 0]) * u
        l1 = _mse_head_update(self.q1, b["obs"], heads, y, cfg.lr)
        l2 = _mse_head_update(self.q2, b["obs"], heads, y, cfg.lr)
        self.q1t.polyak_from(self.q1, cfg.tau)
        self.q2t.polyak_from(self.q2, cfg.tau)
        return {"loss_q1": l1, "loss_q2": l2}

    def _nets(self) -> dict[str, Mlp]:
        return {"q1": self.q1, "q2": self.q2, "q1t": self.q1t, "q2t": self.q2t}

    save = SingleOptionAgent.save
    load = SingleOptionAgent.load


# --------------------------------------------------------------------- hybrid


class HybridOptionsAgent:
    """Continuous velocity proposal plus discrete lateral options."""

    kind = "hybrid"
    trains = True

    def __init__(self, cfg: AgentConfig, obs_dim: int,
                 rng: np.random.Generator):
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.n_d = len(LAT_OPTIONS)
        cspec = critic_spec(CriticLayout.HYBRID, obs_dim, n_actions=self.n_d,
                            cont_dim=1, hidden=cfg.critic_hidden)
        self.q1, self.q2, self.q1t, self.q2t = _critic_pair(cspec, rng)
        self.actor = Mlp.build(actor_spec(obs_dim, 1, cfg.actor_hidden), rng)
        self.actor_t = self.actor.copy()
        self.buffer = ReplayBuffer(
            {"obs": obs_dim, "a": 1, "act_d": 1, "rew": 1, "nobs": obs_dim,
             "done": 1, "term_d": 1, "avail_d": self.n_d,
             "avail_d_now": self.n_d}, cfg.buffer_capacity)
        self.active_d: int | None = None
        self._updates = 0

    def reset_episode(self) -> None:
        self.active_d = None

    def act(self, ctx, rng, explore, eps=0.0, sigma=0.0) -> Decision:
        octx = ctx.option_ctx
        s = ctx.obs_scaled
        a_mu = float(self.actor.forward(s)[0])
        a = trunc_gauss(rng, a_mu, sigma) if explore else a_mu
        avail_now = np.array([can_initiate(o, octx) for o in LAT_OPTIONS])
        if (self.active_d is not None
                and not should_terminate(LAT_OPTIONS[self.active_d], octx)):
            j = self.active_d
        else:
            x = np.concatenate([s, [a]])
            j = _pick(rng, self.q1.forward(x), avail_now, explore, eps)
        self.active_d = j
        o_d = LAT_OPTIONS[j]
        if o_d is OptionId.EMERGENCY:
            dv, dd = option_policy(OptionId.EMERGENCY, octx)
        else:
            dv = pwl_rescale(a, ctx.bounds.dv_lo, ctx.bounds.dv_hi)
            dd = option_policy(o_d, octx)[1]
        return Decision(ActionRef(dv, dd),
                        {"a": a, "act_d": j, "avail_d_now": avail_now})

    def record(self, ctx, decision, reward, terminated, ctx_next) -> None:
        jd = decision.store["act_d"]
        no = ctx_next.option_ctx
        self.buffer.add(
            obs=ctx.obs_scaled, a=decision.store["a"], act_d=jd, rew=reward,
            nobs=ctx_next.obs_scaled, done=float(terminated),
            term_d=float(should_terminate(LAT_OPTIONS[jd], no)),
            avail_d=np.array([can_initiate(o, no) for o in LAT_OPTIONS],
                             dtype=float),
            avail_d_now=decision.store["avail_d_now"].astype(float))

    def train_step(self, rng) -> dict:
        cfg = self.cfg
        if len(self.buffer) < cfg.batch_size:
            return {}
        b = self.buffer.sample(cfg.batch_size, rng)
        bsz = cfg.batch_size
        jd = b["act_d"][:, 0].astype(np.int64)
        noise = np.clip(cfg.sigma_target * rng.standard_normal((bsz, 1)),
                        -cfg.noise_clip, cfg.noise_clip)
        a_next = np.clip(self.actor_t.forward(b["nobs"]) + noise, -1.0, 1.0)
        xn = np.concatenate([b["nobs"], a_next], axis=1)
        mask = option_continuation_mask(b["term_d"][:, 0] > 0.5, jd,
                                        b["avail_d"] > 0.5)
        u = clipped_double_backup(self.q1.forward(xn), self.q1t.forward(xn),
                                  self.q2t.forward(xn), mask)
        y = b["rew"][:, 0] + cfg.gamma * (1.0 - b["done"][:, 0]) * u
        x = np.concatenate([b["obs"], b["a"]], axis=1)
        l1 = _mse_head_update(self.q1, x, jd, y, cfg.lr)
        l2 = _mse_head_update(self.q2, x, jd, y, cfg.lr)
        out = {"loss_q1": l1, "loss_q2": l2}
        self._updates += 1
        if self._updates % cfg.policy_delay == 0:
            out["loss_actor"] = self._actor_step(b, bsz)
            self.q1t.polyak_from(self.q1, cfg.tau)
            self.q2t.polyak_from(self.q2, cfg.tau)
            self.actor_t.polyak_from(self.actor, cfg.tau)
        return out

    def _actor_step(self, b: dict, bsz: int) -> float:
        cfg = self.cfg
        a = self.actor.forward(b["obs"])
        x = np.concatenate([b["obs"], a], axis=1)
        q = self.q1.forward(x)
        avail = b["avail_d_now"]
        gy = -avail / bsz
        _, dx = self.q1.backward(x, gy)
        da = dx[:, self.obs_dim:]
        mu_next = self.actor.forward(b["nobs"])
        resid = mu_next - b["a"]
        smooth = float(np.mean(np.sum(resid * resid, axis=1)))
        d_mu = 2.0 * cfg.lambda_s * resid / bsz
        g1, _ = self.actor.backward(b["obs"], da)
        g2, _ = self.actor.backward(b["nobs"], d_mu)
        grads = ([gw1 + gw2 for gw1, gw2 in zip(g1[0], g2[0])],
                 [gb1 + gb2 for gb1, gb2 in zip(g1[1], g2[1])])
        self.actor.update(grads, cfg.lr)
        loss = -float(np.sum(q * avail)) / bsz + cfg.lambda_s * smooth
        return loss

    def _nets(self) -> dict[str, Mlp]:
        return {"q1": self.q1, "q2": self.q2, "q1t": self.q1t,
                "q2t": self.q2t, "actor": self.actor, "actor_t": self.actor_t}

    save = SingleOptionAgent.save
    load = SingleOptionAgent.load


# ----------------------------------------------------------------- continuous


class ContinuousAgent:
    """Twin-critic deterministic policy over the bounded reference square."""

    kind = "continuous"
    trains = True

    def __init__(self, cfg: AgentConfig, obs_dim: int,
                 rng: np.random.Generator):
        self.cfg = cfg
        self.obs_dim = obs_dim
        cspec = critic_spec(CriticLayout.CONTINUOUS, obs_dim, cont_dim=2,
                            hidden=cfg.critic_hidden)
        self.q1, self.q2, self.q1t, self.q2t = _critic_pair(cspec, rng)
        self.actor = Mlp.build(actor_spec(obs_dim, 2, cfg.actor_hidden), rng)
        self.actor_t = self.actor.copy()
        self.buffer = ReplayBuffer(
            {"obs": obs_dim, "a": 2, "rew": 1, "nobs": obs_dim, "done": 1},
            cfg.buffer_capacity)
        self._updates = 0

    def reset_episode(self) -> None:
        pass

    def act(self, ctx, rng, explore, eps=0.0, sigma=0.0) -> Decision:
        s = ctx.obs_scaled
        a = self.actor.forward(s).copy()
        if explore:
            a[0] = trunc_gauss(rng, float(a[0]), sigma)
            a[1] = trunc_gauss(rng, float(a[1]), sigma)
        bounds = ctx.bounds
        dv = pwl_rescale(float(a[0]), bounds.dv_lo, bounds.dv_hi)
        dd = pwl_rescale(float(a[1]), bounds.dd_lo, bounds.dd_hi)
        return Decision(ActionRef(dv, dd), {"a": a})

    def record(self, ctx, decision, reward, terminated, ctx_next) -> None:
        self.buffer.add(obs=ctx.obs_scaled, a=decision.store["a"], rew=reward,
                        nobs=ctx_next.obs_scaled, done=float(terminated))

    def train_step(self, rng) -> dict:
        cfg = self.cfg
        if len(self.buffer) < cfg.batch_size:
            return {}
        b = self.buffer.sample(cfg.batch_size, rng)
        bsz = cfg.batch_size
        noise = np.clip(cfg.sigma_target * rng.standard_normal((bsz, 2)),
                        -cfg.noise_clip, cfg.noise_clip)
        a_next = np.clip(self.actor_t.forward(b["nobs"]) + noise, -1.0, 1.0)
        xn = np.concatenate([b["nobs"], a_next], axis=1)
        qmin = np.minimum(self.q1t.forward(xn), self.q2t.forward(xn))[:, 0]
        y = b["rew"][:, 0] + cfg.gamma * (1.0 - b["done"][:, 0]) * qmin
        x = np.concatenate([b["obs"], b["a"]], axis=1)
        zeros = np.zeros(bsz, dtype=np.int64)
        l1 = _mse_head_update(self.q1, x, zeros, y, cfg.lr)
        l2 = _mse_head_update(self.q2, x, zeros, y, cfg.lr)
        out = {"loss_q1": l1, "loss_q2": l2}
        self._updates += 1
        if self._updates % cfg.policy_delay == 0:
            out["loss_actor"] = self._actor_step(b, bsz)
            self.q1t.polyak_from(self.q1, cfg.tau)
            self.q2t.polyak_from(self.q2, cfg.tau)
            self.actor_t.polyak_from(self.actor, cfg.tau)
        return out

    def _actor_step(self, b: dict, bsz: int) -> float:
        cfg = self.cfg
        a = self.actor.forward(b["obs"])
        x = np.concatenate([b["obs"], a], axis=1)
        q = self.q1.forward(x)
        gy = np.full_like(q, -1.0 / bsz)
        _, dx = self.q1.backward(x, gy)
        da = dx[:, self.obs_dim:]
        mu_next = self.actor.forward(b["nobs"])
        resid = mu_next - b["a"]
        smooth = float(np.mean(np.sum(resid * resid, axis=1)))
        d_mu = 2.0 * cfg.lambda_s * resid / bsz
        g1, _ = self.actor.backward(b["obs"], da)
        g2, _ = self.actor.backward(b["nobs"], d_mu)
        grads = ([gw1 + gw2 for gw1, gw2 in zip(g1[0], g2[0])],
                 [gb1 + gb2 for gb1, gb2 in zip(g1[1], g2[1])])
        self.actor.update(grads, cfg.lr)
        return -float(np.mean(q)) + cfg.lambda_s * smooth

    def _nets(self) -> dict[str, Mlp]:
        return {"q1": self.q1, "q2": self.q2, "q1t": self.q1t,
                "q2t": self.q2t, "actor": self.actor, "actor_t": self.actor_t}

    save = SingleOptionAgent.save
    load = SingleOptionAgent.load


# ------------------------------------------------------------------- scripted


class IdmMobilDriver:
    """Reference driver: IDM car following plus MOBIL lane selection,
    clipped into the safe action bounds like every other agent."""

    kind = "idm-mobil"
    trains = False

    def __init__(self, env_params: EnvParams, decide_every: int = 5):
        self.p = env_params
        self.decide_every = decide_every
        self._t = 0
        self._target_d: float | None = None

    def reset_episode(self) -> None:
        self._t = 0
        self._target_d = None

    def act(self, ctx, rng, explore, eps=0.0, sigma=0.0) -> Decision:
        p = self.p
        idm = replace(p.idm, v0=p.v_limit)
        a_cmd = idm_accel(ctx.lead_gap, ctx.v, ctx.lead_v, idm)
        dv = a_cmd / p.gains.k_v
        if self._target_d is not None:
            dd = self._target_d - ctx.d
            if abs(dd) < p.options.eps_d:
                self._target_d = None
                dd = ctx.offsets.c0
        else:
            dd = ctx.offsets.c0
            if self._t % self.decide_every == 0:
                self._consider_change(ctx, idm)
                if self._target_d is not None:
                    dd = self._target_d - ctx.d
        self._t += 1
        dv, dd = ctx.bounds.clip(dv, dd)
        return Decision(ActionRef(dv, dd), {})

    def _consider_change(self, ctx, idm) -> None:
        from .traffic import LaneChangeView, mobil_decide
        octx = ctx.option_ctx
        half_lw = 0.5 * self.p.road.lane_width
        lane = ctx.offsets.lane
        lanes_total = self.p.road.lane_count

        def view(offset: float) -> LaneChangeView | None:
            lanes = list(octx.probe(ctx.d + offset))
            if not lanes:
                return None
            ln = lanes[0]
            return LaneChangeView(ln.lead_gap, ln.lead_v, ln.follow_gap,
                                  ln.follow_v, math.inf, 0.0)

        own = LaneChangeView(ctx.lead_gap, ctx.lead_v, math.inf, 0.0,
                             math.inf, 0.0)
        left = (view(ctx.offsets.c_left)
                if lane + 1 < lanes_total else None)
        right = view(ctx.offsets.c_right) if lane > 0 else None
        choice = mobil_decide(ctx.v, own, left, right, idm, self.p.mobil)
        if choice == 0:
            return
        offset = ctx.offsets.c_left if choice > 0 else ctx.offsets.c_right
        gate = ctx.bounds.dd_hi if choice > 0 else -ctx.bounds.dd_lo
        if gate > half_lw:
            self._target_d = ctx.d + offset

    def record(self, ctx, decision, reward, terminated, ctx_next) -> None:
        pass

    def train_step(self, rng) -> dict:
        return {}

    def save(self, path, meta=None) -> None:
        raise NotImplementedError("the scripted driver has nothing to save")


AGENT_KINDS = ("single", "combined", "hybrid", "continuous", "idm-mobil")


def make_agent(kind: str, cfg: AgentConfig, env_params: EnvParams,
               obs_dim: int, rng: np.random.Generator):
    if kind == "single":
        return SingleOptionAgent(cfg, obs_dim, rng)
    if kind == "combined":
        return CombinedOptionsAgent(cfg, obs_dim, rng)
    if kind == "hybrid":
        return HybridOptionsAgent(cfg, obs_dim, rng)
    if kind == "continuous":
        return ContinuousAgent(cfg, obs_dim, rng)
    if kind == "idm-mobil":
        return IdmMobilDriver(env_params)
    raise ValueError(f"unknown agent kind {kind!r}; expected one of "
                     f"{AGENT_KINDS}")


def restore_agent(path, env_params: EnvParams, obs_dim: int = 26):
    """Rebuild a trained agent from a checkpoint written by ``save``."""
    try:
        nets, meta = load_mlps(path)
    except (OSError, KeyError, ValueError) as exc:
        raise IncompatibleCheckpoint(f"cannot read checkpoint {path}: {exc}")
    kind = meta.get("kind")
    if kind not in ("single", "combined", "hybrid", "continuous"):
        raise IncompatibleCheckpoint(
            f"checkpoint {path} has unknown agent kind {kind!r}")
    raw_cfg = meta.get("agent_config", {})
    cfg = AgentConfig(**{k: tuple(v) if isinstance(v, list) else v
                         for k, v in raw_cfg.items()})
    agent = make_agent(kind, cfg, env_params, obs_dim,
                       rng=np.random.default_rng(0))
    expected = set(agent._nets())
    if set(nets) != expected:
        raise IncompatibleCheckpoint(
            f"checkpoint {path} nets {sorted(nets)} do not match agent "
            f"{kind!r} ({sorted(expected)})")
    for name, net in nets.items():
        setattr(agent, name, net)
    return agent, meta

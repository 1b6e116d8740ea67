"""Small dense networks with explicit, checkable gradients.

Everything is float64 numpy and deliberately framework-free: the training
code needs exact control over update order and bitwise-reproducible
checkpoints, and the gradients are verified against finite differences in the
test suite.  The heavy inner products run through ``optiondrive.kernels``.

Conventions: inputs are row vectors ``(batch, dim)``; weights are stored as
``(fan_in, fan_out)``; hidden layers are ReLU; the output layer is identity
for critics and tanh for actors.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels

_ACT_CODES = {"identity": 0, "relu": 1, "tanh": 2}


class CriticLayout(Enum):
    """How a critic consumes the action.

    CONTINUOUS: q(s, a) with the action appended to the input, one output.
    DISCRETE:   q(s, .) with one output head per discrete action.
    HYBRID:     q(s, a_c, .) continuous part appended to the input, one
                output head per discrete action.
    """

    CONTINUOUS = "continuous"
    DISCRETE = "discrete"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class MlpSpec:
    in_dim: int
    hidden: tuple[int, ...]
    out_dim: int
    out_act: str = "identity"

    def layer_dims(self):
        return (self.in_dim,) + tuple(self.hidden) + (self.out_dim,)


class Mlp:
    """A dense network plus its Adam state."""

    def __init__(self, spec: MlpSpec, Ws, bs):
        self.spec = spec
        self.Ws = Ws
        self.bs = bs
        self.acts = [1] * len(spec.hidden) + [_ACT_CODES[spec.out_act]]
        self.m_W = [np.zeros_like(W) for W in Ws]
        self.v_W = [np.zeros_like(W) for W in Ws]
        self.m_b = [np.zeros_like(b) for b in bs]
        self.v_b = [np.zeros_like(b) for b in bs]
        self.t = 0

    @classmethod
    def build(cls, spec: MlpSpec, rng: np.random.Generator) -> "Mlp":
        """Initialise weights and biases from U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
        dims = spec.layer_dims()
        Ws, bs = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            Ws.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            bs.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(spec, Ws, bs)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        y = kernels.mlp_forward(np.ascontiguousarray(x), self.Ws, self.bs, self.acts)
        return y[0] if single else y

    def backward(self, x: np.ndarray, gy: np.ndarray):
        """Gradients of sum(gy * output) w.r.t. parameters and input.

        Returns ((dWs, dbs), dx).
        """
        x = np.asarray(x, dtype=np.float64)
        gy = np.asarray(gy, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
            gy = gy[None, :]
        dWs, dbs, dx = kernels.mlp_backward(
            np.ascontiguousarray(x), self.Ws, self.bs, self.acts,
            np.ascontiguousarray(gy))
        return (dWs, dbs), (dx[0] if single else dx)

    def update(self, grads, lr: float, algo: str = "adam",
               beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        """Apply one optimisation step from ``backward`` gradients."""
        dWs, dbs = grads
        if algo == "sgd":
            for W, dW in zip(self.Ws, dWs):
                kernels.sgd_step(W, dW, lr)
            for b, db in zip(self.bs, dbs):
                kernels.sgd_step(b, db, lr)
            return
        if algo != "adam":
            raise ValueError(f"unknown optimiser '{algo}'")
        self.t += 1
        for W, dW, m, v in zip(self.Ws, dWs, self.m_W, self.v_W):
            kernels.adam_step(W, dW, m, v, self.t, lr, beta1, beta2, eps)
        for b, db, m, v in zip(self.bs, dbs, self.m_b, self.v_b):
            kernels.adam_step(b, db, m, v, self.t, lr, beta1, beta2, eps)

    def polyak_from(self, src: "Mlp", tau: float):
        """theta' <- tau * theta + (1 - tau) * theta'."""
        for dst, s in zip(self.Ws, src.Ws):
            dst *= 1.0 - tau
            dst += tau * s
        for dst, s in zip(self.bs, src.bs):
            dst *= 1.0 - tau
            dst += tau * s

    def copy(self) -> "Mlp":
        clone = Mlp(self.spec, [W.copy() for W in self.Ws], [b.copy() for b in self.bs])
        clone.m_W = [m.copy() for m in self.m_W]
        clone.v_W = [v.copy() for v in self.v_W]
        clone.m_b = [m.copy() for m in self.m_b]
        clone.v_b = [v.copy() for v in self.v_b]
        clone.t = self.t
        return clone


def critic_spec(layout: CriticLayout, state_dim: int, n_actions: int = 1,
                cont_dim: int = 0, hidden: tuple[int, ...] = (64, 32)) -> MlpSpec:
    """Input/output shape of a critic for the given layout."""
    if layout is CriticLayout.CONTINUOUS:
        return MlpSpec(state_dim + cont_dim, hidden, 1)
    if layout is CriticLayout.DISCRETE:
        return MlpSpec(state_dim, hidden, n_actions)
    return MlpSpec(state_dim + cont_dim, hidden, n_actions)


def actor_spec(state_dim: int, act_dim: int,
               hidden: tuple[int, ...] = (32, 16, 8)) -> MlpSpec:
    return MlpSpec(state_dim, hidden, act_dim, out_act="tanh")


def save_mlps(path, mlps: dict[str, Mlp], meta: dict | None = None):
    """Serialise named networks (weights + Adam state) plus a JSON meta blob.

    Round-trips bitwise: float64 arrays are stored raw in an npz archive.
    """
    arrays = {}
    specs = {}
    for name, net in mlps.items():
        specs[name] = {
            "in_dim": net.spec.in_dim,
            "hidden": list(net.spec.hidden),
            "out_dim": net.spec.out_dim,
            "out_act": net.spec.out_act,
            "t": net.t,
        }
        for i, (W, b) in enumerate(zip(net.Ws, net.bs)):
            arrays[f"{name}.W{i}"] = W
            arrays[f"{name}.b{i}"] = b
            arrays[f"{name}.mW{i}"] = net.m_W[i]
            arrays[f"{name}.vW{i}"] = net.v_W[i]
            arrays[f"{name}.mb{i}"] = net.m_b[i]
            arrays[f"{name}.vb{i}"] = net.v_b[i]
    header = json.dumps({"specs": specs, "meta": meta or {}}, sort_keys=True)
    arrays["__header__"] = np.frombuffer(header.encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)


def load_mlps(path):
    """Inverse of ``save_mlps``; returns (dict name -> Mlp, meta dict)."""
    with np.load(path) as data:
        header = json.loads(bytes(data["__header__"]).decode("utf-8"))
        mlps = {}
        for name, info in header["specs"].items():
            spec = MlpSpec(info["in_dim"], tuple(info["hidden"]), info["out_dim"],
                           info["out_act"])
            n_layers = len(spec.hidden) + 1
            Ws = [data[f"{name}.W{i}"].copy() for i in range(n_layers)]
            bs = [data[f"{name}.b{i}"].copy() for i in range(n_layers)]
            net = Mlp(spec, Ws, bs)
            net.m_W = [data[f"{name}.mW{i}"].copy() for i in range(n_layers)]
            net.v_W = [data[f"{name}.vW{i}"].copy() for i in range(n_layers)]
            net.m_b = [data[f"{name}.mb{i}"].copy() for i in range(n_layers)]
            net.v_b = [data[f"{name}.vb{i}"].copy() for i in range(n_layers)]
            net.t = info["t"]
            mlps[name] = net
    return mlps, header["meta"]

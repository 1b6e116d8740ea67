"""Pure-numpy reference implementation of the hot kernels.

Signature-compatible with the optional compiled module ``_fast``; the active
implementation is chosen in ``optiondrive.kernels``.  All arrays are float64,
2-D ``(batch, dim)`` for the MLP kernels.

Activation codes: 0 = identity, 1 = relu, 2 = tanh.
"""

import numpy as np

BACKEND = "purepy"


def mlp_forward(x, Ws, bs, acts):
    h = x
    for W, b, code in zip(Ws, bs, acts):
        h = h @ W + b
        if code == 1:
            h = np.maximum(h, 0.0)
        elif code == 2:
            h = np.tanh(h)
    return h


def mlp_forward_all(x, Ws, bs, acts):
    """Forward pass returning every post-activation layer (input first)."""
    hs = [x]
    h = x
    for W, b, code in zip(Ws, bs, acts):
        h = h @ W + b
        if code == 1:
            h = np.maximum(h, 0.0)
        elif code == 2:
            h = np.tanh(h)
        hs.append(h)
    return hs


def mlp_backward(x, Ws, bs, acts, gy):
    """Backpropagate ``gy`` through the network.

    Returns (dWs, dbs, dx).  The forward activations are recomputed here so
    callers only need to keep the input around.
    """
    hs = mlp_forward_all(x, Ws, bs, acts)
    n = len(Ws)
    dWs = [None] * n
    dbs = [None] * n
    g = gy
    for layer in range(n - 1, -1, -1):
        out = hs[layer + 1]
        if acts[layer] == 1:
            g = g * (out > 0.0)
        elif acts[layer] == 2:
            g = g * (1.0 - out * out)
        dWs[layer] = hs[layer].T @ g
        dbs[layer] = g.sum(axis=0)
        g = g @ Ws[layer].T
    return dWs, dbs, g


def adam_step(p, g, m, v, t, lr, beta1, beta2, eps):
    """One Adam update, in place on ``p`` (``m``/``v`` updated in place too)."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)


def sgd_step(p, g, lr):
    p -= lr * g


def kbm_batch(x, y, psi, v, a, delta, lf, lr_axle, dt):
    """Explicit-Euler kinematic bicycle step for vehicle arrays, in place.

    The slip angle follows from the rear-axle reference point; speeds are
    clamped at zero (no reversing).
    """
    zeta = np.arctan(lr_axle / (lf + lr_axle) * np.tan(delta))
    cz = np.cos(zeta)
    x += dt * v * np.cos(psi + zeta)
    y += dt * v * np.sin(psi + zeta)
    psi += dt * (v / lr_axle) * np.sin(zeta)
    np.add(v, dt * a / cz, out=v)
    np.maximum(v, 0.0, out=v)
    psi += np.pi
    np.remainder(psi, 2.0 * np.pi, out=psi)
    psi -= np.pi

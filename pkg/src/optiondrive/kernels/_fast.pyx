# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementation of the hot kernels (see ``purepy`` for semantics).

Plain C loops beat BLAS dispatch for the small matrices used here (layer
widths 8..64, batch 64), mostly by avoiding per-call overhead.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan, cos, fmod, sin, sqrt, tan, tanh, M_PI

cnp.import_array()

BACKEND = "fast"


cdef void _affine(double[:, ::1] h, double[:, ::1] W, double[::1] b,
                  double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = h.shape[0], k = h.shape[1], m = W.shape[1]
    cdef Py_ssize_t i, j, l
    cdef double acc, hv
    for i in range(n):
        for j in range(m):
            out[i, j] = b[j]
    for i in range(n):
        for l in range(k):
            hv = h[i, l]
            if hv != 0.0:
                for j in range(m):
                    out[i, j] += hv * W[l, j]


cdef void _activate(double[:, ::1] h, int code) noexcept nogil:
    cdef Py_ssize_t i, j
    if code == 1:
        for i in range(h.shape[0]):
            for j in range(h.shape[1]):
                if h[i, j] < 0.0:
                    h[i, j] = 0.0
    elif code == 2:
        for i in range(h.shape[0]):
            for j in range(h.shape[1]):
                h[i, j] = tanh(h[i, j])


def mlp_forward(x, Ws, bs, acts):
    cdef double[:, ::1] h = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] out
    cdef int code
    for W, b, act in zip(Ws, bs, acts):
        out = np.empty((h.shape[0], W.shape[1]), dtype=np.float64)
        _affine(h, W, b, out)
        code = act
        if code != 0:
            _activate(out, code)
        h = out
    return np.asarray(h)


def mlp_forward_all(x, Ws, bs, acts):
    hs = [np.ascontiguousarray(x, dtype=np.float64)]
    cdef double[:, ::1] h = hs[0]
    cdef double[:, ::1] out
    cdef int code
    for W, b, act in zip(Ws, bs, acts):
        out_arr = np.empty((h.shape[0], W.shape[1]), dtype=np.float64)
        out = out_arr
        _affine(h, W, b, out)
        code = act
        if code != 0:
            _activate(out, code)
        hs.append(out_arr)
        h = out
    return hs


cdef void _act_grad(double[:, ::1] g, double[:, ::1] out, int code) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double o
    if code == 1:
        for i in range(g.shape[0]):
            for j in range(g.shape[1]):
                if out[i, j] <= 0.0:
                    g[i, j] = 0.0
    elif code == 2:
        for i in range(g.shape[0]):
            for j in range(g.shape[1]):
                o = out[i, j]
                g[i, j] *= (1.0 - o * o)


cdef void _grads(double[:, ::1] h, double[:, ::1] g, double[:, ::1] W,
                 double[:, ::1] dW, double[::1] db,
                 double[:, ::1] gx) noexcept nogil:
    cdef Py_ssize_t n = h.shape[0], k = h.shape[1], m = g.shape[1]
    cdef Py_ssize_t i, j, l
    cdef double hv, gv, acc
    for l in range(k):
        for j in range(m):
            dW[l, j] = 0.0
    for j in range(m):
        db[j] = 0.0
    for i in range(n):
        for j in range(m):
            db[j] += g[i, j]
        for l in range(k):
            hv = h[i, l]
            if hv != 0.0:
                for j in range(m):
                    dW[l, j] += hv * g[i, j]
    for i in range(n):
        for l in range(k):
            acc = 0.0
            for j in range(m):
                acc += g[i, j] * W[l, j]
            gx[i, l] = acc


def mlp_backward(x, Ws, bs, acts, gy):
    hs = mlp_forward_all(x, Ws, bs, acts)
    n = len(Ws)
    dWs = [None] * n
    dbs = [None] * n
    # always copy: _act_grad scales the running gradient in place and the
    # caller's gy must stay untouched (the numpy fallback never aliases it)
    g_arr = np.array(gy, dtype=np.float64, order="C")
    cdef double[:, ::1] g
    cdef double[:, ::1] gx
    cdef int code
    for layer in range(n - 1, -1, -1):
        g = g_arr
        code = acts[layer]
        if code != 0:
            _act_grad(g, hs[layer + 1], code)
        W = Ws[layer]
        dW = np.empty_like(W)
        db = np.empty(W.shape[1], dtype=np.float64)
        gx_arr = np.empty((g_arr.shape[0], W.shape[0]), dtype=np.float64)
        gx = gx_arr
        _grads(hs[layer], g, W, dW, db, gx)
        dWs[layer] = dW
        dbs[layer] = db
        g_arr = gx_arr
    return dWs, dbs, g_arr


def adam_step(p, g, m, v, t, lr, beta1, beta2, eps):
    cdef double[::1] pf = p.reshape(-1)
    cdef double[::1] gf = np.ascontiguousarray(g, dtype=np.float64).reshape(-1)
    cdef double[::1] mf = m.reshape(-1)
    cdef double[::1] vf = v.reshape(-1)
    cdef double b1 = beta1, b2 = beta2, lr_ = lr, eps_ = eps
    cdef double c1 = 1.0 - beta1 ** t, c2 = 1.0 - beta2 ** t
    cdef Py_ssize_t i
    cdef double mh, vh
    for i in range(pf.shape[0]):
        mf[i] = b1 * mf[i] + (1.0 - b1) * gf[i]
        vf[i] = b2 * vf[i] + (1.0 - b2) * gf[i] * gf[i]
        mh = mf[i] / c1
        vh = vf[i] / c2
        pf[i] -= lr_ * mh / (sqrt(vh) + eps_)


def sgd_step(p, g, lr):
    cdef double[::1] pf = p.reshape(-1)
    cdef double[::1] gf = np.ascontiguousarray(g, dtype=np.float64).reshape(-1)
    cdef double lr_ = lr
    cdef Py_ssize_t i
    for i in range(pf.shape[0]):
        pf[i] -= lr_ * gf[i]


def kbm_batch(x, y, psi, v, a, delta, lf, lr_axle, dt):
    cdef double[::1] xv = x, yv = y, pv = psi, vv = v
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] dv = np.ascontiguousarray(delta, dtype=np.float64)
    cdef double lf_ = lf, lr_ = lr_axle, dt_ = dt
    cdef double zeta, cz, vi, ps
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        zeta = atan(lr_ / (lf_ + lr_) * tan(dv[i]))
        cz = cos(zeta)
        vi = vv[i]
        xv[i] += dt_ * vi * cos(pv[i] + zeta)
        yv[i] += dt_ * vi * sin(pv[i] + zeta)
        ps = pv[i] + dt_ * (vi / lr_) * sin(zeta)
        ps = fmod(ps + M_PI, 2.0 * M_PI)
        if ps < 0.0:
            ps += 2.0 * M_PI
        pv[i] = ps - M_PI
        vi += dt_ * av[i] / cz
        vv[i] = vi if vi > 0.0 else 0.0

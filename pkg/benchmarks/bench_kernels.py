"""Compare the compiled kernel backend against the pure-numpy fallback.

Runs each hot kernel on agent-sized workloads (critic/actor shapes at the
training batch size, vehicle arrays at the densest traffic), checks that
the two backends agree bitwise-closely, then reports per-call timings.

Usage::

    python3 benchmarks/bench_kernels.py [--repeats N] [--batch B]
"""

import argparse
import importlib
import time

import numpy as np

from optiondrive.kernels import purepy


def load_fast():
    try:
        return importlib.import_module("optiondrive.kernels._fast")
    except ImportError:
        return None


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def mlp_case(rng, batch, sizes, acts):
    x = rng.normal(size=(batch, sizes[0]))
    Ws = [rng.normal(size=(a, b)) / np.sqrt(a)
          for a, b in zip(sizes[:-1], sizes[1:])]
    bs = [np.zeros(b) for b in sizes[1:]]
    gy = rng.normal(size=(batch, sizes[-1]))
    return x, Ws, bs, list(acts), gy


def check_close(name, got, want, tol=1e-12):
    err = float(np.max(np.abs(np.asarray(got) - np.asarray(want))))
    if err > tol:
        raise SystemExit(f"backend mismatch in {name}: max abs err {err:.3e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=200,
                    help="timing repetitions per kernel (best-of)")
    ap.add_argument("--batch", type=int, default=64,
                    help="minibatch size for the MLP kernels")
    args = ap.parse_args()

    fast = load_fast()
    if fast is None:
        print("compiled backend not available; nothing to compare")
        return

    rng = np.random.default_rng(0)
    rows = []

    # Critic-sized forward/backward (16 -> 64 -> 32 -> 6 heads) at the
    # action-selection batch of 1 and at the training minibatch.
    for batch in sorted({1, args.batch}):
        x, Ws, bs, acts, gy = mlp_case(rng, batch, (16, 64, 32, 6), (1, 1, 0))
        check_close("mlp_forward", fast.mlp_forward(x, Ws, bs, acts),
                    purepy.mlp_forward(x, Ws, bs, acts))
        fw, fb, fx = fast.mlp_backward(x, Ws, bs, acts, gy)
        pw, pb, px = purepy.mlp_backward(x, Ws, bs, acts, gy)
        for got, want in zip(fw + fb + [fx], pw + pb + [px]):
            check_close("mlp_backward", got, want)
        rows.append((f"mlp_forward 16-64-32-6 b{batch}",
                     time_call(lambda: purepy.mlp_forward(x, Ws, bs, acts),
                               args.repeats),
                     time_call(lambda: fast.mlp_forward(x, Ws, bs, acts),
                               args.repeats)))
        rows.append((f"mlp_backward 16-64-32-6 b{batch}",
                     time_call(
                         lambda: purepy.mlp_backward(x, Ws, bs, acts, gy),
                         args.repeats),
                     time_call(
                         lambda: fast.mlp_backward(x, Ws, bs, acts, gy),
                         args.repeats)))

    # Actor-sized tanh network: 16 -> 32 -> 16 -> 8 -> 2, single state.
    x2, Ws2, bs2, acts2, gy2 = mlp_case(rng, 1, (16, 32, 16, 8, 2),
                                        (1, 1, 1, 2))
    check_close("mlp_forward tanh", fast.mlp_forward(x2, Ws2, bs2, acts2),
                purepy.mlp_forward(x2, Ws2, bs2, acts2))
    rows.append(("mlp_forward 16-32-16-8-2 b1",
                 time_call(lambda: purepy.mlp_forward(x2, Ws2, bs2, acts2),
                           args.repeats),
                 time_call(lambda: fast.mlp_forward(x2, Ws2, bs2, acts2),
                           args.repeats)))

    # Adam on the largest critic layer.
    p0 = rng.normal(size=64 * 32)
    g = rng.normal(size=p0.size)
    mk = lambda: (p0.copy(), np.zeros(p0.size), np.zeros(p0.size))
    pp, pm, pv = mk()
    purepy.adam_step(pp, g, pm, pv, 3, 1e-3, 0.9, 0.999, 1e-8)
    fp, fm, fv = mk()
    fast.adam_step(fp, g, fm, fv, 3, 1e-3, 0.9, 0.999, 1e-8)
    check_close("adam_step", fp, pp)

    def adam_bench(mod):
        p, m, v = mk()
        return lambda: mod.adam_step(p, g, m, v, 3, 1e-3, 0.9, 0.999, 1e-8)

    rows.append(("adam_step 2048 params",
                 time_call(adam_bench(purepy), args.repeats),
                 time_call(adam_bench(fast), args.repeats)))

    # Vehicle integration at the densest traffic setting (~181 vehicles).
    n = 181

    def kbm_state():
        r = np.random.default_rng(7)
        return (r.normal(size=n) * 100, r.normal(size=n) * 3,
                r.normal(size=n) * 0.1, np.abs(r.normal(size=n)) * 30 + 5,
                r.normal(size=n), r.normal(size=n) * 0.05)

    sp = kbm_state()
    sf = kbm_state()
    purepy.kbm_batch(*sp, 1.17, 1.77, 0.1)
    fast.kbm_batch(*sf, 1.17, 1.77, 0.1)
    for got, want in zip(sf, sp):
        check_close("kbm_batch", got, want)

    def kbm_bench(mod):
        st = kbm_state()
        return lambda: mod.kbm_batch(*st, 1.17, 1.77, 0.1)

    rows.append((f"kbm_batch {n} vehicles",
                 time_call(kbm_bench(purepy), args.repeats),
                 time_call(kbm_bench(fast), args.repeats)))

    print(f"{'kernel':<28}{'purepy':>12}{'compiled':>12}{'speedup':>9}")
    for name, tp, tf in rows:
        print(f"{name:<28}{tp * 1e6:>10.1f}us{tf * 1e6:>10.1f}us"
              f"{tp / tf:>8.2f}x")
    print("all backends agree (max abs err <= 1e-12 on every kernel)")


if __name__ == "__main__":
    main()

"""Benchmark the numba kernels against the pure-numpy fallback.

Times the per-instance forward/backward passes for both model kinds and a
skip-gram update sweep, at the default working sizes (d=20, clause lengths
around the corpus median). Run directly:

    python benchmarks/kernel_bench.py [--repeats 20000]
"""

import argparse
import time

import numpy as np

from emocause.kernels import get_backend, numba_available


def bench(fn, args, repeats):
    fn(*args)  # warm-up / JIT compile outside the timed region
    start = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - start) / repeats


def forward_backward_cases(rng, kind, hops=3, k=9, d=20):
    emb = rng.uniform(-0.5, 0.5, (k, d))
    query = rng.uniform(-0.5, 0.5, d)
    wlen = d + 1 if kind == "basic" else 3 * d + 1
    w = rng.uniform(-0.5, 0.5, wlen)
    return emb, query, 2.0, w, 0.1, hops


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20000)
    parser.add_argument("--hops", type=int, default=3)
    parser.add_argument("--clause-length", type=int, default=9)
    parser.add_argument("--dim", type=int, default=20)
    args = parser.parse_args()

    numpy_backend = get_backend("numpy")
    backends = [("numpy", numpy_backend)]
    if numba_available():
        backends.append(("numba", get_backend("numba")))
    else:
        print("numba not importable; timing the fallback only")

    rng = np.random.default_rng(0)
    rows = []
    for kind in ("basic", "convms"):
        fwd_args = forward_backward_cases(rng, kind, args.hops, args.clause_length, args.dim)
        times = {}
        for name, mod in backends:
            fwd = mod.basic_forward if kind == "basic" else mod.convms_forward
            bwd = mod.basic_backward if kind == "basic" else mod.convms_backward
            emb, query, dist, w, bias, hops = fwd_args
            p, scores, attn, queries, outputs = fwd(emb, query, dist, w, bias, hops)
            times[f"{name}.forward"] = bench(fwd, fwd_args, args.repeats)
            times[f"{name}.backward"] = bench(
                bwd, (emb, dist, w, p, 1.0, attn, queries, outputs), args.repeats)
        rows.append((kind, times))

    v, d, n, kneg = 500, args.dim, 5000, 5
    centers = rng.integers(0, v, n)
    contexts = rng.integers(0, v, n)
    negatives = rng.integers(0, v, (n, kneg))
    sg_times = {}
    for name, mod in backends:
        def run_epoch(mod=mod):
            w_in = rng.uniform(-0.02, 0.02, (v, d))
            w_out = np.zeros((v, d))
            mod.skipgram_pairs(w_in, w_out, centers, contexts, negatives,
                               0.025, 0.025e-4, 0, n)
        run_epoch()
        start = time.perf_counter()
        reps = max(1, args.repeats // 2000)
        for _ in range(reps):
            run_epoch()
        sg_times[name] = (time.perf_counter() - start) / reps

    print(f"\nper-call times (hops={args.hops}, k={args.clause_length}, d={args.dim}, "
          f"{args.repeats} repeats)")
    print(f"{'kernel':<18} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for kind, times in rows:
        for stage in ("forward", "backward"):
            np_t = times[f"numpy.{stage}"]
            if f"numba.{stage}" in times:
                nb_t = times[f"numba.{stage}"]
                print(f"{kind + '.' + stage:<18} {np_t * 1e6:>10.2f}us {nb_t * 1e6:>10.2f}us "
                      f"{np_t / nb_t:>8.1f}x")
            else:
                print(f"{kind + '.' + stage:<18} {np_t * 1e6:>10.2f}us {'-':>12} {'-':>9}")
    np_t = sg_times["numpy"]
    if "numba" in sg_times:
        nb_t = sg_times["numba"]
        print(f"{'skipgram.epoch':<18} {np_t * 1e3:>10.2f}ms {nb_t * 1e3:>10.2f}ms "
              f"{np_t / nb_t:>8.1f}x")
    else:
        print(f"{'skipgram.epoch':<18} {np_t * 1e3:>10.2f}ms {'-':>12} {'-':>9}")


if __name__ == "__main__":
    main()

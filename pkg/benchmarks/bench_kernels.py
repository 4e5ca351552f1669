"""Time the numba kernels against their pure-numpy counterparts.

Both variants are imported directly, so the env flag does not matter here.
Each kernel is called once before timing to trigger compilation, then timed
as the best of ``--repeat`` runs. Outputs are checked for equality first.

    python3 benchmarks/bench_kernels.py --docs 2000 --labels 500
"""
import argparse
import time

import numpy as np

from corank import _backend, kernels
from corank.rerank import frequency_order


def best_of(fn, args, repeat):
    fn(*args)  # warm-up / compile
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def make_inputs(n_docs, n_labels, labels_per_doc, seed):
    rng = np.random.default_rng(seed)
    indptr = np.zeros(n_docs + 1, dtype=np.int64)
    flat = []
    weights = 1.0 / np.arange(1, n_labels + 1)
    weights /= weights.sum()
    for r in range(n_docs):
        n = int(rng.integers(1, 2 * labels_per_doc))
        flat.extend(sorted(rng.choice(n_labels, size=min(n, n_labels), replace=False, p=weights)))
        indptr[r + 1] = len(flat)
    indices = np.asarray(flat, dtype=np.int64)
    scores = rng.random((n_docs, n_labels)) ** 4
    truth = np.zeros((n_docs, n_labels), dtype=np.uint8)
    for r in range(n_docs):
        truth[r, indices[indptr[r]:indptr[r + 1]]] = 1
    return indptr, indices, scores, truth


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--docs", type=int, default=2000)
    parser.add_argument("--labels", type=int, default=500)
    parser.add_argument("--labels-per-doc", type=int, default=4)
    parser.add_argument("--gamma", type=int, default=20)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if not _backend.HAVE_NUMBA:
        print("numba is not installed; only the numpy path exists")
        return 1

    indptr, indices, scores, truth = make_inputs(args.docs, args.labels, args.labels_per_doc, args.seed)
    K = args.labels
    counts = kernels.cooccurrence_counts_np(indptr, indices, K)
    freq = np.diag(counts).copy()
    order, rank = frequency_order(freq)
    ks = np.array([1, 3, 5], dtype=np.int64)

    cases = [
        ("cooccurrence", kernels.cooccurrence_counts_np, kernels.cooccurrence_counts_jit, (indptr, indices, K)),
        ("rerank", kernels.rerank_rows_np, kernels.rerank_rows_jit,
         (scores, counts, order, rank, 0.3, args.gamma, kernels.MODE_FULL)),
        ("metrics", kernels.ranking_metrics_np, kernels.ranking_metrics_jit, (scores, truth, ks)),
    ]
    print(f"docs={args.docs} labels={K} gamma={args.gamma} best of {args.repeat}")
    print(f"{'kernel':<14}{'numpy [ms]':>12}{'numba [ms]':>12}{'speed-up':>10}")
    for name, np_fn, jit_fn, fn_args in cases:
        a, b = np_fn(*fn_args), jit_fn(*fn_args)
        for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            np.testing.assert_array_equal(x, y)
        t_np = best_of(np_fn, fn_args, args.repeat)
        t_jit = best_of(jit_fn, fn_args, args.repeat)
        print(f"{name:<14}{1e3 * t_np:>12.2f}{1e3 * t_jit:>12.2f}{t_np / t_jit:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

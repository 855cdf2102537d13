"""Compiled vs NumPy grouped NDCG, alone and inside coordinate-ascent training.

    python benchmarks/bench_kernels.py [--queries N] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from attrid import _pykernels, kernels, ltr
from attrid.synthetic import linear_feature_dataset


def time_kernel(fn, data, scores, repeat):
    args = (scores, data.inst_attr, data.attr_gains, data.attr_offsets, data.ideal_dcg, data.k)
    return min(timeit.repeat(lambda: fn(*args), number=50, repeat=repeat)) / 50


def time_training(fn, data, repeat):
    saved = kernels.grouped_ndcg
    kernels.grouped_ndcg = fn
    try:
        return min(timeit.repeat(lambda: ltr.ca_train(data, restarts=3, seed=0), number=1, repeat=repeat))
    finally:
        kernels.grouped_ndcg = saved


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--queries", type=int, default=200)
    p.add_argument("--attrs", type=int, default=30)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()

    data = ltr.RankingData(linear_feature_dataset(args.queries, args.attrs, seed=1))
    scores = np.random.default_rng(0).normal(size=len(data.instances))
    backends = {"numpy": _pykernels.grouped_ndcg}
    if kernels._ckernels is not None:
        backends["cython"] = kernels._ckernels.grouped_ndcg
        a = backends["cython"](scores, data.inst_attr, data.attr_gains, data.attr_offsets, data.ideal_dcg, data.k)
        b = backends["numpy"](scores, data.inst_attr, data.attr_gains, data.attr_offsets, data.ideal_dcg, data.k)
        assert np.allclose(a, b, atol=1e-12)
    else:
        print("compiled kernels not built; timing the NumPy fallback only")

    print(f"{args.queries} queries x {args.attrs} attributes ({len(data.instances)} instances)")
    print(f"{'backend':<8}{'grouped_ndcg':>16}{'ca_train (3 restarts)':>24}")
    rows = {}
    for name, fn in backends.items():
        rows[name] = (time_kernel(fn, data, scores, args.repeat), time_training(fn, data, args.repeat))
        k, t = rows[name]
        print(f"{name:<8}{k * 1e6:>13.1f} us{t:>22.3f} s")
    if len(rows) == 2:
        print(f"speedup: kernel {rows['numpy'][0] / rows['cython'][0]:.1f}x, "
              f"training {rows['numpy'][1] / rows['cython'][1]:.1f}x")


if __name__ == "__main__":
    main()

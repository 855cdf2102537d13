"""NumPy implementations of the compiled kernels; same signatures and results."""

import numpy as np


def grouped_ndcg(inst_scores, inst_attr, attr_gains, attr_offsets, ideal_dcg, k):
    n_attr = attr_gains.shape[0]
    n_q = ideal_dcg.shape[0]
    attr_score = np.full(n_attr, -np.inf)
    np.maximum.at(attr_score, inst_attr, inst_scores)
    query_of = np.repeat(np.arange(n_q), np.diff(attr_offsets))
    slot = np.arange(n_attr)
    order = np.lexsort((slot, -attr_score, query_of))
    rank = slot - attr_offsets[query_of[order]]
    keep = rank < k
    contrib = attr_gains[order[keep]] / np.log2(rank[keep] + 2.0)
    dcg = np.bincount(query_of[order[keep]], weights=contrib, minlength=n_q)
    out = np.zeros(n_q)
    ok = ideal_dcg > 0
    out[ok] = dcg[ok] / ideal_dcg[ok]
    return out

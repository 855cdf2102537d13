"""Acceptance checks, one per gating criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see a PASS/FAIL line for
each; ``python tests/test_acceptance.py`` prints the same lines standalone.
"""

import math
import random
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from attrid.baselines import BaselineParams, bm25_scores, build_index, lm_scores, mlm_scores, rank_attributes_baseline  # noqa: E402
from attrid.cli import main as cli_main  # noqa: E402
from attrid.embedding import WordVectorStore  # noqa: E402
from attrid.evaluation import (  # noqa: E402
    Qrels,
    RunList,
    build_candidate_pool,
    compute_metrics,
    fleiss_kappa,
    paired_t_test,
)
from attrid.kb import KnowledgeBase, load_kb  # noqa: E402
from attrid.linker import Link, QueryAnnotation  # noqa: E402
from attrid.ltr import N_FEATURES, RankingData, ca_train, cross_validate  # noqa: E402
from attrid.mrf import MrfParams, f2_attr_entity, f3_term_entity, rank_attributes_mrf  # noqa: E402
from attrid.synthetic import linear_feature_dataset, synonym_collection  # noqa: E402

from oracles import bm25_oracle, lm_oracle, mlm_oracle, mrf_oracle  # noqa: E402

DATA = Path(__file__).parent / "data"
RESULTS = {}


def report(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    RESULTS[name] = line
    print(line)
    return ok


# Oracle equivalence on random KBs

WORDS = ["red", "blue", "green", "river", "stone", "city", "king", "queen", "north", "south", "gold", "iron"]
ATTRS = ["spouse", "birthPlace", "deathPlace", "colour", "riverMouth", "goldMedal", "kingOf", "name"]


def random_case(rng):
    n_ent = rng.randint(1, 10)
    triples = []
    for e in range(n_ent):
        for a in rng.sample(ATTRS, rng.randint(1, 6)):
            for _ in range(rng.randint(1, 2)):
                triples.append((f"E{e}", a, " ".join(rng.choices(WORDS + ATTRS, k=rng.randint(1, 3)))))
    vocab = sorted(set(WORDS) | {"place", "mouth", "medal", "of", "birth", "death", "river"})
    vectors = {w: [rng.gauss(0, 1) for _ in range(4)] for w in vocab if rng.random() < 0.8}
    terms = rng.choices(WORDS + ["spouse", "zebra", "birth", "of"], k=rng.randint(1, 4))
    linked = sorted(rng.sample(sorted({e for e, _, _ in triples}), rng.randint(1, min(2, n_ent))))
    return triples, vectors, terms, linked


def check_oracle_equivalence(n_cases=250, seed=2024):
    rng = random.Random(seed)
    params = MrfParams()
    bp = BaselineParams()
    worst = {"mrf": 0.0, "lm": 0.0, "mlm": 0.0}
    bm25_exact = True
    start = time.perf_counter()
    for _ in range(n_cases):
        triples, vectors, terms, linked = random_case(rng)
        kb = KnowledgeBase.from_triples(triples)
        store = WordVectorStore.from_dict({w: np.asarray(v) for w, v in vectors.items()})
        ann = QueryAnnotation("q", " ".join(terms), tuple(terms), tuple(Link(e, 0, 1) for e in linked))
        for c in rank_attributes_mrf(kb, store, ann, params):
            want = mrf_oracle(triples, vectors, terms, linked, c.attribute, (0.6, 0.2, 0.2), (0.5, 0.5))
            worst["mrf"] = max(worst["mrf"], abs(c.score - want))

        idx = build_index(kb)
        ids = idx.doc_ids
        got = {ids[d]: s for d, s in bm25_scores(idx, terms, bp.k1, bp.b).items()}
        bm25_exact &= got == bm25_oracle(triples, terms, bp.k1, bp.b)
        for name, ours, theirs in (
            ("lm", lm_scores(idx, terms, bp.mu), lm_oracle(triples, terms, bp.mu)),
            ("mlm", mlm_scores(idx, terms, bp.w_title, bp.w_content, bp.mu),
             mlm_oracle(triples, terms, bp.w_title, bp.w_content, bp.mu)),
        ):
            ours = {ids[d]: s for d, s in ours.items()}
            if ours.keys() != theirs.keys():
                worst[name] = math.inf
                continue
            worst[name] = max([worst[name]] + [abs(ours[d] - theirs[d]) for d in ours])
    elapsed = time.perf_counter() - start
    ok = bm25_exact and max(worst.values()) <= 1e-10 and elapsed < 10.0
    detail = (f"{n_cases} random KBs; BM25 exact={bm25_exact}; max |diff| mrf={worst['mrf']:.1e} "
              f"lm={worst['lm']:.1e} mlm={worst['mlm']:.1e}; {elapsed:.2f}s (limit 10s)")
    return report("oracle equivalence", ok, detail)


def check_metric_fixtures():
    qrels = Qrels({"q": {"a": 2, "b": 1, "c": 0}})
    ideal = compute_metrics(RunList("r", {"q": [("a", 3.0), ("b", 2.0), ("c", 1.0)]}), qrels).per_query["q"]
    worse = compute_metrics(RunList("r", {"q": [("c", 3.0), ("a", 2.0), ("b", 1.0)]}), qrels).per_query["q"]
    missing = compute_metrics(RunList("r", {}), qrels).per_query["q"]
    hand = (3 / math.log2(3) + 1 / 2) / (3 + 1 / math.log2(3))
    ok = (
        ideal == {"ndcg": 1.0, "p": 0.4, "mrr": 1.0, "map": 1.0}
        and abs(worse["ndcg"] - 0.6590) <= 1e-4 and abs(worse["ndcg"] - hand) <= 1e-12
        and worse["mrr"] == 0.5
        and all(v == 0.0 for v in missing.values())
    )
    return report("metric fixtures", ok, f"ideal={ideal}, NDCG@5 [c,a,b]={worse['ndcg']:.6f} (0.6590), MRR={worse['mrr']}")


def check_f2_f3_fixture():
    kb = load_kb(DATA / "mini.kb.tsv")
    f2 = f2_attr_entity(kb, "spouse", "Lincoln", 0.5)
    f3 = f3_term_entity(kb, "spouse", "Lincoln", 0.5)
    want = math.log(11 / 30)
    ok = abs(f2 - want) <= 1e-12 and abs(f3 - want) <= 1e-12
    return report("f2/f3 fixture", ok, f"f2={f2:.12f} f3={f3:.12f} log(11/30)={want:.12f}")


def check_coordinate_ascent(seed=0):
    start = time.perf_counter()
    insts = linear_feature_dataset(n_queries=50, seed=seed)
    full = cross_validate(insts, folds=5, restarts=3, seed=seed)
    singles = [cross_validate(insts, folds=5, restarts=3, seed=seed, feature=j).ndcg for j in range(N_FEATURES)]
    monotone = all(all(b > a for a, b in zip(t, t[1:])) for m in full.models for t in m.traces)
    data = RankingData(insts)
    identical = ca_train(data, 3, seed=7).dumps() == ca_train(data, 3, seed=7).dumps()
    elapsed = time.perf_counter() - start
    best = max(singles)
    ok = full.ndcg >= best and monotone and identical and elapsed < 60.0
    detail = (f"CV NDCG@5 LTR={full.ndcg:.4f} >= best single feature f{singles.index(best) + 1}={best:.4f}; "
              f"monotone traces={monotone}; byte-identical models={identical}; {elapsed:.1f}s (limit 60s)")
    return report("coordinate ascent", ok, detail)


def check_ranking_dominance(seed=0):
    coll = synonym_collection(n_queries=50, seed=seed)
    kb, qrels = coll.kb, coll.qrels
    index = build_index(kb)
    runs = {"mrf": RunList("mrf")}
    for ann in coll.annotations:
        runs["mrf"].add(ann.query_id, [(c.attribute, c.score) for c in rank_attributes_mrf(kb, coll.store, ann, MrfParams())])
    for method in ("bm25", "lm", "mlm"):
        runs[method] = RunList(method)
        for ann in coll.annotations:
            runs[method].add(ann.query_id, rank_attributes_baseline(index, kb, ann, method))
    evals = {name: compute_metrics(run, qrels) for name, run in runs.items()}
    qids = sorted(qrels)
    parts, ok = [], True
    for method in ("bm25", "lm", "mlm"):
        res = paired_t_test(evals["mrf"].series("ndcg", qids), evals[method].series("ndcg", qids))
        beats = evals["mrf"].mean("ndcg") > evals[method].mean("ndcg")
        ok &= beats and res.p < 0.05
        parts.append(f"{method}={evals[method].mean('ndcg'):.4f} (p={res.p:.2g})")
    detail = f"NDCG@5 mrf={evals['mrf'].mean('ndcg'):.4f} vs " + ", ".join(parts)
    return report("ranking dominance", ok, detail)


def check_statistics():
    # ten differences with mean 2.262*s/sqrt(10) and sample sd s = 1
    z = np.array([-1.0, 1.0] * 5) * math.sqrt(9 / 10)
    d = 2.262 / math.sqrt(10) + z
    res = paired_t_test(list(d), [0.0] * 10)
    perfect = fleiss_kappa([[3, 0], [0, 3], [3, 0]])
    two = fleiss_kappa([[1, 1], [2, 0]])
    ok = abs(res.t - 2.262) < 1e-9 and abs(res.p - 0.050) <= 0.001 and perfect == 1.0 and abs(two - (-1 / 3)) <= 1e-12
    return report("statistics", ok, f"t={res.t:.3f} dof=9 p={res.p:.4f}; kappa perfect={perfect}, 2x2={two:.12f} (-1/3)")


def check_pooling():
    kb = load_kb(DATA / "mini.kb.tsv")
    ann = [QueryAnnotation.from_text("q", "wife of lincoln", [Link("Lincoln", 2, 3)])]
    cases = [({"q": {"Mary_Todd"}}, {"spouse"}), ({"q": set()}, set()), ({"q": {"Washington", "Mary_Todd"}}, {"spouse", "deathPlace"})]
    got = [build_candidate_pool(kb, ann, rel)["q"] for rel, _ in cases]
    ok = all(g == want for g, (_, want) in zip(got, cases))
    return report("pooling", ok, f"pools={[sorted(g) for g in got]}")


def check_end_to_end(tmp):
    """Optional, not gating: rank with mrf then evaluate through the CLI."""
    paths = synonym_collection(n_queries=20, seed=5).write(tmp)
    run = Path(tmp) / "mrf.run"
    table = Path(tmp) / "table.txt"
    rc1 = cli_main(["rank", "--method", "mrf", "--kb", paths["kb"], "--vectors", paths["vectors"],
                    "--annotations", paths["annotations"], "--out", str(run)])
    rc2 = cli_main(["evaluate", str(run), "--qrels", paths["qrels"], "--out", str(table)])
    ok = rc1 == rc2 == 0 and table.read_text().splitlines()[1].startswith("mrf")
    return report("end-to-end harness (optional)", ok, "rank --method mrf + evaluate exit 0, table written")


class TestAcceptance:
    def test_oracle_equivalence(self):
        assert check_oracle_equivalence()

    def test_metric_fixtures(self):
        assert check_metric_fixtures()

    def test_f2_f3_fixture(self):
        assert check_f2_f3_fixture()

    def test_coordinate_ascent(self):
        assert check_coordinate_ascent()

    def test_ranking_dominance(self):
        assert check_ranking_dominance()

    def test_statistics(self):
        assert check_statistics()

    def test_pooling(self):
        assert check_pooling()

    def test_end_to_end_optional(self, tmp_path):
        if not check_end_to_end(tmp_path):
            pytest.xfail("optional harness check failed")


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        results = [
            check_oracle_equivalence(), check_metric_fixtures(), check_f2_f3_fixture(), check_coordinate_ascent(),
            check_ranking_dominance(), check_statistics(), check_pooling(),
        ]
        check_end_to_end(tmp)
    sys.exit(0 if all(results) else 1)

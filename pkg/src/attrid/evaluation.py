"""Graded-relevance evaluation, significance testing, agreement and pooling.

File formats (whitespace separated)::

    qrels:  qid 0 attribute grade        grade in {0, 1, 2}
    run:    qid Q0 attribute rank score tag
"""

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple

from attrid.errors import AttrIdError, ParseError
from attrid.text import normalize_entity_ref

GRADES = (0, 1, 2)
METRICS = ("ndcg", "p", "mrr", "map")


class Qrels(dict):
    """qid -> {attribute: grade}. Unjudged attributes read as grade 0."""

    def grade(self, qid, attribute):
        return self.get(qid, {}).get(attribute, 0)

    @classmethod
    def from_pairs(cls, items):
        q = cls()
        for (qid, attr), g in items.items():
            if g not in GRADES:
                raise ValueError(f"grade {g!r} not in {GRADES}")
            q.setdefault(qid, {})[attr] = g
        return q


@dataclass
class RunList:
    """qid -> ordered [(attribute, score)], plus a run tag."""

    tag: str = "run"
    rankings: dict = field(default_factory=dict)

    def __post_init__(self):
        for qid, ranking in self.rankings.items():
            self._check(qid, ranking)

    @staticmethod
    def _check(qid, ranking):
        attrs = [a for a, _ in ranking]
        if len(set(attrs)) != len(attrs):
            raise ValueError(f"query {qid}: duplicate attributes in ranking")
        scores = [s for _, s in ranking]
        if any(b > a for a, b in zip(scores, scores[1:])):
            raise ValueError(f"query {qid}: scores must be non-increasing")

    def add(self, qid, ranking):
        ranking = list(ranking)
        self._check(qid, ranking)
        self.rankings[qid] = ranking

    def attributes(self, qid):
        return [a for a, _ in self.rankings.get(qid, ())]


def load_qrels(path):
    qrels = Qrels()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            cols = line.split()
            if not cols or cols[0].startswith("#"):
                continue
            if len(cols) != 4:
                raise ParseError(f"expected 4 columns, got {len(cols)}", path, lineno)
            qid, _, attr, grade = cols
            try:
                grade = int(grade)
            except ValueError:
                raise ParseError(f"non-integer grade {grade!r}", path, lineno) from None
            if grade not in GRADES:
                raise ParseError(f"grade {grade} not in {GRADES}", path, lineno)
            qrels.setdefault(qid, {})[attr] = grade
    return qrels


def write_qrels(qrels, fh):
    for qid in sorted(qrels):
        for attr in sorted(qrels[qid]):
            fh.write(f"{qid} 0 {attr} {qrels[qid][attr]}\n")


def format_run(run):
    lines = []
    for qid in sorted(run.rankings):
        for rank, (attr, score) in enumerate(run.rankings[qid], 1):
            lines.append(f"{qid} Q0 {attr} {rank} {score:.6f} {run.tag}\n")
    return "".join(lines)


def write_run(run, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_run(run))


def load_run(path):
    rows = defaultdict(list)
    tag = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            cols = line.split()
            if not cols:
                continue
            if len(cols) != 6:
                raise ParseError(f"expected 6 columns, got {len(cols)}", path, lineno)
            qid, _, attr, rank, score, run_tag = cols
            try:
                rank, score = int(rank), float(score)
            except ValueError:
                raise ParseError("non-numeric rank or score", path, lineno) from None
            tag = tag or run_tag
            rows[qid].append((rank, attr, score))
    run = RunList(tag or "run")
    for qid, items in rows.items():
        items.sort(key=lambda x: x[0])
        try:
            run.add(qid, [(a, s) for _, a, s in items])
        except ValueError as exc:
            raise ParseError(str(exc), path) from None
    return run


def _gain(grade):
    return 2.0**grade - 1.0


def dcg(grades, k):
    return sum(_gain(g) / math.log2(i + 2) for i, g in enumerate(grades[:k]))


def query_metrics(ranked_attrs, judgments, k=5):
    """NDCG@k, P@k, MRR and AP for one query; binary metrics count grade >= 1."""
    grades = [judgments.get(a, 0) for a in ranked_attrs]
    ideal = dcg(sorted(judgments.values(), reverse=True), k)
    n_rel = sum(1 for g in judgments.values() if g >= 1)
    out = dict.fromkeys(METRICS, 0.0)
    if n_rel == 0:
        return out
    out["ndcg"] = dcg(grades, k) / ideal if ideal > 0 else 0.0
    out["p"] = sum(1 for g in grades[:k] if g >= 1) / k
    hits = 0
    ap = 0.0
    for i, g in enumerate(grades, 1):
        if g >= 1:
            hits += 1
            ap += hits / i
            if hits == 1:
                out["mrr"] = 1.0 / i
    out["map"] = ap / n_rel
    return out


@dataclass
class Evaluation:
    per_query: dict
    k: int

    def mean(self, metric):
        vals = [m[metric] for m in self.per_query.values()]
        return sum(vals) / len(vals) if vals else 0.0

    def means(self):
        return {m: self.mean(m) for m in METRICS}

    def series(self, metric, qids=None):
        qids = sorted(self.per_query) if qids is None else qids
        return [self.per_query[q][metric] for q in qids]


def compute_metrics(run, qrels, k=5):
    """Score every judged query; queries missing from the run score 0."""
    if k <= 0:
        raise ValueError("cutoff k must be positive")
    extra = set(run.rankings) - set(qrels)
    if extra:
        raise AttrIdError(f"run has queries absent from qrels: {sorted(extra)[:5]}")
    per_query = {qid: query_metrics(run.attributes(qid), qrels[qid], k) for qid in qrels}
    return Evaluation(per_query, k)


# Student-t p-values from the regularized incomplete beta function.

def _betacf(a, b, x, tol=1e-12, max_iter=500):
    """Continued fraction of I_x(a, b), modified Lentz method."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a, b, x):
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def student_t_two_tailed(t, dof):
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t))


class TTestResult(NamedTuple):
    t: float
    p: float
    significant: bool


def paired_t_test(a, b, alpha=0.05):
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    n = len(a)
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    diffs = [x - y for x, y in zip(a, b)]
    mean = sum(diffs) / n
    if all(d == 0 for d in diffs):
        return TTestResult(0.0, 1.0, False)
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        t = math.copysign(math.inf, mean)
    else:
        t = mean / math.sqrt(var / n)
    p = student_t_two_tailed(t, n - 1)
    return TTestResult(t, p, p < alpha)


def fleiss_kappa(counts):
    """Fleiss' kappa over an items x categories matrix of rating counts."""
    rows = [list(r) for r in counts]
    if not rows:
        raise ValueError("no items")
    n = sum(rows[0])
    if n < 2:
        raise ValueError("each item needs at least 2 ratings")
    if any(sum(r) != n for r in rows):
        raise ValueError("every item must have the same number of ratings")
    if any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("ragged category counts")
    n_items = len(rows)
    p_items = [(sum(c * c for c in r) - n) / (n * (n - 1)) for r in rows]
    p_bar = sum(p_items) / n_items
    p_cat = [sum(r[j] for r in rows) / (n_items * n) for j in range(len(rows[0]))]
    p_e = sum(p * p for p in p_cat)
    if p_e == 1.0:
        if p_bar == 1.0:
            return 1.0
        raise ValueError("kappa undefined: chance agreement is 1")
    return (p_bar - p_e) / (1.0 - p_e)


def labels_to_counts(item_labels):
    """Per-item annotator labels -> count matrix over the sorted label set."""
    cats = sorted({lab for labs in item_labels for lab in labs})
    pos = {c: i for i, c in enumerate(cats)}
    rows = []
    for labs in item_labels:
        row = [0] * len(cats)
        for lab in labs:
            row[pos[lab]] += 1
        rows.append(row)
    return rows, cats


def load_labels(path):
    """``item<TAB>label<TAB>label...`` rows, one per judged item."""
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            cols = line.split()
            if not cols or cols[0].startswith("#"):
                continue
            if len(cols) < 3:
                raise ParseError("need an item id and at least 2 labels", path, lineno)
            items.append(cols[1:])
    return items


def build_candidate_pool(kb, annotations, relevant_entities):
    """Attributes of linked entities whose value names a relevant entity."""
    pools = {}
    for ann in annotations:
        relevant = {normalize_entity_ref(r) for r in relevant_entities.get(ann.query_id, ())}
        pool = set()
        if relevant:
            for eid in ann.linked_entities(kb):
                for p in kb.entities[eid].pairs:
                    if normalize_entity_ref(p.value) in relevant:
                        pool.add(p.attribute)
        pools[ann.query_id] = pool
    return pools


def load_relevant_entities(path):
    """``qid<TAB>entity`` rows, or TREC qrels ``qid Q0 entity grade`` (grade > 0 kept)."""
    out = defaultdict(set)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            cols = line.split()
            if not cols or cols[0].startswith("#"):
                continue
            if len(cols) == 2:
                out[cols[0]].add(cols[1])
            elif len(cols) == 4:
                try:
                    grade = int(cols[3])
                except ValueError:
                    raise ParseError("non-integer grade", path, lineno) from None
                if grade > 0:
                    out[cols[0]].add(cols[2])
            else:
                raise ParseError(f"expected 2 or 4 columns, got {len(cols)}", path, lineno)
    return dict(out)


def load_categories(path):
    cats = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise ParseError("expected qid<TAB>category", path, lineno)
            cats[cols[0]] = cols[1]
    return cats

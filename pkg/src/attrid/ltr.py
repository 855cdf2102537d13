"""Learning to rank attributes with a linear model trained by coordinate ascent.

Instances are (query, entity, attribute) triples described by seven features:

====  =========================================================
f1    sum over query terms of the term/entity feature (MRF f3)
f2    attribute/entity feature (MRF f2)
f3    sum over query terms of the term/attribute feature (MRF f1)
f4    taxonomy similarity, linked terms vs attribute-value text
f5    vector similarity, linked terms vs attribute-value text
f6    taxonomy similarity, not-linked terms
f7    vector similarity, not-linked terms
====  =========================================================

An attribute's score for a query is the best score over its instances.
"""

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from attrid import kernels
from attrid.errors import ParseError, TrainingError
from attrid.evaluation import Qrels, RunList, compute_metrics, dcg
from attrid.linker import split_terms
from attrid.mrf import MrfScorer, f2_attr_entity, sort_ranking
from attrid.text import tokenize

logger = logging.getLogger(__name__)

N_FEATURES = 7
FEATURE_NAMES = tuple(f"f{i}" for i in range(1, N_FEATURES + 1))
STEP_LADDER = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0)
MIN_GAIN = 1e-6
MAX_PASSES = 100
MODEL_MAGIC = "CAV1"


@dataclass(frozen=True)
class FeatureVector:
    values: tuple
    present: int = (1 << N_FEATURES) - 1

    def __post_init__(self):
        if len(self.values) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} feature values")

    def __getitem__(self, i):
        return self.values[i]

    def is_present(self, i):
        return bool(self.present >> i & 1)


@dataclass(frozen=True)
class TrainingInstance:
    query_id: str
    attribute: str
    entity: str
    features: FeatureVector
    grade: int = 0


def _mean_best_similarity(terms, tokens, sim):
    """Mean over terms of the best similarity to any token; None if nothing comparable."""
    best_per_term = []
    for t in sorted(terms):
        sims = [s for s in (sim(t, w) for w in tokens) if s is not None]
        if sims:
            best_per_term.append(max(sims))
    if not best_per_term:
        return None
    return sum(best_per_term) / len(best_per_term)


class FeatureExtractor:
    """Per-query feature extraction sharing the MRF caches across instances."""

    def __init__(self, kb, store, tax, ann, params, stopwords=None):
        self.kb = kb
        self.store = store
        self.tax = tax
        self.ann = ann
        self.params = params
        self.mrf = MrfScorer(kb, store, ann, params, stopwords)
        self.linked, self.not_linked = split_terms(ann, stopwords)

    def extract(self, attribute, entity_id):
        ent = self.kb.entity(entity_id)
        values = ent.values_of(attribute)
        if not values:
            raise ValueError(f"attribute {attribute!r} does not occur in entity {entity_id!r}")
        p = self.params
        text_tokens = tokenize(attribute) + [t for v in values for t in tokenize(v)]
        vals = [
            self.mrf.term_entity_sum(entity_id),
            f2_attr_entity(self.kb, attribute, entity_id, p.mu1, p.epsilon),
            self.mrf.term_attr_sum(attribute),
        ]
        present = 0b111
        sims = (
            (self.linked, self.tax.path_similarity if self.tax else None),
            (self.linked, self.store.cosine_similarity),
            (self.not_linked, self.tax.path_similarity if self.tax else None),
            (self.not_linked, self.store.cosine_similarity),
        )
        for i, (terms, sim) in enumerate(sims, start=3):
            v = _mean_best_similarity(terms, text_tokens, sim) if terms and sim else None
            if v is None:
                vals.append(0.0)
            else:
                vals.append(v)
                present |= 1 << i
        return FeatureVector(tuple(vals), present)


def extract_features(kb, store, tax, ann, attribute, entity_id, params, stopwords=None):
    return FeatureExtractor(kb, store, tax, ann, params, stopwords).extract(attribute, entity_id)


def build_instances(kb, store, tax, annotations, qrels, params, stopwords=None):
    """Every (linked entity, attribute) of every query; unjudged pairs get grade 0."""
    qrels = Qrels(qrels or {})
    out = []
    for ann in annotations:
        fx = FeatureExtractor(kb, store, tax, ann, params, stopwords)
        for eid in fx.mrf.entities:
            for attr in kb.entities[eid].attributes():
                out.append(TrainingInstance(ann.query_id, attr, eid, fx.extract(attr, eid), qrels.grade(ann.query_id, attr)))
    return out


def write_feature_dump(instances, fh):
    for inst in instances:
        feats = " ".join(f"{i}:{v:.10g}" for i, v in enumerate(inst.features.values, 1))
        fh.write(f"{inst.grade} qid:{inst.query_id} {feats} # {inst.entity} {inst.attribute}\n")


def load_feature_dump(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            body, sep, comment = line.partition("#")
            cols = body.split()
            ident = comment.split()
            if not sep or len(ident) != 2 or len(cols) != N_FEATURES + 2 or not cols[1].startswith("qid:"):
                raise ParseError("expected 'grade qid:Q 1:v .. 7:v # entity attribute'", path, lineno)
            try:
                grade = int(cols[0])
                vals = []
                for i, tok in enumerate(cols[2:], 1):
                    idx, _, v = tok.partition(":")
                    if int(idx) != i:
                        raise ValueError
                    vals.append(float(v))
            except ValueError:
                raise ParseError("bad grade or feature value", path, lineno) from None
            out.append(TrainingInstance(cols[1][4:], ident[1], ident[0], FeatureVector(tuple(vals)), grade))
    return out


class RankingData:
    """Instances packed into arrays grouped by query for fast metric evaluation.

    Within each query the attribute slots are sorted by name, so the lowest
    slot wins score ties, matching the ranking tie-break.
    """

    def __init__(self, instances, k=5):
        self.k = k
        by_query = {}
        for inst in instances:
            by_query.setdefault(inst.query_id, []).append(inst)
        self.qids = sorted(by_query)
        rows, inst_attr, gains, offsets, ideal = [], [], [], [0], []
        self.attr_names = []
        self.instances = []
        for qid in self.qids:
            insts = by_query[qid]
            attrs = sorted({i.attribute for i in insts})
            grade = dict.fromkeys(attrs, 0)
            for i in insts:
                grade[i.attribute] = max(grade[i.attribute], i.grade)
            base = offsets[-1]
            slot = {a: base + n for n, a in enumerate(attrs)}
            for i in insts:
                rows.append(i.features.values)
                inst_attr.append(slot[i.attribute])
                self.instances.append(i)
            self.attr_names.extend((qid, a) for a in attrs)
            gains.extend(2.0 ** grade[a] - 1.0 for a in attrs)
            offsets.append(base + len(attrs))
            ideal.append(dcg(sorted(grade.values(), reverse=True), k))
        self.X = np.asarray(rows, dtype=np.float64).reshape(-1, N_FEATURES)
        self.inst_attr = np.asarray(inst_attr, dtype=np.int64)
        self.attr_gains = np.asarray(gains, dtype=np.float64)
        self.attr_offsets = np.asarray(offsets, dtype=np.int64)
        self.ideal_dcg = np.asarray(ideal, dtype=np.float64)

    def __len__(self):
        return len(self.qids)

    def per_query_ndcg(self, scores):
        return kernels.grouped_ndcg(
            np.ascontiguousarray(scores, dtype=np.float64),
            self.inst_attr, self.attr_gains, self.attr_offsets, self.ideal_dcg, self.k,
        )

    def mean_ndcg(self, scores):
        if not len(self.qids):
            return 0.0
        return float(self.per_query_ndcg(scores).mean())

    def has_positive(self):
        return bool(np.any(self.attr_gains > 0))


@dataclass
class LinearModel:
    weights: np.ndarray
    metadata: dict = field(default_factory=dict)
    traces: list = field(default_factory=list, repr=False)

    def score(self, features):
        return float(np.dot(self.weights, features.values))

    def scores(self, X):
        return np.asarray(X) @ self.weights

    def dumps(self):
        lines = [MODEL_MAGIC]
        for key in sorted(self.metadata):
            lines.append(f"# {key}={self.metadata[key]}")
        for name, w in zip(FEATURE_NAMES, self.weights):
            lines.append(f"{name} {float(w)!r}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text, source="<model>"):
        lines = text.splitlines()
        if not lines or lines[0].strip() != MODEL_MAGIC:
            raise ParseError(f"missing {MODEL_MAGIC} header", source, 1)
        meta, weights = {}, {}
        for lineno, line in enumerate(lines[1:], 2):
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
                continue
            parts = line.split()
            if len(parts) != 2 or parts[0] not in FEATURE_NAMES:
                raise ParseError("expected '<feature> <weight>'", source, lineno)
            try:
                weights[parts[0]] = float(parts[1])
            except ValueError:
                raise ParseError("non-numeric weight", source, lineno) from None
        if set(weights) != set(FEATURE_NAMES):
            raise ParseError(f"model must list all of {', '.join(FEATURE_NAMES)}", source)
        return cls(np.array([weights[n] for n in FEATURE_NAMES]), meta)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read(), path)


def _l1_normalize(w):
    norm = np.abs(w).sum()
    return w / norm if norm > 0 else w


def _ascend(data, w, active):
    """Coordinate ascent from ``w``; returns (weights, metric, trace)."""
    scores = data.X @ w
    best = data.mean_ndcg(scores)
    trace = [best]
    for _ in range(MAX_PASSES):
        improved = False
        for j in active:
            scale = abs(w[j]) if w[j] != 0 else 1.0 / len(active)
            col = data.X[:, j]
            best_step, best_val = None, best
            for delta in STEP_LADDER:
                for sign in (1.0, -1.0):
                    step = sign * delta * scale
                    cand = w.copy()
                    cand[j] += step
                    if not np.any(cand):
                        continue
                    val = data.mean_ndcg(scores + step * col)
                    if val > best_val:
                        best_step, best_val = step, val
            if best_step is not None and best_val > best + MIN_GAIN:
                w[j] += best_step
                w = _l1_normalize(w)
                scores = data.X @ w
                best = best_val
                trace.append(best)
                improved = True
        if not improved:
            break
    return w, best, trace


def ca_train(data, restarts=3, seed=0, features=None):
    """Train a linear model by coordinate ascent on mean NDCG@k.

    ``features`` restricts optimization to those 0-based coordinates; the
    rest stay at zero. Each restart draws a random L1-normalized start; the
    best restart by training metric wins, earliest on ties.
    """
    if not isinstance(data, RankingData):
        data = RankingData(data)
    if len(data) < 2:
        raise TrainingError("coordinate ascent needs at least 2 queries")
    if not data.has_positive():
        raise TrainingError("no instance with a positive grade")
    active = list(range(N_FEATURES)) if features is None else sorted(features)
    rng = np.random.default_rng(seed)
    best_w, best_val, traces = None, -1.0, []
    for _ in range(restarts):
        w = np.zeros(N_FEATURES)
        w[active] = rng.uniform(-1.0, 1.0, len(active))
        w, val, trace = _ascend(data, _l1_normalize(w), active)
        traces.append(trace)
        if val > best_val:
            best_w, best_val = w, val
    meta = {"restarts": restarts, "seed": seed, f"train_ndcg@{data.k}": repr(best_val)}
    return LinearModel(best_w, meta, traces)


def single_feature_model(data, feature):
    """Rank by one raw feature, its sign chosen by training NDCG@k (+ on ties)."""
    if not isinstance(data, RankingData):
        data = RankingData(data)
    w = np.zeros(N_FEATURES)
    w[feature] = 1.0
    pos = data.mean_ndcg(data.X @ w)
    neg = data.mean_ndcg(-(data.X @ w))
    if neg > pos:
        w[feature] = -1.0
    return LinearModel(w, {"feature": FEATURE_NAMES[feature], f"train_ndcg@{data.k}": repr(max(pos, neg))})


def rank_instances(model, instances, cutoff=None):
    """Attribute ranking for one query: best instance score per attribute."""
    best = {}
    for inst in instances:
        s = model.score(inst.features)
        if inst.attribute not in best or s > best[inst.attribute]:
            best[inst.attribute] = s
    return sort_ranking(best.items(), cutoff)


def rank_queries(model, instances, tag="ltr", cutoff=None):
    by_query = {}
    for inst in instances:
        by_query.setdefault(inst.query_id, []).append(inst)
    run = RunList(tag)
    for qid in sorted(by_query):
        run.add(qid, rank_instances(model, by_query[qid], cutoff))
    return run


def qrels_from_instances(instances):
    q = Qrels()
    for inst in instances:
        judged = q.setdefault(inst.query_id, {})
        judged[inst.attribute] = max(judged.get(inst.attribute, 0), inst.grade)
    return q


def assign_folds(qids, folds, seed=0):
    """Balanced folds from a stable hash of the query id; input order is irrelevant."""
    def key(q):
        return hashlib.sha1(f"{seed}:{q}".encode("utf-8")).hexdigest(), q

    return {q: n % folds for n, q in enumerate(sorted(set(qids), key=key))}


@dataclass
class CVResult:
    fold_of: dict
    fold_metrics: list
    run: RunList
    models: list
    evaluation: object = None

    @property
    def ndcg(self):
        return self.evaluation.mean("ndcg")


def cross_validate(instances, folds=5, restarts=3, seed=0, k=5, feature=None, qrels=None, cutoff=None):
    """Grouped k-fold CV; every query is ranked by the model that did not see it.

    With ``feature`` set, each fold uses that single feature as the ranker
    instead of a trained model.
    """
    instances = list(instances)
    qids = sorted({i.query_id for i in instances})
    if len(qids) < folds:
        raise TrainingError(f"{folds}-fold cross-validation needs at least {folds} queries, got {len(qids)}")
    qrels = qrels if qrels is not None else qrels_from_instances(instances)
    fold_of = assign_folds(qids, folds, seed)
    tag = "ltr" if feature is None else f"ltr-{FEATURE_NAMES[feature]}"
    run = RunList(tag)
    fold_metrics, models = [], []
    for f in range(folds):
        train = [i for i in instances if fold_of[i.query_id] != f]
        test = [i for i in instances if fold_of[i.query_id] == f]
        data = RankingData(train, k)
        if feature is None:
            model = ca_train(data, restarts, seed + f)
        else:
            model = single_feature_model(data, feature)
        model.metadata["fold"] = f
        models.append(model)
        fold_run = rank_queries(model, test, tag, cutoff)
        for qid, ranking in fold_run.rankings.items():
            run.add(qid, ranking)
        test_qids = {i.query_id for i in test}
        fold_qrels = Qrels({q: qrels.get(q, {}) for q in test_qids})
        fold_metrics.append(compute_metrics(fold_run, fold_qrels, k).means())
    evaluation = compute_metrics(run, Qrels({q: qrels.get(q, {}) for q in qids}), k)
    return CVResult(fold_of, fold_metrics, run, models, evaluation)


@dataclass(frozen=True)
class AblationRow:
    features: str
    ndcg: float
    delta_pct: float


def feature_ablation(instances, folds=5, restarts=3, seed=0, k=5, qrels=None):
    """All-features CV against each single feature used alone.

    The all-features row comes first; single features follow by descending NDCG@k.
    """
    full = cross_validate(instances, folds, restarts, seed, k, qrels=qrels).ndcg
    singles = []
    for j in range(N_FEATURES):
        v = cross_validate(instances, folds, restarts, seed, k, feature=j, qrels=qrels).ndcg
        delta = (v - full) / full * 100.0 if full else float("nan")
        singles.append(AblationRow(FEATURE_NAMES[j], v, delta))
    singles.sort(key=lambda r: (-r.ndcg, r.features))
    return [AblationRow(f"{FEATURE_NAMES[0]}-{FEATURE_NAMES[-1]}", full, 0.0)] + singles

"""Lexical baselines over entity-attribute documents: BM25, LM and MLM-tc.

Each distinct (entity, attribute) becomes one document with a ``title``
field (attribute-name tokens), a ``content`` field (tokens of every value of
that attribute) and an ``all`` field holding both.
"""

import logging
import math
import pickle
from collections import Counter, defaultdict
from dataclasses import dataclass

from attrid.errors import AttrIdError, EmptyInputError
from attrid.mrf import sort_ranking
from attrid.text import tokenize

logger = logging.getLogger(__name__)

FIELDS = ("title", "content", "all")
SNAPSHOT_MAGIC = b"ATTRIDX\x00"
SNAPSHOT_VERSION = 1


def doc_key(doc_id):
    return f"{doc_id[0]}::{doc_id[1]}"


@dataclass(frozen=True)
class AttrDocument:
    doc_id: tuple
    title_field: tuple
    content_field: tuple

    @property
    def all_field(self):
        return self.title_field + self.content_field


class FieldIndex:
    def __init__(self, docs_tokens):
        self.postings = defaultdict(list)
        self.doc_lengths = []
        self.collection_tf = Counter()
        for i, toks in enumerate(docs_tokens):
            tf = Counter(toks)
            for term in sorted(tf):
                self.postings[term].append((i, tf[term]))
            self.doc_lengths.append(len(toks))
            self.collection_tf.update(tf)
        self.postings = dict(self.postings)
        self.total_length = sum(self.doc_lengths)
        self._tf = [dict() for _ in docs_tokens]
        for term, plist in self.postings.items():
            for i, n in plist:
                self._tf[i][term] = n

    def tf(self, doc, term):
        return self._tf[doc].get(term, 0)

    def df(self, term):
        return len(self.postings.get(term, ()))

    def collection_prob(self, term):
        """p(t|C) with zero-frequency terms floored at 1/(|C| + 1)."""
        cf = self.collection_tf.get(term, 0)
        if cf == 0:
            return 1.0 / (self.total_length + 1)
        return cf / self.total_length

    @property
    def avg_length(self):
        return self.total_length / len(self.doc_lengths) if self.doc_lengths else 0.0


class InvertedIndex:
    def __init__(self, documents):
        self.documents = sorted(documents, key=lambda d: d.doc_id)
        self.doc_ids = [d.doc_id for d in self.documents]
        self.position = {d: i for i, d in enumerate(self.doc_ids)}
        self.fields = {
            "title": FieldIndex([d.title_field for d in self.documents]),
            "content": FieldIndex([d.content_field for d in self.documents]),
            "all": FieldIndex([d.all_field for d in self.documents]),
        }
        self.by_entity = defaultdict(list)
        for i, (eid, _) in enumerate(self.doc_ids):
            self.by_entity[eid].append(i)

    @property
    def num_docs(self):
        return len(self.documents)

    def docs_of(self, entity_ids):
        return sorted(i for e in entity_ids for i in self.by_entity.get(e, ()))

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(SNAPSHOT_MAGIC)
            fh.write(SNAPSHOT_VERSION.to_bytes(4, "little"))
            pickle.dump([(d.doc_id, d.title_field, d.content_field) for d in self.documents], fh, protocol=4)

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            if fh.read(len(SNAPSHOT_MAGIC)) != SNAPSHOT_MAGIC:
                raise AttrIdError(f"{path}: not an index snapshot")
            version = int.from_bytes(fh.read(4), "little")
            if version != SNAPSHOT_VERSION:
                raise AttrIdError(f"{path}: unsupported snapshot version {version}")
            rows = pickle.load(fh)
        return cls(AttrDocument(tuple(d), tuple(t), tuple(c)) for d, t, c in rows)


def build_index(kb):
    if kb.global_pair_count == 0:
        raise EmptyInputError("cannot index an empty knowledge base")
    docs = []
    for ent in kb.entities.values():
        values = defaultdict(list)
        for p in ent.pairs:
            values[p.attribute].extend(tokenize(p.value))
        for attr, toks in values.items():
            docs.append(AttrDocument((ent.id, attr), tuple(tokenize(attr)), tuple(toks)))
    return InvertedIndex(docs)


def _ranked(index, scores, cutoff):
    return sort_ranking([(index.doc_ids[i], s) for i, s in scores.items()], cutoff)


def bm25_scores(index, terms, k1=1.2, b=0.8, docs=None):
    """BM25 on the catch-all field. Only documents matching a term get a score."""
    if k1 < 0 or not 0.0 <= b <= 1.0:
        raise ValueError("BM25 needs k1 >= 0 and b in [0, 1]")
    fld = index.fields["all"]
    n = index.num_docs
    avgdl = fld.avg_length
    allowed = None if docs is None else set(docs)
    scores = {}
    for term in terms:
        plist = fld.postings.get(term)
        if not plist:
            continue
        df = len(plist)
        idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
        for doc, tf in plist:
            if allowed is not None and doc not in allowed:
                continue
            norm = tf + k1 * (1.0 - b + b * fld.doc_lengths[doc] / avgdl)
            scores[doc] = scores.get(doc, 0.0) + idf * (tf * (k1 + 1.0) / norm)
    return scores


def _dirichlet(fld, doc, term, mu):
    return (fld.tf(doc, term) + mu * fld.collection_prob(term)) / (fld.doc_lengths[doc] + mu)


def lm_scores(index, terms, mu=2000.0, docs=None):
    """Dirichlet-smoothed query log-likelihood on the catch-all field, every candidate doc."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    if not terms:
        return {}
    fld = index.fields["all"]
    docs = range(index.num_docs) if docs is None else docs
    return {d: sum(math.log(_dirichlet(fld, d, t, mu)) for t in terms) for d in docs}


def mlm_scores(index, terms, w_title=0.2, w_content=0.8, mu=2000.0, docs=None):
    """Two-field mixture of language models, each field smoothed on its own collection."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    if abs(w_title + w_content - 1.0) > 1e-9 or w_title < 0 or w_content < 0:
        raise ValueError("field weights must be non-negative and sum to 1")
    if not terms:
        return {}
    title, content = index.fields["title"], index.fields["content"]
    docs = range(index.num_docs) if docs is None else docs
    out = {}
    for d in docs:
        s = 0.0
        for t in terms:
            s += math.log(w_title * _dirichlet(title, d, t, mu) + w_content * _dirichlet(content, d, t, mu))
        out[d] = s
    return out


def bm25_rank(index, terms, k1=1.2, b=0.8, cutoff=None, docs=None):
    return _ranked(index, bm25_scores(index, terms, k1, b, docs), cutoff)


def lm_rank(index, terms, mu=2000.0, cutoff=None, docs=None):
    return _ranked(index, lm_scores(index, terms, mu, docs), cutoff)


def mlm_rank(index, terms, w_title=0.2, w_content=0.8, mu=2000.0, cutoff=None, docs=None):
    return _ranked(index, mlm_scores(index, terms, w_title, w_content, mu, docs), cutoff)


@dataclass(frozen=True)
class BaselineParams:
    k1: float = 1.2
    b: float = 0.8
    mu: float = 2000.0
    w_title: float = 0.2
    w_content: float = 0.8


METHODS = ("bm25", "lm", "mlm")


def rank_attributes_baseline(index, kb, ann, method, params=BaselineParams(), cutoff=None, stopwords=None):
    """Attribute ranking for one query from document scores.

    Documents are restricted to the query's linked entities and collapsed to
    attribute names by their best document score.
    """
    entities = ann.linked_entities(kb)
    if not entities:
        logger.warning("query %s: no linked entities, no candidates", ann.query_id)
        return []
    docs = index.docs_of(entities)
    terms = ann.scoring_terms(stopwords)
    if method == "bm25":
        # unmatched candidates stay in the ranking with score 0
        scores = dict.fromkeys(docs, 0.0)
        scores.update(bm25_scores(index, terms, params.k1, params.b, docs))
    elif method == "lm":
        scores = lm_scores(index, terms, params.mu, docs)
    elif method == "mlm":
        scores = mlm_scores(index, terms, params.w_title, params.w_content, params.mu, docs)
    else:
        raise ValueError(f"unknown baseline method {method!r}")
    best = {}
    for d, s in scores.items():
        attr = index.doc_ids[d][1]
        if attr not in best or s > best[attr]:
            best[attr] = s
    return sort_ranking(best.items(), cutoff)

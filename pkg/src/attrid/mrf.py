"""MRF-based attribute ranker.

An attribute ``a`` is scored against query ``q`` by summing, over the
entities ``E`` linked to ``q``::

    lambda1 * sum_i f1(q_i, a) + lambda2 * f2(a, e) + lambda3 * sum_i f3(q_i, e)

with the three 2-clique feature functions

* ``f1``: log of the mean (1 - word distance) between a query term and the
  attribute-name tokens,
* ``f2``: log of the entity/pool-smoothed share of pairs carrying ``a``,
* ``f3``: log of the entity/pool-smoothed share of pairs mentioning ``q_i``.

Every log argument is clamped from below at ``epsilon``.
"""

import logging
import math
from dataclasses import dataclass, field

from attrid.errors import NoEntitiesError
from attrid.text import tokenize

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-9


@dataclass(frozen=True)
class MrfParams:
    lambda1: float = 0.6
    lambda2: float = 0.2
    lambda3: float = 0.2
    mu1: float = 0.5
    mu2: float = 0.5
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        lams = (self.lambda1, self.lambda2, self.lambda3)
        if any(l < 0 for l in lams):
            raise ValueError("lambda weights must be non-negative")
        if abs(sum(lams) - 1.0) > 1e-9:
            raise ValueError(f"lambda weights must sum to 1, got {sum(lams)!r}")
        for name in ("mu1", "mu2"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass
class AttributeCandidate:
    attribute: str
    supporting_entities: frozenset = field(default_factory=frozenset)
    score: float = 0.0


def _clamped_log(x, eps):
    return math.log(x if x > eps else eps)


def f1_term_attr(store, term, attribute, epsilon=DEFAULT_EPSILON):
    closeness = [1.0 - d for d in (store.word_distance(term, w) for w in tokenize(attribute)) if d is not None]
    if not closeness:
        return math.log(epsilon)
    return _clamped_log(sum(closeness) / len(closeness), epsilon)


def f2_attr_entity(kb, attribute, entity_id, mu1, epsilon=DEFAULT_EPSILON):
    n_attr, n_pairs = kb.entity_counts(entity_id, attribute)
    g_attr, g_pairs = kb.global_entity_counts(attribute)
    local = n_attr / n_pairs if n_pairs else 0.0
    background = g_attr / g_pairs if g_pairs else 0.0
    return _clamped_log(mu1 * local + (1.0 - mu1) * background, epsilon)


def f3_term_entity(kb, term, entity_id, mu2, epsilon=DEFAULT_EPSILON):
    n_match, n_pairs = kb.term_match_counts(entity_id, term)
    g_match, g_pairs = kb.global_term_match_counts(term)
    local = n_match / n_pairs if n_pairs else 0.0
    background = g_match / g_pairs if g_pairs else 0.0
    return _clamped_log(mu2 * local + (1.0 - mu2) * background, epsilon)


class MrfScorer:
    """Scores attributes for one query, caching the per-term feature sums.

    The f1 sum depends only on the attribute and f3 only on the entity, so
    both are computed once per query and reused.
    """

    def __init__(self, kb, store, ann, params, stopwords=None):
        self.kb = kb
        self.store = store
        self.params = params
        self.terms = ann.scoring_terms(stopwords)
        self.entities = ann.linked_entities(kb)
        missing = set(ann.entity_ids()) - set(self.entities)
        if missing:
            logger.warning("query %s: linked entities not in KB ignored: %s", ann.query_id, sorted(missing))
        self._f1 = {}
        self._f3 = {}

    def term_attr_sum(self, attribute):
        if attribute not in self._f1:
            eps = self.params.epsilon
            self._f1[attribute] = sum(f1_term_attr(self.store, t, attribute, eps) for t in self.terms)
        return self._f1[attribute]

    def term_entity_sum(self, entity_id):
        if entity_id not in self._f3:
            p = self.params
            self._f3[entity_id] = sum(f3_term_entity(self.kb, t, entity_id, p.mu2, p.epsilon) for t in self.terms)
        return self._f3[entity_id]

    def score(self, attribute):
        if not self.entities:
            raise NoEntitiesError("query has no linked entities in the knowledge base")
        p = self.params
        f1_sum = self.term_attr_sum(attribute)
        total = 0.0
        for e in self.entities:
            total += (
                p.lambda1 * f1_sum
                + p.lambda2 * f2_attr_entity(self.kb, attribute, e, p.mu1, p.epsilon)
                + p.lambda3 * self.term_entity_sum(e)
            )
        return total

    def candidates(self):
        support = {}
        for e in self.entities:
            for a in self.kb.entities[e].attributes():
                support.setdefault(a, set()).add(e)
        return support


def mrf_score(kb, store, ann, attribute, params, stopwords=None):
    return MrfScorer(kb, store, ann, params, stopwords).score(attribute)


def sort_ranking(scored, cutoff=None):
    """Descending score, ties by attribute name; ``scored`` holds (name, score)."""
    ranked = sorted(scored, key=lambda x: (-x[1], x[0]))
    return ranked if cutoff is None else ranked[:cutoff]


def rank_attributes_mrf(kb, store, ann, params, cutoff=None, stopwords=None):
    """Ranked :class:`AttributeCandidate` list; empty when nothing is linked."""
    scorer = MrfScorer(kb, store, ann, params, stopwords)
    if not scorer.entities:
        logger.warning("query %s: no linked entities, no candidates", ann.query_id)
        return []
    support = scorer.candidates()
    ranked = sort_ranking(((a, scorer.score(a)) for a in support), cutoff)
    return [AttributeCandidate(a, frozenset(support[a]), s) for a, s in ranked]

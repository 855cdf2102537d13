"""Knowledge base of entity attribute-value pairs and its pair-pool counts.

The KB file is UTF-8 TSV with one ``entity<TAB>attribute<TAB>value`` triple
per line; ``#`` lines and blank lines are skipped.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field

from attrid.errors import EmptyInputError, NotFoundError, ParseError
from attrid.text import term_set

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttributeValuePair:
    attribute: str
    value: str

    def __post_init__(self):
        if not self.attribute:
            raise ValueError("attribute name must be non-empty")


@dataclass
class Entity:
    id: str
    pairs: list = field(default_factory=list)

    def attributes(self):
        """Distinct attribute names in first-seen order."""
        return list(dict.fromkeys(p.attribute for p in self.pairs))

    def values_of(self, attribute):
        return [p.value for p in self.pairs if p.attribute == attribute]


class KnowledgeBase:
    """Entities plus the global statistics over the pool of all pairs.

    ``global_term_pair_counts[t]`` counts pairs whose attribute or value
    tokens contain ``t``; a pair counts once however often ``t`` occurs.
    """

    def __init__(self):
        self.entities = {}
        self.global_pair_count = 0
        self.global_attr_counts = Counter()
        self.global_term_pair_counts = Counter()
        self._entity_attr_counts = {}
        self._entity_term_counts = {}

    @classmethod
    def from_triples(cls, triples):
        kb = cls()
        for e, a, v in triples:
            kb.add(e, a, v)
        return kb

    def add(self, entity_id, attribute, value):
        """Append one triple and update every count. Only used while building."""
        pair = AttributeValuePair(attribute, value)
        ent = self.entities.get(entity_id)
        if ent is None:
            ent = self.entities[entity_id] = Entity(entity_id)
            self._entity_attr_counts[entity_id] = Counter()
            self._entity_term_counts[entity_id] = Counter()
        ent.pairs.append(pair)
        terms = pair_terms(pair)
        self.global_pair_count += 1
        self.global_attr_counts[attribute] += 1
        self.global_term_pair_counts.update(terms)
        self._entity_attr_counts[entity_id][attribute] += 1
        self._entity_term_counts[entity_id].update(terms)

    def __len__(self):
        return len(self.entities)

    def __contains__(self, entity_id):
        return entity_id in self.entities

    def entity(self, entity_id):
        try:
            return self.entities[entity_id]
        except KeyError:
            raise NotFoundError(f"unknown entity: {entity_id!r}") from None

    def entity_counts(self, entity_id, attribute):
        """``(pairs of e with this attribute, pairs of e)``."""
        ent = self.entity(entity_id)
        return self._entity_attr_counts[entity_id][attribute], len(ent.pairs)

    def term_match_counts(self, entity_id, term):
        """``(pairs of e whose attribute or value contains term, pairs of e)``."""
        ent = self.entity(entity_id)
        return self._entity_term_counts[entity_id][term], len(ent.pairs)

    def global_entity_counts(self, attribute):
        return self.global_attr_counts[attribute], self.global_pair_count

    def global_term_match_counts(self, term):
        return self.global_term_pair_counts[term], self.global_pair_count

    def recount(self):
        """Fresh KB built from the stored entities; used to audit the counts."""
        return KnowledgeBase.from_triples(self.triples())

    def triples(self):
        for ent in self.entities.values():
            for p in ent.pairs:
                yield ent.id, p.attribute, p.value


def pair_terms(pair):
    return term_set(pair.attribute) | term_set(pair.value)


def load_kb(path):
    kb = KnowledgeBase()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise ParseError(f"expected 3 tab-separated columns, got {len(cols)}", path, lineno)
            entity_id, attribute, value = cols
            if not entity_id:
                raise ParseError("empty entity id", path, lineno)
            if not attribute:
                raise ParseError("empty attribute name", path, lineno)
            kb.add(entity_id, attribute, value)
    if kb.global_pair_count == 0:
        raise EmptyInputError(f"{path}: knowledge base is empty")
    logger.info("loaded %d entities, %d pairs from %s", len(kb), kb.global_pair_count, path)
    return kb

"""Query annotations: terms, linked entities and mention spans.

Annotation TSV, one link per row (rows sharing a qid are merged)::

    qid<TAB>query_text<TAB>entity_id<TAB>start_token<TAB>end_token<TAB>confidence

Spans are 0-based, end-exclusive token offsets into the tokenized query.
A two-column row ``qid<TAB>query_text`` declares a query with no links.
"""

from dataclasses import dataclass, field

from attrid.errors import ParseError
from attrid.text import tokenize


@dataclass(frozen=True)
class Link:
    entity: str
    start: int
    end: int
    confidence: float = 1.0


@dataclass(frozen=True)
class QueryAnnotation:
    query_id: str
    text: str
    terms: tuple
    links: tuple = field(default_factory=tuple)

    def __post_init__(self):
        n = len(self.terms)
        for link in self.links:
            if not 0 <= link.start < link.end <= n:
                raise ValueError(f"mention span [{link.start}, {link.end}) outside {n} terms")
            if not 0.0 <= link.confidence <= 1.0:
                raise ValueError(f"confidence {link.confidence} outside [0, 1]")

    @classmethod
    def from_text(cls, query_id, text, links=()):
        return cls(query_id, text, tuple(tokenize(text)), tuple(links))

    def entity_ids(self):
        """Distinct linked entity ids, first-seen order."""
        return list(dict.fromkeys(link.entity for link in self.links))

    def linked_entities(self, kb):
        return [e for e in self.entity_ids() if e in kb]

    def scoring_terms(self, stopwords=None):
        if not stopwords:
            return list(self.terms)
        return [t for t in self.terms if t not in stopwords]


def split_terms(ann, stopwords=None):
    """Partition the query's term set into (linked, not linked).

    Stopwords are dropped from the not-linked side only when a stoplist is
    given; otherwise the two sets exactly cover the term set.
    """
    covered = set()
    for link in ann.links:
        covered.update(range(link.start, link.end))
    linked = {t for i, t in enumerate(ann.terms) if i in covered}
    not_linked = {t for t in ann.terms if t not in linked}
    if stopwords:
        not_linked -= set(stopwords)
    return linked, not_linked


def load_annotations(path):
    texts = {}
    links = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) not in (2, 6):
                raise ParseError(f"expected 2 or 6 tab-separated columns, got {len(cols)}", path, lineno)
            qid, text = cols[0], cols[1]
            if not qid:
                raise ParseError("empty query id", path, lineno)
            if qid in texts and texts[qid] != text:
                raise ParseError(f"query {qid} has conflicting texts", path, lineno)
            texts[qid] = text
            links.setdefault(qid, [])
            if len(cols) == 2:
                continue
            entity, start, end, conf = cols[2:]
            try:
                start, end, conf = int(start), int(end), float(conf)
            except ValueError:
                raise ParseError("non-numeric span or confidence", path, lineno) from None
            n = len(tokenize(text))
            if not 0 <= start < end <= n:
                raise ParseError(f"span [{start}, {end}) out of range for {n} terms", path, lineno)
            if not 0.0 <= conf <= 1.0:
                raise ParseError(f"confidence {conf} outside [0, 1]", path, lineno)
            if not entity:
                raise ParseError("empty entity id", path, lineno)
            links[qid].append(Link(entity, start, end, conf))
    return [QueryAnnotation.from_text(qid, texts[qid], links[qid]) for qid in texts]


def load_queries(path):
    """``qid<TAB>text`` rows, linked later with :func:`dictionary_link`."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise ParseError(f"expected 2 tab-separated columns, got {len(cols)}", path, lineno)
            out.append((cols[0], cols[1]))
    return out


def load_stoplist(path):
    with open(path, encoding="utf-8") as fh:
        return frozenset(t for line in fh for t in tokenize(line))


class DictionaryLinker:
    """Exact-match linker over the normalized tokens of KB entity ids.

    Among overlapping matches the longest wins, then the leftmost. When two
    entity ids normalize to the same tokens the lexicographically smallest
    id is linked.
    """

    def __init__(self, kb):
        self.names = {}
        for eid in sorted(kb.entities):
            key = tuple(tokenize(eid))
            if key:
                self.names.setdefault(key, eid)
        self.max_len = max((len(k) for k in self.names), default=0)

    def link(self, query_text, query_id=""):
        terms = tokenize(query_text)
        matches = []
        for i in range(len(terms)):
            for j in range(i + 1, min(len(terms), i + self.max_len) + 1):
                eid = self.names.get(tuple(terms[i:j]))
                if eid is not None:
                    matches.append((i, j, eid))
        matches.sort(key=lambda m: (-(m[1] - m[0]), m[0]))
        taken = set()
        chosen = []
        for i, j, eid in matches:
            span = set(range(i, j))
            if span & taken:
                continue
            taken |= span
            chosen.append(Link(eid, i, j, 1.0))
        chosen.sort(key=lambda l: l.start)
        return QueryAnnotation(query_id, query_text, tuple(terms), tuple(chosen))


def dictionary_link(query_text, kb, query_id=""):
    return DictionaryLinker(kb).link(query_text, query_id)

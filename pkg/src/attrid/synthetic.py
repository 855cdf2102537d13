"""Seeded synthetic collections for tests, acceptance checks and benchmarks.

``linear_feature_dataset`` produces LTR instances whose grades come from a
fixed linear combination of the features. ``synonym_collection`` builds a
small KB, word vectors, taxonomy, linked queries and qrels in which query
words often name an attribute only through a synonym that never appears in
the KB text, so purely lexical rankers cannot match it.
"""

import os
from dataclasses import dataclass

import numpy as np

from attrid.embedding import WordVectorStore
from attrid.evaluation import Qrels, write_qrels
from attrid.kb import KnowledgeBase
from attrid.lexsim import Taxonomy
from attrid.linker import Link, QueryAnnotation
from attrid.ltr import N_FEATURES, FeatureVector, TrainingInstance
from attrid.text import tokenize

TRUE_WEIGHTS = (0.05, 0.15, 0.35, 0.1, 0.25, 0.05, 0.05)


def linear_feature_dataset(n_queries=50, attrs_per_query=12, seed=0, weights=TRUE_WEIGHTS):
    """Instances graded by ``weights . x``: top 2 per query grade 2, next 2 grade 1."""
    rng = np.random.default_rng(seed)
    w = np.asarray(weights, dtype=float)
    out = []
    for q in range(n_queries):
        X = rng.normal(size=(attrs_per_query, N_FEATURES))
        order = np.argsort(-(X @ w), kind="stable")
        grade = np.zeros(attrs_per_query, dtype=int)
        grade[order[:2]] = 2
        grade[order[2:4]] = 1
        qid = f"q{q:03d}"
        for i in range(attrs_per_query):
            out.append(TrainingInstance(qid, f"attr{i:02d}", f"ent{q:03d}", FeatureVector(tuple(X[i])), int(grade[i])))
    return out


# attribute name -> synonyms never used in KB text
CONCEPTS = {
    "spouse": ["wife", "husband", "married"],
    "birthPlace": ["born", "hometown"],
    "deathPlace": ["died", "buried"],
    "almaMater": ["university", "studied", "college"],
    "occupation": ["job", "profession", "career"],
    "party": ["political", "affiliation"],
    "child": ["son", "daughter", "kids"],
    "parent": ["father", "mother"],
    "award": ["prize", "honour", "medal"],
    "employer": ["company", "worked"],
    "genre": ["style", "musical"],
    "instrument": ["plays", "guitar"],
    "religion": ["faith", "belief"],
    "nationality": ["citizen", "country"],
}

_SYLLABLES = ["ka", "lo", "mi", "ran", "te", "vo", "sul", "den", "bri", "ga", "nor", "pel", "ush", "zed", "qua", "fen"]


@dataclass
class SyntheticCollection:
    kb: KnowledgeBase
    store: WordVectorStore
    taxonomy: Taxonomy
    annotations: list
    qrels: Qrels
    synonym_queries: frozenset
    taxonomy_lines: list

    def write(self, directory):
        """Write every artifact in the on-disk formats the CLI reads."""
        os.makedirs(directory, exist_ok=True)
        paths = {name: os.path.join(directory, fn) for name, fn in (
            ("kb", "kb.tsv"), ("vectors", "vectors.txt"), ("taxonomy", "taxonomy.tsv"),
            ("annotations", "annotations.tsv"), ("qrels", "qrels.txt"),
        )}
        with open(paths["kb"], "w", encoding="utf-8") as fh:
            for e, a, v in self.kb.triples():
                fh.write(f"{e}\t{a}\t{v}\n")
        with open(paths["vectors"], "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.store)} {self.store.dimension}\n")
            for tok, i in self.store.index.items():
                fh.write(tok + " " + " ".join(f"{x:.8f}" for x in self.store.matrix[i]) + "\n")
        with open(paths["taxonomy"], "w", encoding="utf-8") as fh:
            for line in self.taxonomy_lines:
                fh.write(line + "\n")
        with open(paths["annotations"], "w", encoding="utf-8") as fh:
            for ann in self.annotations:
                for link in ann.links:
                    fh.write(f"{ann.query_id}\t{ann.text}\t{link.entity}\t{link.start}\t{link.end}\t{link.confidence}\n")
        with open(paths["qrels"], "w", encoding="utf-8") as fh:
            write_qrels(self.qrels, fh)
        return paths


def _unit(v):
    return v / np.linalg.norm(v)


def synonym_collection(n_queries=50, n_entities=40, noise=0.6, seed=0, dim=32):
    """KB + resources where a ``noise`` share of queries uses attribute synonyms."""
    rng = np.random.default_rng(seed)
    concepts = sorted(CONCEPTS)

    names = set()
    while len(names) < n_entities:
        first = "".join(rng.choice(_SYLLABLES, 2)).capitalize()
        last = "".join(rng.choice(_SYLLABLES, 3)).capitalize()
        names.add(f"{first}_{last}")
    entities = sorted(names)
    filler = sorted({"".join(rng.choice(_SYLLABLES, 3)) for _ in range(200)} - {t for n in entities for t in tokenize(n)})

    kb = KnowledgeBase()
    attrs_of = {}
    for e in entities:
        attrs = sorted(rng.choice(concepts, size=rng.integers(5, 9), replace=False))
        attrs_of[e] = attrs
        for a in attrs:
            for _ in range(rng.integers(1, 3)):
                if rng.random() < 0.5:
                    value = str(rng.choice(entities))
                else:
                    value = " ".join(rng.choice(filler, size=rng.integers(1, 3)))
                kb.add(e, a, value)

    # vectors: attribute tokens and their synonyms cluster around a concept direction
    vectors = {}
    concept_dir = {c: _unit(rng.normal(size=dim)) for c in concepts}
    for c in concepts:
        for tok in tokenize(c):
            if tok not in vectors:
                vectors[tok] = _unit(concept_dir[c] + 0.25 * rng.normal(size=dim) / np.sqrt(dim))
        for syn in CONCEPTS[c]:
            vectors[syn] = _unit(concept_dir[c] + 0.45 * rng.normal(size=dim) / np.sqrt(dim))
    for tok in ("place", "mater"):
        vectors[tok] = _unit(rng.normal(size=dim))
    for tok in ("of", "the", "who", "what", "is", "was"):
        vectors[tok] = _unit(rng.normal(size=dim))
    for tok in filler[:60]:
        vectors[tok] = _unit(rng.normal(size=dim))
    store = WordVectorStore.from_dict(vectors)

    syn_lines, synsets, edges = [], {}, []
    synsets["root"] = ["entity"]
    syn_lines.append("SYN\troot\tentity")
    for n, c in enumerate(concepts):
        sid = f"s{n:02d}"
        lemmas = [t for t in tokenize(c) if t not in ("place", "mater")] + CONCEPTS[c]
        synsets[sid] = lemmas
        edges.append((sid, "root"))
        syn_lines.append(f"SYN\t{sid}\t{','.join(lemmas)}")
        syn_lines.append(f"ISA\t{sid}\troot")
    taxonomy = Taxonomy(synsets, edges)

    annotations, qrels, synonym_queries = [], Qrels(), set()
    templates = ["{w} of {e}", "what is the {w} of {e}", "{e} {w}"]
    for q in range(n_queries):
        qid = f"sq{q:03d}"
        e = str(rng.choice(entities))
        target = str(rng.choice(attrs_of[e]))
        if rng.random() < noise:
            word = str(rng.choice(CONCEPTS[target]))
            synonym_queries.add(qid)
        else:
            word = " ".join(tokenize(target))
        name = " ".join(tokenize(e))
        text = templates[q % len(templates)].format(w=word, e=name)
        terms = tokenize(text)
        name_toks = tokenize(e)
        start = next(i for i in range(len(terms)) if terms[i:i + len(name_toks)] == name_toks)
        annotations.append(QueryAnnotation(qid, text, tuple(terms), (Link(e, start, start + len(name_toks), 1.0),)))
        judged = {a: 0 for a in attrs_of[e]}
        judged[target] = 2
        others = [a for a in attrs_of[e] if a != target]
        judged[str(rng.choice(others))] = 1
        qrels[qid] = judged

    return SyntheticCollection(kb, store, taxonomy, annotations, qrels, frozenset(synonym_queries), syn_lines)

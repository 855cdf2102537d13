"""Taxonomy (WordNet-like) path similarity.

Taxonomy files are TSV with two record types::

    SYN<TAB>synset_id<TAB>lemma1,lemma2,...
    ISA<TAB>child_id<TAB>parent_id

Lemmas go through the same tokenizer as KB text; a multi-word lemma is
indexed under its tokens joined by single spaces.
"""

from collections import defaultdict

from attrid.errors import ParseError
from attrid.text import tokenize


class TaxonomyError(ParseError):
    pass


def _lemma_key(lemma):
    return " ".join(tokenize(lemma))


class Taxonomy:
    def __init__(self, synsets, edges):
        """``synsets``: mapping id -> lemmas; ``edges``: (child, parent) pairs."""
        self.nodes = frozenset(synsets)
        self.parents = defaultdict(set)
        self._adjacent = defaultdict(set)
        for child, parent in edges:
            for node in (child, parent):
                if node not in self.nodes:
                    raise TaxonomyError(f"ISA edge {child} -> {parent} references undefined synset {node}")
            self.parents[child].add(parent)
            self._adjacent[child].add(parent)
            self._adjacent[parent].add(child)
        cycle = self._find_cycle()
        if cycle:
            raise TaxonomyError("ISA cycle: " + " -> ".join(cycle))
        self.lemma_index = defaultdict(set)
        for sid, lemmas in synsets.items():
            for lemma in lemmas:
                key = _lemma_key(lemma)
                if key:
                    self.lemma_index[key].add(sid)

    def _find_cycle(self):
        WHITE, GREY, BLACK = 0, 1, 2
        color = dict.fromkeys(self.nodes, WHITE)
        for root in sorted(self.nodes):
            if color[root] != WHITE:
                continue
            stack = [(root, iter(sorted(self.parents.get(root, ()))))]
            path = [root]
            color[root] = GREY
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    color[node] = BLACK
                    stack.pop()
                    path.pop()
                elif color[nxt] == GREY:
                    return path[path.index(nxt):] + [nxt]
                elif color[nxt] == WHITE:
                    color[nxt] = GREY
                    stack.append((nxt, iter(sorted(self.parents.get(nxt, ())))))
                    path.append(nxt)
        return None

    def synsets_of(self, word):
        return self.lemma_index.get(_lemma_key(word), set())

    def shortest_path_length(self, sources, targets):
        """Fewest undirected ISA hops between any source and any target synset.

        Bidirectional breadth-first search; None when disconnected.
        """
        sources, targets = set(sources), set(targets)
        if not sources or not targets:
            return None
        if sources & targets:
            return 0
        seen_a, seen_b = {s: 0 for s in sources}, {t: 0 for t in targets}
        front_a, front_b = list(sources), list(targets)
        depth_a = depth_b = 0
        while front_a and front_b:
            if len(front_a) > len(front_b):
                front_a, front_b = front_b, front_a
                seen_a, seen_b = seen_b, seen_a
                depth_a, depth_b = depth_b, depth_a
            depth_a += 1
            best = None
            nxt = []
            for node in front_a:
                for nb in self._adjacent.get(node, ()):
                    if nb in seen_a:
                        continue
                    seen_a[nb] = depth_a
                    if nb in seen_b:
                        total = depth_a + seen_b[nb]
                        best = total if best is None else min(best, total)
                    nxt.append(nb)
            if best is not None:
                return best
            front_a = nxt
        return None

    def path_similarity(self, w1, w2):
        """``1 / (1 + shortest path)`` over the words' synsets; None if unknown or unconnected."""
        dist = self.shortest_path_length(self.synsets_of(w1), self.synsets_of(w2))
        if dist is None:
            return None
        return 1.0 / (1.0 + dist)


def load_taxonomy(path):
    synsets = {}
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise ParseError(f"expected 3 tab-separated columns, got {len(cols)}", path, lineno)
            kind, a, b = cols
            if kind == "SYN":
                if a in synsets:
                    raise ParseError(f"synset {a} defined twice", path, lineno)
                synsets[a] = [lemma for lemma in b.split(",") if lemma.strip()]
            elif kind == "ISA":
                edges.append((a, b))
            else:
                raise ParseError(f"unknown record type {kind!r}", path, lineno)
    return Taxonomy(synsets, edges)

"""Word vectors in the word2vec text format, stored unit-normalized."""

import gzip
import logging
import math

import numpy as np

from attrid.errors import ParseError

logger = logging.getLogger(__name__)


class WordVectorStore:
    def __init__(self, tokens, matrix, duplicates=0):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] < 1:
            raise ValueError("vectors must form a 2-d matrix with positive dimension")
        norms = np.linalg.norm(matrix, axis=1)
        if np.any(norms == 0):
            raise ValueError("zero vector cannot be normalized")
        self.matrix = matrix / norms[:, None]
        self.index = {tok: i for i, tok in enumerate(tokens)}
        if len(self.index) != len(tokens):
            raise ValueError("duplicate tokens; dedupe before constructing")
        self.duplicates = duplicates

    @classmethod
    def from_dict(cls, vectors):
        tokens = list(vectors)
        return cls(tokens, [vectors[t] for t in tokens])

    @property
    def dimension(self):
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.index)

    def __contains__(self, token):
        return token in self.index

    def vector(self, token):
        i = self.index.get(token)
        return None if i is None else self.matrix[i]

    def word_distance(self, w1, w2):
        """Euclidean distance of the unit vectors halved into [0, 1]; None if OOV."""
        i, j = self.index.get(w1), self.index.get(w2)
        if i is None or j is None:
            return None
        if i == j:
            return 0.0
        d = float(np.linalg.norm(self.matrix[i] - self.matrix[j])) / 2.0
        return min(d, 1.0)

    def cosine_similarity(self, w1, w2):
        i, j = self.index.get(w1), self.index.get(w2)
        if i is None or j is None:
            return None
        if i == j:
            return 1.0
        c = float(self.matrix[i] @ self.matrix[j])
        return max(-1.0, min(1.0, c))


def _open_text(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, encoding="utf-8")


def load_vectors(path):
    """Read ``token v1 .. vd`` rows, with an optional ``count dim`` header.

    A repeated token keeps its last vector; the number of such repeats is
    kept on ``store.duplicates``.
    """
    rows = {}
    dim = None
    declared = None
    duplicates = 0
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                declared = int(parts[1])
                dim = declared
                continue
            token, comps = parts[0], parts[1:]
            if not comps:
                raise ParseError("row has no vector components", path, lineno)
            if dim is None:
                dim = len(comps)
            elif len(comps) != dim:
                raise ParseError(f"expected {dim} components, got {len(comps)}", path, lineno)
            try:
                vec = [float(c) for c in comps]
            except ValueError:
                raise ParseError("non-numeric vector component", path, lineno) from None
            if not all(math.isfinite(c) for c in vec):
                raise ParseError("non-finite vector component", path, lineno)
            if not any(vec):
                raise ParseError(f"zero vector for {token!r}", path, lineno)
            if token in rows:
                duplicates += 1
                del rows[token]
            rows[token] = vec
    if not rows:
        raise ParseError("no vectors found", path)
    if duplicates:
        logger.warning("%s: %d duplicate tokens, last occurrence kept", path, duplicates)
    tokens = list(rows)
    return WordVectorStore(tokens, np.array([rows[t] for t in tokens]), duplicates)

import math
from pathlib import Path

import numpy as np
import pytest

from attrid.embedding import WordVectorStore
from attrid.kb import load_kb
from attrid.lexsim import load_taxonomy
from attrid.linker import Link, QueryAnnotation

DATA = Path(__file__).parent / "data"

# wife.spouse = 0.82 puts them at halved distance 0.3; wife.mary = 0.96.
WIFE = np.array([0.6, 0.8, 0.0])
MARY = np.array([0.8, 0.6, 0.0])
SPOUSE = 0.82 * WIFE + math.sqrt(1 - 0.82**2) * np.array([0.0, 0.0, 1.0])
FIXTURE_VECTORS = {"wife": WIFE, "mary": MARY, "spouse": SPOUSE}


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def mini_kb():
    return load_kb(DATA / "mini.kb.tsv")


@pytest.fixture
def store():
    return WordVectorStore.from_dict(FIXTURE_VECTORS)


@pytest.fixture
def taxonomy():
    return load_taxonomy(DATA / "taxonomy.tsv")


@pytest.fixture
def wife_of_lincoln():
    return QueryAnnotation.from_text("q1", "the wife of lincoln", [Link("Lincoln", 3, 4, 0.9)])


@pytest.fixture
def vectors_file(tmp_path):
    path = tmp_path / "vectors.txt"
    lines = [f"{len(FIXTURE_VECTORS)} 3"]
    lines += [tok + " " + " ".join(repr(float(x)) for x in v) for tok, v in FIXTURE_VECTORS.items()]
    path.write_text("\n".join(lines) + "\n")
    return path

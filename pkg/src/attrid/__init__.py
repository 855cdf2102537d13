"""Entity attribute identification for entity-bearing search queries.

Rankers (MRF-based, learning to rank, lexical baselines) plus the
evaluation and collection-building tools around them.
"""

from attrid.errors import AttrIdError
from attrid.kb import KnowledgeBase, load_kb
from attrid.text import tokenize

__version__ = "0.1.0"

__all__ = ["AttrIdError", "KnowledgeBase", "load_kb", "tokenize", "__version__"]

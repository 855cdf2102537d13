"""Term normalization shared by every module that compares words."""

import re

_CAMEL_LOWER_UPPER = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_CAMEL_ACRONYM = re.compile(r"(?<=[A-Z])(?=[A-Z][a-z])")
_NON_ALNUM = re.compile(r"[^0-9a-z]+")


def tokenize(text):
    """Split ``text`` into lowercase alphanumeric tokens.

    camelCase boundaries are split before lowercasing, so ``deathPlace``
    gives ``['death', 'place']`` and ``HTMLParser`` gives ``['html', 'parser']``.
    Order and duplicates are preserved.
    """
    text = _CAMEL_LOWER_UPPER.sub(" ", text)
    text = _CAMEL_ACRONYM.sub(" ", text)
    return [t for t in _NON_ALNUM.split(text.lower()) if t]


def term_set(text):
    return frozenset(tokenize(text))


def normalize_entity_ref(ref):
    """Canonical form for comparing entity ids with attribute values.

    Spaces and underscores are unified; surrounding whitespace is dropped.
    """
    return "_".join(ref.replace("_", " ").split())

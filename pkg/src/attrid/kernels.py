"""Kernel dispatch: the Cython build when importable, NumPy otherwise.

Set ``ATTRID_PURE_PYTHON=1`` to force the fallback.
"""

import os

from attrid import _pykernels

BACKEND = "python"
grouped_ndcg = _pykernels.grouped_ndcg

if not os.environ.get("ATTRID_PURE_PYTHON"):
    try:
        from attrid import _ckernels
    except ImportError:
        _ckernels = None
    else:
        grouped_ndcg = _ckernels.grouped_ndcg
        BACKEND = "cython"
else:
    _ckernels = None

"""Select the SMO implementation at import time.

The compiled extension is used when it was built; ``LEXEVAL_PURE_PYTHON=1``
forces the numpy fallback.
"""

from __future__ import annotations

import os

from lexeval.assess import _smo_py

_smo_fast = None
if not os.environ.get("LEXEVAL_PURE_PYTHON"):
    try:
        from lexeval.assess import _smo_fast
    except ImportError:
        _smo_fast = None

if _smo_fast is not None:
    solve = _smo_fast.solve
    BACKEND = "cython"
else:
    solve = _smo_py.solve
    BACKEND = "python"

IMPLEMENTATIONS = {"python": _smo_py.solve}
if _smo_fast is not None:
    IMPLEMENTATIONS["cython"] = _smo_fast.solve

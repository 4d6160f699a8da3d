"""Backend selection for the hot loops.

The compiled Cython module is used when it was built; otherwise the pure-Python
module is used. Set ``GLACIER_MAPPER_BACKEND=python`` to force the fallback.
"""

import os

from . import _pykernels as python

try:
    from . import _ckernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("GLACIER_MAPPER_BACKEND", "").lower() != "python":
    active = compiled
    BACKEND = "cython"
else:
    active = python
    BACKEND = "python"

SINK = python.SINK
NODATA = python.NODATA
DR = python.DR
DC = python.DC


def available():
    """Mapping of backend name to module for every importable backend."""
    out = {"python": python}
    if compiled is not None:
        out["cython"] = compiled
    return out

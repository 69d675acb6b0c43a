"""Hot kernels, compiled when available.

The Cython extension ``_ckernels`` is used if it imports; otherwise the
numpy fallback in ``_pykernels`` is used. Set ``CASCADE_SCREEN_BACKEND=python``
to force the fallback.
"""

import os

from . import _pykernels

python_backend = _pykernels

try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if os.environ.get("CASCADE_SCREEN_BACKEND", "").lower() == "python" or compiled_backend is None:
    backend = _pykernels
    BACKEND = "python"
else:
    backend = compiled_backend
    BACKEND = "cython"

best_split = backend.best_split
smo_solve = backend.smo_solve
tree_apply = backend.tree_apply


def available_backends():
    out = {"python": _pykernels}
    if compiled_backend is not None:
        out["cython"] = compiled_backend
    return out

"""Kernel backend selection.

The compiled extension is used when it was built and ``RDMFT_PURE_PYTHON`` is
unset; otherwise the numpy fallback is used.  Both expose ``apply_terms`` and
``rank_configs`` with identical semantics.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("RDMFT_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "compiled"


def get(name=None):
    """Return a kernel module: ``"compiled"``, ``"python"`` or the active default."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def apply_terms(*args, backend=None):
    return get(backend).apply_terms(*args)


def rank_configs(*args, backend=None):
    return get(backend).rank_configs(*args)

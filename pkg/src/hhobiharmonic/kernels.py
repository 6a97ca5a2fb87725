"""Backend selection for the local-operator kernel.

The compiled extension is used when it imports; ``HHOBIH_BACKEND=python``
forces the numpy fallback and ``HHOBIH_BACKEND=cython`` makes a missing
extension an error.
"""
import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

_choice = os.environ.get("HHOBIH_BACKEND", "auto").lower()
_compiled = None
if _choice != "python":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        if _choice == "cython":
            raise
        log.debug("compiled kernels unavailable, using numpy fallback")

BACKENDS = {"python": _pykernels}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

BACKEND = "cython" if _compiled is not None and _choice != "python" else "python"


def get_kernel(name=None):
    """Kernel module by name (default: the import-time choice)."""
    name = name or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None

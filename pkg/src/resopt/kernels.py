"""Backend selection for the hot loops.

The compiled ``_kernels`` extension is used when it was built; otherwise the
numpy fallback is loaded.  Both expose the same functions and produce
identical results, so the choice only affects speed.
"""

from . import _kernels_py

try:
    from . import _kernels as _native
except ImportError:  # extension not built
    _native = None

active = _native if _native is not None else _kernels_py
BACKEND = active.BACKEND

# random-draw slots; each (seed, replication, user, slot) is an independent draw
SLOT_P = 0
SLOT_V = 1
SLOT_USE = 2
SLOT_STATE = 3
SLOT_P1 = 4
SLOT_P21 = 5
SLOT_P22 = 6

def available():
    """Names of the importable backends."""
    return ["numpy"] + (["cython"] if _native is not None else [])

def get(name=None):
    """Return a backend module by name (``"cython"`` or ``"numpy"``)."""
    if name is None:
        return active
    if name == "numpy":
        return _kernels_py
    if name == "cython":
        if _native is None:
            raise ImportError("the compiled resopt._kernels extension is not built")
        return _native
    raise ValueError(f"unknown kernel backend {name!r}")

"""Backend selection for the grid hot kernels.

The compiled Cython extension is used when available; otherwise the numpy
fallback is selected at import time.  Set the environment variable
``KHESSIAN_KERNELS=pure`` (or ``compiled``) to force a backend, or call
:func:`set_backend` at runtime (the benchmark does).
"""

import os

from . import _pure

try:
    from . import _core
except ImportError:
    _core = None

COMPILED_AVAILABLE = _core is not None

_env = os.environ.get("KHESSIAN_KERNELS", "auto").lower()
if _env == "pure":
    _active = _pure
elif _env == "compiled":
    if _core is None:
        raise ImportError("KHESSIAN_KERNELS=compiled but the extension is not built")
    _active = _core
else:
    _active = _core if COMPILED_AVAILABLE else _pure


def set_backend(name):
    """Switch kernels at runtime; name is 'pure', 'compiled' or 'auto'."""
    global _active
    if name == "pure":
        _active = _pure
    elif name == "compiled":
        if _core is None:
            raise ValueError("compiled kernels are not available")
        _active = _core
    elif name == "auto":
        _active = _core if COMPILED_AVAILABLE else _pure
    else:
        raise ValueError(f"unknown backend {name!r}")


def backend_name():
    return "compiled" if _active is _core and _core is not None else "pure"


def sor_color_sweep(x, nbr, cof, diag, rhs, ids, omega):
    _active.sor_color_sweep(x, nbr, cof, diag, rhs, ids, omega)


def apply_operator(x, nbr, cof, diag, out):
    _active.apply_operator(x, nbr, cof, diag, out)

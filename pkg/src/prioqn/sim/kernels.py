"""Kernel selection: compiled when available, pure Python otherwise.

Set ``PRIOQN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernel_py

try:
    from . import _kernel_cy
except ImportError:  # extension not built
    _kernel_cy = None

AVAILABLE = {"python": _kernel_py.run_kernel}
if _kernel_cy is not None:
    AVAILABLE["cython"] = _kernel_cy.run_kernel

if os.environ.get("PRIOQN_PURE_PYTHON") == "1" or _kernel_cy is None:
    DEFAULT = "python"
else:
    DEFAULT = "cython"


def get_kernel(name=None):
    name = name or DEFAULT
    try:
        return AVAILABLE[name]
    except KeyError:
        raise ValueError(f"kernel {name!r} is not available (have {sorted(AVAILABLE)})") from None

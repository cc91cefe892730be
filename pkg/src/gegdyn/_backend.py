"""Select the compiled kernels when available, else the pure-Python fallback.

Set ``GEGDYN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

impl = _fallback
NAME = "python"

if os.environ.get("GEGDYN_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _kernels
    except ImportError:  # extension not built
        pass
    else:
        impl = _kernels
        NAME = "compiled"

hqr_eigenvalues = impl.hqr_eigenvalues
sweep_poly2d = impl.sweep_poly2d

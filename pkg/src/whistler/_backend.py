"""Select the compiled kernels when built, else the NumPy fallback.

Set ``WHISTLER_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _core_py

if os.environ.get("WHISTLER_PURE_PYTHON", "") not in ("", "0"):
    core = _core_py
    BACKEND = "python"
else:
    try:
        from . import _core as core
        BACKEND = "cython"
    except ImportError:
        core = _core_py
        BACKEND = "python"

xcorr_valid = core.xcorr_valid
cfar_ca = core.cfar_ca
cfar_os = core.cfar_os
cfar_tm = core.cfar_tm

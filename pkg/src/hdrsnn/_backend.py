"""Selects the compiled kernels when importable, else the numpy fallback.

Set ``HDRSNN_BACKEND=python`` to force the fallback.
"""

import os

from . import _fallback

fallback = _fallback

if os.environ.get("HDRSNN_BACKEND", "").lower() == "python":
    kernels = _fallback
    NAME = "python"
else:
    try:
        from . import _kernels as kernels
        NAME = "cython"
    except ImportError:
        kernels = _fallback
        NAME = "python"

adm_points = kernels.adm_points
simulate = kernels.simulate

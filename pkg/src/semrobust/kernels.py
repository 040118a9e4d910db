"""Kernel selection: compiled shear extension when available, numpy fallback otherwise.

Set ``SEMROBUST_NO_EXT=1`` to force the pure-Python path (used by the benchmark).
"""

import os

from . import _shear_py

PAD_ZERO = _shear_py.PAD_ZERO
PAD_REPLICATE = _shear_py.PAD_REPLICATE
SUPPORT = _shear_py.A

if os.environ.get("SEMROBUST_NO_EXT"):
    _impl = _shear_py
    USING_EXTENSION = False
else:
    try:
        from . import _shear_cy as _impl  # type: ignore[no-redef]

        USING_EXTENSION = True
    except ImportError:
        _impl = _shear_py
        USING_EXTENSION = False

shear_lines = _impl.shear_lines

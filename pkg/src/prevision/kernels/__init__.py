"""Hot loops with a compiled implementation and a numpy fallback.

``BACKEND`` names the implementation picked at import time. Setting the
environment variable ``PREVISION_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _grid_py

if os.environ.get("PREVISION_PURE_PYTHON"):
    grid_extrema = _grid_py.grid_extrema
    BACKEND = "python"
else:
    try:
        from ._grid import grid_extrema
        BACKEND = "compiled"
    except ImportError:
        grid_extrema = _grid_py.grid_extrema
        BACKEND = "python"

__all__ = ["BACKEND", "grid_extrema"]

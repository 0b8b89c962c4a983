"""Kernel backend selection.

Imports the compiled core when present, otherwise the NumPy fallback.
``SCREENCLEAN_PURE_PYTHON=1`` forces the fallback (used by the benchmark
and the backend-equivalence tests). ``BACKEND`` reports which one is live.
"""

import os

from . import pynative

if os.environ.get("SCREENCLEAN_PURE_PYTHON") == "1":
    _impl = pynative
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = pynative
        BACKEND = "python"

hz_pair_stat = _impl.hz_pair_stat
hz_stats_matrix = _impl.hz_stats_matrix
cd_solve = _impl.cd_solve

__all__ = ["BACKEND", "hz_pair_stat", "hz_stats_matrix", "cd_solve", "pynative"]

"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
bit-identical, so nothing downstream needs to care which one is active.
Set SPARSEBITS_PURE_PY=1 to force the fallback (used by the equivalence tests
and the benchmark).
"""

from __future__ import annotations

import os

if os.environ.get("SPARSEBITS_PURE_PY"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND: str = _impl.BACKEND
sm64_array = _impl.sm64_array
uniform_labels = _impl.uniform_labels
uniform_label_matrix = _impl.uniform_label_matrix
nonuniform_labels = _impl.nonuniform_labels
nonuniform_label_matrix = _impl.nonuniform_label_matrix
match_counts = _impl.match_counts
candidate_violations = _impl.candidate_violations

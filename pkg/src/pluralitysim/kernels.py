"""Backend selection for the agent-sampling kernels.

The hot per-node sampling loops have two interchangeable implementations:
numba-compiled (default when numba imports) and pure numpy.  Set

    PLURALITYSIM_NO_NUMBA=1

to force the numpy fallback; ``benchmarks/bench_step.py`` compares the two.
"""

import os
import warnings

_flag = os.environ.get("PLURALITYSIM_NO_NUMBA", "").strip().lower()
FORCE_NUMPY = _flag not in ("", "0", "false", "no")

if FORCE_NUMPY:
    from . import _kernels_numpy as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - depends on the environment
        warnings.warn("numba unavailable, falling back to pure-numpy kernels")
        from . import _kernels_numpy as _impl

        BACKEND = "numpy"

CODE_3MAJ = _impl.CODE_3MAJ
CODE_3MAJ_FIRST = _impl.CODE_3MAJ_FIRST
CODE_MEDIAN = _impl.CODE_MEDIAN

step_builtin = _impl.step_builtin
step_table = _impl.step_table
step_hmaj = _impl.step_hmaj


def backend_name() -> str:
    """Active kernel backend: ``"numba"`` or ``"numpy"``."""
    return BACKEND

"""Backend selection for the hot loops.

The compiled ``_kernels`` extension is used when it was built; otherwise the
numpy/pure-Python twin is used. Set ``RAQM_PURE_PYTHON=1`` to force the
fallback.
"""

import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("RAQM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

active = compiled_backend or python_backend
BACKEND = active.BACKEND

uniforms = active.uniforms
sample_runs = active.sample_runs
lorenz_rk4 = active.lorenz_rk4
lyapunov_benettin = active.lyapunov_benettin

TAG_X = python_backend.TAG_X
TAG_Y = python_backend.TAG_Y
TAG_A = python_backend.TAG_A
TAG_B = python_backend.TAG_B
TAG_SRC = python_backend.TAG_SRC

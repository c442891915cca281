"""Backend selection for the numeric kernels.

The compiled extension is used when it was built; setting
``SLOWDRIP_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("SLOWDRIP_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py


def pairwise_js(P):
    import numpy as np

    return _impl.pairwise_js(np.ascontiguousarray(P, dtype=np.float64))


def mutual_reachability_mst(D, core):
    import numpy as np

    return _impl.mutual_reachability_mst(
        np.ascontiguousarray(D, dtype=np.float64),
        np.ascontiguousarray(core, dtype=np.float64),
    )

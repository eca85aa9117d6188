"""Backend selection: compiled kernels when available, numpy otherwise.

Set LMK_BACKEND=python or LMK_BACKEND=native to force a choice; native raises
if the extension is missing instead of silently falling back.
"""

import os

from . import _pykernels

_choice = os.environ.get("LMK_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "native", "python"):
    raise ImportError(f"LMK_BACKEND must be auto, native, or python, got {_choice!r}")

_impl = None
if _choice in ("auto", "native"):
    try:
        from . import _kernels as _impl
    except ImportError:
        if _choice == "native":
            raise ImportError(
                "LMK_BACKEND=native but the compiled lasermixkit._kernels "
                "extension is not installed"
            )
if _impl is None:
    _impl = _pykernels

BACKEND = _impl.NAME

PRIM_PLANE = _pykernels.PRIM_PLANE
PRIM_BOX = _pykernels.PRIM_BOX
PRIM_CYLINDER = _pykernels.PRIM_CYLINDER

bin_values = _impl.bin_values
rasterize = _impl.rasterize
ray_cast = _impl.ray_cast

"""Kernel selection: compiled stencil core when available, numpy fallback
otherwise.  Set HELMLAB_PURE_PY=1 to force the fallback."""

import os

from . import _stencil_py

if os.environ.get("HELMLAB_PURE_PY"):
    HAVE_COMPILED = False
    _impl = _stencil_py
else:
    try:
        from . import _stencil_cy as _impl

        HAVE_COMPILED = True
    except ImportError:
        HAVE_COMPILED = False
        _impl = _stencil_py

apply_stencil = _impl.apply_stencil
apply_stencil_py = _stencil_py.apply_stencil


def backend_name():
    return "cython" if HAVE_COMPILED else "numpy"

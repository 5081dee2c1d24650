"""Kernel backend selection: compiled extension if importable, numpy otherwise.

Set NCSR_PURE_PYTHON=1 to force the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
ppoly_eval = _pykernels.ppoly_eval
omega = _pykernels.omega
tauinv = _pykernels.tauinv

if not os.environ.get("NCSR_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:
        _ckernels = None
    if _ckernels is not None:
        BACKEND = "cython"
        ppoly_eval = _ckernels.ppoly_eval
        omega = _ckernels.omega
        tauinv = _ckernels.tauinv

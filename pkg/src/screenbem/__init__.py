"""Galerkin boundary element solver for Helmholtz scattering by planar
screens, including prefractal approximations of fractal screens."""

import os as _os

# the TBB layer shipped here is too old for numba; avoid the probe warning
if "NUMBA_THREADING_LAYER" not in _os.environ:
    import numba as _numba

    _numba.config.THREADING_LAYER = "workqueue"

__version__ = "0.1.0"

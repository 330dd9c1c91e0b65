"""Dense linear-algebra kernels with a compiled core and a numpy fallback.

The compiled Cython backend is preferred when its extension module built;
otherwise the numpy implementation takes over transparently. The environment
variable ``GRIDFLEX_KERNEL`` (``compiled`` or ``python``) pins the choice, and
``set_backend`` switches at runtime (used by tests and the benchmark).
"""

import os

from . import purepy

try:
    from . import _dense
except ImportError:
    _dense = None

_BACKENDS = {"python": purepy}
if _dense is not None:
    _BACKENDS["compiled"] = _dense


def _initial_backend():
    forced = os.environ.get("GRIDFLEX_KERNEL")
    if forced:
        if forced not in _BACKENDS:
            raise ImportError(
                f"GRIDFLEX_KERNEL={forced!r} but available backends are "
                f"{sorted(_BACKENDS)}"
            )
        return _BACKENDS[forced]
    return _BACKENDS.get("compiled", purepy)


_active = _initial_backend()


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def active_backend() -> str:
    return _active.BACKEND


def set_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; have {sorted(_BACKENDS)}")
    _active = _BACKENDS[name]


def chol_lower(H):
    return _active.chol_lower(H)


def chol_solve(L, b):
    return _active.chol_solve(L, b)


def marginal_variances(L):
    return _active.marginal_variances(L)

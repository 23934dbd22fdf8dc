"""Backend selection for the iteration kernels.

The compiled extension is used when it was built and ``TFA_PURE_PYTHON`` is not
set; otherwise the pure-Python fallback is used. Both give bit-identical results.
"""

import os
from types import ModuleType

from tfa.kernels import _fallback

try:
    from tfa.kernels import _core
except ImportError:  # extension not built
    _core = None

BACKENDS = {"python": _fallback}
if _core is not None:
    BACKENDS["compiled"] = _core

_active: ModuleType = (
    _core if _core is not None and not os.environ.get("TFA_PURE_PYTHON") else _fallback
)


def available() -> list[str]:
    return sorted(BACKENDS)


def backend() -> ModuleType:
    return _active


def backend_name() -> str:
    return "compiled" if _active is _core and _core is not None else "python"


def set_backend(name: str) -> None:
    global _active
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} is not available; choose from {available()}")
    _active = BACKENDS[name]


class use_backend:
    """Context manager switching the active backend temporarily."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        self._previous = backend_name()
        set_backend(self.name)
        return backend()

    def __exit__(self, *exc):
        set_backend(self._previous)
        return False

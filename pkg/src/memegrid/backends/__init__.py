"""Step-kernel backends: compiled extension with a numpy fallback.

Selection order: explicit argument, then MEMEGRID_BACKEND env var
("cython" | "python" | "auto"), then auto-detection preferring the
compiled kernel. Every backend is bit-deterministic in itself; outputs
across backends agree to floating-point reassociation, not bitwise.
"""

from __future__ import annotations

import os


def available_backends() -> list[str]:
    names = []
    try:
        from . import cython_backend  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    names.append("python")
    return names


def get_backend(name: str | None = None):
    name = name or os.environ.get("MEMEGRID_BACKEND", "auto")
    if name not in ("auto", "cython", "python"):
        raise ValueError(f"unknown backend {name!r} (use cython, python, or auto)")
    if name in ("auto", "cython"):
        try:
            from . import cython_backend
            return cython_backend
        except ImportError:
            if name == "cython":
                raise
    from . import numpy_backend
    return numpy_backend

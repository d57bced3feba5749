"""Build script for the optional compiled exchange/rollout kernel.

The package works without the extension (a numpy fallback is selected at
import time); building it is strongly recommended for anything beyond toy
grids. Set MEMEGRID_NO_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("MEMEGRID_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    arch = [] if os.environ.get("MEMEGRID_PORTABLE") else ["-march=native"]
    ext = Extension(
        "memegrid.backends._ckernel",
        ["src/memegrid/backends/_ckernel.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-fopenmp", "-fno-math-errno"] + arch,
        extra_link_args=["-fopenmp"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )


setup(ext_modules=_extensions())

"""Build script for the compiled filter-bank kernel.

The extension is optional at runtime: endpointer falls back to a batched
numpy implementation when the compiled module is absent (see
endpointer._backend). Build in place with

    python setup.py build_ext --inplace
"""

import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - source dists ship the .pyx only
    cythonize = None

PYX = os.path.join("src", "endpointer", "_core.pyx")

extensions = []
if os.path.exists(PYX):
    extensions = [
        Extension(
            "endpointer._core",
            [PYX],
            extra_compile_args=["-O3"],
        )
    ]

if extensions and cythonize is not None:
    extensions = cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=extensions)

"""Build script: compiles the hot-loop kernel extension when Cython is available.

The package works without the extension (a pure-Python twin is selected at
import time); the compiled kernel is what makes the large simulation sweeps
fast. ``pip install -e . --no-build-isolation`` builds it in place.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/qroute/_ckernel.pyx",
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)

"""Build script for the optional compiled reduction kernel.

The package works without the extension (a pure-Python fallback is selected
at import time); the extension just makes per-image persistence much faster.
"""
import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "wafertopo.persist._reduction",
                ["src/wafertopo/persist/_reduction.pyx"],
                language="c++",
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)

"""Builds the optional compiled kernel.

The package works without it: modules fall back to the pure-Python
implementations at import time when the extension is missing.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:  # plain install still works, just without the fast path
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "videoquorum._speedups",
                ["src/videoquorum/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)

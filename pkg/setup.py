"""Build script: compiles the Cython table-filling kernel when Cython and a
C compiler are available.  The package works without the extension (a pure
Python kernel is selected at import time), so build failures are non-fatal.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "exactscan._kernel",
                ["src/exactscan/_kernel.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)

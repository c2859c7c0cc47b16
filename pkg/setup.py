"""Build script: compiles the optional Cython hot-loop kernels.

If Cython is unavailable the package installs pure-Python; the kernels
fall back to relsync._kernels_py at import time.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "relsync._kernels",
                ["src/relsync/_kernels.pyx"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)

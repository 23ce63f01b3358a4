"""Build script.

The package is pure Python; a small Cython extension accelerates the
instruction-scan kernel when a C toolchain is available. If Cython or a
compiler is missing the build silently falls back to the pure-Python
kernel, which is selected automatically at import time.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "pcfg._kernels._scan_c",
                sources=["src/pcfg/_kernels/_scan_c.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )
except Exception:
    ext_modules = []

setup(ext_modules=ext_modules)

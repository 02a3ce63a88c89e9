"""Build script: compiles the hot-loop extension when a toolchain is present.

The package works without the extension (a NumPy fallback with the same API
is selected at import time), so any compilation failure downgrades to a
warning instead of aborting the install.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


def _extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        warnings.warn(f"building without compiled kernels: {exc}")
        return []
    ext = Extension(
        "opsplit._kernels",
        ["src/opsplit/_kernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


class optional_build_ext(build_ext):
    """Never fail the install over a missing compiler."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            warnings.warn(f"compiled kernels skipped: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled kernel {ext.name} skipped: {exc}")


setup(ext_modules=_extensions(), cmdclass={"build_ext": optional_build_ext})

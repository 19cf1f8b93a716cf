"""Build script: compiles the optional Cython kernel extension.

The extension is a pure speed-up; if Cython or a C compiler is missing the
install still succeeds and entrag.core falls back to the numpy kernels.
Set ENTRAG_SKIP_EXT=1 to skip the extension build entirely.
"""

import os
import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that degrades to a warning instead of failing the install."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            warnings.warn(f"skipping compiled kernels: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"skipping compiled kernel {ext.name}: {exc}")


def _extensions():
    if os.environ.get("ENTRAG_SKIP_EXT") == "1":
        return []
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        warnings.warn("Cython not available; installing with numpy kernels only")
        return []
    ext = Extension(
        "entrag.core._kernels",
        ["src/entrag/core/_kernels.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3, quiet=True)


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})

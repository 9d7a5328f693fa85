"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure-Python fallback is
selected at import time), so a failed Cython or compiler toolchain is
downgraded to a warning rather than a hard build error.
"""

import warnings

from setuptools import setup


def extension_modules():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        warnings.warn(f"building without compiled kernels: {exc}")
        return []
    return cythonize(
        [
            Extension(
                "loudgen._kernels._biquad",
                ["src/loudgen/_kernels/_biquad.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=extension_modules())

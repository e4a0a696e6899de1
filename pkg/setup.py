"""Build script for the optional compiled kernel core.

The package is fully functional without the extension (a numpy fallback is
selected at import); building it just makes the loop-bound kernels faster.
"""
from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "blastokit.backends._native",
                ["src/blastokit/backends/_native.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)

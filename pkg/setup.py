"""Builds the optional compiled kernels; the package falls back to numpy when they are absent."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("HDRSNN_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "hdrsnn._kernels",
                    ["src/hdrsnn/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O2"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)

"""Build the optional Cython kernels.

The package works without them: ``sheetlab.kernels`` falls back to the numpy
implementation when the extension is missing.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SHEETLAB_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        extensions = [
            Extension(
                "sheetlab._ckernels",
                ["src/sheetlab/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # no FMA contraction: the compiled march must reproduce the
                # numpy fallback's rounding
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)

"""Build hook for the optional compiled kernels.

The package works without them; ``ddpilot._kernels`` falls back to the
numpy implementation when the extension is missing.
"""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

CFLAGS = ["-O3", "-fno-math-errno"]

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "ddpilot._kernels._ckernels",
                ["src/ddpilot/_kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=CFLAGS,
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
            "embedsignature": True,
        },
    )

setup(ext_modules=ext_modules)

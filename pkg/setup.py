"""Build script for the optional compiled assembly kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed extension build is downgraded to a warning.
"""

import warnings

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "pseig._kernels",
                ["src/pseig/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    warnings.warn(f"building without compiled kernels: {exc}")
    extensions = []

setup(ext_modules=extensions)

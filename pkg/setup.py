"""Build script for the optional compiled kernel core.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); building it speeds up the screening statistic and
the coordinate-descent solver considerably.
"""

import numpy
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "screenclean._kernels._core",
                ["src/screenclean/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "helmlab._stencil_cy",
                ["src/helmlab/_stencil_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    # no Cython: the package falls back to the numpy kernels at import time
    ext_modules = []

setup(ext_modules=ext_modules)

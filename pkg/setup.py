"""Build script for the compiled stepping/accumulation kernels.

The extension is optional: if Cython or a C compiler is unavailable the
install still succeeds and the package falls back to the pure-numpy
kernels in ``driftlab._kernels_py``.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext = Extension(
        "driftlab._kernels_cy",
        ["src/driftlab/_kernels_cy.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # -ffp-contract=off keeps the float arithmetic identical to the
        # numpy fallback (no FMA contraction), so both backends produce
        # bitwise-equal paths.
        extra_compile_args=["-O3", "-ffp-contract=off"],
        optional=True,
    )
    ext_modules = cythonize([ext], language_level=3)
except ImportError:
    pass

setup(ext_modules=ext_modules)

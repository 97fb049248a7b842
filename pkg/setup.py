from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "tirfill._kernels._canny_cy",
                ["src/tirfill/_kernels/_canny_cy.pyx"],
            )
        ],
        language_level="3",
    )
except ImportError:
    # No Cython available: install without the compiled kernels; the package
    # falls back to the NumPy implementation at import time.
    extensions = []

setup(ext_modules=extensions)

"""Build hook for the optional compiled kernel extension.

The package is fully functional without the extension (a numpy fallback with
bit-identical outputs is selected at import time), so any failure here must
degrade to a pure-Python install instead of aborting.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "sparsebits._kernels_cy",
                sources=["src/sparsebits/_kernels_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"sparsebits: skipping compiled kernels ({exc}); pure-python fallback will be used")

setup(ext_modules=ext_modules)

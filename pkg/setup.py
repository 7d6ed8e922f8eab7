import os

from setuptools import Extension, setup

# The compiled kernels are an optional speedup; the package falls back to the
# pure NumPy twin (qsdcsim._kernels_py) when the extension is absent.
ext_modules = []
if os.environ.get("QSDCSIM_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "qsdcsim._kernels",
                    ["src/qsdcsim/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)

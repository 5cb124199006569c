import os

from setuptools import Extension, setup

# The compiled pricing kernel is optional: without it the package falls back
# to the NumPy reference implementation at import time.
ext_modules = []
if os.environ.get("HESTONFORGET_NO_EXT", "") not in ("1", "true", "yes"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "hestonforget.pricing._kernels",
                    ["src/hestonforget/pricing/_kernels.pyx"],
                    extra_compile_args=["-O3", "-fno-math-errno"],
                    libraries=["m"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)

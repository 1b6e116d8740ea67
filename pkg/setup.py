"""Build hook for the optional compiled kernel extension.

The package is fully functional without the extension: ``optiondrive.kernels``
falls back to a pure-numpy implementation when ``optiondrive.kernels._fast``
is missing.  Any failure while cythonizing or compiling therefore downgrades
to a plain pure-Python install instead of aborting.
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
                "optiondrive.kernels._fast",
                ["src/optiondrive/kernels/_fast.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"optiondrive: building without compiled kernels ({exc})")

setup(ext_modules=ext_modules)

from setuptools import Extension, setup

# The compiled kernels are optional: the package falls back to the numpy
# implementation in fgr._kernels_py when the extension is unavailable.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "fgr._kernels",
                sources=["src/fgr/_kernels.pyx"],
                extra_compile_args=["-O3", "-march=native"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)

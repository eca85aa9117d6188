import os

from setuptools import Extension, setup

# The compiled kernels are an optional speedup: if Cython or a C compiler is
# missing the package falls back to the pure-numpy implementations at import
# time (see lasermixkit._backend). LMK_NO_EXT=1 forces the pure build.
ext_modules = []
if not os.environ.get("LMK_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "lasermixkit._kernels",
                    ["src/lasermixkit/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("ratematch._kernels.compiled", ["src/ratematch/_kernels/compiled.pyx"])],
        language_level="3",
    )
except ImportError:
    # No Cython: install pure-Python only; the reference kernels take over at import.
    ext_modules = []

setup(ext_modules=ext_modules)

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("allpath._balance_core", ["src/allpath/_balance_core.pyx"])],
        language_level=3,
    )
except ImportError:
    # Pure-python fallback kernel is used when the extension is unavailable.
    pass

setup(ext_modules=ext_modules)

import numpy
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("semrobust._shear_cy", ["src/semrobust/_shear_cy.pyx"])],
        compiler_directives={"language_level": 3},
    )
except ImportError:
    # pure-Python fallback kernel is selected at import time
    ext_modules = []

setup(ext_modules=ext_modules, include_dirs=[numpy.get_include()])

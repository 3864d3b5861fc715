import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension("oscint._kernels", ["src/oscint/_kernels.pyx"],
              include_dirs=[numpy.get_include()],
              extra_compile_args=["-O3"], define_macros=[("_GNU_SOURCE", None)]),
]

setup(ext_modules=cythonize(extensions, language_level=3))

from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension("blunt.lincheck._lincore", ["src/blunt/lincheck/_lincore.pyx"], extra_compile_args=["-O2"]),
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; beepsim.kernels falls back to the engine
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("beepsim._ckernels", ["src/beepsim/_ckernels.pyx"], include_dirs=[numpy.get_include()],
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)

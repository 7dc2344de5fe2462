import os

from setuptools import setup

ext_modules = []
if os.environ.get("DENSEREC_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("denserec.kernels._core", ["src/denserec/kernels/_core.pyx"],
                       include_dirs=[np.get_include()], language="c++", extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)

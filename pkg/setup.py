import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("HHOBIH_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "hhobiharmonic._ckernels",
                    ["src/hhobiharmonic/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)

import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("LEXEVAL_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "lexeval.assess._smo_fast",
                    ["src/lexeval/assess/_smo_fast.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)

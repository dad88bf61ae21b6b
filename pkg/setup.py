import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "mcfdtd.fdtd._kernels",
        ["src/mcfdtd/fdtd/_kernels.pyx"],
        include_dirs=[np.get_include()],
        # no FMA contraction: the fallback must stay bit-identical
        extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))

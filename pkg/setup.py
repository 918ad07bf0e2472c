from Cython.Build import cythonize
from setuptools import Extension, setup

setup(
    ext_modules=cythonize(
        [Extension("prevision.kernels._grid", ["src/prevision/kernels/_grid.pyx"], extra_compile_args=["-O3"])],
        language_level=3,
    )
)

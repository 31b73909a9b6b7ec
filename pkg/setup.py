import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# numpy ships its C distribution functions (random_normal & co) as a static
# library next to the random subpackage.
npyrandom_dir = os.path.join(os.path.dirname(np.random.__file__), "lib")

# -ffp-contract=off keeps the compiled loop bitwise-identical to the pure
# Python fallback (no FMA contraction); do not add -ffast-math.
extensions = [
    Extension(
        "gelplace._speedups",
        ["src/gelplace/_speedups.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[npyrandom_dir],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": 3},
    )
)

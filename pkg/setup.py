"""Builds the optional compiled episode kernel.

The package works without it (a pure-numpy fallback is selected at import
time), but the compiled kernel is 1-2 orders of magnitude faster and is what
makes full subgoal discovery runs take seconds instead of hours.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "microgoals._kernel_cy",
                ["src/microgoals/_kernel_cy.pyx"],
                include_dirs=[np.get_include()],
                # -fno-builtin-sin/cos keeps adjacent sin/cos calls separate;
                # glibc's fused sincos rounds differently by 1 ulp on rare
                # inputs, which would break bit-parity with the python backend.
                extra_compile_args=["-O3", "-fno-builtin-sin", "-fno-builtin-cos"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "mrcodec.coder._rc_c",
                ["src/mrcodec/coder/_rc_c.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # Pure-Python coder fallback is selected at import time if the
    # extension is unavailable.
    ext_modules = []

setup(ext_modules=ext_modules)

import os
import platform

from setuptools import Extension, setup

# -ffast-math lets the check-node loop vectorise through glibc's libmvec; it is
# confined to the small C kernel so the Cython glue keeps IEEE semantics.
# POLARCM_NATIVE=1 adds -march=native (faster, but the build is not portable).
KERNEL_FLAGS = ["-O3", "-ffast-math"]
if os.environ.get("POLARCM_NATIVE") == "1":
    KERNEL_FLAGS.append("-march=native")
elif platform.machine() not in ("x86_64", "AMD64", "aarch64"):
    KERNEL_FLAGS = ["-O3"]

SRC = os.path.join("src", "polarcm")

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; _sc_py is used at import
    ext_modules, libraries = [], []
else:
    libraries = [("pcm_boxplus", {
        "sources": [os.path.join(SRC, "_boxplus.c")],
        "include_dirs": [SRC],
        "cflags": KERNEL_FLAGS + ["-fPIC"],
    })]
    ext_modules = cythonize(
        [Extension(
            "polarcm._sc_ext",
            [os.path.join(SRC, "_sc_ext.pyx")],
            include_dirs=[np.get_include(), SRC],
            libraries=["pcm_boxplus", "m"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
        )],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules, libraries=libraries)

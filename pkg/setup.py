"""Build script for the optional compiled kernels.

The package is pure Python except for riskrank._kernels._scan_cy, which
accelerates the split-scan and edit-distance inner loops.  If the extension
cannot be built the install still succeeds and the package falls back to
the numpy implementation at import time.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Try to build the extension; warn instead of failing."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: skipping compiled kernels ({exc}); "
                  "pure-python fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc}); "
                  "pure-python fallback will be used")


def _extensions():
    import numpy
    from Cython.Build import cythonize

    return cythonize(
        [
            Extension(
                "riskrank._kernels._scan_cy",
                ["src/riskrank/_kernels/_scan_cy.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )


setup(
    ext_modules=_extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)

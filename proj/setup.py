from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

ext = Pybind11Extension(
    "funet._funet",
    sorted(
        [
            "python/funet_py.cpp",
            "src/image.cpp",
            "src/metrics.cpp",
            "src/model.cpp",
            "src/synth.cpp",
            "src/train.cpp",
        ]
    ),
    include_dirs=["include", "vendor"],
    cxx_std=20,
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})

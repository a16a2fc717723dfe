"""Builds the Rust extension with cargo; packaging metadata is in pyproject.toml."""

import shutil
import subprocess
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

ROOT = Path(__file__).resolve().parent


class CargoExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CargoBuildExt(build_ext):
    def build_extension(self, ext):
        subprocess.run(
            ["cargo", "build", "--release", "-p", "dmot-py"],
            check=True,
            cwd=ROOT,
        )
        lib = ROOT / "target" / "release" / "libdmot_py.so"
        dest = Path(self.get_ext_fullpath(ext.name))
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(lib, dest)


setup(
    ext_modules=[CargoExtension("dmot._native")],
    cmdclass={"build_ext": CargoBuildExt},
)

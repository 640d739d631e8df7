"""Build glue: compile the Rust extension with cargo and place the cdylib
where setuptools expects the module. The extension carries no C sources;
cargo owns the whole build."""

import shutil
import subprocess
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

CRATE_DIR = Path(__file__).resolve().parent


class CargoBuildExt(build_ext):
    def build_extension(self, ext):
        subprocess.run(
            ["cargo", "build", "--release", "-p", "dzo-py"],
            cwd=CRATE_DIR,
            check=True,
        )
        built = CRATE_DIR.parent.parent / "target" / "release" / "libdzo.so"
        dest = Path(self.get_ext_fullpath(ext.name))
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built, dest)


setup(
    ext_modules=[Extension("dzo", sources=[])],
    cmdclass={"build_ext": CargoBuildExt},
)

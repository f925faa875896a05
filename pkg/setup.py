import os
import re
import setuptools


CODE_ROOT = os.path.dirname(os.path.abspath(__file__))
VERSION_FILE = os.path.join(CODE_ROOT, 'src', 'carkit', '_version.py')
README_FILE = os.path.join(CODE_ROOT, 'README.md')

_VERSION_PATTERN = re.compile(r"""^__version__\s*=\s*['"]([^'"]+)['"]""", re.MULTILINE)


def read_version() -> str:
    """Reads `__version__` out of `_version.py` without importing the package.

    Raises:
        RuntimeError: if the file has no version assignment.
    """
    with open(VERSION_FILE, 'r') as f:
        match = _VERSION_PATTERN.search(f.read())
    if match is None:
        raise RuntimeError(f'No __version__ found in {VERSION_FILE}')
    return match.group(1)


def read_readme() -> str:
    with open(README_FILE, 'r') as f:
        return f.read()


setuptools.setup(
    name="carkit",
    version=read_version(),
    author="carkit contributors",
    description="Classification approaches for regression in monocular depth",
    long_description=read_readme(),
    long_description_content_type="text/markdown",
    python_requires=">=3.8",
    install_requires=['numpy>=1.22', 'pydantic>=2.0', 'joblib>=1.1'],
    extras_require={'dev': ['pytest'], 'docs': ['sphinx', 'sphinx_rtd_theme']},
    entry_points={'console_scripts': ['carkit = carkit.cli:main']},
    package_dir={'': 'src'},
    packages=setuptools.find_packages(where='src'),
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Environment :: Console",
        "Programming Language :: Python :: 3",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Image Recognition",
        "Operating System :: OS Independent",
    ],
)

# Sphinx configuration for the carkit docs.
# https://www.sphinx-doc.org/en/master/usage/configuration.html
import os
import sys

# autodoc imports the package straight from the source tree
sys.path.insert(0, os.path.abspath('../../src'))

from carkit import __version__  # noqa: E402

project = 'carkit'
copyright = '2024, the carkit developers'
author = 'the carkit developers'
release = __version__

extensions = [
    'sphinx.ext.duration',
    'sphinx.ext.doctest',
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
]
templates_path = ['_templates']
exclude_patterns = []

# doctests in introduction.rst share these imports
doctest_global_setup = '''
import numpy as np
'''

html_theme = 'sphinx_rtd_theme'
html_static_path = ['_static']

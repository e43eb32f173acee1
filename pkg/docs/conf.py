# Configuration file for the Sphinx documentation builder.

import os
import sys
sys.path.insert(0, os.path.abspath('..'))

from tanglegame import __version__  # noqa: E402

# -- Project information -----------------------------------------------------

project = 'tanglegame'
copyright = "2026, the tanglegame developers"
author = 'the tanglegame developers'
version = __version__
release = __version__

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.mathjax',
    'sphinx.ext.napoleon',
]

source_suffix = '.rst'
master_doc = 'index'
language = None
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'

# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'
htmlhelp_basename = 'tanglegamedoc'

# -- Options for manual page output ------------------------------------------

man_pages = [
    (master_doc, 'tanglegame', 'tanglegame Documentation', [author], 1)
]

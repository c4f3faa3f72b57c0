#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# uwsim documentation build configuration file.

import sphinx_rtd_theme

from uwsim import __version__

extensions = [
    'sphinx.ext.autodoc',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'uwsim'
copyright = '2026, uwsim developers'
author = 'uwsim developers'

version = __version__
release = __version__

language = 'en'
exclude_patterns = []

pygments_style = 'monokai'
todo_include_todos = False

# -- HTML output ----------------------------------------------------------

html_theme = "sphinx_rtd_theme"
html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]
html_static_path = []
htmlhelp_basename = 'uwsimdoc'

# -- Other formats --------------------------------------------------------

latex_documents = [
    (master_doc, 'uwsim.tex', 'uwsim Documentation', author, 'manual'),
]

man_pages = [
    (master_doc, 'uwsim', 'uwsim Documentation', [author], 1)
]

texinfo_documents = [
    (master_doc, 'uwsim', 'uwsim Documentation', author, 'uwsim',
     'Underwater image synthesis, restoration and quality assessment.', 'Miscellaneous'),
]

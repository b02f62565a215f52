# -*- coding: utf-8 -*-
#
# stealthkey documentation build configuration file.

import sys
import os

sys.path.insert(0, os.path.abspath('..'))

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
    'sphinx.ext.todo',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'stealthkey'
copyright = '2024, The stealthkey developers'
author = 'The stealthkey developers'

version = '0.1'
release = '0.1.0'

language = 'en'
exclude_patterns = ['_build']
pygments_style = 'sphinx'
todo_include_todos = True

html_theme = 'alabaster'
html_static_path = ['_static']
htmlhelp_basename = 'stealthkeydoc'

latex_documents = [
    (master_doc, 'stealthkey.tex', 'stealthkey Documentation',
     author, 'manual'),
]

man_pages = [
    (master_doc, 'stealthkey', 'stealthkey Documentation',
     [author], 1)
]

texinfo_documents = [
    (master_doc, 'stealthkey', 'stealthkey Documentation',
     author, 'stealthkey',
     'Bounds and simulations for stealthy secret key generation.',
     'Miscellaneous'),
]

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'scipy': ('https://docs.scipy.org/doc/scipy/', None),
}

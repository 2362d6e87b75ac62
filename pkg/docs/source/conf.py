# Sphinx configuration of the isopatch documentation.
# https://www.sphinx-doc.org/en/master/usage/configuration.html

import os
import sys

sys.path.insert(0, os.path.abspath("./../.."))

project = "isopatch"
copyright = "2026, isopatch developers"
author = "isopatch developers"
release = "0.1.0"

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "sphinx.ext.mathjax",
    "myst_parser",
]

# numpy, scipy and the re-exported helpers would otherwise be documented
# once per importing module
_documented = set()


def skip_foreign(app, what, name, obj, skip, options):
    module = getattr(obj, "__module__", None)
    if module is None:
        return skip
    if not module.startswith("isopatch") or id(obj) in _documented:
        return True
    _documented.add(id(obj))
    return skip


def setup(app):
    app.connect("autodoc-skip-member", skip_foreign)


autodoc_default_options = {
    "members": True,
    "undoc-members": True,
    "show-inheritance": True,
}
autodoc_member_order = "bysource"
autodoc_typehints = "description"
autodoc_preserve_defaults = True

napoleon_numpy_docstring = True
napoleon_attr_annotations = True

exclude_patterns = []
source_suffix = {
    ".rst": "restructuredtext",
    ".md": "markdown",
}

html_theme = "pydata_sphinx_theme"
html_theme_options = {
    "show_nav_level": 4,
    "collapse_navigation": False,
}

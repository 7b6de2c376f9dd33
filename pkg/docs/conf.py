from importlib import metadata

project = "favs"
copyright = "favs developers 2026"
author = "favs developers"

try:
    release = metadata.version("favs")
except metadata.PackageNotFoundError:
    release = "0.0.0"
version = ".".join(release.split(".")[:2])

extensions = [
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "sphinx.ext.autosectionlabel",
    "sphinx.ext.intersphinx",
    "sphinx_immaterial",
    "sphinx_immaterial.apidoc.python.apigen",
]

source_suffix = ".rst"
master_doc = "index"

# Docstrings use the NumPy layout only
napoleon_google_docstring = False
napoleon_numpy_docstring = True
napoleon_use_rtype = False

autosectionlabel_prefix_document = True

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
    "scipy": ("https://docs.scipy.org/doc/scipy", None),
}

# One API page per module; the command-line entry point is documented in usage.rst
python_apigen_modules = {
    f"favs.{name}": "_api/"
    for name in ("tensor", "spectral", "fded", "scmc", "pipeline", "metrics", "fixtures", "ften", "parameters", "errors")
}
python_apigen_default_groups = [
    (r"class:.*Error", "Errors"),
    ("class:.*", "Classes"),
    ("function:.*", "Functions"),
]
python_apigen_default_order = [
    ("class:.*", 10),
    ("function:.*", 20),
    (r"class:.*Error", 30),
]
add_function_parentheses = True
add_module_names = False

html_title = f"favs {version}"
html_theme = "sphinx_immaterial"
html_theme_options = {
    "font": False,
    "palette": {"primary": "indigo", "accent": "orange"},
    "features": ["navigation.sections", "toc.follow"],
}

"""Prompt templates shipped as editable text files.

Each template is a plain .txt file with named ``{placeholder}`` fields;
``load`` returns the raw template and ``fill`` substitutes placeholders
while leaving any unused braces in the page text intact.
"""

from importlib import resources

_PACKAGE = resources.files(__name__)


def load(name):
    """Return the template text for prompts/<name>.txt."""
    return (_PACKAGE / f"{name}.txt").read_text(encoding="utf-8")


def fill(template, **values):
    """Substitute {name} placeholders literally (no format-spec parsing)."""
    out = template
    for key, value in values.items():
        out = out.replace("{" + key + "}", str(value))
    return out


def render(name, **values):
    return fill(load(name), **values)

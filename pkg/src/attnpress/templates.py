"""Prompt templates as data files.

Templates live under ``attnpress/templates/`` and are addressed by ids like
``selection/attn_gs_summary``. Placeholders are literal ``{name}`` substrings
replaced by plain string substitution — deliberately not ``str.format`` so
braces inside user documents can never break rendering. A template may be
rendered in stages (``{initial_summary}`` survives the first pass of the
two-step refinement prompt, for example); rendering only fails if a value is
supplied for a placeholder the template does not contain.
"""

from __future__ import annotations

from importlib import resources

from .errors import TemplateError

_CACHE: dict[str, str] = {}


def load_template(template_id: str) -> str:
    """Return the raw text of a packaged template, e.g. "shared/prompt_gs_identify"."""
    if template_id not in _CACHE:
        root = resources.files(__package__) / "templates"
        path = root / f"{template_id}.txt"
        try:
            text = path.read_text(encoding="utf-8")
        except (FileNotFoundError, NotADirectoryError):
            raise TemplateError(f"unknown template id {template_id!r}") from None
        _CACHE[template_id] = text.rstrip("\n")
    return _CACHE[template_id]


def render(template: str, **values) -> str:
    """Substitute {key} placeholders in ``template`` text.

    Every supplied key must occur in the template at least once.
    """
    out = template
    for key, value in values.items():
        placeholder = "{" + key + "}"
        if placeholder not in out:
            raise TemplateError(f"template has no placeholder {placeholder}")
        out = out.replace(placeholder, str(value))
    return out


def render_template(template_id: str, **values) -> str:
    """Load a packaged template by id and substitute placeholders."""
    return render(load_template(template_id), **values)

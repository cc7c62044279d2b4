"""Recipe-driven page simplification.

A site recipe is a list of nested RecipeNode rules. Parsing a page keeps
one simplified node per recipe match, drops everything else (wrapper
levels between a parent match and its child matches never survive),
extracts text per the recipe's text policy, filters attributes down to
the recipe's keep/override lists plus reflected element state, and
assigns each named node a dotted path built from its nearest named
ancestor. Interactive nodes (clickable/input) are additionally listed in
a registry with element bindings the browser layer can resolve.
"""

import json
import re
from dataclasses import dataclass, field

from . import scripts
from .dom import collapse_whitespace, escape_attr, escape_text, parse_html
from .selectors import SelectorError, parse_selector, query, query_all

NAME_RE = re.compile(r"^[a-z0-9_]+$")

STATE_TAGS = ("input", "select", "textarea")

INDENT = "    "


class RecipeError(ValueError):
    """Raised for invalid recipes and for pages that violate recipe rules."""


def slugify(text):
    """Lowercase; fold each run of non-alphanumerics to one underscore."""
    return re.sub(r"[^a-z0-9]+", "_", text.lower()).strip("_")


def build_name_path(local_names):
    """Join local names into the dotted path used to address elements."""
    return ".".join(local_names)


@dataclass(frozen=True)
class RecipeNode:
    """One rule of a site recipe; children apply within each match."""

    selector: str
    name: str | None = None
    name_source: str | None = None  # "text" or a CSS selector for the label
    tag_name: str | None = None
    add_text: bool = False
    text_selector: str | None = None
    text_js: str | None = None
    text_format: str | None = None
    keep_attr: tuple = ()
    override_attr: dict = field(default_factory=dict)
    clickable: bool = False
    input: bool = False
    click_selector: str | None = None
    children: tuple = ()


_RECIPE_FIELDS = {
    "selector", "name", "name_source", "tag_name", "add_text",
    "text_selector", "text_js", "text_format", "keep_attr",
    "override_attr", "clickable", "input", "click_selector", "children",
}


def recipe_from_dict(data, path="recipe"):
    """Build and validate a RecipeNode from plain JSON data."""
    if not isinstance(data, dict):
        raise RecipeError(f"{path}: recipe node must be an object")
    unknown = set(data) - _RECIPE_FIELDS
    if unknown:
        raise RecipeError(f"{path}: unknown field(s) {sorted(unknown)}")
    children = tuple(
        recipe_from_dict(child, f"{path}.children[{i}]")
        for i, child in enumerate(data.get("children", []))
    )
    node = RecipeNode(
        selector=data.get("selector", ""),
        name=data.get("name"),
        name_source=data.get("name_source"),
        tag_name=data.get("tag_name"),
        add_text=bool(data.get("add_text", False)),
        text_selector=data.get("text_selector"),
        text_js=data.get("text_js"),
        text_format=data.get("text_format"),
        keep_attr=tuple(data.get("keep_attr", ())),
        override_attr=dict(data.get("override_attr", {})),
        clickable=bool(data.get("clickable", False)),
        input=bool(data.get("input", False)),
        click_selector=data.get("click_selector"),
        children=children,
    )
    _validate_node(node, path)
    return node


def _validate_node(node, path):
    if not node.selector or not node.selector.strip():
        raise RecipeError(f"{path}: selector must be a non-empty string")
    for sel in (node.selector, node.text_selector, node.click_selector,
                node.name_source if node.name_source not in (None, "text") else None):
        if sel is None:
            continue
        try:
            parse_selector(sel)
        except SelectorError as exc:
            raise RecipeError(f"{path}: {exc}") from exc
    if node.text_selector and node.text_js:
        raise RecipeError(f"{path}: text_selector and text_js are exclusive")
    if (node.text_selector or node.text_js) and not node.add_text:
        raise RecipeError(f"{path}: text_selector/text_js require add_text")
    if node.text_format is not None:
        if not node.add_text:
            raise RecipeError(f"{path}: text_format requires add_text")
        if node.text_format.count("{}") != 1:
            raise RecipeError(f"{path}: text_format needs exactly one {{}}")
    if node.clickable and node.input:
        raise RecipeError(f"{path}: clickable and input are exclusive")
    if node.name is not None and not NAME_RE.match(node.name):
        raise RecipeError(f"{path}: name {node.name!r} must match [a-z0-9_]+")
    if (node.clickable or node.input) and not (node.name or node.name_source):
        raise RecipeError(f"{path}: interactive node needs a name or name_source")


def load_recipe(source):
    """Load a site recipe from a JSON file path, JSON text, or parsed list."""
    if isinstance(source, (list, tuple)):
        data = source
    else:
        text = str(source)
        if text.lstrip().startswith("["):
            data = json.loads(text)
        else:
            with open(text, encoding="utf-8") as fh:
                data = json.load(fh)
    if not isinstance(data, list):
        raise RecipeError("a site recipe must be a JSON list of recipe nodes")
    return tuple(
        node if isinstance(node, RecipeNode)
        else recipe_from_dict(node, f"recipe[{i}]")
        for i, node in enumerate(data)
    )


@dataclass
class SimplifiedNode:
    """One element of the simplified page given to the agent."""

    tag: str
    name: str | None = None
    attrs: dict = field(default_factory=dict)
    text: str | None = None
    children: list = field(default_factory=list)


@dataclass
class InteractiveRegistry:
    clickables: list = field(default_factory=list)
    inputs: list = field(default_factory=list)


@dataclass(frozen=True)
class Binding:
    """Element address for the browser layer: (selector, match-index) hops."""

    steps: tuple  # ((css_selector, index), ...) from the document root
    click_selector: str | None = None


@dataclass(frozen=True)
class StateSlot:
    """Live data the browser must harvest for one matched element."""

    key: str                      # stable binding-path key into live_state
    steps: tuple                  # same shape as Binding.steps
    element_state: bool = False   # needs value/checked/selected reads
    text_js: str | None = None
    override_attr: dict = field(default_factory=dict)


@dataclass
class ParseResult:
    nodes: list
    registry: InteractiveRegistry
    warnings: list
    bindings: dict
    state_slots: list


def extract_text(element, recipe_node, state=None, warnings=None):
    """Extract a matched element's text per the recipe's text policy."""
    warnings = warnings if warnings is not None else []
    text = ""
    if recipe_node.text_selector:
        target = query(element, recipe_node.text_selector)
        if target is None:
            warnings.append(
                f"text_selector {recipe_node.text_selector!r} matched nothing"
            )
        else:
            text = collapse_whitespace(target.text_content())
    elif recipe_node.text_js:
        if state is not None and "text" in state:
            text = collapse_whitespace(str(state["text"]))
        else:
            try:
                text = collapse_whitespace(
                    scripts.evaluate_text(recipe_node.text_js, element)
                )
            except scripts.ScriptError as exc:
                warnings.append(f"text_js failed: {exc}")
    else:
        text = collapse_whitespace(element.text_content())
    if recipe_node.text_format is not None:
        text = recipe_node.text_format.replace("{}", text)
    return text


def _local_name(recipe_node, element, ordinal, warnings):
    """Local (undotted) name of a match, or None for anonymous nodes."""
    if recipe_node.name_source:
        if recipe_node.name_source == "text":
            source = element.text_content()
        else:
            target = query(element, recipe_node.name_source)
            source = target.text_content() if target is not None else ""
        slug = slugify(source)
        if slug:
            return slug
        stem = recipe_node.name or recipe_node.tag_name or element.tag
        warnings.append(
            f"name_source {recipe_node.name_source!r} produced an empty slug; "
            f"falling back to {stem}_{ordinal}"
        )
        return f"{stem}_{ordinal}"
    return recipe_node.name


def _element_state(element, state):
    """State attributes reflected onto input/select/textarea nodes."""
    attrs = {}
    tag = element.tag
    if tag == "input":
        kind = (element.get("type") or "text").lower()
        if kind in ("checkbox", "radio"):
            checked = state.get("checked") if "checked" in state \
                else "checked" in element.attrs
            if checked:
                attrs["checked"] = "true"
        else:
            attrs["value"] = str(
                state.get("value", element.get("value") or "")
            )
    elif tag == "textarea":
        attrs["value"] = str(state.get("value", element.text_content()))
    elif tag == "select":
        if "selected" in state:
            attrs["selected"] = str(state["selected"])
        else:
            options = query_all(element, "option")
            chosen = next(
                (o for o in options if "selected" in o.attrs or o.props.get("selected")),
                options[0] if options else None,
            )
            if chosen is not None:
                label = collapse_whitespace(chosen.text_content()) \
                    or chosen.get("value") or ""
                attrs["selected"] = label
    return attrs


class _PageParser:
    def __init__(self, recipe, live_state):
        self.recipe = recipe
        self.live_state = live_state or {}
        self.warnings = []
        self.registry = InteractiveRegistry()
        self.bindings = {}
        self.state_slots = []
        self.names = {}

    def parse(self, document):
        nodes = []
        for i, recipe_node in enumerate(self.recipe):
            nodes.extend(
                self._build(recipe_node, document, None, (), f"{i}")
            )
        collisions = sorted(n for n, c in self.names.items() if c > 1)
        if collisions:
            raise RecipeError(f"duplicate names in parsed page: {collisions}")
        return nodes

    def _build(self, recipe_node, context, parent_name, parent_steps, key_prefix):
        try:
            matched = query_all(context, recipe_node.selector)
        except SelectorError as exc:
            raise RecipeError(
                f"recipe[{key_prefix}] selector {recipe_node.selector!r}: {exc}"
            ) from exc
        if recipe_node.name and not recipe_node.name_source:
            matched = matched[:1]
        built = []
        for i, element in enumerate(matched):
            built.append(
                self._build_one(
                    recipe_node, element, i, parent_name, parent_steps,
                    f"{key_prefix}:{i}",
                )
            )
        return built

    def _build_one(self, recipe_node, element, index, parent_name,
                   parent_steps, key):
        local = _local_name(recipe_node, element, index + 1, self.warnings)
        full = None
        if local:
            full = build_name_path([parent_name, local]) if parent_name else local
            self.names[full] = self.names.get(full, 0) + 1
        steps = parent_steps + ((recipe_node.selector, index),)
        state = self.live_state.get(key, {})

        attrs = {}
        for attr in recipe_node.keep_attr:
            value = element.get(attr)
            if value is not None:
                attrs[attr] = value
        for attr, script in recipe_node.override_attr.items():
            if attr in state.get("attrs", {}):
                attrs[attr] = str(state["attrs"][attr])
                continue
            try:
                attrs[attr] = scripts.evaluate_text(script, element)
            except scripts.ScriptError as exc:
                self.warnings.append(
                    f"override_attr {attr!r} on {full or recipe_node.selector}: {exc}"
                )
        attrs.update(_element_state(element, state))

        text = None
        if recipe_node.add_text:
            text = extract_text(element, recipe_node, state, self.warnings)

        if element.tag in STATE_TAGS or recipe_node.text_js \
                or recipe_node.override_attr:
            self.state_slots.append(StateSlot(
                key=key,
                steps=steps,
                element_state=element.tag in STATE_TAGS,
                text_js=recipe_node.text_js,
                override_attr=dict(recipe_node.override_attr),
            ))
        if recipe_node.clickable or recipe_node.input:
            self.bindings[full] = Binding(steps, recipe_node.click_selector)
            if recipe_node.clickable:
                self.registry.clickables.append(full)
            else:
                self.registry.inputs.append(full)

        children = []
        for j, child in enumerate(recipe_node.children):
            children.extend(
                self._build(child, element, full or parent_name, steps,
                            f"{key}/{j}")
            )
        return SimplifiedNode(
            tag=recipe_node.tag_name or element.tag,
            name=full,
            attrs=attrs,
            text=text or None,
            children=children,
        )


def parse_page(raw_markup, recipe, live_state=None):
    """Simplify a raw page using a site recipe.

    live_state maps StateSlot keys to harvested browser data
    ({"value": ..., "checked": ..., "selected": ..., "text": ...,
    "attrs": {...}}); omit it for pure static parsing.
    """
    document = parse_html(raw_markup)
    parser = _PageParser(recipe, live_state)
    nodes = parser.parse(document)
    return ParseResult(
        nodes=nodes,
        registry=parser.registry,
        warnings=parser.warnings,
        bindings=parser.bindings,
        state_slots=parser.state_slots,
    )


def _render_attrs(node):
    parts = []
    if node.name:
        parts.append(f' name="{escape_attr(node.name)}"')
    for attr, value in node.attrs.items():
        parts.append(f' {attr}="{escape_attr(value)}"')
    return "".join(parts)


def _render_node(node, depth, out):
    pad = INDENT * depth
    open_tag = f"{pad}<{node.tag}{_render_attrs(node)}>"
    if not node.children:
        text = escape_text(node.text) if node.text else ""
        out.append(f"{open_tag}{text}</{node.tag}>")
        return
    out.append(open_tag)
    if node.text:
        out.append(f"{pad}{INDENT}{escape_text(node.text)}")
    for child in node.children:
        _render_node(child, depth + 1, out)
    out.append(f"{pad}</{node.tag}>")


def render(tree):
    """Serialize simplified nodes to the page text shown to the agent."""
    nodes = tree if isinstance(tree, (list, tuple)) else [tree]
    out = []
    for node in nodes:
        _render_node(node, 0, out)
    return "\n".join(out)


def _simplified_from_element(element):
    attrs = dict(element.attrs)
    name = attrs.pop("name", None)
    texts = [c.data for c in element.children if not hasattr(c, "tag")]
    text = collapse_whitespace("".join(texts)) or None
    return SimplifiedNode(
        tag=element.tag,
        name=name,
        attrs=attrs,
        text=text,
        children=[_simplified_from_element(c) for c in element.child_elements],
    )


def parse_simplified(markup):
    """Parse rendered simplified markup back into SimplifiedNode trees."""
    document = parse_html(markup)
    return [_simplified_from_element(el) for el in document.child_elements]

"""Minimal mutable DOM built on the stdlib HTML parser.

The tree carries two layers of element state: ``attrs`` (what was written
in the markup) and ``props`` (runtime state such as the current value of
an input box, which real browsers keep off the serialized HTML). The
fixture browser mutates ``props`` when the agent types or clicks.
"""

import html as _html
from html.parser import HTMLParser

VOID_ELEMENTS = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
}

# Opening one of these implicitly closes an open element of the mapped set.
_IMPLIED_CLOSE = {
    "li": {"li"},
    "option": {"option"},
    "optgroup": {"option", "optgroup"},
    "p": {"p"},
    "tr": {"tr", "td", "th"},
    "td": {"td", "th"},
    "th": {"td", "th"},
    "dt": {"dt", "dd"},
    "dd": {"dt", "dd"},
}


class Text:
    __slots__ = ("data", "parent")

    def __init__(self, data, parent=None):
        self.data = data
        self.parent = parent

    def __repr__(self):
        return f"Text({self.data!r})"


class Element:
    __slots__ = ("tag", "attrs", "parent", "children", "props")

    def __init__(self, tag, attrs=None, parent=None):
        self.tag = tag.lower()
        self.attrs = dict(attrs or {})
        self.parent = parent
        self.children = []
        # Runtime state, seeded lazily from attrs (see fixture browser).
        self.props = {}

    # -- structure ----------------------------------------------------

    def append(self, node):
        node.parent = self
        self.children.append(node)
        return node

    @property
    def child_elements(self):
        return [c for c in self.children if isinstance(c, Element)]

    def iter_elements(self):
        """Depth-first, document order, self excluded."""
        for child in self.children:
            if isinstance(child, Element):
                yield child
                yield from child.iter_elements()

    def ancestors(self):
        node = self.parent
        while isinstance(node, Element):
            yield node
            node = node.parent

    def element_index(self):
        """1-based position among the parent's element children."""
        if not isinstance(self.parent, Element):
            return 1
        return self.parent.child_elements.index(self) + 1

    def next_element_sibling(self):
        if not isinstance(self.parent, Element):
            return None
        sibs = self.parent.child_elements
        i = sibs.index(self)
        return sibs[i + 1] if i + 1 < len(sibs) else None

    def previous_element_sibling(self):
        if not isinstance(self.parent, Element):
            return None
        sibs = self.parent.child_elements
        i = sibs.index(self)
        return sibs[i - 1] if i > 0 else None

    # -- content ------------------------------------------------------

    def get(self, name, default=None):
        return self.attrs.get(name.lower(), default)

    def has_class(self, cls):
        return cls in (self.get("class") or "").split()

    def text_content(self):
        """Concatenated text of the subtree, skipping script/style payloads."""
        parts = []
        self._collect_text(parts)
        return "".join(parts)

    def _collect_text(self, parts):
        for child in self.children:
            if isinstance(child, Text):
                parts.append(child.data)
            elif child.tag not in ("script", "style"):
                child._collect_text(parts)

    def __repr__(self):
        ident = "#" + self.attrs["id"] if "id" in self.attrs else ""
        cls = "." + ".".join((self.get("class") or "").split()) if self.get("class") else ""
        return f"<{self.tag}{ident}{cls}>"


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = Element("#document")
        self.stack = [self.root]

    def handle_starttag(self, tag, attrs):
        tag = tag.lower()
        implied = _IMPLIED_CLOSE.get(tag)
        if implied:
            while len(self.stack) > 1 and self.stack[-1].tag in implied:
                self.stack.pop()
        element = Element(tag)
        for name, value in attrs:
            element.attrs.setdefault(name.lower(), value if value is not None else "")
        self.stack[-1].append(element)
        if tag not in VOID_ELEMENTS:
            self.stack.append(element)

    def handle_startendtag(self, tag, attrs):
        element = Element(tag)
        for name, value in attrs:
            element.attrs.setdefault(name.lower(), value if value is not None else "")
        self.stack[-1].append(element)

    def handle_endtag(self, tag):
        tag = tag.lower()
        if tag in VOID_ELEMENTS:
            return
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return
        # Unmatched close tag: ignore.

    def handle_data(self, data):
        if data:
            self.stack[-1].append(Text(data))


def parse_html(markup):
    """Parse markup into a document Element (tag ``#document``)."""
    builder = _TreeBuilder()
    builder.feed(markup)
    builder.close()
    return builder.root


def escape_text(value):
    return _html.escape(value, quote=False)


def escape_attr(value):
    return _html.escape(value, quote=True)


def serialize(node, _parts=None):
    """Serialize an Element (or document) back to markup, attrs only."""
    top = _parts is None
    parts = [] if top else _parts
    if isinstance(node, Text):
        parts.append(escape_text(node.data))
    elif node.tag == "#document":
        for child in node.children:
            serialize(child, parts)
    else:
        attrs = "".join(
            f' {name}="{escape_attr(value)}"' for name, value in node.attrs.items()
        )
        if node.tag in VOID_ELEMENTS and not node.children:
            parts.append(f"<{node.tag}{attrs}/>")
        else:
            parts.append(f"<{node.tag}{attrs}>")
            for child in node.children:
                serialize(child, parts)
            parts.append(f"</{node.tag}>")
    if top:
        return "".join(parts)
    return None


def collapse_whitespace(text):
    """Trim and fold every whitespace run to a single space."""
    return " ".join(text.split())


def normalize_markup(markup):
    """Whitespace-normalize markup for golden comparison.

    Folds all whitespace runs (inside and between tags) to single spaces,
    then drops the purely presentational spaces that touch a tag boundary,
    so differently indented serializations of the same tree compare equal.
    """
    folded = collapse_whitespace(markup)
    return folded.replace("> ", ">").replace(" <", "<")

"""CSS selector engine for the recipe parser and the fixture browser.

Covers the selector core that site recipes realistically need: type, id,
class, attribute selectors with the CSS3 operators, the four combinators,
comma-separated lists, and the structural pseudo-classes
(:first-child, :last-child, :only-child, :nth-child, :nth-last-child,
:nth-of-type, :nth-last-of-type, :first-of-type, :last-of-type, :not,
:empty, :checked, :disabled). Anything else raises ``SelectorError`` so a
bad recipe fails loudly instead of silently matching nothing.
"""

import re

from .dom import Element, Text


class SelectorError(ValueError):
    """Raised for selectors the engine cannot parse or does not support."""


_IDENT = r"-?[_a-zA-Z][_a-zA-Z0-9-]*"
_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<combinator>[>+~])
  | (?P<comma>,)
  | (?P<type>\*|""" + _IDENT + r""")
  | (?P<id>\#""" + _IDENT + r""")
  | (?P<class>\.""" + _IDENT + r""")
  | (?P<attr>\[[^\]]*\])
  | (?P<pseudo>::?[-a-zA-Z]+(\([^)]*\))?)
    """,
    re.VERBOSE,
)

_ATTR_RE = re.compile(
    r"""^\[\s*(?P<name>""" + _IDENT + r""")\s*
    (?:(?P<op>[~^$*|]?=)\s*
       (?P<value>"[^"]*"|'[^']*'|[^\s\]]+)\s*)?\]$""",
    re.VERBOSE,
)

_PSEUDO_RE = re.compile(r"^:(?P<name>[-a-zA-Z]+)(?:\((?P<arg>[^)]*)\))?$")

_SIMPLE_PSEUDOS = {
    "first-child", "last-child", "only-child", "first-of-type",
    "last-of-type", "empty", "checked", "disabled",
}
_NTH_PSEUDOS = {"nth-child", "nth-last-child", "nth-of-type", "nth-last-of-type"}


class Compound:
    __slots__ = ("tag", "ids", "classes", "attrs", "pseudos")

    def __init__(self):
        self.tag = None          # lowercase tag name, "*" universal, None unset
        self.ids = []
        self.classes = []
        self.attrs = []          # (name, op, value) with op/value possibly None
        self.pseudos = []        # (name, parsed-arg)

    def is_empty(self):
        return (
            self.tag is None and not self.ids and not self.classes
            and not self.attrs and not self.pseudos
        )


def _parse_nth(arg, selector_text):
    arg = arg.strip().lower()
    if arg == "odd":
        return 2, 1
    if arg == "even":
        return 2, 0
    m = re.match(r"^([+-]?\d*)n\s*(?:([+-])\s*(\d+))?$", arg)
    if m:
        a_txt, sign, b_txt = m.groups()
        a = int(a_txt) if a_txt not in ("", "+", "-") else (-1 if a_txt == "-" else 1)
        b = int(sign + b_txt) if b_txt else 0
        return a, b
    if re.match(r"^[+-]?\d+$", arg):
        return 0, int(arg)
    raise SelectorError(f"bad nth-expression {arg!r} in {selector_text!r}")


def parse_selector(text):
    """Parse a selector list into [[(combinator, Compound), ...], ...].

    The first compound of each complex selector carries combinator None.
    """
    if not text or not text.strip():
        raise SelectorError("empty selector")
    result = []
    current = []          # list of (combinator, Compound) for one complex sel
    compound = Compound()
    pending = None        # combinator waiting for its right-hand compound
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise SelectorError(f"cannot parse selector {text!r} at offset {pos}")
        pos = m.end()
        kind = m.lastgroup
        token = m.group()
        if kind == "ws":
            if not compound.is_empty():
                current.append((pending, compound))
                compound = Compound()
                pending = " "
            continue
        if kind == "combinator":
            if not compound.is_empty():
                current.append((pending, compound))
                compound = Compound()
                pending = token
            elif pending == " ":
                pending = token
            else:
                raise SelectorError(f"dangling combinator in {text!r}")
            continue
        if kind == "comma":
            if compound.is_empty():
                raise SelectorError(f"empty selector before comma in {text!r}")
            current.append((pending, compound))
            result.append(current)
            current, compound, pending = [], Compound(), None
            continue
        if kind == "type":
            if not compound.is_empty():
                raise SelectorError(f"misplaced type selector in {text!r}")
            compound.tag = token.lower()
        elif kind == "id":
            compound.ids.append(token[1:])
        elif kind == "class":
            compound.classes.append(token[1:])
        elif kind == "attr":
            am = _ATTR_RE.match(token)
            if not am:
                raise SelectorError(f"bad attribute selector {token!r}")
            value = am.group("value")
            if value and value[0] in "\"'":
                value = value[1:-1]
            compound.attrs.append((am.group("name").lower(), am.group("op"), value))
        elif kind == "pseudo":
            if token.startswith("::"):
                raise SelectorError(f"pseudo-elements unsupported: {token!r}")
            pm = _PSEUDO_RE.match(token)
            name, arg = pm.group("name").lower(), pm.group("arg")
            if name in _SIMPLE_PSEUDOS:
                if arg is not None:
                    raise SelectorError(f":{name} takes no argument")
                compound.pseudos.append((name, None))
            elif name in _NTH_PSEUDOS:
                if arg is None:
                    raise SelectorError(f":{name} needs an argument")
                compound.pseudos.append((name, _parse_nth(arg, text)))
            elif name == "not":
                if not arg:
                    raise SelectorError(":not needs an argument")
                inner = parse_selector(arg)
                for complex_sel in inner:
                    if len(complex_sel) != 1:
                        raise SelectorError(":not accepts only compound selectors")
                compound.pseudos.append(("not", inner))
            else:
                raise SelectorError(f"unsupported pseudo-class :{name}")
    if not compound.is_empty():
        current.append((pending, compound))
    elif pending not in (None, " "):
        raise SelectorError(f"dangling combinator in {text!r}")
    if current:
        result.append(current)
    elif result:
        raise SelectorError(f"trailing comma in {text!r}")
    if not result:
        raise SelectorError(f"empty selector {text!r}")
    return result


def _nth_matches(index, a, b):
    # index is 1-based; match if index = a*n + b for some n >= 0.
    if a == 0:
        return index == b
    delta = index - b
    return delta % a == 0 and delta // a >= 0


def _matches_pseudo(element, name, arg):
    parent = element.parent if isinstance(element.parent, Element) else None
    if name == "first-child":
        return parent is not None and parent.child_elements[0] is element
    if name == "last-child":
        return parent is not None and parent.child_elements[-1] is element
    if name == "only-child":
        return parent is not None and len(parent.child_elements) == 1
    if name == "first-of-type":
        return _index_of_type(element) == 1
    if name == "last-of-type":
        return _index_of_type(element, reverse=True) == 1
    if name == "empty":
        return not any(
            isinstance(c, Element) or (isinstance(c, Text) and c.data)
            for c in element.children
        )
    if name == "checked":
        return "checked" in element.attrs or "selected" in element.attrs \
            or element.props.get("checked") is True
    if name == "disabled":
        return "disabled" in element.attrs
    if name == "nth-child":
        return parent is not None and _nth_matches(element.element_index(), *arg)
    if name == "nth-last-child":
        if parent is None:
            return False
        index = len(parent.child_elements) - element.element_index() + 1
        return _nth_matches(index, *arg)
    if name == "nth-of-type":
        return _nth_matches(_index_of_type(element), *arg)
    if name == "nth-last-of-type":
        return _nth_matches(_index_of_type(element, reverse=True), *arg)
    if name == "not":
        return not any(
            _matches_compound(element, complex_sel[0][1]) for complex_sel in arg
        )
    raise SelectorError(f"unsupported pseudo-class :{name}")


def _index_of_type(element, reverse=False):
    if not isinstance(element.parent, Element):
        return 1
    sibs = [e for e in element.parent.child_elements if e.tag == element.tag]
    if reverse:
        sibs = list(reversed(sibs))
    return sibs.index(element) + 1


def _matches_compound(element, compound):
    if compound.tag not in (None, "*") and element.tag != compound.tag:
        return False
    for ident in compound.ids:
        if element.get("id") != ident:
            return False
    for cls in compound.classes:
        if not element.has_class(cls):
            return False
    for name, op, value in compound.attrs:
        actual = element.get(name)
        if actual is None:
            return False
        if op is None:
            continue
        if op == "=" and actual != value:
            return False
        if op == "~=" and value not in actual.split():
            return False
        if op == "^=" and not (value and actual.startswith(value)):
            return False
        if op == "$=" and not (value and actual.endswith(value)):
            return False
        if op == "*=" and not (value and value in actual):
            return False
        if op == "|=" and not (actual == value or actual.startswith(value + "-")):
            return False
    for name, arg in compound.pseudos:
        if not _matches_pseudo(element, name, arg):
            return False
    return True


def _matches_complex(element, complex_sel):
    # Right-to-left walk over (combinator, compound) pairs.
    def backtrack(el, idx):
        combinator, compound = complex_sel[idx]
        if not _matches_compound(el, compound):
            return False
        if idx == 0:
            return True
        prev_idx = idx - 1
        if combinator == " ":
            return any(backtrack(a, prev_idx) for a in el.ancestors())
        if combinator == ">":
            parent = el.parent
            return isinstance(parent, Element) and parent.tag != "#document" \
                and backtrack(parent, prev_idx)
        if combinator == "+":
            prev = el.previous_element_sibling()
            return prev is not None and backtrack(prev, prev_idx)
        if combinator == "~":
            prev = el.previous_element_sibling()
            while prev is not None:
                if backtrack(prev, prev_idx):
                    return True
                prev = prev.previous_element_sibling()
            return False
        raise SelectorError(f"unknown combinator {combinator!r}")

    return backtrack(element, len(complex_sel) - 1)


def matches(element, selector):
    """True if the element matches the selector (parsed or text)."""
    parsed = parse_selector(selector) if isinstance(selector, str) else selector
    return any(_matches_complex(element, complex_sel) for complex_sel in parsed)


def query_all(context, selector):
    """All descendant elements of context matching selector, document order."""
    parsed = parse_selector(selector) if isinstance(selector, str) else selector
    return [el for el in context.iter_elements() if matches(el, parsed)]


def query(context, selector):
    """First match of query_all, or None."""
    parsed = parse_selector(selector) if isinstance(selector, str) else selector
    for el in context.iter_elements():
        if matches(el, parsed):
            return el
    return None

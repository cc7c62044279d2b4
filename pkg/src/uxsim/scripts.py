"""Interpreter for the small JavaScript subset used by recipe scripts.

Recipe fields like text_js and override_attr carry scripts meant to run in
a browser page context against a live element. Against a real browser they
are shipped over the wire verbatim; for offline parsing and for the bundled
fixture browser we interpret them here against the local document model.

Supported shapes::

    return arguments[0].nextElementSibling.textContent;
    (el) => el.querySelector('.label').textContent.trim()
    return "search-result";
    return arguments[0].getAttribute('data-price') + ' USD';

Property chains may use: textContent, innerText, value, checked, tagName,
nextElementSibling, previousElementSibling, parentElement, and the calls
getAttribute(s), querySelector(s), closest(s), trim(). String literals are
values; "+" concatenates. Anything else raises ScriptError.
"""

import re

from .dom import Element, collapse_whitespace
from .selectors import matches, query


class ScriptError(ValueError):
    """Raised when a script cannot be parsed or fails at evaluation."""


_ARROW_RE = re.compile(
    r"^\s*(?:\(\s*(?P<p1>[A-Za-z_$][\w$]*)?\s*\)|(?P<p2>[A-Za-z_$][\w$]*))\s*=>\s*(?P<body>.*)$",
    re.DOTALL,
)
_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<string>"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')
      | (?P<number>\d+)
      | (?P<ident>[A-Za-z_$][\w$]*)
      | (?P<punct>[.()\[\]+])
    )""",
    re.VERBOSE,
)


def _tokenize(body):
    tokens, pos = [], 0
    while pos < len(body):
        if body[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(body, pos)
        if not m:
            raise ScriptError(f"cannot tokenize script at {body[pos:pos + 20]!r}")
        pos = m.end()
        kind = m.lastgroup
        text = m.group().strip()
        if kind == "string":
            text = re.sub(r"\\(.)", r"\1", text[1:-1])
        tokens.append((kind, text))
    return tokens


def _strip_body(script):
    """Reduce the script to a single expression's token list plus arg name."""
    text = script.strip()
    arg_name = None
    m = _ARROW_RE.match(text)
    if m:
        arg_name = m.group("p1") or m.group("p2")
        text = m.group("body").strip()
        if text.startswith("{"):
            if not text.endswith("}"):
                raise ScriptError("unterminated arrow function body")
            text = text[1:-1].strip()
    if text.startswith("return"):
        text = text[len("return"):].strip()
    if text.endswith(";"):
        text = text[:-1].rstrip()
    if not text:
        raise ScriptError("empty script body")
    return _tokenize(text), arg_name


class _Parser:
    def __init__(self, tokens, element, arg_name):
        self.tokens = tokens
        self.pos = 0
        self.element = element
        self.arg_name = arg_name

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self, kind=None, text=None):
        k, t = self.peek()
        if k is None or (kind and k != kind) or (text and t != text):
            raise ScriptError(f"unexpected token {t!r} in script")
        self.pos += 1
        return t

    def expression(self):
        value = self.chain()
        while self.peek() == ("punct", "+"):
            self.take()
            right = self.chain()
            value = _as_text(value) + _as_text(right)
        return value

    def chain(self):
        value = self.primary()
        while self.peek() == ("punct", "."):
            self.take()
            name = self.take("ident")
            if self.peek() == ("punct", "("):
                self.take()
                arg = None
                if self.peek() != ("punct", ")"):
                    arg = self.take("string")
                self.take("punct", ")")
                value = _call(value, name, arg)
            else:
                value = _member(value, name)
        return value

    def primary(self):
        kind, text = self.peek()
        if kind == "string":
            return self.take()
        if kind == "ident":
            if text == "arguments":
                self.take()
                self.take("punct", "[")
                index = self.take("number")
                self.take("punct", "]")
                if index != "0":
                    raise ScriptError("only arguments[0] is available")
                return self._element()
            if text == self.arg_name:
                self.take()
                return self._element()
            if text in ("null", "undefined"):
                self.take()
                return None
            if text in ("true", "false"):
                self.take()
                return text == "true"
        raise ScriptError(f"unsupported script term {text!r}")

    def _element(self):
        if self.element is None:
            raise ScriptError("script references an element but none was given")
        return self.element


def _need_element(value, op):
    if not isinstance(value, Element):
        raise ScriptError(f"{op} applied to a non-element value")
    return value


def _member(value, name):
    if name in ("textContent", "innerText"):
        text = _need_element(value, name).text_content()
        return collapse_whitespace(text) if name == "innerText" else text
    if name == "value":
        el = _need_element(value, name)
        if "value" in el.props:
            return el.props["value"]
        if el.tag == "textarea":
            return el.text_content()
        return el.get("value") or ""
    if name == "checked":
        el = _need_element(value, name)
        if "checked" in el.props:
            return bool(el.props["checked"])
        return "checked" in el.attrs
    if name == "tagName":
        return _need_element(value, name).tag.upper()
    if name == "nextElementSibling":
        return _need_element(value, name).next_element_sibling()
    if name == "previousElementSibling":
        return _need_element(value, name).previous_element_sibling()
    if name == "parentElement":
        parent = _need_element(value, name).parent
        return parent if isinstance(parent, Element) and parent.tag != "#document" else None
    raise ScriptError(f"unsupported property {name!r}")


def _call(value, name, arg):
    if name == "trim":
        if not isinstance(value, str):
            raise ScriptError("trim() applied to a non-string value")
        return value.strip()
    if name == "getAttribute":
        if arg is None:
            raise ScriptError("getAttribute needs an attribute name")
        return _need_element(value, name).get(arg)
    if name == "querySelector":
        if arg is None:
            raise ScriptError("querySelector needs a selector")
        return query(_need_element(value, name), arg)
    if name == "closest":
        if arg is None:
            raise ScriptError("closest needs a selector")
        el = _need_element(value, name)
        while isinstance(el, Element) and el.tag != "#document":
            if matches(el, arg):
                return el
            el = el.parent
        return None
    raise ScriptError(f"unsupported method {name!r}()")


def _as_text(value):
    if value is None:
        raise ScriptError("null value in string concatenation")
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, Element):
        raise ScriptError("element used where text was expected")
    return value


def evaluate(script, element=None):
    """Evaluate a recipe script against an element of the document model.

    Returns a string, bool, Element, or None. Raises ScriptError on any
    syntax the subset does not cover or when a chain hits a missing node.
    """
    tokens, arg_name = _strip_body(script)
    parser = _Parser(tokens, element, arg_name)
    result = parser.expression()
    if parser.pos != len(parser.tokens):
        raise ScriptError("trailing tokens in script")
    return result


def evaluate_text(script, element):
    """Evaluate a script that must yield text; missing chain links fail."""
    value = evaluate(script, element)
    if value is None:
        raise ScriptError("script returned null")
    if isinstance(value, Element):
        return value.text_content()
    return _as_text(value)

"""Ordered XML tree model: parsing, canonical serialization, string values.

The model is deliberately small: element and text nodes only, no attributes,
namespaces, comments, or processing instructions. Data documents (syntax
trees, combine results, row documents) never need more. The low-level reader
does understand attributes because transform-program bodies carry them; that
raw form is consumed by the transform front end and never escapes into
:class:`XmlNode` trees.

Nodes compare by identity (node-set semantics need to tell two equal-looking
subtrees apart); structural equality is :func:`canonical_equal`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import WellFormednessError

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9._\-]*\Z")

_ENTITIES = {"lt": "<", "gt": ">", "amp": "&", "quot": '"', "apos": "'"}


@dataclass(frozen=True, eq=False)
class XmlNode:
    """One node of an ordered tree: an element (name, children) or text."""

    kind: str  # "element" | "text"
    name: str | None = None
    text: str | None = None
    children: tuple["XmlNode", ...] = ()

    def __post_init__(self):
        if self.kind == "element":
            if not self.name or not _NAME_RE.match(self.name):
                raise ValueError(f"invalid element name: {self.name!r}")
            if self.text is not None:
                raise ValueError("elements carry no text field")
        elif self.kind == "text":
            if self.text is None:
                raise ValueError("text nodes need text")
            if self.name is not None or self.children:
                raise ValueError("text nodes have no name or children")
        else:
            raise ValueError(f"unknown node kind: {self.kind!r}")

    def __repr__(self):
        if self.kind == "text":
            return f"text({self.text!r})"
        return f"element({self.name!r}, {len(self.children)} children)"


@dataclass(frozen=True, eq=False)
class XmlDoc:
    """A document: exactly one root element."""

    root: XmlNode

    def __post_init__(self):
        if self.root.kind != "element":
            raise ValueError("document root must be an element")

    def __repr__(self):
        return f"XmlDoc({self.root!r})"


def element(name: str, children: tuple[XmlNode, ...] | list[XmlNode] = ()) -> XmlNode:
    return XmlNode(kind="element", name=name, children=tuple(children))


def text(content: str) -> XmlNode:
    return XmlNode(kind="text", text=content)


# ---------------------------------------------------------------------------
# Raw reading (attribute-aware; used here and by the transform front end)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RawElement:
    """Attribute-carrying parse result, prior to model conversion."""

    name: str
    attrs: tuple[tuple[str, str], ...]
    children: tuple["RawElement | str", ...]
    line: int
    column: int

    def attr(self, name: str) -> str | None:
        for key, value in self.attrs:
            if key == name:
                return value
        return None


class _Reader:
    """Single-pass XML reader with line/column tracking."""

    def __init__(self, source: str, pos: int = 0):
        self.source = source
        self.pos = pos

    def _location(self, pos: int | None = None) -> tuple[int, int]:
        pos = self.pos if pos is None else pos
        line = self.source.count("\n", 0, pos) + 1
        column = pos - (self.source.rfind("\n", 0, pos) + 1) + 1
        return line, column

    def _fail(self, message: str, pos: int | None = None):
        line, column = self._location(pos)
        raise WellFormednessError(message, line, column)

    def skip_whitespace(self):
        while self.pos < len(self.source) and self.source[self.pos].isspace():
            self.pos += 1

    def skip_prolog(self):
        self.skip_whitespace()
        if self.source.startswith("<?xml", self.pos):
            end = self.source.find("?>", self.pos)
            if end < 0:
                self._fail("unterminated XML declaration")
            self.pos = end + 2
            self.skip_whitespace()

    def at_element(self) -> bool:
        return self.pos < len(self.source) and self.source[self.pos] == "<"

    def _read_name(self) -> str:
        match = re.match(r"[A-Za-z_:][A-Za-z0-9._:\-]*", self.source[self.pos:])
        if not match:
            self._fail("expected a name")
        self.pos += match.end()
        return match.group()

    def _decode_text(self, raw: str, base: int) -> str:
        out: list[str] = []
        i = 0
        while i < len(raw):
            ch = raw[i]
            if ch == "&":
                end = raw.find(";", i)
                if end < 0:
                    self._fail("unterminated entity reference", base + i)
                name = raw[i + 1:end]
                if name not in _ENTITIES:
                    self._fail(f"unknown entity &{name};", base + i)
                out.append(_ENTITIES[name])
                i = end + 1
            elif ch == "<":
                self._fail("raw '<' in character data", base + i)
            else:
                out.append(ch)
                i += 1
        return "".join(out)

    def _read_attrs(self) -> tuple[tuple[str, str], ...]:
        attrs: list[tuple[str, str]] = []
        while True:
            mark = self.pos
            self.skip_whitespace()
            if self.pos >= len(self.source) or self.source[self.pos] in "/>":
                return tuple(attrs)
            if self.pos == mark:
                self._fail("expected whitespace before attribute")
            name = self._read_name()
            self.skip_whitespace()
            if not self.source.startswith("=", self.pos):
                self._fail("expected '=' after attribute name")
            self.pos += 1
            self.skip_whitespace()
            if self.pos >= len(self.source) or self.source[self.pos] not in "\"'":
                self._fail("attribute value must be quoted")
            quote = self.source[self.pos]
            self.pos += 1
            end = self.source.find(quote, self.pos)
            if end < 0:
                self._fail("unterminated attribute value")
            value = self._decode_text(self.source[self.pos:end], self.pos)
            self.pos = end + 1
            attrs.append((name, value))

    def read_element(self) -> RawElement:
        if not self.at_element():
            self._fail("expected an element")
        start_line, start_column = self._location()
        if self.source.startswith("<!", self.pos) or self.source.startswith("<?", self.pos):
            self._fail("comments, CDATA and processing instructions are not supported")
        self.pos += 1
        name = self._read_name()
        attrs = self._read_attrs()
        if self.source.startswith("/>", self.pos):
            self.pos += 2
            return RawElement(name, attrs, (), start_line, start_column)
        if not self.source.startswith(">", self.pos):
            self._fail("expected '>' to close the start tag")
        self.pos += 1
        children: list[RawElement | str] = []
        while True:
            if self.pos >= len(self.source):
                self._fail(f"unexpected end of input inside <{name}>")
            if self.source.startswith("</", self.pos):
                close_pos = self.pos
                self.pos += 2
                close_name = self._read_name()
                if close_name != name:
                    self._fail(f"mismatched end tag </{close_name}> for <{name}>", close_pos)
                self.skip_whitespace()
                if not self.source.startswith(">", self.pos):
                    self._fail("expected '>' to close the end tag")
                self.pos += 1
                return RawElement(name, attrs, tuple(children), start_line, start_column)
            if self.source[self.pos] == "<":
                children.append(self.read_element())
            else:
                end = self.source.find("<", self.pos)
                if end < 0:
                    self._fail(f"unexpected end of input inside <{name}>")
                children.append(self._decode_text(self.source[self.pos:end], self.pos))
                self.pos = end


def read_raw_fragment(source: str, pos: int) -> tuple[RawElement | None, int]:
    """Read one element starting at or after ``pos``; None if none starts there.

    Used by front ends that interleave XML fragments with other syntax.
    """
    reader = _Reader(source, pos)
    reader.skip_whitespace()
    if not reader.at_element():
        return None, reader.pos
    raw = reader.read_element()
    return raw, reader.pos


# ---------------------------------------------------------------------------
# Model conversion and the public parse/serialize surface
# ---------------------------------------------------------------------------

def _is_blank(value: str) -> bool:
    return value.strip() == ""


def _from_raw(raw: RawElement) -> XmlNode:
    if raw.attrs:
        raise WellFormednessError(
            f"attributes are not supported in data documents (<{raw.name}>)",
            raw.line, raw.column,
        )
    children: list[XmlNode] = []
    for child in raw.children:
        if isinstance(child, str):
            if not _is_blank(child):
                children.append(text(child))
        else:
            children.append(_from_raw(child))
    return element(raw.name, children)


def parse_xml(source: str) -> XmlDoc:
    """Parse a data document. Whitespace-only text is dropped; other text kept verbatim."""
    reader = _Reader(source)
    reader.skip_prolog()
    if not reader.at_element():
        reader._fail("expected a root element")
    raw = reader.read_element()
    reader.skip_whitespace()
    if reader.pos != len(reader.source):
        reader._fail("trailing content after the root element")
    return XmlDoc(_from_raw(raw))


def escape_text(value: str) -> str:
    return value.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _serialize_node(node: XmlNode, out: list[str]):
    if node.kind == "text":
        out.append(escape_text(node.text or ""))
        return
    if not node.children:
        out.append(f"<{node.name}/>")
        return
    out.append(f"<{node.name}>")
    for child in node.children:
        _serialize_node(child, out)
    out.append(f"</{node.name}>")


def serialize_xml(doc: XmlDoc | XmlNode) -> str:
    """Canonical form: no insignificant whitespace, entities re-escaped."""
    node = doc.root if isinstance(doc, XmlDoc) else doc
    out: list[str] = []
    _serialize_node(node, out)
    return "".join(out)


def string_value(node: XmlNode | XmlDoc) -> str:
    """Concatenated text content of all descendants, in document order."""
    if isinstance(node, XmlDoc):
        node = node.root
    if node.kind == "text":
        return node.text or ""
    return "".join(string_value(child) for child in node.children)


def canonical_equal(a: XmlDoc | XmlNode, b: XmlDoc | XmlNode) -> bool:
    """Structural equality under canonical serialization."""
    return serialize_xml(a) == serialize_xml(b)


def deep_copy(node: XmlNode) -> XmlNode:
    """Fresh node objects for the whole subtree (trees never share nodes)."""
    if node.kind == "text":
        return text(node.text or "")
    return element(node.name or "", tuple(deep_copy(child) for child in node.children))


def promote(node: XmlNode | XmlDoc) -> XmlDoc:
    """Deep-copy a subtree into a document of its own."""
    if isinstance(node, XmlDoc):
        return XmlDoc(deep_copy(node.root))
    if node.kind != "element":
        raise ValueError("only elements can become document roots")
    return XmlDoc(deep_copy(node))

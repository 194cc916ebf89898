"""Path-expression subset: parser, evaluator, and template match patterns.

The supported grammar is exactly what query rewriting and the transform
processor need: ``/``-rooted and relative paths over the child,
descendant-or-self and self axes, ``*`` and name tests, ``//`` sugar,
predicates (existence and string equality), ``$var`` references, and the
``count``/``string`` functions. Everything else is rejected at parse time
rather than silently misread.

Contexts are either an :class:`~metasql.xml_tree.XmlNode` or an
:class:`~metasql.xml_tree.XmlDoc`; the document itself acts as the root node,
so ``/`` selects it and ``child::name`` from it reaches the document element.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

from .errors import (
    NotANodeSet,
    PathSyntaxError,
    UnboundVariable,
    UnsupportedPattern,
    UnsupportedXPath,
)
from .xml_tree import XmlDoc, XmlNode, string_value

# ---------------------------------------------------------------------------
# Expression model
# ---------------------------------------------------------------------------

CHILD = "child"
DESCENDANT_OR_SELF = "descendant-or-self"
SELF = "self"


@dataclass(frozen=True)
class Step:
    """One location step. ``test`` is an element name, ``"*"``, or None for node()."""

    axis: str
    test: str | None
    predicates: tuple["Predicate", ...] = ()


@dataclass(frozen=True)
class PathExpr:
    """A path: optionally absolute or starting at a variable, then steps."""

    absolute: bool = False
    start_var: str | None = None
    steps: tuple[Step, ...] = ()


@dataclass(frozen=True)
class FuncExpr:
    """Top-level ``count(path)`` or ``string(path | .)`` wrapper."""

    func: str
    arg: PathExpr | None


@dataclass(frozen=True)
class StrLit:
    value: str


Operand = Union[PathExpr, FuncExpr, StrLit]


@dataclass(frozen=True)
class ExistsPred:
    path: PathExpr


@dataclass(frozen=True)
class EqualsPred:
    lhs: Operand
    rhs: Operand


Predicate = Union[ExistsPred, EqualsPred]

XPathExpr = Union[PathExpr, FuncExpr]


@dataclass(frozen=True)
class ResultFragment:
    """Tree fragment built by instantiating a transform body.

    Coerces to string as the concatenated string values of its nodes and to
    boolean as true; it cannot be navigated into with further steps.
    """

    nodes: tuple[XmlNode, ...]


NodeSetItem = Union[XmlNode, XmlDoc]
XPathValue = Union[list, str, float, bool, ResultFragment]


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_NAME_START = re.compile(r"[A-Za-z_]")
_NAME_TOKEN = re.compile(r"[A-Za-z_][A-Za-z0-9._\-]*")


class _PathParser:
    def __init__(self, source: str):
        self.source = source
        self.pos = 0

    # -- low-level -----------------------------------------------------------

    def _skip_ws(self):
        while self.pos < len(self.source) and self.source[self.pos].isspace():
            self.pos += 1

    def _peek(self, offset: int = 0) -> str:
        index = self.pos + offset
        return self.source[index] if index < len(self.source) else ""

    def _fail(self, message: str, expected: tuple[str, ...] = ()):
        raise PathSyntaxError(message, self.pos, expected)

    def _unsupported(self, message: str):
        raise UnsupportedXPath(f"{message} at offset {self.pos}: {self.source!r}")

    def _eat(self, token: str) -> bool:
        self._skip_ws()
        if self.source.startswith(token, self.pos):
            self.pos += len(token)
            return True
        return False

    def _expect(self, token: str):
        if not self._eat(token):
            self._fail(f"expected {token!r}", (token,))

    def _read_name(self) -> str:
        self._skip_ws()
        match = _NAME_TOKEN.match(self.source, self.pos)
        if not match:
            self._fail("expected a name")
        self.pos = match.end()
        if self.source.startswith("::", self.pos):
            self._unsupported(f"named axis {match.group()!r} is not supported")
        return match.group()

    # -- grammar ---------------------------------------------------------------

    def parse(self) -> XPathExpr:
        expr = self._parse_expr(top_level=True)
        self._skip_ws()
        if self.pos != len(self.source):
            if self._peek() in "|+-<>!":
                self._unsupported("operators outside the subset")
            self._fail("trailing content after the expression")
        return expr

    def _at_function(self) -> tuple[str, int] | None:
        self._skip_ws()
        match = _NAME_TOKEN.match(self.source, self.pos)
        if not match:
            return None
        after = match.end()
        while after < len(self.source) and self.source[after].isspace():
            after += 1
        if after < len(self.source) and self.source[after] == "(":
            return match.group(), after + 1
        return None

    def _parse_expr(self, top_level: bool) -> XPathExpr:
        fn = self._at_function()
        if fn:
            name, after = fn
            if name not in ("count", "string"):
                self._unsupported(f"function {name}() is not supported")
            if name == "count" and not top_level:
                self._unsupported("count() is only supported at the top level")
            self.pos = after
            self._skip_ws()
            arg: PathExpr | None = None
            if not self._eat(")"):
                arg = self._parse_path()
                self._expect(")")
            if name == "count" and arg is None:
                self._fail("count() needs a path argument")
            return FuncExpr(name, arg)
        return self._parse_path()

    def _parse_path(self) -> PathExpr:
        self._skip_ws()
        steps: list[Step] = []
        absolute = False
        start_var = None
        if self._peek() == "$":
            self.pos += 1
            start_var = self._read_name()
            if not (self._peek() == "/" or self.source.startswith("//", self.pos)):
                return PathExpr(False, start_var, ())
        elif self.source.startswith("//", self.pos):
            absolute = True
            self.pos += 2
            steps.append(Step(DESCENDANT_OR_SELF, None))
            steps.append(self._parse_step())
        elif self._peek() == "/":
            absolute = True
            self.pos += 1
            self._skip_ws()
            if self.pos == len(self.source) or self._peek() in ")]=":
                return PathExpr(True, None, ())
            steps.append(self._parse_step())
        else:
            steps.append(self._parse_step())

        while True:
            if self.source.startswith("//", self.pos):
                self.pos += 2
                steps.append(Step(DESCENDANT_OR_SELF, None))
                steps.append(self._parse_step())
            elif self._peek() == "/":
                self.pos += 1
                steps.append(self._parse_step())
            else:
                break
        return PathExpr(absolute, start_var, tuple(steps))

    def _parse_step(self) -> Step:
        self._skip_ws()
        ch = self._peek()
        if ch == ".":
            if self._peek(1) == ".":
                self._unsupported("the parent step '..' is not supported")
            self.pos += 1
            return Step(SELF, None)
        if ch == "@":
            self._unsupported("attribute steps are not supported")
        if ch == "*":
            self.pos += 1
            test: str | None = "*"
        elif _NAME_START.match(ch or ""):
            test = self._read_name()
            if self._peek() == "(":
                self._unsupported(f"node test {test}() is not supported")
        else:
            self._fail("expected a step")
        predicates: list[Predicate] = []
        while self._eat("["):
            predicates.append(self._parse_predicate())
            self._expect("]")
        return Step(CHILD, test, tuple(predicates))

    def _parse_predicate(self) -> Predicate:
        lhs = self._parse_operand()
        self._skip_ws()
        if self._eat("="):
            rhs = self._parse_operand()
            return EqualsPred(lhs, rhs)
        if self._peek() in "<>!":
            self._unsupported("only '=' comparisons are supported in predicates")
        if isinstance(lhs, StrLit):
            self._fail("a bare literal is not a predicate")
        if isinstance(lhs, FuncExpr):
            self._unsupported("a bare function call is not a supported predicate")
        return ExistsPred(lhs)

    def _parse_operand(self) -> Operand:
        self._skip_ws()
        ch = self._peek()
        if ch in "\"'":
            quote = ch
            end = self.source.find(quote, self.pos + 1)
            if end < 0:
                self._fail("unterminated string literal")
            value = self.source[self.pos + 1:end]
            self.pos = end + 1
            return StrLit(value)
        if ch.isdigit():
            self._unsupported("numeric literals are not supported")
        fn = self._at_function()
        if fn:
            name, after = fn
            if name != "string":
                self._unsupported(f"function {name}() is not supported in predicates")
            self.pos = after
            self._skip_ws()
            arg: PathExpr | None = None
            if not self._eat(")"):
                arg = self._parse_path()
                self._expect(")")
            return FuncExpr("string", arg)
        return self._parse_path()


def parse_xpath(source: str) -> XPathExpr:
    """Parse a path expression in the supported subset."""
    return _PathParser(source).parse()


# ---------------------------------------------------------------------------
# Coercions
# ---------------------------------------------------------------------------

def format_number(value: float) -> str:
    """Number-to-string: integral values print without a decimal point."""
    if math.isnan(value):
        return "NaN"
    if math.isinf(value):
        return "Infinity" if value > 0 else "-Infinity"
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def string_of(value: XPathValue) -> str:
    if isinstance(value, list):
        return string_value(value[0]) if value else ""
    if isinstance(value, ResultFragment):
        return "".join(string_value(node) for node in value.nodes)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_number(value)
    return value


def boolean_of(value: XPathValue) -> bool:
    if isinstance(value, list):
        return bool(value)
    if isinstance(value, ResultFragment):
        return True
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return value != 0 and not math.isnan(value)
    return value != ""


def number_of(value: XPathValue) -> float:
    if isinstance(value, bool):
        return 1.0 if value else 0.0
    if isinstance(value, float):
        return value
    try:
        return float(string_of(value).strip())
    except ValueError:
        return math.nan


# ---------------------------------------------------------------------------
# Evaluator
# ---------------------------------------------------------------------------

def _children(item: NodeSetItem):
    if isinstance(item, XmlDoc):
        return (item.root,)
    if item.kind == "element":
        return item.children
    return ()


def _descendants_or_self(item: NodeSetItem, out: list):
    out.append(item)
    for child in _children(item):
        _descendants_or_self(child, out)


def _passes_test(item: NodeSetItem, test: str | None) -> bool:
    if test is None:
        return True
    if isinstance(item, XmlDoc) or item.kind != "element":
        return False
    return test == "*" or item.name == test


class _Evaluator:
    def __init__(self, root: NodeSetItem, bindings: Mapping[str, XPathValue]):
        self.root = root
        self.bindings = bindings

    def evaluate(self, expr: XPathExpr, context: NodeSetItem) -> XPathValue:
        if isinstance(expr, FuncExpr):
            if expr.arg is None:
                arg_value: XPathValue = [context]
            else:
                arg_value = self.evaluate(expr.arg, context)
            if expr.func == "count":
                if not isinstance(arg_value, list):
                    raise NotANodeSet("count() requires a node-set argument")
                return float(len(arg_value))
            return string_of(arg_value)
        return self._eval_path(expr, context)

    def _eval_path(self, path: PathExpr, context: NodeSetItem) -> XPathValue:
        if path.start_var is not None:
            if path.start_var not in self.bindings:
                raise UnboundVariable(path.start_var)
            value = self.bindings[path.start_var]
            if not path.steps:
                return value
            if not isinstance(value, list):
                raise NotANodeSet(
                    f"${path.start_var} is not a node-set and cannot be navigated into"
                )
            items: list[NodeSetItem] = list(value)
        elif path.absolute:
            items = [self.root]
            if not path.steps:
                return items
        else:
            items = [context]
        for step in path.steps:
            items = self._apply_step(items, step)
        return items

    def _apply_step(self, items: list[NodeSetItem], step: Step) -> list[NodeSetItem]:
        selected: list[NodeSetItem] = []
        seen: set[int] = set()
        for item in items:
            if step.axis == SELF:
                candidates: list[NodeSetItem] = [item]
            elif step.axis == CHILD:
                candidates = list(_children(item))
            else:
                candidates = []
                _descendants_or_self(item, candidates)
            for candidate in candidates:
                if _passes_test(candidate, step.test) and id(candidate) not in seen:
                    seen.add(id(candidate))
                    selected.append(candidate)
        for predicate in step.predicates:
            selected = [node for node in selected if self._check(predicate, node)]
        return selected

    def _check(self, predicate: Predicate, context: NodeSetItem) -> bool:
        if isinstance(predicate, ExistsPred):
            return boolean_of(self._eval_path(predicate.path, context))
        lhs = self._operand(predicate.lhs, context)
        rhs = self._operand(predicate.rhs, context)
        if isinstance(lhs, list) and isinstance(rhs, list):
            left_values = {string_value(node) for node in lhs}
            return any(string_value(node) in left_values for node in rhs)
        return string_of(lhs) == string_of(rhs)

    def _operand(self, operand: Operand, context: NodeSetItem) -> XPathValue:
        if isinstance(operand, StrLit):
            return operand.value
        return self.evaluate(operand, context)


def eval_xpath(
    expr: XPathExpr,
    context: NodeSetItem,
    bindings: Mapping[str, XPathValue] | None = None,
    root: NodeSetItem | None = None,
) -> XPathValue:
    """Evaluate ``expr`` with ``context`` as the context node.

    ``root`` anchors absolute paths; it defaults to the context itself, which
    is right whenever the context is the document.
    """
    return _Evaluator(root if root is not None else context, bindings or {}).evaluate(expr, context)


# ---------------------------------------------------------------------------
# Match patterns
# ---------------------------------------------------------------------------

def validate_pattern(pattern: XPathExpr) -> PathExpr:
    """Check a parsed expression is a supported pattern shape and return it."""
    if not isinstance(pattern, PathExpr) or pattern.start_var is not None:
        raise UnsupportedPattern(f"not a match pattern: {pattern!r}")
    if pattern.absolute and not pattern.steps:
        return pattern
    if not pattern.steps:
        raise UnsupportedPattern("empty pattern")
    for step in pattern.steps:
        if step.axis != CHILD or step.test is None or step.predicates:
            raise UnsupportedPattern(
                "patterns are limited to rooted or relative chains of child steps"
            )
    return pattern


def pattern_priority(pattern: PathExpr) -> float:
    """Default priorities: ``*`` below bare names, paths above both."""
    if pattern.absolute or len(pattern.steps) > 1:
        return 0.5
    return -0.5 if pattern.steps[0].test == "*" else 0.0


def match_pattern(
    pattern: PathExpr,
    node: NodeSetItem,
    ancestors: tuple[NodeSetItem, ...] = (),
) -> bool:
    """True iff ``node`` (with the given ancestor chain, outermost first)
    would be selected by ``pattern`` from some context."""
    if pattern.absolute and not pattern.steps:
        return isinstance(node, XmlDoc)
    steps = pattern.steps
    if not _passes_test(node, steps[-1].test):
        return False
    chain = list(ancestors)
    for step in reversed(steps[:-1]):
        if not chain:
            return False
        parent = chain.pop()
        if not _passes_test(parent, step.test):
            return False
    if pattern.absolute:
        return all(isinstance(item, XmlDoc) for item in chain)
    return True

"""Template-matching transform processor behind declared functions.

A function declaration reads ``function NAME (param NAME TYPE)* returns TYPE
begin <body> end`` where the body is a sequence of ``xsl:param`` and
``xsl:template`` elements. The instruction subset covers template
application with modes and parameters, value/copy emission, conditionals,
variables, and literal result construction. Anything outside the subset is
rejected at compile time, never silently skipped.

Template application walks documents, elements, and text nodes; the document
itself is a matchable node (pattern ``/``), and built-in rules descend to
children when nothing matches, so a program with no rules at all emits the
input's string value.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Union

from . import xpath
from .errors import (
    ArgTypeMismatch,
    ArityMismatch,
    FunctionSyntaxError,
    InfiniteRecursionGuard,
    NotANodeSet,
    NotANumber,
    ParamMismatch,
    UnknownInstruction,
    WellFormednessError,
)
from .xml_tree import (
    RawElement,
    XmlDoc,
    XmlNode,
    deep_copy,
    element,
    read_raw_fragment,
    string_value,
    text,
)
from .xpath import (
    FuncExpr,
    NodeSetItem,
    PathExpr,
    ResultFragment,
    XPathExpr,
    boolean_of,
    eval_xpath,
    match_pattern,
    parse_xpath,
    pattern_priority,
    string_of,
    validate_pattern,
)

VALUE_TYPES = ("string", "number", "xml")

XSL_PREFIX = "xsl:"

DEFAULT_MAX_DEPTH = 10_000


# ---------------------------------------------------------------------------
# Program model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParamInstr:
    name: str
    default: XPathExpr | None


@dataclass(frozen=True)
class VariableInstr:
    name: str
    select: XPathExpr


@dataclass(frozen=True)
class WithParam:
    name: str
    select: XPathExpr | None
    body: tuple["Instruction", ...] = ()


@dataclass(frozen=True)
class ApplyTemplates:
    select: XPathExpr | None
    mode: str | None
    with_params: tuple[WithParam, ...] = ()


@dataclass(frozen=True)
class ValueOf:
    select: XPathExpr


@dataclass(frozen=True)
class CopyOf:
    select: XPathExpr


@dataclass(frozen=True)
class Copy:
    body: tuple["Instruction", ...]


@dataclass(frozen=True)
class If:
    test: XPathExpr
    body: tuple["Instruction", ...]


@dataclass(frozen=True)
class Choose:
    whens: tuple[tuple[XPathExpr, tuple["Instruction", ...]], ...]
    otherwise: tuple["Instruction", ...] | None


@dataclass(frozen=True)
class LiteralElement:
    name: str
    body: tuple["Instruction", ...]


@dataclass(frozen=True)
class LiteralText:
    content: str


Instruction = Union[
    ParamInstr, VariableInstr, ApplyTemplates, ValueOf, CopyOf, Copy,
    If, Choose, LiteralElement, LiteralText,
]


@dataclass(frozen=True)
class TemplateRule:
    match: PathExpr
    mode: str | None
    params: tuple[ParamInstr, ...]
    body: tuple[Instruction, ...]
    priority: float
    index: int


@dataclass(frozen=True)
class TransformProgram:
    """A compiled function: declared parameters plus template rules."""

    name: str
    params: tuple[tuple[str, str], ...]
    return_type: str
    rules: tuple[TemplateRule, ...]
    top_level_params: tuple[tuple[str, XPathExpr | None], ...]


# ---------------------------------------------------------------------------
# Declaration parsing
# ---------------------------------------------------------------------------

_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class _DeclReader:
    def __init__(self, source: str, pos: int = 0):
        self.source = source
        self.pos = pos

    def skip_ws(self):
        while self.pos < len(self.source) and self.source[self.pos].isspace():
            self.pos += 1

    def peek_word(self) -> str | None:
        self.skip_ws()
        match = _WORD_RE.match(self.source, self.pos)
        return match.group() if match else None

    def read_word(self, what: str) -> str:
        self.skip_ws()
        match = _WORD_RE.match(self.source, self.pos)
        if not match:
            raise FunctionSyntaxError(f"expected {what} at offset {self.pos}")
        self.pos = match.end()
        return match.group()

    def expect_keyword(self, keyword: str):
        word = self.read_word(f"keyword {keyword!r}")
        if word.lower() != keyword:
            raise FunctionSyntaxError(f"expected {keyword!r}, found {word!r}")


def read_declaration(source: str, pos: int = 0) -> tuple[TransformProgram, int]:
    """Parse one ``function … end`` declaration starting at ``pos``.

    Returns the compiled program and the offset just past ``end``.
    """
    reader = _DeclReader(source, pos)
    reader.expect_keyword("function")
    name = reader.read_word("a function name")
    params: list[tuple[str, str]] = []
    while (word := reader.peek_word()) and word.lower() == "param":
        reader.read_word("param")
        param_name = reader.read_word("a parameter name")
        param_type = reader.read_word("a parameter type").lower()
        if param_type not in VALUE_TYPES:
            raise FunctionSyntaxError(
                f"parameter {param_name!r} has unknown type {param_type!r}"
            )
        if any(existing == param_name for existing, _ in params):
            raise FunctionSyntaxError(f"duplicate parameter {param_name!r}")
        params.append((param_name, param_type))
    reader.expect_keyword("returns")
    return_type = reader.read_word("a return type").lower()
    if return_type not in VALUE_TYPES:
        raise FunctionSyntaxError(f"unknown return type {return_type!r}")
    reader.expect_keyword("begin")

    fragments: list[RawElement] = []
    while True:
        reader.skip_ws()
        if reader.pos >= len(reader.source):
            raise FunctionSyntaxError(f"function {name!r} has no closing 'end'")
        if reader.source[reader.pos] == "<":
            try:
                raw, reader.pos = read_raw_fragment(reader.source, reader.pos)
            except WellFormednessError as exc:
                raise FunctionSyntaxError(f"in function {name!r}: {exc}") from exc
            fragments.append(raw)  # type: ignore[arg-type]
        else:
            word = reader.peek_word()
            if word and word.lower() == "end":
                reader.read_word("end")
                break
            raise FunctionSyntaxError(
                f"unexpected content in the body of function {name!r} at offset {reader.pos}"
            )

    program = _assemble(name, tuple(params), return_type, fragments)
    return program, reader.pos


def compile_transform(source: str) -> TransformProgram:
    """Compile a single complete function declaration."""
    program, end = read_declaration(source, 0)
    rest = source[end:].strip()
    if rest:
        raise FunctionSyntaxError(f"trailing content after 'end': {rest[:40]!r}")
    return program


def _assemble(
    name: str,
    params: tuple[tuple[str, str], ...],
    return_type: str,
    fragments: list[RawElement],
) -> TransformProgram:
    top_params: list[tuple[str, XPathExpr | None]] = []
    rules: list[TemplateRule] = []
    for raw in fragments:
        if raw.name == XSL_PREFIX + "param":
            instr = _compile_param(raw)
            top_params.append((instr.name, instr.default))
        elif raw.name == XSL_PREFIX + "template":
            rules.append(_compile_template(raw, len(rules)))
        elif raw.name.startswith(XSL_PREFIX):
            raise UnknownInstruction(
                f"{raw.name} is not allowed at the top level of function {name!r}"
            )
        else:
            raise FunctionSyntaxError(
                f"unexpected element <{raw.name}> at the top level of function {name!r}"
            )

    declared = {param_name for param_name, _ in params}
    body_params = {param_name for param_name, _ in top_params}
    for param_name in declared:
        if param_name not in body_params:
            raise ParamMismatch(
                f"declared parameter {param_name!r} has no xsl:param in the body"
            )
    for param_name, default in top_params:
        if param_name not in declared and default is None:
            raise ParamMismatch(
                f"body parameter {param_name!r} is not declared and has no default"
            )
    if len(body_params) != len(top_params):
        raise ParamMismatch("duplicate xsl:param name")

    return TransformProgram(name, params, return_type, tuple(rules), tuple(top_params))


def _parse_attr_path(raw: RawElement, attr: str, required: bool) -> XPathExpr | None:
    value = raw.attr(attr)
    if value is None:
        if required:
            raise FunctionSyntaxError(f"<{raw.name}> needs a {attr!r} attribute")
        return None
    return parse_xpath(value)


def _check_attrs(raw: RawElement, allowed: tuple[str, ...]):
    for key, _ in raw.attrs:
        if key not in allowed:
            raise FunctionSyntaxError(f"<{raw.name}> does not take a {key!r} attribute")


def _compile_param(raw: RawElement) -> ParamInstr:
    _check_attrs(raw, ("name", "select"))
    name = raw.attr("name")
    if not name:
        raise FunctionSyntaxError("xsl:param needs a name")
    if any(not isinstance(child, str) or child.strip() for child in raw.children):
        raise FunctionSyntaxError("xsl:param bodies are not supported; use select")
    return ParamInstr(name, _parse_attr_path(raw, "select", required=False))


def _compile_template(raw: RawElement, index: int) -> TemplateRule:
    _check_attrs(raw, ("match", "mode"))
    match_text = raw.attr("match")
    if match_text is None:
        raise FunctionSyntaxError("xsl:template needs a match pattern")
    pattern = validate_pattern(parse_xpath(match_text))
    body = _compile_body(raw.children, allow_params=True)
    params: list[ParamInstr] = []
    rest_start = 0
    for instr in body:
        if isinstance(instr, ParamInstr):
            params.append(instr)
            rest_start += 1
        else:
            break
    if any(isinstance(instr, ParamInstr) for instr in body[rest_start:]):
        raise FunctionSyntaxError("xsl:param must precede other instructions in a template")
    return TemplateRule(
        match=pattern,
        mode=raw.attr("mode"),
        params=tuple(params),
        body=tuple(body[rest_start:]),
        priority=pattern_priority(pattern),
        index=index,
    )


def _compile_body(
    children: tuple[RawElement | str, ...], allow_params: bool = False
) -> list[Instruction]:
    out: list[Instruction] = []
    for child in children:
        if isinstance(child, str):
            if child.strip():
                out.append(LiteralText(child))
            continue
        instr = _compile_instruction(child)
        if isinstance(instr, ParamInstr) and not allow_params:
            raise FunctionSyntaxError("xsl:param is only allowed at the start of a template")
        out.append(instr)
    return out


def _compile_instruction(raw: RawElement) -> Instruction:
    if not raw.name.startswith(XSL_PREFIX):
        if raw.attrs:
            raise FunctionSyntaxError(
                f"literal result element <{raw.name}> cannot carry attributes"
            )
        return LiteralElement(raw.name, tuple(_compile_body(raw.children)))

    kind = raw.name[len(XSL_PREFIX):]
    if kind == "apply-templates":
        _check_attrs(raw, ("select", "mode"))
        with_params: list[WithParam] = []
        for child in raw.children:
            if isinstance(child, str):
                if child.strip():
                    raise FunctionSyntaxError("xsl:apply-templates cannot contain text")
                continue
            if child.name != XSL_PREFIX + "with-param":
                raise FunctionSyntaxError(
                    f"xsl:apply-templates only accepts xsl:with-param children, not <{child.name}>"
                )
            with_params.append(_compile_with_param(child))
        return ApplyTemplates(
            select=_parse_attr_path(raw, "select", required=False),
            mode=raw.attr("mode"),
            with_params=tuple(with_params),
        )
    if kind == "value-of":
        _check_attrs(raw, ("select",))
        return ValueOf(_parse_attr_path(raw, "select", required=True))
    if kind == "copy-of":
        _check_attrs(raw, ("select",))
        return CopyOf(_parse_attr_path(raw, "select", required=True))
    if kind == "copy":
        _check_attrs(raw, ())
        return Copy(tuple(_compile_body(raw.children)))
    if kind == "if":
        _check_attrs(raw, ("test",))
        return If(_parse_attr_path(raw, "test", required=True), tuple(_compile_body(raw.children)))
    if kind == "choose":
        _check_attrs(raw, ())
        whens: list[tuple[XPathExpr, tuple[Instruction, ...]]] = []
        otherwise: tuple[Instruction, ...] | None = None
        for child in raw.children:
            if isinstance(child, str):
                if child.strip():
                    raise FunctionSyntaxError("xsl:choose cannot contain text")
                continue
            if child.name == XSL_PREFIX + "when":
                if otherwise is not None:
                    raise FunctionSyntaxError("xsl:when after xsl:otherwise")
                test = _parse_attr_path(child, "test", required=True)
                whens.append((test, tuple(_compile_body(child.children))))
            elif child.name == XSL_PREFIX + "otherwise":
                if otherwise is not None:
                    raise FunctionSyntaxError("duplicate xsl:otherwise")
                otherwise = tuple(_compile_body(child.children))
            else:
                raise FunctionSyntaxError(f"unexpected <{child.name}> inside xsl:choose")
        if not whens:
            raise FunctionSyntaxError("xsl:choose needs at least one xsl:when")
        return Choose(tuple(whens), otherwise)
    if kind == "param":
        return _compile_param(raw)
    if kind == "variable":
        _check_attrs(raw, ("name", "select"))
        name = raw.attr("name")
        select = raw.attr("select")
        if not name or select is None:
            raise FunctionSyntaxError("xsl:variable needs name and select")
        if any(not isinstance(child, str) or child.strip() for child in raw.children):
            raise FunctionSyntaxError("xsl:variable bodies are not supported; use select")
        return VariableInstr(name, parse_xpath(select))
    raise UnknownInstruction(f"xsl:{kind} is outside the supported instruction set")


def _compile_with_param(raw: RawElement) -> WithParam:
    _check_attrs(raw, ("name", "select"))
    name = raw.attr("name")
    if not name:
        raise FunctionSyntaxError("xsl:with-param needs a name")
    select = raw.attr("select")
    if select is not None:
        return WithParam(name, parse_xpath(select))
    return WithParam(name, None, tuple(_compile_body(raw.children)))


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

class _Runner:
    def __init__(self, program: TransformProgram, bindings: dict, max_depth: int):
        self.program = program
        self.globals = bindings
        self.max_depth = max_depth
        self.depth = 0
        self.parents: dict[int, NodeSetItem] = {}
        self.registered: set[int] = set()

    # -- document bookkeeping ------------------------------------------------

    def register_doc(self, doc: XmlDoc):
        if id(doc) in self.registered:
            return
        self.registered.add(id(doc))
        self.parents[id(doc.root)] = doc
        self._register_children(doc.root)

    def _register_children(self, node: XmlNode):
        for child in node.children:
            self.parents[id(child)] = node
            if child.kind == "element":
                self._register_children(child)

    def ancestors(self, node: NodeSetItem) -> tuple[NodeSetItem, ...]:
        chain: list[NodeSetItem] = []
        current = self.parents.get(id(node))
        while current is not None:
            chain.append(current)
            current = self.parents.get(id(current))
        chain.reverse()
        return tuple(chain)

    def root_of(self, node: NodeSetItem) -> NodeSetItem:
        chain = self.ancestors(node)
        return chain[0] if chain else node

    # -- template application --------------------------------------------------

    def apply_templates(self, nodes: list[NodeSetItem], mode: str | None,
                        params: dict, out: list[XmlNode]):
        for node in nodes:
            self.apply_to(node, mode, params, out)

    def apply_to(self, node: NodeSetItem, mode: str | None, params: dict,
                 out: list[XmlNode]):
        self.depth += 1
        if self.depth > self.max_depth:
            raise InfiniteRecursionGuard(
                f"template instantiation exceeded {self.max_depth} levels"
            )
        try:
            rule = self._select_rule(node, mode)
            if rule is None:
                self._builtin(node, mode, out)
                return
            env = dict(self.globals)
            for param in rule.params:
                if param.name in params:
                    env[param.name] = params[param.name]
                elif param.default is not None:
                    env[param.name] = self.evaluate(param.default, node, env)
                else:
                    env[param.name] = ""
            self.instantiate(rule.body, node, env, out)
        finally:
            self.depth -= 1

    def _select_rule(self, node: NodeSetItem, mode: str | None) -> TemplateRule | None:
        best: TemplateRule | None = None
        for rule in self.program.rules:
            if rule.mode != mode:
                continue
            if match_pattern(rule.match, node, self.ancestors(node)):
                if best is None or (rule.priority, rule.index) >= (best.priority, best.index):
                    best = rule
        return best

    def _builtin(self, node: NodeSetItem, mode: str | None, out: list[XmlNode]):
        if isinstance(node, XmlDoc):
            self.apply_templates([node.root], mode, {}, out)
        elif node.kind == "element":
            self.apply_templates(list(node.children), mode, {}, out)
        else:
            out.append(text(node.text or ""))

    # -- instruction instantiation ----------------------------------------------

    def instantiate(self, body: tuple[Instruction, ...], context: NodeSetItem,
                    env: dict, out: list[XmlNode]):
        local = env
        for instr in body:
            if isinstance(instr, LiteralText):
                out.append(text(instr.content))
            elif isinstance(instr, LiteralElement):
                children: list[XmlNode] = []
                self.instantiate(instr.body, context, local, children)
                out.append(element(instr.name, _normalize(children)))
            elif isinstance(instr, ValueOf):
                value = string_of(self.evaluate(instr.select, context, local))
                if value:
                    out.append(text(value))
            elif isinstance(instr, CopyOf):
                self._copy_of(self.evaluate(instr.select, context, local), out)
            elif isinstance(instr, Copy):
                self._copy(instr, context, local, out)
            elif isinstance(instr, If):
                if boolean_of(self.evaluate(instr.test, context, local)):
                    self.instantiate(instr.body, context, local, out)
            elif isinstance(instr, Choose):
                for test, when_body in instr.whens:
                    if boolean_of(self.evaluate(test, context, local)):
                        self.instantiate(when_body, context, local, out)
                        break
                else:
                    if instr.otherwise is not None:
                        self.instantiate(instr.otherwise, context, local, out)
            elif isinstance(instr, VariableInstr):
                local = dict(local)
                local[instr.name] = self.evaluate(instr.select, context, local)
            elif isinstance(instr, ApplyTemplates):
                self._apply_instr(instr, context, local, out)
            elif isinstance(instr, ParamInstr):
                raise FunctionSyntaxError("xsl:param outside a template preamble")
            else:  # pragma: no cover - the compiler produces no other kinds
                raise UnknownInstruction(repr(instr))

    def _copy_of(self, value, out: list[XmlNode]):
        if isinstance(value, list):
            for item in value:
                if isinstance(item, XmlDoc):
                    out.append(deep_copy(item.root))
                else:
                    out.append(deep_copy(item))
        elif isinstance(value, ResultFragment):
            for node in value.nodes:
                out.append(deep_copy(node))
        else:
            content = string_of(value)
            if content:
                out.append(text(content))

    def _copy(self, instr: Copy, context: NodeSetItem, env: dict, out: list[XmlNode]):
        if isinstance(context, XmlDoc):
            self.instantiate(instr.body, context, env, out)
        elif context.kind == "element":
            children: list[XmlNode] = []
            self.instantiate(instr.body, context, env, children)
            out.append(element(context.name or "", _normalize(children)))
        else:
            out.append(text(context.text or ""))

    def _apply_instr(self, instr: ApplyTemplates, context: NodeSetItem,
                     env: dict, out: list[XmlNode]):
        params: dict = {}
        for with_param in instr.with_params:
            if with_param.select is not None:
                params[with_param.name] = self.evaluate(with_param.select, context, env)
            else:
                nodes: list[XmlNode] = []
                self.instantiate(with_param.body, context, env, nodes)
                params[with_param.name] = ResultFragment(tuple(_normalize(nodes)))
        if instr.select is None:
            targets: list[NodeSetItem] = list(
                (context.root,) if isinstance(context, XmlDoc) else context.children
            )
        else:
            value = self.evaluate(instr.select, context, env)
            if not isinstance(value, list):
                raise NotANodeSet("apply-templates select must produce a node-set")
            targets = list(value)
            if instr.mode is None and isinstance(instr.select, PathExpr) \
                    and instr.select.start_var is not None and not instr.select.steps:
                # An unmoded application over a whole document variable processes
                # its content. Matching the document node itself here would
                # re-enter the root rule of any program that wraps its own input,
                # so wrapper-style functions would never terminate.
                targets = [t.root if isinstance(t, XmlDoc) else t for t in targets]
        self.apply_templates(targets, instr.mode, params, out)

    def evaluate(self, expr: XPathExpr, context: NodeSetItem, env: dict):
        return eval_xpath(expr, context, bindings=env, root=self.root_of(context))


def _normalize(nodes: list[XmlNode]) -> list[XmlNode]:
    """Merge adjacent text nodes and drop empty ones."""
    out: list[XmlNode] = []
    for node in nodes:
        if node.kind == "text":
            if not node.text:
                continue
            if out and out[-1].kind == "text":
                out[-1] = text((out[-1].text or "") + node.text)
                continue
        out.append(node)
    return out


def run_transform(
    program: TransformProgram,
    input_doc: XmlDoc,
    args: list | tuple = (),
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> list[XmlNode]:
    """Apply the program's templates to the input document.

    ``args`` follow the declared parameters positionally: strings and numbers
    bind as such, xml arguments bind as the argument document. The result is
    the materialized output fragment.
    """
    if len(args) != len(program.params):
        raise ArityMismatch(
            f"{program.name} takes {len(program.params)} parameter(s), got {len(args)}"
        )
    bindings: dict = {}
    docs: list[XmlDoc] = [input_doc]
    for (name, declared), value in zip(program.params, args):
        if declared == "string":
            if not isinstance(value, str):
                raise ArgTypeMismatch(f"parameter {name!r} expects a string")
            bindings[name] = value
        elif declared == "number":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ArgTypeMismatch(f"parameter {name!r} expects a number")
            bindings[name] = float(value)
        else:
            if not isinstance(value, XmlDoc):
                raise ArgTypeMismatch(f"parameter {name!r} expects an xml document")
            bindings[name] = [value]
            docs.append(value)

    runner = _Runner(program, bindings, max_depth)
    for doc in docs:
        runner.register_doc(doc)
    declared_names = {name for name, _ in program.params}
    for name, default in program.top_level_params:
        if name in declared_names:
            continue
        bindings[name] = (
            runner.evaluate(default, input_doc, bindings) if default is not None else ""
        )

    out: list[XmlNode] = []
    try:
        runner.apply_to(input_doc, None, {}, out)
    except RecursionError as exc:  # deep template loops hit Python's stack first
        raise InfiniteRecursionGuard("template instantiation overflowed the stack") from exc
    return _normalize(out)


def result_to_value(fragment: list[XmlNode], declared: str):
    """Convert an output fragment to a declared scalar or document value.

    Empty fragments convert to Null for scalars and to an empty ``result``
    document for xml; scalar conversion trims surrounding whitespace.
    """
    if declared == "xml":
        if len(fragment) == 1 and fragment[0].kind == "element":
            return XmlDoc(deep_copy(fragment[0]))
        return XmlDoc(element("result", tuple(deep_copy(node) for node in fragment)))
    if not fragment:
        return None
    content = "".join(string_value(node) for node in fragment).strip()
    if declared == "number":
        try:
            return float(content)
        except ValueError:
            raise NotANumber(f"transform output is not a number: {content!r}") from None
    return content


def bundled_program_source(name: str) -> str:
    """Source text of one of the packaged example transform functions."""
    return resources.files(__package__).joinpath(f"programs/{name}.msql").read_text()


def bundled_program(name: str) -> TransformProgram:
    return compile_transform(bundled_program_source(name))

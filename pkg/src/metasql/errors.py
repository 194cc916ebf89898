"""Exception hierarchy for the metasql engine.

Compile-time errors (source analysis) and execution-time errors are kept on
separate branches so the CLI can map them to distinct exit codes.
"""


class MetaSqlError(Exception):
    """Base class for every error raised by this package."""


class CompileError(MetaSqlError):
    """Error detected while analyzing source text, before execution."""


class ExecutionError(MetaSqlError):
    """Error raised while evaluating a query or transform."""


# -- XML tree ----------------------------------------------------------------

class WellFormednessError(ExecutionError):
    """Input text is not well-formed XML (as far as this model accepts)."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


# -- XPath -------------------------------------------------------------------

class PathSyntaxError(CompileError):
    """Malformed path expression text."""

    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        detail = f"{message} at offset {position}"
        if expected:
            detail += f" (expected {', '.join(expected)})"
        super().__init__(detail)
        self.position = position
        self.expected = expected


class UnsupportedXPath(CompileError):
    """Path expression is well-formed but outside the supported subset."""


class UnsupportedPattern(CompileError):
    """Template match pattern is outside the supported pattern shapes."""


class UnboundVariable(ExecutionError):
    """A path expression referenced a variable with no binding."""

    def __init__(self, name: str):
        super().__init__(f"unbound variable ${name}")
        self.name = name


class NotANodeSet(ExecutionError):
    """A node-set was required but the expression produced a scalar."""


# -- transform programs ------------------------------------------------------

class FunctionSyntaxError(CompileError):
    """Malformed transform-function declaration."""


class UnknownInstruction(CompileError):
    """A reserved-prefix element outside the supported instruction set."""


class ParamMismatch(CompileError):
    """Declared parameters and body parameter instructions disagree."""


class InfiniteRecursionGuard(ExecutionError):
    """Template instantiation exceeded the configured depth limit."""


class NotANumber(ExecutionError):
    """A transform declared to return a number produced unparseable text."""


# -- SQL syntax --------------------------------------------------------------

class SqlSyntaxError(CompileError):
    """Malformed SQL (or extended query) text."""

    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        detail = f"{message} at offset {position}"
        if expected:
            detail += f" (expected {', '.join(expected)})"
        super().__init__(detail)
        self.position = position
        self.expected = expected


class InvalidSyntaxTree(ExecutionError):
    """An XML document does not encode a valid query syntax tree."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{message} at {path or '/'}")
        self.path = path


# -- relational engine -------------------------------------------------------

class UnknownTable(ExecutionError):
    pass


class UnknownColumn(ExecutionError):
    pass


class AmbiguousColumn(ExecutionError):
    pass


class TypeMismatch(ExecutionError):
    pass


class UnsupportedFeature(ExecutionError):
    """Construct is representable in syntax trees but not executable."""


class MissingColumn(ExecutionError):
    """A projection scheme named a column the result does not have."""

    def __init__(self, name: str):
        super().__init__(f"result has no column named {name!r}")
        self.column = name


class DivisionByZero(ExecutionError):
    pass


class CardinalityError(ExecutionError):
    """A scalar subquery produced a row count its context cannot accept."""


# -- runtime built-ins -------------------------------------------------------

class NullQueryDocument(ExecutionError):
    """Dynamic evaluation was handed a Null instead of a query document."""


class ArityMismatch(ExecutionError):
    """A transform function was called with the wrong argument count."""


class ArgTypeMismatch(ExecutionError):
    """A transform function argument does not match its declared type."""


# -- meta-query compiler -----------------------------------------------------

class DuplicateFunction(CompileError):
    pass


class ReservedName(CompileError):
    pass


class NotXmlTyped(CompileError):
    """An XML-variable binding source is not of type xml."""


class UnboundRangeVariable(CompileError):
    pass


class ForwardReference(CompileError):
    """A binding source referenced a variable bound further right."""


class WildcardOnEval(CompileError):
    """Output scheme inference hit a wildcard over a dynamic-evaluation table."""


# -- CLI ---------------------------------------------------------------------

class LayoutError(MetaSqlError):
    """A catalog data file violates the on-disk table layout."""

    def __init__(self, file: str, line: int, reason: str):
        super().__init__(f"{file}:{line}: {reason}")
        self.file = file
        self.line = line
        self.reason = reason

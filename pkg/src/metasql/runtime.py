"""Built-in meta-querying functions: EXTRACT, CMB, EVAL, UEVAL.

These bridge the relational engine and the document layer: EXTRACT turns one
document into a one-column table of subtrees, CMB folds grouped documents
into one, UEVAL runs a stored query and presents each output row as a ``row``
document, and EVAL runs a stored query projected onto an inferred output
scheme. :class:`EngineExtensions` wires them (plus declared transform
functions) into plan execution.
"""

from __future__ import annotations

from .errors import (
    ArgTypeMismatch,
    ArityMismatch,
    NotANodeSet,
    NotXmlTyped,
    NullQueryDocument,
    TypeMismatch,
    UnsupportedFeature,
)
from .rel_engine import (
    Catalog,
    Extensions,
    Table,
    Value,
    execute,
    format_value,
    project,
)
from .sql_syntax import from_xml
from .xform import TransformProgram, result_to_value, run_transform
from .xml_tree import XmlDoc, XmlNode, deep_copy, element, promote, text
from .xpath import eval_xpath, parse_xpath

_NAME_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")


def extract(doc: XmlDoc | None, path_text: str) -> Table:
    """All subtrees of ``doc`` selected by the path, one per row, in document
    order, each promoted to a document of its own."""
    expr = parse_xpath(path_text)
    if doc is None:
        return Table([("result", "xml")], [])
    value = eval_xpath(expr, doc)
    if not isinstance(value, list):
        raise NotANodeSet(f"path {path_text!r} does not select nodes")
    rows = [(promote(item),) for item in value]
    return Table([("result", "xml")], rows)


def cmb(values: list[XmlDoc]) -> Value:
    """Combine documents under a single ``cmb`` root; Null for an empty list."""
    docs = [doc for doc in values if doc is not None]
    if not docs:
        return None
    return XmlDoc(element("cmb", tuple(deep_copy(doc.root) for doc in docs)))


def row_doc(columns: list[str], row: tuple) -> XmlDoc:
    """Encode one output row as a ``row`` document.

    Null columns are omitted; scalar values become text content and document
    values are embedded as subtrees (so query-valued columns survive a round
    trip through this mapping).
    """
    children: list[XmlNode] = []
    for name, value in zip(columns, row):
        if value is None:
            continue
        if not name or name[0] not in _NAME_START:
            raise TypeMismatch(f"column {name!r} is not a valid element name")
        if isinstance(value, XmlDoc):
            children.append(element(name, (deep_copy(value.root),)))
        else:
            content = format_value(value)
            children.append(element(name, (text(content),) if content else ()))
    return XmlDoc(element("row", children))


def ueval(doc: XmlDoc | None, catalog: Catalog) -> Table:
    """Dynamically evaluate a stored query; one ``row`` document per row."""
    if doc is None:
        raise NullQueryDocument("cannot evaluate a Null query document")
    tree = from_xml(doc)
    result = execute(tree, catalog)
    names = result.column_names
    rows = [(row_doc(names, row),) for row in result.rows]
    return Table([("result", "xml")], rows)


def eval_typed(doc: XmlDoc | None, catalog: Catalog, scheme: tuple[str, ...]) -> Table:
    """Dynamically evaluate a stored query projected onto the output scheme."""
    if doc is None:
        raise NullQueryDocument("cannot evaluate a Null query document")
    tree = from_xml(doc)
    projected = project(execute(tree, catalog), scheme)
    columns = [(name, _observed_type(projected, index))
               for index, (name, _) in enumerate(projected.columns)]
    return Table(columns, projected.rows)


def _observed_type(table: Table, index: int) -> str:
    """Number if every non-Null value is numeric, else string (xml if present)."""
    values = [row[index] for row in table.rows if row[index] is not None]
    if any(isinstance(value, XmlDoc) for value in values):
        return "xml"
    if all(isinstance(value, (int, float)) for value in values):
        return "number"
    return "string"


def invoke_function(program: TransformProgram, args: list) -> Value:
    """Call a transform function: first argument is the input document.

    Null anywhere in the arguments makes the result Null without running the
    transform.
    """
    if len(args) != len(program.params) + 1:
        raise ArityMismatch(
            f"{program.name} takes {len(program.params) + 1} argument(s) "
            f"including the input document, got {len(args)}"
        )
    if any(arg is None for arg in args):
        return None
    input_doc = args[0]
    if not isinstance(input_doc, XmlDoc):
        raise ArgTypeMismatch(f"{program.name} needs an xml input document")
    fragment = run_transform(program, input_doc, list(args[1:]))
    return result_to_value(fragment, program.return_type)


class EngineExtensions(Extensions):
    """Plan-execution hooks over one catalog and a set of declared functions."""

    def __init__(self, catalog: Catalog, functions: dict[str, TransformProgram]):
        self.catalog = catalog
        self.functions = functions

    def table_function(self, kind: str, static: tuple, args: tuple) -> Table:
        if kind == "extract":
            source = args[0]
            if source is not None and not isinstance(source, XmlDoc):
                raise NotXmlTyped("the binding source must be of type xml")
            return extract(source, static[0])
        if kind == "ueval":
            return ueval(_xml_arg(args[0]), self.catalog)
        if kind == "eval":
            return eval_typed(_xml_arg(args[0]), self.catalog, static[0])
        raise UnsupportedFeature(f"unknown table function {kind!r}")

    def call(self, name: str, args: tuple) -> Value:
        program = self.functions.get(name)
        if program is None:
            raise UnsupportedFeature(f"unknown function {name!r}")
        return invoke_function(program, list(args))

    def return_type(self, name: str) -> str:
        program = self.functions.get(name)
        return program.return_type if program else "string"

    def combine(self, values: list) -> Value:
        return cmb(values)


def _xml_arg(value: Value) -> XmlDoc | None:
    if value is None or isinstance(value, XmlDoc):
        return value
    raise NotXmlTyped("dynamic evaluation takes an xml query document")

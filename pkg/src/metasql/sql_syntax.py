"""SQL subset: parser, unparser, and the XML syntax-tree codec.

The accepted language is SQL-92 select-statements without joins: select lists
with aggregates and scalar expressions, comma cross-products, where/group
by/having, the classic predicate set (comparison, like, in, match, all-or-any,
exists, unique, overlaps, null test), and union/except/intersect. The XML
encoding mirrors the element grammar one-to-one and is the exchange format
for stored queries; ``to_xml``/``from_xml`` and ``parse_sql``/``unparse_sql``
are inverse pairs on that subset.

The parser is written for extension: the meta-query front end subclasses it
to add bindings in the from-clause and function calls in expressions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union

from .errors import InvalidSyntaxTree, SqlSyntaxError
from .xml_tree import XmlDoc, XmlNode, element, string_value, text

# ---------------------------------------------------------------------------
# Syntax tree model
# ---------------------------------------------------------------------------

AGGREGATE_FUNCS = ("avg", "count", "max", "min", "sum")
COMPARISON_OPS = ("eq", "lt", "let", "gt", "get", "neq")

_OP_TOKENS = {"=": "eq", "<": "lt", "<=": "let", ">": "gt", ">=": "get", "<>": "neq"}
_OP_TEXT = {v: k for k, v in _OP_TOKENS.items()}


@dataclass(frozen=True)
class ColumnRef:
    rangevar: str | None
    name: str


@dataclass(frozen=True)
class Constant:
    lexeme: str
    is_number: bool


@dataclass(frozen=True)
class AlgExp:
    left: "Scalar"
    op: str  # add | sub | mul | div
    right: "Scalar"


@dataclass(frozen=True)
class ConcatExp:
    left: "Scalar"
    right: "Scalar"


@dataclass(frozen=True)
class Aggregate:
    func: str  # count-all | avg | count | max | min | sum
    quantifier: str | None = None  # all | distinct
    operand: "Scalar | None" = None  # None only for count-all


Scalar = Union[ColumnRef, Constant, AlgExp, ConcatExp, Aggregate, "SelectQuery", "SetOp"]


@dataclass(frozen=True)
class SelColumn:
    """Select-list column item: bare name or rangevar-qualified."""

    rangevar: str | None
    name: str


@dataclass(frozen=True)
class SelWildcard:
    """Select-list ``v.*`` item."""

    rangevar: str


@dataclass(frozen=True)
class SelItem:
    value: object  # SelColumn | SelWildcard | Scalar | Aggregate
    alias: str | None = None


@dataclass(frozen=True)
class SelectClause:
    quantifier: str | None  # all | distinct
    items: tuple[SelItem, ...] | None  # None means the bare wildcard


@dataclass(frozen=True)
class RowConstr:
    items: tuple[Scalar, ...]


@dataclass(frozen=True)
class Comparison:
    left: RowConstr
    op: str
    right: RowConstr


@dataclass(frozen=True)
class Like:
    target: Scalar
    pattern: Scalar
    escape: Scalar | None = None


@dataclass(frozen=True)
class InQuery:
    row: RowConstr
    query: "QueryTree"


@dataclass(frozen=True)
class InList:
    scalar: Scalar
    values: tuple[Scalar, ...]


@dataclass(frozen=True)
class MatchPred:
    row: RowConstr
    unique: bool
    partiality: str | None  # partial | full
    query: "QueryTree"


@dataclass(frozen=True)
class AllOrAny:
    row: RowConstr
    op: str
    quantifier: str | None  # all | any
    query: "QueryTree"


@dataclass(frozen=True)
class Exists:
    query: "QueryTree"


@dataclass(frozen=True)
class Unique:
    query: "QueryTree"


@dataclass(frozen=True)
class Overlaps:
    items: tuple[Scalar, Scalar, Scalar, Scalar]


@dataclass(frozen=True)
class NullTest:
    row: RowConstr


CondTest = Union[Comparison, Like, InQuery, InList, MatchPred, AllOrAny,
                 Exists, Unique, Overlaps, NullTest]


@dataclass(frozen=True)
class BoolOp:
    kind: str  # and | or
    operands: tuple["CondExpr", ...]


@dataclass(frozen=True)
class CondExpr:
    negated: bool
    op: Union[CondTest, BoolOp]


@dataclass(frozen=True)
class TableRef:
    source: "str | QueryTree"
    alias: str | None = None


@dataclass(frozen=True)
class SelectQuery:
    select: SelectClause
    from_items: tuple[object, ...]
    where: CondExpr | None = None
    group_by: tuple[ColumnRef, ...] = ()
    having: CondExpr | None = None


@dataclass(frozen=True)
class SetOp:
    kind: str  # union | except | intersect
    all: bool
    left: "QueryTree"
    right: "QueryTree"


QueryTree = Union[SelectQuery, SetOp]

_NUMBER_LEXEME = re.compile(r"(\d+(\.\d*)?|\.\d+)\Z")


def number_constant(lexeme: str) -> Constant:
    return Constant(lexeme, True)


def string_constant(value: str) -> Constant:
    return Constant(value, False)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

RESERVED = frozenset("""
    select from where group by having union except intersect all distinct as
    and or not exists unique in like escape is null match partial full
    overlaps any some avg count max min sum
""".split())

_SYMBOLS = ("||", "<=", ">=", "<>", "=", "<", ">", "(", ")", ",", ".", "*", "+", "-", "/")


@dataclass(frozen=True)
class Token:
    type: str  # ident | number | string | symbol | bracket | end
    value: str
    pos: int

    def keyword(self) -> str | None:
        return self.value.lower() if self.type == "ident" else None


_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUM_RE = re.compile(r"\d+(\.\d*)?|\.\d+")


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    length = len(source)
    while pos < length:
        ch = source[pos]
        if ch.isspace():
            pos += 1
            continue
        if source.startswith("--", pos):
            end = source.find("\n", pos)
            pos = length if end < 0 else end + 1
            continue
        if ch == "'":
            value = []
            scan = pos + 1
            while True:
                if scan >= length:
                    raise SqlSyntaxError("unterminated string literal", pos)
                if source[scan] == "'":
                    if scan + 1 < length and source[scan + 1] == "'":
                        value.append("'")
                        scan += 2
                        continue
                    break
                value.append(source[scan])
                scan += 1
            tokens.append(Token("string", "".join(value), pos))
            pos = scan + 1
            continue
        if ch == "[":
            depth = 0
            scan = pos
            quote: str | None = None
            while scan < length:
                current = source[scan]
                if quote:
                    if current == quote:
                        quote = None
                elif current in "'\"":
                    quote = current
                elif current == "[":
                    depth += 1
                elif current == "]":
                    depth -= 1
                    if depth == 0:
                        break
                scan += 1
            if scan >= length:
                raise SqlSyntaxError("unterminated '[' bracket", pos)
            tokens.append(Token("bracket", source[pos + 1:scan], pos))
            pos = scan + 1
            continue
        match = _IDENT_RE.match(source, pos)
        if match:
            tokens.append(Token("ident", match.group(), pos))
            pos = match.end()
            continue
        match = _NUM_RE.match(source, pos)
        if match:
            tokens.append(Token("number", match.group(), pos))
            pos = match.end()
            continue
        for symbol in _SYMBOLS:
            if source.startswith(symbol, pos):
                tokens.append(Token("symbol", symbol, pos))
                pos += len(symbol)
                break
        else:
            raise SqlSyntaxError(f"unexpected character {ch!r}", pos)
    tokens.append(Token("end", "", length))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class Parser:
    """Recursive-descent parser over the token list.

    Subclasses hook :meth:`parse_from_item` and :meth:`parse_call` to extend
    the from-clause and expression grammars.
    """

    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.pos = 0

    # -- token plumbing --------------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        index = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[index]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        if token.type != "end":
            self.pos += 1
        return token

    def fail(self, message: str, expected: tuple[str, ...] = ()):
        raise SqlSyntaxError(message, self.peek().pos, expected)

    def at_keyword(self, *keywords: str) -> bool:
        return self.peek().keyword() in keywords

    def eat_keyword(self, *keywords: str) -> str | None:
        if self.at_keyword(*keywords):
            return self.advance().value.lower()
        return None

    def expect_keyword(self, keyword: str):
        if not self.eat_keyword(keyword):
            self.fail(f"expected {keyword.upper()}", (keyword.upper(),))

    def at_symbol(self, symbol: str) -> bool:
        token = self.peek()
        return token.type == "symbol" and token.value == symbol

    def eat_symbol(self, symbol: str) -> bool:
        if self.at_symbol(symbol):
            self.advance()
            return True
        return False

    def expect_symbol(self, symbol: str):
        if not self.eat_symbol(symbol):
            self.fail(f"expected {symbol!r}", (symbol,))

    def expect_name(self, what: str) -> str:
        token = self.peek()
        if token.type != "ident" or token.value.lower() in RESERVED:
            self.fail(f"expected {what}")
        return self.advance().value

    def attempt(self, parse: Callable):
        """Run a sub-parse, restoring position if it fails."""
        mark = self.pos
        try:
            return parse()
        except SqlSyntaxError:
            self.pos = mark
            return None

    # -- queries ---------------------------------------------------------------

    def parse_query(self) -> QueryTree:
        tree = self.parse_set_expr()
        if self.peek().type != "end":
            self.fail("trailing content after the query")
        return tree

    def parse_set_expr(self) -> QueryTree:
        left = self.parse_set_term()
        while self.at_keyword("union", "except"):
            kind = self.advance().value.lower()
            is_all = self.eat_keyword("all") is not None
            right = self.parse_set_term()
            left = SetOp(kind, is_all, left, right)
        return left

    def parse_set_term(self) -> QueryTree:
        left = self.parse_set_primary()
        while self.at_keyword("intersect"):
            self.advance()
            is_all = self.eat_keyword("all") is not None
            right = self.parse_set_primary()
            left = SetOp("intersect", is_all, left, right)
        return left

    def parse_set_primary(self) -> QueryTree:
        if self.at_symbol("("):
            self.advance()
            tree = self.parse_set_expr()
            self.expect_symbol(")")
            return tree
        return self.parse_select_query()

    def parse_select_query(self) -> SelectQuery:
        self.expect_keyword("select")
        quantifier = self.eat_keyword("all", "distinct")
        items: tuple[SelItem, ...] | None
        if self.eat_symbol("*"):
            items = None
        else:
            collected = [self.parse_sel_item()]
            while self.eat_symbol(","):
                collected.append(self.parse_sel_item())
            items = tuple(collected)
        self.expect_keyword("from")
        from_items = [self.parse_from_item()]
        while self.eat_symbol(","):
            from_items.append(self.parse_from_item())
        where = None
        if self.eat_keyword("where"):
            where = self.parse_cond()
        group_by: tuple[ColumnRef, ...] = ()
        if self.at_keyword("group"):
            self.advance()
            self.expect_keyword("by")
            refs = [self.parse_column_ref()]
            while self.eat_symbol(","):
                refs.append(self.parse_column_ref())
            group_by = tuple(refs)
        having = None
        if self.eat_keyword("having"):
            if not group_by:
                self.fail("HAVING requires GROUP BY")
            having = self.parse_cond()
        return SelectQuery(SelectClause(quantifier, items), tuple(from_items),
                           where, group_by, having)

    def parse_column_ref(self) -> ColumnRef:
        first = self.expect_name("a column name")
        if self.eat_symbol("."):
            return ColumnRef(first, self.expect_name("a column name"))
        return ColumnRef(None, first)

    def parse_sel_item(self) -> SelItem:
        if self.peek().type == "ident" and self.peek(1).type == "symbol" \
                and self.peek(1).value == "." and self.peek(2).type == "symbol" \
                and self.peek(2).value == "*":
            rangevar = self.advance().value
            self.advance()
            self.advance()
            return SelItem(SelWildcard(rangevar), self.parse_alias())
        value: object = self.parse_scalar()
        if isinstance(value, ColumnRef):
            value = SelColumn(value.rangevar, value.name)
        return SelItem(value, self.parse_alias())

    def parse_alias(self) -> str | None:
        if self.eat_keyword("as"):
            return self.expect_name("an alias")
        token = self.peek()
        if token.type == "ident" and token.value.lower() not in RESERVED:
            return self.advance().value
        return None

    def parse_from_item(self):
        if self.at_symbol("("):
            self.advance()
            tree = self.parse_set_expr()
            self.expect_symbol(")")
            return TableRef(tree, self.parse_alias())
        name = self.expect_name("a table name")
        return TableRef(name, self.parse_alias())

    # -- scalar expressions -----------------------------------------------------

    def parse_scalar(self) -> Scalar:
        left = self.parse_additive()
        while self.at_symbol("||"):
            self.advance()
            left = ConcatExp(left, self.parse_additive())
        return left

    def parse_additive(self) -> Scalar:
        left = self.parse_multiplicative()
        while self.at_symbol("+") or self.at_symbol("-"):
            op = "add" if self.advance().value == "+" else "sub"
            left = AlgExp(left, op, self.parse_multiplicative())
        return left

    def parse_multiplicative(self) -> Scalar:
        left = self.parse_primary_scalar()
        while self.at_symbol("*") or self.at_symbol("/"):
            op = "mul" if self.advance().value == "*" else "div"
            left = AlgExp(left, op, self.parse_primary_scalar())
        return left

    def parse_primary_scalar(self) -> Scalar:
        token = self.peek()
        if token.type == "number":
            self.advance()
            return Constant(token.value, True)
        if token.type == "string":
            self.advance()
            return Constant(token.value, False)
        if token.type == "symbol" and token.value == "(":
            if self.peek(1).keyword() == "select":
                self.advance()
                tree = self.parse_set_expr()
                self.expect_symbol(")")
                return tree
            if self.peek(1).type == "symbol" and self.peek(1).value == "(":
                subquery = self.attempt(self._parse_parenthesized_query)
                if subquery is not None:
                    return subquery
            self.advance()
            scalar = self.parse_scalar()
            self.expect_symbol(")")
            return scalar
        if token.type == "ident":
            keyword = token.value.lower()
            if keyword in AGGREGATE_FUNCS and self.peek(1).type == "symbol" \
                    and self.peek(1).value == "(":
                return self.parse_aggregate()
            if self.peek(1).type == "symbol" and self.peek(1).value == "(":
                return self.parse_call(self.advance().value)
            if keyword in RESERVED:
                self.fail("expected an expression")
            return self.parse_column_ref()
        self.fail("expected an expression")

    def _parse_parenthesized_query(self) -> QueryTree:
        self.expect_symbol("(")
        tree = self.parse_set_expr()
        self.expect_symbol(")")
        return tree

    def parse_aggregate(self) -> Aggregate:
        func = self.advance().value.lower()
        self.expect_symbol("(")
        if func == "count" and self.eat_symbol("*"):
            self.expect_symbol(")")
            return Aggregate("count-all")
        quantifier = self.eat_keyword("all", "distinct")
        operand = self.parse_scalar()
        if isinstance(operand, Aggregate):
            self.fail("aggregates cannot be nested")
        self.expect_symbol(")")
        return Aggregate(func, quantifier, operand)

    def parse_call(self, name: str) -> Scalar:
        """Hook for function-call syntax; the base language has none."""
        self.fail(f"unknown function {name!r}")

    # -- conditions --------------------------------------------------------------

    def parse_cond(self) -> CondExpr:
        operands = [self.parse_cond_and()]
        while self.eat_keyword("or"):
            operands.append(self.parse_cond_and())
        if len(operands) == 1:
            return operands[0]
        return CondExpr(False, BoolOp("or", self._flatten("or", operands)))

    def parse_cond_and(self) -> CondExpr:
        operands = [self.parse_cond_unary()]
        while self.eat_keyword("and"):
            operands.append(self.parse_cond_unary())
        if len(operands) == 1:
            return operands[0]
        return CondExpr(False, BoolOp("and", self._flatten("and", operands)))

    @staticmethod
    def _flatten(kind: str, operands: list[CondExpr]) -> tuple[CondExpr, ...]:
        flat: list[CondExpr] = []
        for operand in operands:
            if not operand.negated and isinstance(operand.op, BoolOp) \
                    and operand.op.kind == kind:
                flat.extend(operand.op.operands)
            else:
                flat.append(operand)
        return tuple(flat)

    def parse_cond_unary(self) -> CondExpr:
        if self.eat_keyword("not"):
            inner = self.parse_cond_unary()
            return CondExpr(not inner.negated, inner.op)
        if self.at_keyword("exists"):
            self.advance()
            return CondExpr(False, Exists(self._parse_parenthesized_query()))
        if self.at_keyword("unique"):
            self.advance()
            return CondExpr(False, Unique(self._parse_parenthesized_query()))
        if self.at_symbol("("):
            grouped = self.attempt(self._parse_grouped_cond)
            if grouped is not None:
                return grouped
        return self.parse_predicate()

    def _parse_grouped_cond(self) -> CondExpr:
        self.expect_symbol("(")
        cond = self.parse_cond()
        self.expect_symbol(")")
        token = self.peek()
        if token.type == "symbol" and token.value in _OP_TOKENS:
            self.fail("grouping is a row constructor here")
        if token.keyword() in ("in", "like", "is", "match", "overlaps", "not"):
            self.fail("grouping is a row constructor here")
        return cond

    def parse_row_constr(self) -> RowConstr:
        if self.at_symbol("(") and self.peek(1).keyword() != "select":
            subquery = None
            if self.peek(1).type == "symbol" and self.peek(1).value == "(":
                subquery = self.attempt(self._parse_parenthesized_query)
            if subquery is not None:
                return RowConstr((subquery,))
            mark = self.pos
            self.advance()
            items = [self.parse_scalar()]
            if not self.at_symbol(","):
                # plain parenthesized scalar, not a row of several
                self.pos = mark
                return RowConstr((self.parse_scalar(),))
            while self.eat_symbol(","):
                items.append(self.parse_scalar())
            self.expect_symbol(")")
            return RowConstr(tuple(items))
        return RowConstr((self.parse_scalar(),))

    def parse_predicate(self) -> CondExpr:
        row = self.parse_row_constr()
        token = self.peek()
        if token.type == "symbol" and token.value in _OP_TOKENS:
            op = _OP_TOKENS[self.advance().value]
            quantifier = self.eat_keyword("all", "any", "some")
            if quantifier:
                quantifier = "any" if quantifier == "some" else quantifier
                return CondExpr(False, AllOrAny(row, op, quantifier,
                                                self._parse_parenthesized_query()))
            return CondExpr(False, Comparison(row, op, self.parse_row_constr()))
        negated = False
        if token.keyword() == "not":
            self.advance()
            negated = True
        keyword = self.peek().keyword()
        if keyword == "like":
            self.advance()
            target = self._single_scalar(row, "LIKE")
            pattern = self.parse_scalar()
            escape = None
            if self.eat_keyword("escape"):
                escape = self.parse_scalar()
            return CondExpr(negated, Like(target, pattern, escape))
        if keyword == "in":
            self.advance()
            self.expect_symbol("(")
            if self.at_keyword("select") or (self.at_symbol("(")):
                tree = self.parse_set_expr()
                self.expect_symbol(")")
                return CondExpr(negated, InQuery(row, tree))
            values = [self.parse_scalar()]
            while self.eat_symbol(","):
                values.append(self.parse_scalar())
            self.expect_symbol(")")
            if len(values) < 2:
                self.fail("IN needs a subquery or at least two values")
            return CondExpr(negated, InList(self._single_scalar(row, "IN"), tuple(values)))
        if keyword == "is":
            if negated:
                self.fail("NOT precedes IS NULL as IS NOT NULL")
            self.advance()
            negated = self.eat_keyword("not") is not None
            self.expect_keyword("null")
            return CondExpr(negated, NullTest(row))
        if keyword == "match":
            if negated:
                self.fail("MATCH has no NOT form")
            self.advance()
            unique = self.eat_keyword("unique") is not None
            partiality = self.eat_keyword("partial", "full")
            return CondExpr(False, MatchPred(row, unique, partiality,
                                             self._parse_parenthesized_query()))
        if keyword == "overlaps":
            if negated:
                self.fail("OVERLAPS has no NOT form")
            self.advance()
            right = self.parse_row_constr()
            if len(row.items) != 2 or len(right.items) != 2:
                self.fail("OVERLAPS compares two (start, end) pairs")
            return CondExpr(False, Overlaps((row.items[0], row.items[1],
                                             right.items[0], right.items[1])))
        self.fail("expected a predicate")

    def _single_scalar(self, row: RowConstr, what: str) -> Scalar:
        if len(row.items) != 1:
            self.fail(f"{what} takes a single scalar, not a row")
        return row.items[0]


def parse_sql(source: str) -> QueryTree:
    """Parse one select-statement in the base subset."""
    return Parser(source).parse_query()


# ---------------------------------------------------------------------------
# Unparser
# ---------------------------------------------------------------------------

def _quote_string(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


_SCALAR_PREC = {"concat": 0, "add": 1, "sub": 1, "mul": 2, "div": 2}
_ALG_TEXT = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


class _Unparser:
    def __init__(self):
        self.derived_count = 0

    def query(self, tree: QueryTree) -> str:
        if isinstance(tree, SetOp):
            keyword = tree.kind + (" all" if tree.all else "")
            return f"{self._set_operand(tree.left)} {keyword} {self._set_operand(tree.right)}"
        return self.select_query(tree)

    def _set_operand(self, tree: QueryTree) -> str:
        rendered = self.query(tree)
        return f"({rendered})" if isinstance(tree, SetOp) else rendered

    def select_query(self, tree: SelectQuery) -> str:
        parts = ["select"]
        if tree.select.quantifier:
            parts.append(tree.select.quantifier)
        if tree.select.items is None:
            parts.append("*")
        else:
            parts.append(", ".join(self.sel_item(item) for item in tree.select.items))
        parts.append("from")
        parts.append(", ".join(self.from_item(item) for item in tree.from_items))
        if tree.where is not None:
            parts.append("where")
            parts.append(self.cond(tree.where))
        if tree.group_by:
            parts.append("group by")
            parts.append(", ".join(self.column_ref(ref) for ref in tree.group_by))
        if tree.having is not None:
            parts.append("having")
            parts.append(self.cond(tree.having))
        return " ".join(parts)

    def sel_item(self, item: SelItem) -> str:
        value = item.value
        if isinstance(value, SelColumn):
            rendered = f"{value.rangevar}.{value.name}" if value.rangevar else value.name
        elif isinstance(value, SelWildcard):
            rendered = f"{value.rangevar}.*"
        else:
            rendered = self.scalar(value)
        if item.alias:
            rendered += f" as {item.alias}"
        return rendered

    def from_item(self, item) -> str:
        if not isinstance(item, TableRef):
            raise TypeError(f"cannot unparse from-item {item!r}")
        if isinstance(item.source, str):
            rendered = item.source
        else:
            alias = item.alias
            if alias is None:
                self.derived_count += 1
                alias = f"dt{self.derived_count}"
            return f"({self.query(item.source)}) as {alias}"
        if item.alias:
            rendered += f" as {item.alias}"
        return rendered

    def column_ref(self, ref: ColumnRef) -> str:
        return f"{ref.rangevar}.{ref.name}" if ref.rangevar else ref.name

    def scalar(self, value: Scalar, parent_prec: int = -1, right_side: bool = False) -> str:
        if isinstance(value, ColumnRef):
            return self.column_ref(value)
        if isinstance(value, Constant):
            return value.lexeme if value.is_number else _quote_string(value.lexeme)
        if isinstance(value, Aggregate):
            return self.aggregate(value)
        if isinstance(value, (SelectQuery, SetOp)):
            return f"({self.query(value)})"
        if isinstance(value, ConcatExp):
            prec = _SCALAR_PREC["concat"]
            rendered = (f"{self.scalar(value.left, prec, False)} || "
                        f"{self.scalar(value.right, prec, True)}")
        elif isinstance(value, AlgExp):
            prec = _SCALAR_PREC[value.op]
            rendered = (f"{self.scalar(value.left, prec, False)} {_ALG_TEXT[value.op]} "
                        f"{self.scalar(value.right, prec, True)}")
        else:
            raise TypeError(f"cannot unparse scalar {value!r}")
        if prec < parent_prec or (prec == parent_prec and right_side):
            return f"({rendered})"
        return rendered

    def aggregate(self, agg: Aggregate) -> str:
        if agg.func == "count-all":
            return "count(*)"
        quantifier = f"{agg.quantifier} " if agg.quantifier else ""
        return f"{agg.func}({quantifier}{self.scalar(agg.operand)})"

    def cond(self, cond: CondExpr, parent: str | None = None) -> str:
        if cond.negated:
            return f"not ({self._cond_op(cond.op, None)})"
        return self._cond_op(cond.op, parent)

    def _cond_op(self, op, parent: str | None) -> str:
        if isinstance(op, BoolOp):
            joined = f" {op.kind} ".join(self.cond(child, op.kind) for child in op.operands)
            if parent == "and" and op.kind == "or":
                return f"({joined})"
            return joined
        return self.predicate(op)

    def predicate(self, op: CondTest) -> str:
        if isinstance(op, Comparison):
            return (f"{self.row(op.left)} {_OP_TEXT[op.op]} {self.row(op.right)}")
        if isinstance(op, Like):
            rendered = f"{self.scalar(op.target)} like {self.scalar(op.pattern)}"
            if op.escape is not None:
                rendered += f" escape {self.scalar(op.escape)}"
            return rendered
        if isinstance(op, InQuery):
            return f"{self.row(op.row)} in ({self.query(op.query)})"
        if isinstance(op, InList):
            values = ", ".join(self.scalar(value) for value in op.values)
            return f"{self.scalar(op.scalar)} in ({values})"
        if isinstance(op, MatchPred):
            parts = [self.row(op.row), "match"]
            if op.unique:
                parts.append("unique")
            if op.partiality:
                parts.append(op.partiality)
            parts.append(f"({self.query(op.query)})")
            return " ".join(parts)
        if isinstance(op, AllOrAny):
            quantifier = f" {op.quantifier}" if op.quantifier else ""
            return (f"{self.row(op.row)} {_OP_TEXT[op.op]}{quantifier} "
                    f"({self.query(op.query)})")
        if isinstance(op, Exists):
            return f"exists ({self.query(op.query)})"
        if isinstance(op, Unique):
            return f"unique ({self.query(op.query)})"
        if isinstance(op, Overlaps):
            a, b, c, d = (self.scalar(item) for item in op.items)
            return f"({a}, {b}) overlaps ({c}, {d})"
        if isinstance(op, NullTest):
            return f"{self.row(op.row)} is null"
        raise TypeError(f"cannot unparse predicate {op!r}")

    def row(self, row: RowConstr) -> str:
        if len(row.items) == 1:
            return self.scalar(row.items[0])
        return "(" + ", ".join(self.scalar(item) for item in row.items) + ")"


def unparse_sql(tree: QueryTree) -> str:
    """Render a syntax tree back to SQL text."""
    return _Unparser().query(tree)


# ---------------------------------------------------------------------------
# XML encoding
# ---------------------------------------------------------------------------

def _pcdata(name: str, value: str) -> XmlNode:
    return element(name, (text(value),) if value else ())


def _scalar_to_xml(value: Scalar) -> XmlNode:
    """The <scalar> wrapper element."""
    return element("scalar", (_scalar_body_to_xml(value),))


def _scalar_body_to_xml(value: Scalar) -> XmlNode:
    if isinstance(value, ColumnRef):
        return _column_ref_to_xml(value)
    if isinstance(value, Constant):
        return _pcdata("constant", value.lexeme)
    if isinstance(value, AlgExp):
        return element("alg-exp", (_scalar_to_xml(value.left), element(value.op),
                                   _scalar_to_xml(value.right)))
    if isinstance(value, ConcatExp):
        return element("concat-exp", (_scalar_to_xml(value.left), _scalar_to_xml(value.right)))
    if isinstance(value, Aggregate):
        return _aggregate_to_xml(value)
    if isinstance(value, (SelectQuery, SetOp)):
        return _query_to_xml(value)
    raise TypeError(f"cannot encode scalar {value!r}")


def _column_ref_to_xml(ref: ColumnRef) -> XmlNode:
    children: list[XmlNode] = []
    if ref.rangevar:
        children.append(_pcdata("rangevar", ref.rangevar))
    children.append(_pcdata("column", ref.name))
    return element("column-ref", children)


def _aggregate_to_xml(agg: Aggregate) -> XmlNode:
    if agg.func == "count-all":
        return element("aggregate", (element("count-all"),))
    children = [element(agg.func)]
    if agg.quantifier:
        children.append(element(agg.quantifier))
    operand = agg.operand
    if isinstance(operand, (ColumnRef, Constant, AlgExp, ConcatExp, SelectQuery, SetOp)):
        children.append(_scalar_body_to_xml(operand))
    else:
        raise TypeError(f"cannot encode aggregate operand {operand!r}")
    return element("aggregate", children)


def _row_member_to_xml(member: Scalar) -> XmlNode:
    if isinstance(member, ColumnRef):
        return _column_ref_to_xml(member)
    return _scalar_to_xml(member)


def _row_to_xml(row: RowConstr) -> XmlNode:
    return element("rowconstr", tuple(_row_member_to_xml(member) for member in row.items))


def _cond_to_xml(cond: CondExpr) -> XmlNode:
    children: list[XmlNode] = []
    if cond.negated:
        children.append(element("not"))
    op = cond.op
    if isinstance(op, BoolOp):
        children.append(element(op.kind, tuple(_cond_to_xml(child) for child in op.operands)))
    else:
        children.append(element("cond-test", (_test_to_xml(op),)))
    return element("cond-exp", children)


def _test_to_xml(op: CondTest) -> XmlNode:
    if isinstance(op, Comparison):
        return element("comparison", (_row_to_xml(op.left), element(op.op),
                                      _row_to_xml(op.right)))
    if isinstance(op, Like):
        children = [_row_member_to_xml(op.target), _row_member_to_xml(op.pattern)]
        if op.escape is not None:
            children.append(_row_member_to_xml(op.escape))
        return element("like", children)
    if isinstance(op, InQuery):
        return element("in", (_row_to_xml(op.row), _query_to_xml(op.query)))
    if isinstance(op, InList):
        children = [_scalar_to_xml(op.scalar)]
        children.extend(_scalar_to_xml(value) for value in op.values)
        return element("in", children)
    if isinstance(op, MatchPred):
        children = [_row_to_xml(op.row)]
        if op.unique:
            children.append(element("unique"))
        if op.partiality:
            children.append(element(op.partiality))
        children.append(_query_to_xml(op.query))
        return element("match", children)
    if isinstance(op, AllOrAny):
        children = [_row_to_xml(op.row), element(op.op)]
        if op.quantifier:
            children.append(element(op.quantifier))
        children.append(_query_to_xml(op.query))
        return element("all-or-any", children)
    if isinstance(op, Exists):
        return element("exists", (_query_to_xml(op.query),))
    if isinstance(op, Unique):
        return element("unique", (_query_to_xml(op.query),))
    if isinstance(op, Overlaps):
        return element("overlaps", tuple(_scalar_to_xml(item) for item in op.items))
    if isinstance(op, NullTest):
        return element("test-for-null", (_row_to_xml(op.row),))
    raise TypeError(f"cannot encode predicate {op!r}")


def _sel_item_to_xml(item: SelItem) -> XmlNode:
    value = item.value
    children: list[XmlNode]
    if isinstance(value, SelColumn):
        children = []
        if value.rangevar:
            children.append(_pcdata("rangevar", value.rangevar))
        children.append(_pcdata("column", value.name))
    elif isinstance(value, SelWildcard):
        children = [_pcdata("rangevar", value.rangevar), element("wildcard")]
    elif isinstance(value, Aggregate):
        children = [_aggregate_to_xml(value)]
    else:
        children = [_scalar_to_xml(value)]
    if item.alias:
        children.append(_pcdata("alias", item.alias))
    return element("sel-item", children)


def _query_to_xml(tree: QueryTree) -> XmlNode:
    if isinstance(tree, SetOp):
        children = [_query_to_xml(tree.left)]
        if tree.all:
            children.append(element("all"))
        children.append(_query_to_xml(tree.right))
        return element("query", (element(tree.kind, children),))
    select_children: list[XmlNode] = []
    if tree.select.quantifier:
        select_children.append(element(tree.select.quantifier))
    if tree.select.items is None:
        select_children.append(element("wildcard"))
    else:
        select_children.extend(_sel_item_to_xml(item) for item in tree.select.items)
    children = [element("select", select_children)]
    from_children = []
    for item in tree.from_items:
        if not isinstance(item, TableRef):
            raise TypeError(f"cannot encode from-item {item!r}")
        ref_children: list[XmlNode] = []
        if isinstance(item.source, str):
            ref_children.append(_pcdata("table", item.source))
        else:
            ref_children.append(_query_to_xml(item.source))
        if item.alias:
            ref_children.append(_pcdata("alias", item.alias))
        from_children.append(element("table-ref", ref_children))
    children.append(element("from", from_children))
    if tree.where is not None:
        children.append(element("where", (_cond_to_xml(tree.where),)))
    if tree.group_by:
        children.append(element("group-by",
                                tuple(_column_ref_to_xml(ref) for ref in tree.group_by)))
    if tree.having is not None:
        children.append(element("having", (_cond_to_xml(tree.having),)))
    return element("query", children)


def to_xml(tree: QueryTree) -> XmlDoc:
    """Encode a syntax tree as its XML document form."""
    return XmlDoc(_query_to_xml(tree))


# ---------------------------------------------------------------------------
# XML decoding
# ---------------------------------------------------------------------------

class _Decoder:
    """Strict decoder; raises InvalidSyntaxTree with the offending path."""

    def fail(self, path: str, message: str):
        raise InvalidSyntaxTree(message, path)

    def _elements(self, node: XmlNode, path: str) -> list[XmlNode]:
        out = []
        for child in node.children:
            if child.kind != "element":
                self.fail(path, f"<{node.name}> cannot contain text")
            out.append(child)
        return out

    def _pcdata(self, node: XmlNode, path: str) -> str:
        for child in node.children:
            if child.kind != "text":
                self.fail(path, f"<{node.name}> must contain only text")
        return string_value(node)

    def query(self, node: XmlNode, path: str) -> QueryTree:
        if node.name != "query":
            self.fail(path, f"expected <query>, found <{node.name}>")
        path = f"{path}/query"
        children = self._elements(node, path)
        if not children:
            self.fail(path, "<query> is empty")
        first = children[0]
        if first.name in ("union", "except", "intersect"):
            if len(children) != 1:
                self.fail(path, "set operation queries hold exactly one operator element")
            return self.set_op(first, path)
        return self.select_query(children, path)

    def set_op(self, node: XmlNode, path: str) -> SetOp:
        path = f"{path}/{node.name}"
        children = self._elements(node, path)
        names = [child.name for child in children]
        if len(children) == 2 and names == ["query", "query"]:
            return SetOp(node.name or "", False, self.query(children[0], path),
                         self.query(children[1], path))
        if len(children) == 3 and names == ["query", "all", "query"]:
            return SetOp(node.name or "", True, self.query(children[0], path),
                         self.query(children[2], path))
        self.fail(path, f"<{node.name}> must hold (query, all?, query)")

    def select_query(self, children: list[XmlNode], path: str) -> SelectQuery:
        index = 0

        def take(name: str, required: bool) -> XmlNode | None:
            nonlocal index
            if index < len(children) and children[index].name == name:
                node = children[index]
                index += 1
                return node
            if required:
                self.fail(path, f"expected <{name}>")
            return None

        select_node = take("select", required=True)
        from_node = take("from", required=True)
        where_node = take("where", required=False)
        group_node = take("group-by", required=False) or take("group_by", required=False)
        having_node = take("having", required=False)
        if index != len(children):
            self.fail(path, f"unexpected <{children[index].name}> in <query>")
        if having_node is not None and group_node is None:
            self.fail(path, "<having> requires <group-by>")

        select = self.select_clause(select_node, path)
        from_items = self.from_clause(from_node, path)
        where = self.cond(self._only(where_node, path), f"{path}/where") \
            if where_node is not None else None
        group_by = tuple(
            self.column_ref(child, f"{path}/group-by")
            for child in self._elements(group_node, f"{path}/group-by")
        ) if group_node is not None else ()
        if group_node is not None and not group_by:
            self.fail(f"{path}/group-by", "<group-by> needs at least one column-ref")
        having = self.cond(self._only(having_node, path), f"{path}/having") \
            if having_node is not None else None
        return SelectQuery(select, from_items, where, group_by, having)

    def _only(self, node: XmlNode, path: str) -> XmlNode:
        children = self._elements(node, f"{path}/{node.name}")
        if len(children) != 1:
            self.fail(f"{path}/{node.name}", f"<{node.name}> holds exactly one element")
        return children[0]

    def select_clause(self, node: XmlNode, path: str) -> SelectClause:
        path = f"{path}/select"
        children = self._elements(node, path)
        quantifier = None
        if children and children[0].name in ("all", "distinct"):
            quantifier = children[0].name
            children = children[1:]
        if not children:
            self.fail(path, "<select> needs a wildcard or sel-items")
        if children[0].name == "wildcard":
            if len(children) != 1:
                self.fail(path, "a wildcard select has no other items")
            return SelectClause(quantifier, None)
        items = tuple(self.sel_item(child, f"{path}/sel-item[{i + 1}]")
                      for i, child in enumerate(children))
        return SelectClause(quantifier, items)

    def sel_item(self, node: XmlNode, path: str) -> SelItem:
        if node.name != "sel-item":
            self.fail(path, f"expected <sel-item>, found <{node.name}>")
        children = self._elements(node, path)
        if not children:
            self.fail(path, "<sel-item> is empty")
        alias = None
        if children[-1].name == "alias":
            alias = self._pcdata(children[-1], path)
            children = children[:-1]
        if not children:
            self.fail(path, "<sel-item> needs a value")
        first = children[0]
        if first.name == "column" and len(children) == 1:
            return SelItem(SelColumn(None, self._pcdata(first, path)), alias)
        if first.name == "rangevar":
            if len(children) != 2:
                self.fail(path, "<rangevar> must pair with a column or wildcard")
            rangevar = self._pcdata(first, path)
            second = children[1]
            if second.name == "column":
                return SelItem(SelColumn(rangevar, self._pcdata(second, path)), alias)
            if second.name == "wildcard":
                return SelItem(SelWildcard(rangevar), alias)
            self.fail(path, f"unexpected <{second.name}> after <rangevar>")
        if len(children) == 1 and first.name == "scalar":
            return SelItem(self.scalar(first, path), alias)
        if len(children) == 1 and first.name == "aggregate":
            return SelItem(self.aggregate(first, path), alias)
        self.fail(path, f"unexpected <{first.name}> in <sel-item>")

    def from_clause(self, node: XmlNode, path: str) -> tuple[TableRef, ...]:
        path = f"{path}/from"
        children = self._elements(node, path)
        if not children:
            self.fail(path, "<from> needs at least one table-ref")
        return tuple(self.table_ref(child, f"{path}/table-ref[{i + 1}]")
                     for i, child in enumerate(children))

    def table_ref(self, node: XmlNode, path: str) -> TableRef:
        if node.name != "table-ref":
            self.fail(path, f"expected <table-ref>, found <{node.name}>")
        children = self._elements(node, path)
        if not children:
            self.fail(path, "<table-ref> is empty")
        alias = None
        if len(children) == 2 and children[1].name == "alias":
            alias = self._pcdata(children[1], path)
        elif len(children) != 1:
            self.fail(path, "<table-ref> holds (table | query) with an optional alias")
        first = children[0]
        if first.name == "table":
            return TableRef(self._pcdata(first, path), alias)
        if first.name == "query":
            return TableRef(self.query(first, path), alias)
        self.fail(path, f"unexpected <{first.name}> in <table-ref>")

    def column_ref(self, node: XmlNode, path: str) -> ColumnRef:
        if node.name != "column-ref":
            self.fail(path, f"expected <column-ref>, found <{node.name}>")
        path = f"{path}/column-ref"
        children = self._elements(node, path)
        if len(children) == 1 and children[0].name == "column":
            return ColumnRef(None, self._pcdata(children[0], path))
        if len(children) == 2 and children[0].name == "rangevar" \
                and children[1].name == "column":
            return ColumnRef(self._pcdata(children[0], path),
                             self._pcdata(children[1], path))
        self.fail(path, "<column-ref> holds (rangevar?, column)")

    def scalar(self, node: XmlNode, path: str) -> Scalar:
        if node.name != "scalar":
            self.fail(path, f"expected <scalar>, found <{node.name}>")
        path = f"{path}/scalar"
        children = self._elements(node, path)
        if len(children) != 1:
            self.fail(path, "<scalar> holds exactly one element")
        return self.scalar_body(children[0], path)

    def scalar_body(self, node: XmlNode, path: str) -> Scalar:
        name = node.name
        if name == "column-ref":
            return self.column_ref(node, path)
        if name == "constant":
            lexeme = self._pcdata(node, path)
            return Constant(lexeme, bool(_NUMBER_LEXEME.match(lexeme)))
        if name == "alg-exp":
            children = self._elements(node, f"{path}/alg-exp")
            if len(children) != 3 or children[1].name not in ("add", "sub", "mul", "div"):
                self.fail(f"{path}/alg-exp", "<alg-exp> holds (scalar, op, scalar)")
            return AlgExp(self.scalar(children[0], f"{path}/alg-exp"),
                          children[1].name or "",
                          self.scalar(children[2], f"{path}/alg-exp"))
        if name == "concat-exp":
            children = self._elements(node, f"{path}/concat-exp")
            if len(children) != 2:
                self.fail(f"{path}/concat-exp", "<concat-exp> holds (scalar, scalar)")
            return ConcatExp(self.scalar(children[0], f"{path}/concat-exp"),
                             self.scalar(children[1], f"{path}/concat-exp"))
        if name == "aggregate":
            return self.aggregate(node, path)
        if name == "query":
            return self.query(node, path)
        self.fail(path, f"unexpected <{name}> as a scalar")

    def aggregate(self, node: XmlNode, path: str) -> Aggregate:
        if node.name != "aggregate":
            self.fail(path, f"expected <aggregate>, found <{node.name}>")
        path = f"{path}/aggregate"
        children = self._elements(node, path)
        if not children:
            self.fail(path, "<aggregate> is empty")
        first = children[0]
        if first.name == "count-all":
            if len(children) != 1:
                self.fail(path, "<count-all> stands alone")
            return Aggregate("count-all")
        if first.name not in AGGREGATE_FUNCS:
            self.fail(path, f"unknown aggregate <{first.name}>")
        rest = children[1:]
        quantifier = None
        if rest and rest[0].name in ("all", "distinct"):
            quantifier = rest[0].name
            rest = rest[1:]
        if len(rest) != 1:
            self.fail(path, "<aggregate> needs exactly one operand")
        operand_node = rest[0]
        if operand_node.name == "scalar":
            self.fail(path, "aggregate operands are not wrapped in <scalar>")
        operand = self.scalar_body(operand_node, path)
        if isinstance(operand, Aggregate):
            self.fail(path, "aggregates cannot be nested")
        return Aggregate(first.name or "", quantifier, operand)

    def row_constr(self, node: XmlNode, path: str) -> RowConstr:
        if node.name != "rowconstr":
            self.fail(path, f"expected <rowconstr>, found <{node.name}>")
        path = f"{path}/rowconstr"
        children = self._elements(node, path)
        if not children:
            self.fail(path, "<rowconstr> is empty")
        items = []
        for child in children:
            if child.name == "column-ref":
                items.append(self.column_ref(child, path))
            elif child.name == "scalar":
                items.append(self.scalar(child, path))
            else:
                self.fail(path, f"unexpected <{child.name}> in <rowconstr>")
        return RowConstr(tuple(items))

    def _row_member(self, node: XmlNode, path: str) -> Scalar:
        if node.name == "column-ref":
            return self.column_ref(node, path)
        if node.name == "scalar":
            return self.scalar(node, path)
        self.fail(path, f"unexpected <{node.name}>; expected column-ref or scalar")

    def cond(self, node: XmlNode, path: str) -> CondExpr:
        if node.name != "cond-exp":
            self.fail(path, f"expected <cond-exp>, found <{node.name}>")
        path = f"{path}/cond-exp"
        children = self._elements(node, path)
        negated = False
        if children and children[0].name == "not":
            negated = True
            children = children[1:]
        if len(children) != 1:
            self.fail(path, "<cond-exp> holds (not?, cond-test | and | or)")
        body = children[0]
        if body.name in ("and", "or"):
            operands = self._elements(body, f"{path}/{body.name}")
            if len(operands) < 2:
                self.fail(f"{path}/{body.name}", "boolean operators need two operands")
            return CondExpr(negated, BoolOp(
                body.name, tuple(self.cond(child, f"{path}/{body.name}")
                                 for child in operands)))
        if body.name != "cond-test":
            self.fail(path, f"unexpected <{body.name}> in <cond-exp>")
        tests = self._elements(body, f"{path}/cond-test")
        if len(tests) != 1:
            self.fail(f"{path}/cond-test", "<cond-test> holds exactly one predicate")
        return CondExpr(negated, self.test(tests[0], f"{path}/cond-test"))

    def test(self, node: XmlNode, path: str) -> CondTest:
        name = node.name
        path = f"{path}/{name}"
        children = self._elements(node, path)
        if name == "comparison":
            if len(children) != 3 or children[1].name not in COMPARISON_OPS:
                self.fail(path, "<comparison> holds (rowconstr, op, rowconstr)")
            return Comparison(self.row_constr(children[0], path), children[1].name or "",
                              self.row_constr(children[2], path))
        if name == "like":
            if len(children) not in (2, 3):
                self.fail(path, "<like> holds two or three operands")
            members = [self._row_member(child, path) for child in children]
            escape = members[2] if len(members) == 3 else None
            return Like(members[0], members[1], escape)
        if name == "in":
            if len(children) == 2 and children[0].name == "rowconstr" \
                    and children[1].name == "query":
                return InQuery(self.row_constr(children[0], path),
                               self.query(children[1], path))
            if len(children) >= 2 and all(child.name == "scalar" for child in children):
                scalars = [self.scalar(child, path) for child in children]
                return InList(scalars[0], tuple(scalars[1:]))
            self.fail(path, "<in> holds (rowconstr, query) or (scalar, scalar+)")
        if name == "match":
            index = 0
            if not children or children[0].name != "rowconstr":
                self.fail(path, "<match> starts with a rowconstr")
            row = self.row_constr(children[0], path)
            index = 1
            unique = False
            if index < len(children) and children[index].name == "unique" \
                    and not children[index].children:
                unique = True
                index += 1
            partiality = None
            if index < len(children) and children[index].name in ("partial", "full"):
                partiality = children[index].name
                index += 1
            if index + 1 != len(children) or children[index].name != "query":
                self.fail(path, "<match> ends with a query")
            return MatchPred(row, unique, partiality, self.query(children[index], path))
        if name == "all-or-any":
            if len(children) < 3 or children[0].name != "rowconstr" \
                    or children[1].name not in COMPARISON_OPS:
                self.fail(path, "<all-or-any> holds (rowconstr, op, all|any?, query)")
            index = 2
            quantifier = None
            if children[index].name in ("all", "any"):
                quantifier = children[index].name
                index += 1
            if index + 1 != len(children) or children[index].name != "query":
                self.fail(path, "<all-or-any> ends with a query")
            return AllOrAny(self.row_constr(children[0], path), children[1].name or "",
                            quantifier, self.query(children[index], path))
        if name == "exists" or name == "unique":
            if len(children) != 1 or children[0].name != "query":
                self.fail(path, f"<{name}> holds exactly one query")
            query = self.query(children[0], path)
            return Exists(query) if name == "exists" else Unique(query)
        if name == "overlaps":
            if len(children) != 4 or any(child.name != "scalar" for child in children):
                self.fail(path, "<overlaps> holds four scalars")
            scalars = tuple(self.scalar(child, path) for child in children)
            return Overlaps(scalars)  # type: ignore[arg-type]
        if name == "test-for-null":
            if len(children) != 1:
                self.fail(path, "<test-for-null> holds one rowconstr")
            return NullTest(self.row_constr(children[0], path))
        self.fail(path, f"unknown predicate <{name}>")


def from_xml(doc: XmlDoc) -> QueryTree:
    """Decode a syntax-tree document; raises InvalidSyntaxTree on violations."""
    return _Decoder().query(doc.root, "")


# Content models for the structural validator, as regexes over child-name
# sequences (each child name is matched with a trailing comma).
def _alt(*names: str) -> str:
    return "(" + "|".join(f"(?:{name},)" for name in names) + ")"


_OPERAND_MODEL = _alt("alg-exp", "concat-exp", "column-ref", "constant", "query")
_ROW_MEMBER = _alt("column-ref", "scalar")
_COMPARE_OP = _alt(*COMPARISON_OPS)

_PCDATA_ELEMENTS = frozenset(
    ("rangevar", "column", "constant", "alias", "table")
)
_EMPTY_ELEMENTS = frozenset(
    ("all", "distinct", "wildcard", "count-all", "avg", "count", "max", "min",
     "sum", "add", "sub", "mul", "div", "not", "eq", "lt", "let", "gt", "get",
     "neq", "partial", "full", "any")
)
_CONTENT_MODELS = {
    "query": (r"(?:select,from," r"(?:where,)?(?:(?:group-by|group_by),)?(?:having,)?"
              r")|" + _alt("union", "except", "intersect")),
    "select": _alt("all", "distinct") + "?" + r"(?:(?:wildcard,)|(?:sel-item,)+)",
    "sel-item": (r"(?:(?:column,)|(?:rangevar,(?:(?:column,)|(?:wildcard,)))"
                 r"|(?:scalar,)|(?:aggregate,))(?:alias,)?"),
    "column-ref": r"(?:rangevar,)?column,",
    "scalar": _alt("alg-exp", "concat-exp", "column-ref", "aggregate", "constant", "query"),
    "aggregate": (r"(?:count-all,)|(?:" + _alt(*AGGREGATE_FUNCS)
                  + _alt("all", "distinct") + "?" + _OPERAND_MODEL + ")"),
    "alg-exp": r"scalar," + _alt("add", "sub", "mul", "div") + r"scalar,",
    "concat-exp": r"scalar,scalar,",
    "from": r"(?:table-ref,)+",
    "table-ref": _alt("table", "query") + r"(?:alias,)?",
    "where": r"cond-exp,",
    "cond-exp": r"(?:not,)?" + _alt("cond-test", "and", "or"),
    "cond-test": _alt("comparison", "like", "in", "match", "all-or-any",
                      "exists", "unique", "overlaps", "test-for-null"),
    "and": r"cond-exp,(?:cond-exp,)+",
    "or": r"cond-exp,(?:cond-exp,)+",
    "rowconstr": _ROW_MEMBER + "+",
    "comparison": r"rowconstr," + _COMPARE_OP + r"rowconstr,",
    "like": _ROW_MEMBER + r"{2,3}",
    "in": r"(?:rowconstr,query,)|(?:(?:scalar,){2,})",
    "match": r"rowconstr,(?:unique,)?" + _alt("partial", "full") + r"?query,",
    "all-or-any": r"rowconstr," + _COMPARE_OP + _alt("all", "any") + r"?query,",
    "exists": r"query,",
    "unique": r"(?:query,)?",  # empty only as the flag inside <match>
    "overlaps": r"(?:scalar,){4}",
    "test-for-null": r"rowconstr,",
    "group-by": r"(?:column-ref,)+",
    "group_by": r"(?:column-ref,)+",
    "having": r"cond-exp,",
    "union": r"query,(?:all,)?query,",
    "except": r"query,(?:all,)?query,",
    "intersect": r"query,(?:all,)?query,",
}
_COMPILED_MODELS = {name: re.compile(pattern + r"\Z")
                    for name, pattern in _CONTENT_MODELS.items()}


def _check_element(node: XmlNode, path: str, diagnostics: list[str]):
    name = node.name or ""
    path = f"{path}/{name}"
    element_children = [child for child in node.children if child.kind == "element"]
    has_text = any(child.kind == "text" for child in node.children)
    if name in _PCDATA_ELEMENTS:
        if element_children:
            diagnostics.append(f"{path}: expected character data only")
    elif name in _EMPTY_ELEMENTS:
        if node.children:
            diagnostics.append(f"{path}: element must be empty")
    elif name in _COMPILED_MODELS:
        if has_text:
            diagnostics.append(f"{path}: unexpected character data")
        sequence = "".join(f"{child.name}," for child in element_children)
        if not _COMPILED_MODELS[name].match(sequence):
            found = ", ".join(child.name or "" for child in element_children) or "nothing"
            diagnostics.append(f"{path}: invalid content ({found})")
    else:
        diagnostics.append(f"{path}: unknown element <{name}>")
        return
    for child in element_children:
        _check_element(child, path, diagnostics)


def validate_tree(doc: XmlDoc) -> tuple[bool, list[str]]:
    """Check whether a document decodes, listing every content-model violation."""
    diagnostics: list[str] = []
    if doc.root.name != "query":
        diagnostics.append(f"/{doc.root.name}: root element must be <query>")
    else:
        _check_element(doc.root, "", diagnostics)
    decodes = True
    try:
        from_xml(doc)
    except InvalidSyntaxTree as exc:
        decodes = False
        if not diagnostics:
            diagnostics.append(str(exc))
    return decodes, diagnostics

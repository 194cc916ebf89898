"""In-memory relational evaluator with bag semantics.

Executes syntax trees against a catalog: comma cross-products with
left-to-right visibility of earlier range variables, three-valued logic,
grouping and the standard aggregates, subqueries, and set operations. Values
are Python natives: ``None`` for Null, ``float`` for numbers, ``str`` for
strings, and :class:`~metasql.xml_tree.XmlDoc` for documents (which group and
compare by canonical form).

Plans produced by the meta-query compiler extend the base trees with three
node kinds executed through an :class:`Extensions` object: lateral
table-function items, scalar function calls, and the document-combining
aggregate. The base engine stays ignorant of what those do.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .errors import (
    AmbiguousColumn,
    CardinalityError,
    DivisionByZero,
    MissingColumn,
    TypeMismatch,
    UnknownColumn,
    UnknownTable,
    UnsupportedFeature,
)
from .sql_syntax import (
    Aggregate,
    AlgExp,
    AllOrAny,
    BoolOp,
    ColumnRef,
    Comparison,
    ConcatExp,
    CondExpr,
    Constant,
    Exists,
    InList,
    InQuery,
    Like,
    MatchPred,
    NullTest,
    Overlaps,
    QueryTree,
    RowConstr,
    SelColumn,
    SelectQuery,
    SelItem,
    SelWildcard,
    SetOp,
    TableRef,
    Unique,
)
from .xml_tree import XmlDoc, canonical_equal, serialize_xml
from .xpath import format_number

COLUMN_TYPES = ("string", "number", "xml")


# ---------------------------------------------------------------------------
# Values and tables
# ---------------------------------------------------------------------------

Value = object  # None | float | str | XmlDoc


def value_type(value: Value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        raise TypeMismatch("booleans are not column values")
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, XmlDoc):
        return "xml"
    raise TypeMismatch(f"not a column value: {value!r}")


def canonical_key(value: Value):
    """Hashable key under which equal values (incl. documents) collide."""
    kind = value_type(value)
    if kind == "null":
        return ("null",)
    if kind == "xml":
        return ("xml", serialize_xml(value))
    if kind == "number":
        return ("number", float(value))
    return ("string", value)


def row_key(row: tuple) -> tuple:
    return tuple(canonical_key(value) for value in row)


def format_value(value: Value) -> str:
    """Render one value as text (Null handled by callers)."""
    kind = value_type(value)
    if kind == "number":
        return format_number(float(value))
    if kind == "xml":
        return serialize_xml(value)
    return str(value)


@dataclass
class Table:
    """A bag of rows under an ordered, typed column list."""

    columns: list[tuple[str, str]]
    rows: list[tuple]

    def __post_init__(self):
        for name, kind in self.columns:
            if kind not in COLUMN_TYPES:
                raise TypeMismatch(f"unknown column type {kind!r} for {name!r}")
        for row in self.rows:
            if len(row) != len(self.columns):
                raise TypeMismatch("row arity does not match the column list")

    @property
    def column_names(self) -> list[str]:
        return [name for name, _ in self.columns]


class Catalog:
    """Named tables; lookup is case-insensitive, display names preserved."""

    def __init__(self, tables: dict[str, Table] | None = None):
        self._tables: dict[str, tuple[str, Table]] = {}
        for name, table in (tables or {}).items():
            self.set(name, table)

    def set(self, name: str, table: Table):
        self._tables[name.lower()] = (name, table)

    def get(self, name: str) -> Table:
        entry = self._tables.get(name.lower())
        if entry is None:
            raise UnknownTable(f"unknown table {name!r}")
        return entry[1]

    def __contains__(self, name: str) -> bool:
        return name.lower() in self._tables

    def names(self) -> list[str]:
        return sorted(display for display, _ in self._tables.values())

    def items(self) -> list[tuple[str, Table]]:
        return [self._tables[key] for key in sorted(self._tables)]


# ---------------------------------------------------------------------------
# Plan extension nodes and hooks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TableFuncItem:
    """Lateral from-item backed by a set-valued built-in."""

    kind: str  # extract | ueval | eval
    args: tuple
    static: tuple
    var: str


@dataclass(frozen=True)
class ScalarCall:
    """Call of a declared transform function inside an expression."""

    name: str
    args: tuple


@dataclass(frozen=True)
class CmbAgg:
    """Document-combining aggregate over grouped xml values."""

    operand: object


@dataclass(frozen=True)
class SubqueryArg:
    """Scalar subquery as a function argument: exactly one row required."""

    query: object


class Extensions:
    """Execution hooks for plan nodes outside the base subset."""

    def table_function(self, kind: str, static: tuple, args: tuple) -> Table:
        raise UnsupportedFeature(f"no handler for table function {kind!r}")

    def call(self, name: str, args: tuple) -> Value:
        raise UnsupportedFeature(f"no handler for function {name!r}")

    def return_type(self, name: str) -> str:
        return "string"

    def combine(self, values: list) -> Value:
        raise UnsupportedFeature("no handler for the combining aggregate")

    def table_function_schema(self, kind: str, static: tuple) -> list[tuple[str, str]]:
        if kind in ("extract", "ueval"):
            return [("result", "xml")]
        if kind == "eval":
            scheme = static[0] if static else None
            if scheme is None:
                raise UnsupportedFeature("typed evaluation lacks an output scheme")
            return [(name, "string") for name in scheme]
        raise UnsupportedFeature(f"unknown table function {kind!r}")


# ---------------------------------------------------------------------------
# Environments
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class _Frame:
    var: str | None
    columns: list[str]
    types: list[str]
    row: tuple | None = None

    def index_of(self, name: str) -> int | None:
        try:
            return self.columns.index(name)
        except ValueError:
            return None


class _Env:
    """Range-variable scope chain; frames fill with rows during iteration."""

    def __init__(self, parent: "_Env | None" = None):
        self.frames: list[_Frame] = []
        self.parent = parent

    def resolve(self, rangevar: str | None, name: str) -> tuple["_Env", _Frame, int]:
        env: _Env | None = self
        while env is not None:
            hits = []
            for frame in env.frames:
                if rangevar is not None:
                    if frame.var == rangevar:
                        index = frame.index_of(name)
                        if index is None:
                            raise UnknownColumn(
                                f"range variable {rangevar!r} has no column {name!r}"
                            )
                        hits.append((frame, index))
                else:
                    index = frame.index_of(name)
                    if index is not None:
                        hits.append((frame, index))
            if len(hits) > 1:
                raise AmbiguousColumn(f"column reference {name!r} is ambiguous")
            if hits:
                return env, hits[0][0], hits[0][1]
            env = env.parent
        target = f"{rangevar}.{name}" if rangevar else name
        raise UnknownColumn(f"cannot resolve column reference {target!r}")


@dataclass
class _GroupCtx:
    """Evaluation context for one group of a grouped query."""

    owner: _Env
    key_slots: dict[tuple[int, int], int]
    key_values: tuple
    members: list[tuple]


# ---------------------------------------------------------------------------
# Executor
# ---------------------------------------------------------------------------

class _Executor:
    def __init__(self, catalog: Catalog, extensions: Extensions | None):
        self.catalog = catalog
        self.extensions = extensions or Extensions()

    # -- entry -------------------------------------------------------------------

    def execute(self, tree: QueryTree, outer: _Env | None) -> Table:
        if isinstance(tree, SetOp):
            return self._set_op(tree, outer)
        return self._select(tree, outer)

    # -- set operations ------------------------------------------------------------

    def _set_op(self, tree: SetOp, outer: _Env | None) -> Table:
        left = self.execute(tree.left, outer)
        right = self.execute(tree.right, outer)
        if len(left.columns) != len(right.columns):
            raise TypeMismatch(
                f"{tree.kind} operands have {len(left.columns)} and "
                f"{len(right.columns)} columns"
            )
        left_keys = [row_key(row) for row in left.rows]
        right_keys = [row_key(row) for row in right.rows]
        rows: list[tuple]
        if tree.kind == "union":
            rows = left.rows + right.rows
            if not tree.all:
                rows = _dedupe(rows)
        elif tree.kind == "intersect":
            if tree.all:
                counts = _count_keys(right_keys)
                rows = []
                for row, key in zip(left.rows, left_keys):
                    if counts.get(key, 0) > 0:
                        counts[key] -= 1
                        rows.append(row)
            else:
                present = set(right_keys)
                rows = _dedupe(row for row, key in zip(left.rows, left_keys)
                               if key in present)
        else:  # except
            if tree.all:
                counts = _count_keys(right_keys)
                rows = []
                for row, key in zip(left.rows, left_keys):
                    if counts.get(key, 0) > 0:
                        counts[key] -= 1
                    else:
                        rows.append(row)
            else:
                present = set(right_keys)
                rows = _dedupe(row for row, key in zip(left.rows, left_keys)
                               if key not in present)
        return Table(list(left.columns), rows)

    # -- select queries -------------------------------------------------------------

    def _select(self, tree: SelectQuery, outer: _Env | None) -> Table:
        env = _Env(parent=outer)
        items = list(tree.from_items)
        frames = [self._frame_schema(item, env) for item in items]

        combos: list[tuple] = []

        def expand(index: int):
            if index == len(items):
                combos.append(tuple(frame.row for frame in env.frames))
                return
            frame = frames[index]
            for row in self._item_rows(items[index], env):
                frame.row = row
                expand(index + 1)
            frame.row = None

        expand(0)

        def surviving() -> Iterable[tuple]:
            for combo in combos:
                self._install(env, combo)
                if tree.where is None or self._cond(tree.where, env, None) is True:
                    yield combo

        grouped = bool(tree.group_by) or self._has_aggregates(tree)
        columns, types = self._output_schema(tree, env)
        rows: list[tuple] = []
        if not grouped:
            for combo in surviving():
                self._install(env, combo)
                rows.append(self._output_row(tree, env, None))
        else:
            key_slots: dict[tuple[int, int], int] = {}
            for slot, ref in enumerate(tree.group_by):
                owner, frame, index = env.resolve(ref.rangevar, ref.name)
                if owner is not env:
                    raise UnknownColumn(
                        f"GROUP BY column {ref.name!r} is not from this query"
                    )
                key_slots[(env.frames.index(frame), index)] = slot
            groups: dict[tuple, _GroupCtx] = {}
            order: list[tuple] = []
            for combo in surviving():
                self._install(env, combo)
                key_values = tuple(
                    self._scalar(ref, env, None) for ref in tree.group_by
                )
                key = tuple(canonical_key(value) for value in key_values)
                ctx = groups.get(key)
                if ctx is None:
                    ctx = _GroupCtx(env, key_slots, key_values, [])
                    groups[key] = ctx
                    order.append(key)
                ctx.members.append(combo)
            if not tree.group_by and not groups:
                # aggregates over an empty, ungrouped input form one group
                ctx = _GroupCtx(env, {}, (), [])
                groups[()] = ctx
                order.append(())
            empty = tuple(None for _ in env.frames)
            for key in order:
                ctx = groups[key]
                # a representative row keeps correlated reads inside the group
                self._install(env, ctx.members[0] if ctx.members else empty)
                if tree.having is not None and self._cond(tree.having, env, ctx) is not True:
                    continue
                rows.append(self._output_row(tree, env, ctx))
        if tree.select.quantifier == "distinct":
            rows = _dedupe(rows)
        return Table(list(zip(columns, types)), rows)

    @staticmethod
    def _install(env: _Env, combo: tuple):
        for frame, row in zip(env.frames, combo):
            frame.row = row

    # -- from-clause ------------------------------------------------------------------

    def _frame_schema(self, item, env: _Env) -> _Frame:
        if isinstance(item, TableRef):
            if isinstance(item.source, str):
                table = self.catalog.get(item.source)
                var = item.alias or item.source
            else:
                table = self._schema_of(item.source, env)
                var = item.alias
            frame = _Frame(var, list(table.column_names),
                           [kind for _, kind in table.columns])
        elif isinstance(item, TableFuncItem):
            schema = self.extensions.table_function_schema(item.kind, item.static)
            frame = _Frame(item.var, [name for name, _ in schema],
                           [kind for _, kind in schema])
        else:
            raise TypeMismatch(f"cannot evaluate from-item {item!r}")
        if frame.var is not None and any(f.var == frame.var for f in env.frames):
            raise AmbiguousColumn(f"duplicate range variable {frame.var!r}")
        env.frames.append(frame)
        return frame

    def _item_rows(self, item, env: _Env) -> list[tuple]:
        if isinstance(item, TableRef):
            if isinstance(item.source, str):
                return list(self.catalog.get(item.source).rows)
            return list(self.execute(item.source, env).rows)
        if isinstance(item, TableFuncItem):
            args = tuple(self._scalar(arg, env, None) for arg in item.args)
            return list(self.extensions.table_function(item.kind, item.static, args).rows)
        raise TypeMismatch(f"cannot evaluate from-item {item!r}")

    def _schema_of(self, tree: QueryTree, outer: _Env | None) -> Table:
        """Column names and types of a query, without evaluating rows."""
        if isinstance(tree, SetOp):
            return self._schema_of(tree.left, outer)
        env = _Env(parent=outer)
        for item in tree.from_items:
            self._frame_schema(item, env)
        columns, types = self._output_schema(tree, env)
        return Table(list(zip(columns, types)), [])

    # -- output schema ------------------------------------------------------------------

    def _output_schema(self, tree: SelectQuery, env: _Env) -> tuple[list[str], list[str]]:
        names: list[str] = []
        types: list[str] = []

        def add(name: str | None, kind: str):
            names.append(name if name else f"col{len(names) + 1}")
            types.append(kind)

        if tree.select.items is None:
            for frame in env.frames:
                for name, kind in zip(frame.columns, frame.types):
                    add(name, kind)
            return names, types
        for item in tree.select.items:
            value = item.value
            if isinstance(value, SelWildcard):
                frame = self._find_frame(env, value.rangevar)
                for name, kind in zip(frame.columns, frame.types):
                    add(name, kind)
                continue
            if isinstance(value, SelColumn):
                _, frame, index = env.resolve(value.rangevar, value.name)
                add(item.alias or value.name, frame.types[index])
            else:
                add(item.alias, self._static_type(value, env))
        return names, types

    def _find_frame(self, env: _Env, rangevar: str) -> _Frame:
        scope: _Env | None = env
        while scope is not None:
            for frame in scope.frames:
                if frame.var == rangevar:
                    return frame
            scope = scope.parent
        raise UnknownColumn(f"unknown range variable {rangevar!r}")

    def _static_type(self, value, env: _Env) -> str:
        if isinstance(value, ColumnRef):
            _, frame, index = env.resolve(value.rangevar, value.name)
            return frame.types[index]
        if isinstance(value, Constant):
            return "number" if value.is_number else "string"
        if isinstance(value, AlgExp):
            return "number"
        if isinstance(value, ConcatExp):
            return "string"
        if isinstance(value, Aggregate):
            if value.func in ("count-all", "count", "avg", "sum"):
                return "number"
            return self._static_type(value.operand, env)
        if isinstance(value, ScalarCall):
            return self.extensions.return_type(value.name)
        if isinstance(value, CmbAgg):
            return "xml"
        if isinstance(value, SubqueryArg):
            return self._subquery_type(value.query, env)
        if isinstance(value, (SelectQuery, SetOp)):
            return self._subquery_type(value, env)
        raise TypeMismatch(f"cannot type expression {value!r}")

    def _subquery_type(self, tree: QueryTree, env: _Env) -> str:
        schema = self._schema_of(tree, env)
        if len(schema.columns) != 1:
            raise CardinalityError("a scalar subquery must produce one column")
        return schema.columns[0][1]

    # -- output rows -----------------------------------------------------------------------

    def _output_row(self, tree: SelectQuery, env: _Env, group: _GroupCtx | None) -> tuple:
        values: list[Value] = []
        if tree.select.items is None:
            if group is not None:
                raise TypeMismatch("a wildcard select cannot be grouped")
            for frame in env.frames:
                values.extend(frame.row or ())
            return tuple(values)
        for item in tree.select.items:
            value = item.value
            if isinstance(value, SelWildcard):
                if group is not None:
                    raise TypeMismatch("a wildcard select cannot be grouped")
                frame = self._find_frame(env, value.rangevar)
                values.extend(frame.row or ())
            elif isinstance(value, SelColumn):
                values.append(self._scalar(ColumnRef(value.rangevar, value.name),
                                           env, group))
            else:
                values.append(self._scalar(value, env, group))
        return tuple(values)

    # -- scalar evaluation --------------------------------------------------------------------

    def _scalar(self, value, env: _Env, group: _GroupCtx | None) -> Value:
        if isinstance(value, ColumnRef):
            owner, frame, index = env.resolve(value.rangevar, value.name)
            if group is not None and owner is group.owner:
                slot = group.key_slots.get((owner.frames.index(frame), index))
                if slot is None:
                    raise TypeMismatch(
                        f"column {value.name!r} must appear in GROUP BY or an aggregate"
                    )
                return group.key_values[slot]
            if frame.row is None:
                raise UnknownColumn(f"no current row for {value.name!r}")
            return frame.row[index]
        if isinstance(value, Constant):
            return float(value.lexeme) if value.is_number else value.lexeme
        if isinstance(value, AlgExp):
            left = self._number_operand(value.left, env, group)
            right = self._number_operand(value.right, env, group)
            if left is None or right is None:
                return None
            if value.op == "add":
                return left + right
            if value.op == "sub":
                return left - right
            if value.op == "mul":
                return left * right
            if right == 0:
                raise DivisionByZero("division by zero")
            return left / right
        if isinstance(value, ConcatExp):
            left = self._scalar(value.left, env, group)
            right = self._scalar(value.right, env, group)
            if left is None or right is None:
                return None
            if not isinstance(left, str) or not isinstance(right, str):
                raise TypeMismatch("|| concatenates strings")
            return left + right
        if isinstance(value, Aggregate):
            return self._aggregate(value, env, group)
        if isinstance(value, CmbAgg):
            return self._cmb_aggregate(value, env, group)
        if isinstance(value, ScalarCall):
            args = tuple(self._scalar(arg, env, group) for arg in value.args)
            return self.extensions.call(value.name, args)
        if isinstance(value, SubqueryArg):
            table = self.execute(value.query, env)
            if len(table.columns) != 1:
                raise CardinalityError("a subquery argument must produce one column")
            if len(table.rows) != 1:
                raise CardinalityError(
                    f"a subquery argument must produce exactly one row, got {len(table.rows)}"
                )
            return table.rows[0][0]
        if isinstance(value, (SelectQuery, SetOp)):
            table = self.execute(value, env)
            if len(table.columns) != 1:
                raise CardinalityError("a scalar subquery must produce one column")
            if not table.rows:
                return None
            if len(table.rows) > 1:
                raise CardinalityError("a scalar subquery produced more than one row")
            return table.rows[0][0]
        raise TypeMismatch(f"cannot evaluate expression {value!r}")

    def _number_operand(self, value, env: _Env, group: _GroupCtx | None) -> float | None:
        result = self._scalar(value, env, group)
        if result is None:
            return None
        if not isinstance(result, (int, float)) or isinstance(result, bool):
            raise TypeMismatch("arithmetic needs numeric operands")
        return float(result)

    # -- aggregates ------------------------------------------------------------------------------

    def _group_operand_values(self, operand, env: _Env, group: _GroupCtx) -> list[Value]:
        saved = tuple(frame.row for frame in env.frames)
        values = []
        try:
            for combo in group.members:
                self._install(env, combo)
                values.append(self._scalar(operand, env, None))
        finally:
            self._install(env, saved)
        return values

    def _aggregate(self, agg: Aggregate, env: _Env, group: _GroupCtx | None) -> Value:
        if group is None:
            raise TypeMismatch("aggregates need a grouped context")
        if agg.func == "count-all":
            return float(len(group.members))
        values = [value for value in
                  self._group_operand_values(agg.operand, env, group)
                  if value is not None]
        if agg.quantifier == "distinct":
            values = _dedupe_values(values)
        if agg.func == "count":
            return float(len(values))
        if not values:
            return None
        if agg.func in ("avg", "sum"):
            numbers = []
            for value in values:
                if not isinstance(value, (int, float)) or isinstance(value, bool):
                    raise TypeMismatch(f"{agg.func} needs numeric input")
                numbers.append(float(value))
            total = sum(numbers)
            return total / len(numbers) if agg.func == "avg" else total
        kinds = {value_type(value) for value in values}
        if kinds - {"number", "string"} or len(kinds) > 1:
            raise TypeMismatch(f"{agg.func} needs all-numeric or all-string input")
        return max(values) if agg.func == "max" else min(values)

    def _cmb_aggregate(self, agg: CmbAgg, env: _Env, group: _GroupCtx | None) -> Value:
        if group is None:
            raise TypeMismatch("the combining aggregate needs a grouped context")
        values = []
        for value in self._group_operand_values(agg.operand, env, group):
            if value is None:
                continue
            if not isinstance(value, XmlDoc):
                raise TypeMismatch("the combining aggregate takes xml values")
            values.append(value)
        return self.extensions.combine(values)

    def _has_aggregates(self, tree: SelectQuery) -> bool:
        found = False

        def walk_scalar(value):
            nonlocal found
            if found or value is None:
                return
            if isinstance(value, (Aggregate, CmbAgg)):
                found = True
            elif isinstance(value, AlgExp):
                walk_scalar(value.left)
                walk_scalar(value.right)
            elif isinstance(value, ConcatExp):
                walk_scalar(value.left)
                walk_scalar(value.right)
            elif isinstance(value, ScalarCall):
                for arg in value.args:
                    walk_scalar(arg)

        if tree.select.items:
            for item in tree.select.items:
                if not isinstance(item.value, (SelColumn, SelWildcard)):
                    walk_scalar(item.value)
        if tree.having is not None:
            found = True
        return found

    # -- conditions ---------------------------------------------------------------------------------

    def _cond(self, cond: CondExpr, env: _Env, group: _GroupCtx | None) -> bool | None:
        result = self._cond_op(cond.op, env, group)
        if cond.negated:
            return None if result is None else not result
        return result

    def _cond_op(self, op, env: _Env, group: _GroupCtx | None) -> bool | None:
        if isinstance(op, BoolOp):
            results = [self._cond(child, env, group) for child in op.operands]
            if op.kind == "and":
                if any(result is False for result in results):
                    return False
                return None if any(result is None for result in results) else True
            if any(result is True for result in results):
                return True
            return None if any(result is None for result in results) else False
        if isinstance(op, Comparison):
            left = self._row_values(op.left, env, group)
            right = self._row_values(op.right, env, group)
            return self._compare_rows(left, op.op, right)
        if isinstance(op, Like):
            return self._like(op, env, group)
        if isinstance(op, InQuery):
            left = self._row_values(op.row, env, group)
            table = self.execute(op.query, env)
            return self._quantified(left, "eq", "any", table)
        if isinstance(op, InList):
            left = self._scalar(op.scalar, env, group)
            result: bool | None = False
            for candidate in op.values:
                equal = self._equal(left, self._scalar(candidate, env, group))
                if equal is True:
                    return True
                if equal is None:
                    result = None
            return result
        if isinstance(op, AllOrAny):
            left = self._row_values(op.row, env, group)
            table = self.execute(op.query, env)
            return self._quantified(left, op.op, op.quantifier or "any", table)
        if isinstance(op, Exists):
            return bool(self.execute(op.query, env).rows)
        if isinstance(op, Unique):
            table = self.execute(op.query, env)
            keys: set[tuple] = set()
            for row in table.rows:
                if any(value is None for value in row):
                    continue
                key = row_key(row)
                if key in keys:
                    return False
                keys.add(key)
            return True
        if isinstance(op, NullTest):
            values = self._row_values(op.row, env, group)
            return all(value is None for value in values)
        if isinstance(op, (MatchPred, Overlaps)):
            name = "match" if isinstance(op, MatchPred) else "overlaps"
            raise UnsupportedFeature(f"the {name} predicate is not executable")
        raise TypeMismatch(f"cannot evaluate condition {op!r}")

    def _row_values(self, row: RowConstr, env: _Env, group: _GroupCtx | None) -> list[Value]:
        return [self._scalar(item, env, group) for item in row.items]

    def _like(self, op: Like, env: _Env, group: _GroupCtx | None) -> bool | None:
        target = self._scalar(op.target, env, group)
        pattern = self._scalar(op.pattern, env, group)
        escape = self._scalar(op.escape, env, group) if op.escape is not None else None
        if target is None or pattern is None:
            return None
        if not isinstance(target, str) or not isinstance(pattern, str):
            raise TypeMismatch("LIKE compares strings")
        if op.escape is not None:
            if escape is None:
                return None
            if not isinstance(escape, str) or len(escape) != 1:
                raise TypeMismatch("the LIKE escape must be a single character")
        return _like_match(target, pattern, escape)

    def _quantified(self, left: list[Value], op: str, quantifier: str,
                    table: Table) -> bool | None:
        if len(table.columns) != len(left):
            raise TypeMismatch("row constructor and subquery widths differ")
        results = [self._compare_rows(left, op, list(row)) for row in table.rows]
        if quantifier == "all":
            if any(result is False for result in results):
                return False
            return None if any(result is None for result in results) else True
        if any(result is True for result in results):
            return True
        return None if any(result is None for result in results) else False

    def _equal(self, a: Value, b: Value) -> bool | None:
        if a is None or b is None:
            return None
        kind_a, kind_b = value_type(a), value_type(b)
        if kind_a != kind_b:
            raise TypeMismatch(f"cannot compare {kind_a} with {kind_b}")
        if kind_a == "xml":
            return canonical_equal(a, b)
        return a == b

    def _order(self, a: Value, b: Value) -> int | None:
        if a is None or b is None:
            return None
        kind_a, kind_b = value_type(a), value_type(b)
        if kind_a != kind_b:
            raise TypeMismatch(f"cannot compare {kind_a} with {kind_b}")
        if kind_a == "xml":
            raise TypeMismatch("documents have no order, only equality")
        if a == b:
            return 0
        return -1 if a < b else 1

    def _compare_rows(self, left: list[Value], op: str, right: list[Value]) -> bool | None:
        if len(left) != len(right):
            raise TypeMismatch("row constructors have different widths")
        if op == "eq" or op == "neq":
            result: bool | None = True
            for a, b in zip(left, right):
                equal = self._equal(a, b)
                if equal is False:
                    result = False
                    break
                if equal is None:
                    result = None
            if op == "neq":
                return None if result is None else not result
            return result
        strict = op in ("lt", "gt")
        for a, b in zip(left, right):
            order = self._order(a, b)
            if order is None:
                return None
            if order != 0:
                if op in ("lt", "let"):
                    return order < 0
                return order > 0
        return not strict


def _count_keys(keys: list[tuple]) -> dict[tuple, int]:
    counts: dict[tuple, int] = {}
    for key in keys:
        counts[key] = counts.get(key, 0) + 1
    return counts


def _dedupe(rows: Iterable[tuple]) -> list[tuple]:
    seen: set[tuple] = set()
    out: list[tuple] = []
    for row in rows:
        key = row_key(row)
        if key not in seen:
            seen.add(key)
            out.append(row)
    return out


def _dedupe_values(values: list[Value]) -> list[Value]:
    seen: set[tuple] = set()
    out: list[Value] = []
    for value in values:
        key = canonical_key(value)
        if key not in seen:
            seen.add(key)
            out.append(value)
    return out


def _like_match(target: str, pattern: str, escape: str | None) -> bool:
    regex: list[str] = []
    i = 0
    while i < len(pattern):
        ch = pattern[i]
        if escape is not None and ch == escape:
            if i + 1 >= len(pattern):
                raise TypeMismatch("LIKE pattern ends with the escape character")
            regex.append(re.escape(pattern[i + 1]))
            i += 2
            continue
        if ch == "%":
            regex.append(".*")
        elif ch == "_":
            regex.append(".")
        else:
            regex.append(re.escape(ch))
        i += 1
    return re.fullmatch("".join(regex), target, re.DOTALL) is not None


# ---------------------------------------------------------------------------
# Public surface
# ---------------------------------------------------------------------------

def execute(
    tree: QueryTree,
    catalog: Catalog,
    outer_env: _Env | None = None,
    extensions: Extensions | None = None,
) -> Table:
    """Evaluate a query (or compiled plan) against the catalog."""
    return _Executor(catalog, extensions).execute(tree, outer_env)


def project(table: Table, scheme: Iterable[str]) -> Table:
    """Bag projection onto named columns, reordered to the scheme."""
    indexes: list[int] = []
    columns: list[tuple[str, str]] = []
    names = table.column_names
    for name in scheme:
        try:
            index = names.index(name)
        except ValueError:
            raise MissingColumn(name) from None
        indexes.append(index)
        columns.append(table.columns[index])
    rows = [tuple(row[index] for index in indexes) for row in table.rows]
    return Table(columns, rows)

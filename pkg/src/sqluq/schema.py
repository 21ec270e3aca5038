"""Database schema loading, indexing, and scope resolution.

Schemas ground the consistency features: does an identifier exist, is a
qualifier visible in scope, could an unqualified column be ambiguous,
and what coarse data type does a column carry.  Unknown tables and
columns never raise during featurization; they surface as zeroed
validity features, which is exactly the signal the classifier needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from sqluq.ast_core import AliasMap, NodeIndex, NodeKind, SqlNode, build_index


class DataType(Enum):
    NUMERIC = "NUMERIC"
    TEXT = "TEXT"
    DATE = "DATE"
    BOOL = "BOOL"
    OTHER = "OTHER"


# Raw SQL type names coarsened into the five buckets.
_TYPE_SYNONYMS = {
    "int": DataType.NUMERIC, "integer": DataType.NUMERIC, "bigint": DataType.NUMERIC,
    "smallint": DataType.NUMERIC, "tinyint": DataType.NUMERIC, "real": DataType.NUMERIC,
    "float": DataType.NUMERIC, "double": DataType.NUMERIC, "decimal": DataType.NUMERIC,
    "numeric": DataType.NUMERIC, "number": DataType.NUMERIC,
    "text": DataType.TEXT, "varchar": DataType.TEXT, "char": DataType.TEXT,
    "string": DataType.TEXT, "clob": DataType.TEXT, "nvarchar": DataType.TEXT,
    "date": DataType.DATE, "datetime": DataType.DATE, "timestamp": DataType.DATE,
    "time": DataType.DATE,
    "bool": DataType.BOOL, "boolean": DataType.BOOL,
}


def coarsen_type(raw: str) -> DataType:
    """Map a raw SQL type name onto the coarse bucket used by features."""
    name = raw.strip().casefold()
    if "(" in name:
        name = name[: name.index("(")].strip()
    try:
        return DataType[name.upper()]
    except KeyError:
        pass
    return _TYPE_SYNONYMS.get(name, DataType.OTHER)


class SchemaFormatError(Exception):
    """Schema file violates the documented format; carries field context."""


@dataclass(frozen=True)
class ColumnDef:
    name: str
    data_type: DataType


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: tuple[ColumnDef, ...]


@dataclass
class Schema:
    """Immutable schema with case-folded lookup indexes."""

    db_id: str
    tables: tuple[TableDef, ...]
    _table_index: dict[str, TableDef] = field(init=False, repr=False)
    _column_tables: dict[str, set[str]] = field(init=False, repr=False)

    def __post_init__(self):
        self._table_index = {}
        self._column_tables = {}
        for table in self.tables:
            key = table.name.casefold()
            if key in self._table_index:
                raise SchemaFormatError(f"duplicate table name {table.name!r}")
            self._table_index[key] = table
            seen = set()
            for col in table.columns:
                ckey = col.name.casefold()
                if ckey in seen:
                    raise SchemaFormatError(
                        f"duplicate column {col.name!r} in table {table.name!r}"
                    )
                seen.add(ckey)
                self._column_tables.setdefault(ckey, set()).add(key)

    def has_table(self, name: str) -> bool:
        return name.casefold() in self._table_index

    def table(self, name: str) -> TableDef | None:
        return self._table_index.get(name.casefold())

    def has_column(self, name: str, table: str | None = None) -> bool:
        ckey = name.casefold()
        if table is None:
            return ckey in self._column_tables
        return table.casefold() in self._column_tables.get(ckey, ())

    def column_type(self, table: str, column: str) -> DataType | None:
        tdef = self.table(table)
        if tdef is None:
            return None
        ckey = column.casefold()
        for col in tdef.columns:
            if col.name.casefold() == ckey:
                return col.data_type
        return None

    def tables_with_column(self, name: str) -> set[str]:
        return set(self._column_tables.get(name.casefold(), ()))

    def identifier_names(self) -> list[str]:
        """Every table and column name, case-folded, sorted, deduplicated."""
        names = {t.name.casefold() for t in self.tables}
        for t in self.tables:
            names.update(c.name.casefold() for c in t.columns)
        return sorted(names)


def load_schema(path: str | Path) -> Schema:
    """Read a schema file: {"db_id": ..., "tables": [{"name", "columns"}]}."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaFormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict) or "tables" not in raw:
        raise SchemaFormatError(f"{path}: expected an object with a 'tables' field")
    db_id = raw.get("db_id", path.stem)
    tables = []
    for ti, tdoc in enumerate(raw["tables"]):
        if not isinstance(tdoc, dict) or "name" not in tdoc:
            raise SchemaFormatError(f"{path}: tables[{ti}] missing 'name'")
        columns = []
        for ci, cdoc in enumerate(tdoc.get("columns", [])):
            if not isinstance(cdoc, dict) or "name" not in cdoc:
                raise SchemaFormatError(
                    f"{path}: tables[{ti}].columns[{ci}] missing 'name'"
                )
            columns.append(
                ColumnDef(name=cdoc["name"], data_type=coarsen_type(str(cdoc.get("type", "other"))))
            )
        tables.append(TableDef(name=tdoc["name"], columns=tuple(columns)))
    return Schema(db_id=db_id, tables=tuple(tables))


@dataclass
class ScopeFrame:
    """Base tables visible to one node, innermost query level first.

    Tables that do not exist in the schema are kept but flagged unknown.
    """

    tables: tuple[tuple[str, bool], ...]  # (name, known-in-schema)
    aliases: AliasMap

    def table_names(self) -> list[str]:
        return [name for name, _ in self.tables]

    def known_tables(self) -> list[str]:
        return [name for name, known in self.tables if known]

    def has_unknown(self) -> bool:
        return any(not known for _, known in self.tables)


def _query_level_tables(select_node: SqlNode) -> list[str]:
    """Table names in this SELECT's FROM/JOIN, not descending into subqueries."""
    names: list[str] = []

    def visit(node: SqlNode, inside_from: bool):
        if node.kind is NodeKind.SELECT and node is not select_node:
            return  # nested query level
        for child in node.children:
            if child.kind is NodeKind.TABLE and inside_from:
                names.append(child.content)
            visit(child, inside_from or child.kind is NodeKind.FROM)

    visit(select_node, False)
    return names


def resolve_scope(
    tree: SqlNode,
    node: SqlNode,
    aliases: AliasMap,
    schema: Schema,
    index: NodeIndex | None = None,
) -> ScopeFrame:
    """Tables visible to `node`: its query level plus enclosing levels."""
    if index is None:
        index = build_index(tree)
    levels: list[SqlNode] = []
    cur: SqlNode | None = node
    while cur is not None:
        if cur.kind is NodeKind.SELECT:
            levels.append(cur)
        cur = index.parent_of(cur)
    if not levels and tree.kind is NodeKind.SELECT:
        levels.append(tree)
    seen: set[str] = set()
    frame: list[tuple[str, bool]] = []
    for level in levels:  # innermost first; outer levels cover correlated refs
        for name in _query_level_tables(level):
            if name not in seen:
                seen.add(name)
                frame.append((name, schema.has_table(name)))
    return ScopeFrame(tables=tuple(frame), aliases=aliases)


def column_ambiguous(name: str, frame: ScopeFrame, schema: Schema) -> bool:
    """True when two or more in-scope tables carry a column named `name`."""
    carriers = 0
    for table in frame.known_tables():
        if schema.has_column(name, table):
            carriers += 1
            if carriers >= 2:
                return True
    return False

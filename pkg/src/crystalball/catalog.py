"""Relational catalog: CVE descriptions, extracted properties with vector-file
locations, and generated graphs.

The schema is a contract: PRODUCT_INFO and PLATFORM column order is exactly
(id, cve_id, name, vector_file) so positional reads stay valid (row[1] is the
cve_id, row[3] the vector file). Single writer, many readers; every write runs
inside a transaction.
"""

from __future__ import annotations

import sqlite3
import threading
from pathlib import Path

from . import graph_core
from .errors import ForeignKeyViolation, NotFound, StorageError, ValidationError

CVE_INFO = "CVE_INFO"
PRODUCT_INFO = "PRODUCT_INFO"
VERSION_INFO = "VERSION_INFO"
PROBLEM_TYPE = "PROBLEM_TYPE"
PLATFORM = "PLATFORM"
GRAPHS = "GRAPHS"

# Tables the retriever is allowed to scan positionally.
SCANNABLE_TABLES = (PRODUCT_INFO, PLATFORM)

SCHEMA = """
CREATE TABLE IF NOT EXISTS CVE_INFO (
    cve_id      TEXT PRIMARY KEY,
    description TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS PRODUCT_INFO (
    product_id   INTEGER PRIMARY KEY AUTOINCREMENT,
    cve_id       TEXT NOT NULL REFERENCES CVE_INFO(cve_id),
    product_name TEXT NOT NULL,
    vector_file  TEXT NOT NULL,
    UNIQUE (cve_id, product_name)
);
CREATE TABLE IF NOT EXISTS VERSION_INFO (
    product_id     INTEGER NOT NULL REFERENCES PRODUCT_INFO(product_id),
    version_number TEXT NOT NULL,
    qualifier      TEXT NOT NULL,
    UNIQUE (product_id, version_number, qualifier)
);
CREATE TABLE IF NOT EXISTS PROBLEM_TYPE (
    cve_id       TEXT NOT NULL REFERENCES CVE_INFO(cve_id),
    problem_type TEXT NOT NULL,
    vector_file  TEXT NOT NULL,
    UNIQUE (cve_id, problem_type)
);
CREATE TABLE IF NOT EXISTS PLATFORM (
    platform_id INTEGER PRIMARY KEY AUTOINCREMENT,
    cve_id      TEXT NOT NULL REFERENCES CVE_INFO(cve_id),
    platform    TEXT NOT NULL,
    vector_file TEXT NOT NULL,
    UNIQUE (cve_id, platform)
);
CREATE TABLE IF NOT EXISTS GRAPHS (
    graph_id   INTEGER PRIMARY KEY AUTOINCREMENT,
    created_at TEXT NOT NULL,
    query_text TEXT NOT NULL,
    graph_json TEXT NOT NULL
);
"""


def _wrap_integrity(exc: sqlite3.IntegrityError) -> StorageError:
    if "FOREIGN KEY" in str(exc).upper():
        return ForeignKeyViolation(str(exc))
    return StorageError(str(exc))


class Catalog:
    """Handle to one catalog file plus its vector directory."""

    def __init__(self, path: Path | str, vector_dir: Path | str):
        self.path = Path(path)
        self.vector_dir = Path(vector_dir)
        # One shared connection; the lock provides the single-writer slot and
        # lets the HTTP service share the handle across request threads.
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.execute("PRAGMA foreign_keys = ON")
        with self._conn:
            self._conn.executescript(SCHEMA)

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    def __enter__(self) -> "Catalog":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()

    # -- CVE descriptions ----------------------------------------------------

    def store_cve(self, cve_id: str, description: str) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO CVE_INFO (cve_id, description) VALUES (?, ?) "
                "ON CONFLICT (cve_id) DO UPDATE SET description = excluded.description",
                (cve_id, description),
            )

    def get_cve(self, cve_id: str) -> tuple[str, str]:
        with self._lock:
            row = self._conn.execute(
                "SELECT cve_id, description FROM CVE_INFO WHERE cve_id = ?", (cve_id,)
            ).fetchone()
        if row is None:
            raise NotFound(f"no such CVE: {cve_id}")
        return row

    # -- extracted properties ------------------------------------------------

    def _check_vector_file(self, vector_file: str) -> None:
        if not (self.vector_dir / vector_file).exists():
            raise StorageError(f"vector file does not exist: {vector_file}")

    def store_product(self, cve_id: str, product_name: str, vector_file: str) -> int:
        self._check_vector_file(vector_file)
        with self._lock, self._conn:
            try:
                row = self._conn.execute(
                    "INSERT INTO PRODUCT_INFO (cve_id, product_name, vector_file) "
                    "VALUES (?, ?, ?) "
                    "ON CONFLICT (cve_id, product_name) DO UPDATE SET vector_file = excluded.vector_file "
                    "RETURNING product_id",
                    (cve_id, product_name, vector_file),
                ).fetchone()
            except sqlite3.IntegrityError as exc:
                raise _wrap_integrity(exc) from exc
        return int(row[0])

    def store_version(self, product_id: int, version_number: str, qualifier: str) -> None:
        with self._lock, self._conn:
            try:
                self._conn.execute(
                    "INSERT OR IGNORE INTO VERSION_INFO (product_id, version_number, qualifier) "
                    "VALUES (?, ?, ?)",
                    (product_id, version_number, qualifier),
                )
            except sqlite3.IntegrityError as exc:
                raise _wrap_integrity(exc) from exc

    def store_problem_type(self, cve_id: str, problem_type: str, vector_file: str) -> None:
        self._check_vector_file(vector_file)
        with self._lock, self._conn:
            try:
                self._conn.execute(
                    "INSERT INTO PROBLEM_TYPE (cve_id, problem_type, vector_file) "
                    "VALUES (?, ?, ?) "
                    "ON CONFLICT (cve_id, problem_type) DO UPDATE SET vector_file = excluded.vector_file",
                    (cve_id, problem_type, vector_file),
                )
            except sqlite3.IntegrityError as exc:
                raise _wrap_integrity(exc) from exc

    def store_platform(self, cve_id: str, platform: str, vector_file: str) -> None:
        self._check_vector_file(vector_file)
        with self._lock, self._conn:
            try:
                self._conn.execute(
                    "INSERT INTO PLATFORM (cve_id, platform, vector_file) "
                    "VALUES (?, ?, ?) "
                    "ON CONFLICT (cve_id, platform) DO UPDATE SET vector_file = excluded.vector_file",
                    (cve_id, platform, vector_file),
                )
            except sqlite3.IntegrityError as exc:
                raise _wrap_integrity(exc) from exc

    # -- retrieval scans -----------------------------------------------------

    def query_all(self, table: str) -> list[tuple]:
        """Full scan in ascending primary-key order; PRODUCT_INFO/PLATFORM only."""
        if table not in SCANNABLE_TABLES:
            raise StorageError(f"query_all does not scan table {table!r}")
        key = "product_id" if table == PRODUCT_INFO else "platform_id"
        with self._lock:
            return self._conn.execute(f"SELECT * FROM {table} ORDER BY {key} ASC").fetchall()

    def query_cves(self, ids: set[str] | list[str] | tuple[str, ...]) -> list[tuple[str, str]]:
        """(cve_id, description) rows for the intersection, ascending by cve_id."""
        ids = sorted(set(ids))
        if not ids:
            return []
        placeholders = ",".join("?" * len(ids))
        with self._lock:
            return self._conn.execute(
                f"SELECT cve_id, description FROM CVE_INFO WHERE cve_id IN ({placeholders}) "
                "ORDER BY cve_id ASC",
                ids,
            ).fetchall()

    # -- graphs ----------------------------------------------------------------

    def store_graph(self, query_text: str, graph_json: str, created_at: str) -> int:
        try:
            graph = graph_core.parse_graph(graph_json)
        except Exception as exc:
            raise ValidationError(f"graph_json is not a valid attack graph: {exc}") from exc
        violations = graph_core.validate(graph)
        if violations:
            raise ValidationError("; ".join(violations))
        with self._lock, self._conn:
            cursor = self._conn.execute(
                "INSERT INTO GRAPHS (created_at, query_text, graph_json) VALUES (?, ?, ?)",
                (created_at, query_text, graph_json),
            )
        return int(cursor.lastrowid)

    def get_graph(self, graph_id: int) -> tuple[int, str, str, str]:
        with self._lock:
            row = self._conn.execute(
                "SELECT graph_id, created_at, query_text, graph_json FROM GRAPHS WHERE graph_id = ?",
                (graph_id,),
            ).fetchone()
        if row is None:
            raise NotFound(f"no such graph: {graph_id}")
        return row

    def list_graphs(self) -> list[tuple[int, str, str]]:
        with self._lock:
            return self._conn.execute(
                "SELECT graph_id, created_at, query_text FROM GRAPHS ORDER BY graph_id ASC"
            ).fetchall()

    # -- introspection ---------------------------------------------------------

    def schema_dump(self) -> str:
        """Normative table DDL, one statement per table, name-ordered."""
        with self._lock:
            rows = self._conn.execute(
                "SELECT sql FROM sqlite_master WHERE type = 'table' "
                "AND name NOT LIKE 'sqlite_%' ORDER BY name ASC"
            ).fetchall()
        return ";\n".join(sql for (sql,) in rows if sql) + ";\n"

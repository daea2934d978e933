"""Workspace layout: one directory holding everything a run touches."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .catalog import Catalog


@dataclass(frozen=True)
class Workspace:
    root: Path

    @classmethod
    def at(cls, root: Path | str) -> "Workspace":
        return cls(Path(root))

    @property
    def catalog_path(self) -> Path:
        return self.root / "catalog.db"

    @property
    def vector_dir(self) -> Path:
        return self.root / "vectors"

    @property
    def graph_dir(self) -> Path:
        return self.root / "graphs"

    def ensure(self) -> "Workspace":
        self.vector_dir.mkdir(parents=True, exist_ok=True)
        self.graph_dir.mkdir(parents=True, exist_ok=True)
        return self

    def open_catalog(self) -> Catalog:
        self.ensure()
        return Catalog(self.catalog_path, self.vector_dir)

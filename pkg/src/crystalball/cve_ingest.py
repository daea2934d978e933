"""Parse CVE v5 JSON record files from a local mirror and yield normalized records.

Rejected entries and description-less entries are skipped rather than treated
as errors; they carry nothing the retriever can use.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Union

logger = logging.getLogger(__name__)

CVE_ID_RE = re.compile(r"^CVE-\d{4}-\d{4,}$")


@dataclass(frozen=True)
class CveRecord:
    cve_id: str
    description: str
    state: str
    source_path: Path


@dataclass(frozen=True)
class Skipped:
    """Record deliberately not ingested (rejected, or no usable description)."""

    reason: str
    path: Path
    cve_id: str | None = None


@dataclass(frozen=True)
class ParseError:
    """File could not be read as a CVE record. Returned, never raised."""

    message: str
    path: Path
    offset: int | None = None


ParseResult = Union[CveRecord, Skipped, ParseError]


def _pick_description(descriptions: list) -> str | None:
    """First non-empty English entry, else the first non-empty entry at all.

    The extraction prompt presumes English text, but a lone non-English
    description beats nothing.
    """
    candidates = []
    for entry in descriptions:
        if not isinstance(entry, dict):
            continue
        value = entry.get("value")
        if isinstance(value, str) and value.strip():
            candidates.append((str(entry.get("lang", "")), value))
    if not candidates:
        return None
    for lang, value in candidates:
        if lang.lower().startswith("en"):
            return value
    return candidates[0][1]


def parse_cve_file(data: bytes, path: Path) -> ParseResult:
    """Total parse: every byte input maps to exactly one of the three outcomes."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        return ParseError(f"invalid JSON: {exc.msg}", path, offset=exc.pos)
    except (UnicodeDecodeError, ValueError) as exc:
        return ParseError(f"undecodable content: {exc}", path)

    if not isinstance(doc, dict):
        return ParseError("top-level value is not an object", path)

    metadata = doc.get("cveMetadata")
    if not isinstance(metadata, dict):
        return ParseError("missing cveMetadata", path)

    cve_id = metadata.get("cveId")
    if not isinstance(cve_id, str) or not CVE_ID_RE.match(cve_id):
        return ParseError(f"missing or malformed cveId: {cve_id!r}", path)

    state = metadata.get("state", "")
    state = state if isinstance(state, str) else str(state)
    if state.lower() == "rejected":
        return Skipped("rejected", path, cve_id=cve_id)

    containers = doc.get("containers")
    cna = containers.get("cna") if isinstance(containers, dict) else None
    descriptions = cna.get("descriptions") if isinstance(cna, dict) else None
    if not isinstance(descriptions, list):
        return Skipped("no-description", path, cve_id=cve_id)

    description = _pick_description(descriptions)
    if description is None:
        return Skipped("no-description", path, cve_id=cve_id)

    return CveRecord(cve_id=cve_id, description=description, state=state, source_path=path)


def walk_corpus(root: Path | str) -> Iterator[ParseResult]:
    """Visit every *.json file under root in lexicographic path order.

    A single unreadable or malformed file yields a ParseError entry; the
    stream itself never aborts. Every result carries its source path.
    """
    root = Path(root)
    if not root.is_dir():
        raise NotADirectoryError(f"corpus root is not a readable directory: {root}")
    return _walk(root)


def _walk(root: Path) -> Iterator[ParseResult]:
    for path in sorted(root.rglob("*.json"), key=lambda p: p.as_posix()):
        if not path.is_file():
            continue
        try:
            data = path.read_bytes()
        except OSError as exc:
            logger.warning("unreadable file %s: %s", path, exc)
            yield ParseError(f"unreadable file: {exc}", path)
            continue
        yield parse_cve_file(data, path)

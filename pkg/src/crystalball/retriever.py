"""Retrieval: score stored product/platform vectors against the query
embedding, collect CVEs above threshold, and assemble a token-budgeted
"---"-joined context. Also hosts CVE preprocessing (extract, embed, store)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from . import catalog as catalog_mod
from .catalog import Catalog
from .cve_ingest import CveRecord
from .embedding import EmbeddingProvider, cosine_similarity, load_vector, save_vector, vector_file_name
from .errors import ExtractionError, UnknownCounter
from .extraction import UNKNOWN, extract_properties

logger = logging.getLogger(__name__)

SEPARATOR = "---"
DEFAULT_TOKEN_COUNTER = "ws+4char"


def _ws_plus_4char(text: str) -> int:
    return max(len(text.split()), math.ceil(len(text) / 4))


# Pluggable so a model-exact counter can be swapped in.
TOKEN_COUNTERS: dict[str, Callable[[str], int]] = {
    DEFAULT_TOKEN_COUNTER: _ws_plus_4char,
}


def register_token_counter(counter_id: str, fn: Callable[[str], int]) -> None:
    TOKEN_COUNTERS[counter_id] = fn


def count_tokens(text: str, token_counter_id: str = DEFAULT_TOKEN_COUNTER) -> int:
    try:
        counter = TOKEN_COUNTERS[token_counter_id]
    except KeyError:
        raise UnknownCounter(f"no token counter registered as {token_counter_id!r}") from None
    return counter(text)


@dataclass(frozen=True)
class RetrieverConfig:
    min_similarity: float = 0.68
    context_token_budget: int = 3750
    token_counter_id: str = DEFAULT_TOKEN_COUNTER

    def __post_init__(self) -> None:
        if not 0.0 <= self.min_similarity <= 1.0:
            raise ValueError(f"min_similarity out of [0, 1]: {self.min_similarity}")
        if self.context_token_budget < 1:
            raise ValueError(f"context_token_budget must be >= 1: {self.context_token_budget}")


@dataclass(frozen=True)
class IncludedCve:
    cve_id: str
    best_score: float
    matched_property: str  # "product" | "platform"


@dataclass(frozen=True)
class RetrievalContext:
    text: str
    included: tuple[IncludedCve, ...]
    excluded_by_budget: tuple[str, ...]
    token_count: int
    token_counter_id: str
    queries: tuple[str, ...]


def get_context(
    query: str,
    config: RetrieverConfig,
    catalog: Catalog,
    embedder: EmbeddingProvider,
) -> RetrievalContext:
    return get_context_many((query,), config, catalog, embedder)


def get_context_many(
    queries: Sequence[str],
    config: RetrieverConfig,
    catalog: Catalog,
    embedder: EmbeddingProvider,
) -> RetrievalContext:
    """Union of per-query threshold sets, budget applied once over the union
    in ascending cve_id order. Each query is embedded exactly once."""
    best: dict[str, tuple[float, str]] = {}  # cve_id -> (best_score, property)
    for query in queries:
        query_vector = embedder.embed(query)
        for table, prop in ((catalog_mod.PRODUCT_INFO, "product"), (catalog_mod.PLATFORM, "platform")):
            for row in catalog.query_all(table):
                cve_id, vector_file = row[1], row[3]
                score = cosine_similarity(query_vector, load_vector(catalog.vector_dir / vector_file))
                if score > config.min_similarity:
                    current = best.get(cve_id)
                    if current is None or score > current[0]:
                        best[cve_id] = (score, prop)

    text = ""
    included: list[IncludedCve] = []
    excluded: list[str] = []
    over_budget = False
    for cve_id, description in catalog.query_cves(set(best)):
        candidate = text + SEPARATOR + description
        if not over_budget and count_tokens(candidate, config.token_counter_id) < config.context_token_budget:
            text = candidate
            score, prop = best[cve_id]
            included.append(IncludedCve(cve_id, score, prop))
        else:
            # First breach stops assembly; everything after it is excluded too.
            over_budget = True
            excluded.append(cve_id)
    return RetrievalContext(
        text=text,
        included=tuple(included),
        excluded_by_budget=tuple(excluded),
        token_count=count_tokens(text, config.token_counter_id),
        token_counter_id=config.token_counter_id,
        queries=tuple(queries),
    )


def split_context(text: str) -> list[str]:
    """Inverse of the assembly fold: descriptions in order."""
    if not text:
        return []
    parts = text.split(SEPARATOR)
    return parts[1:]  # fold starts with the separator, so parts[0] is ""


def context_from_text(
    text: str,
    token_counter_id: str = DEFAULT_TOKEN_COUNTER,
    queries: tuple[str, ...] = (),
) -> RetrievalContext:
    """Wrap already-assembled context text, e.g. cached from a prior run.

    Inclusion metadata is unknowable here and left empty."""
    return RetrievalContext(
        text=text,
        included=(),
        excluded_by_budget=(),
        token_count=count_tokens(text, token_counter_id),
        token_counter_id=token_counter_id,
        queries=queries,
    )


@dataclass(frozen=True)
class PreprocessReport:
    cve_id: str
    stored: tuple[str, ...] = ()
    skipped: tuple[str, ...] = ()
    failed: bool = False
    error: str | None = None


def preprocess_cve(
    record: CveRecord,
    llm,
    embedder: EmbeddingProvider,
    catalog: Catalog,
) -> PreprocessReport:
    """Store the description, extract properties, embed and store each known
    one. The CVE_INFO row persists even when extraction fails, so the record
    is retrievable after a re-run with a better extractor."""
    catalog.store_cve(record.cve_id, record.description)
    try:
        props = extract_properties(record.description, llm)
    except ExtractionError as exc:
        logger.warning("extraction failed for %s: %s", record.cve_id, exc)
        return PreprocessReport(record.cve_id, failed=True, error=str(exc))

    stored: list[str] = []
    skipped: list[str] = []

    def _embed_and_save(value: str, prop: str) -> str:
        name = vector_file_name(record.cve_id, prop)
        save_vector(embedder.embed(value), catalog.vector_dir / name)
        return name

    if props.product_name != UNKNOWN:
        name = _embed_and_save(props.product_name, "product")
        product_id = catalog.store_product(record.cve_id, props.product_name, name)
        stored.append("product")
        if props.version_number != UNKNOWN:
            catalog.store_version(product_id, props.version_number, props.version_qualifier)
            stored.append("version")
        else:
            skipped.append("version")
    else:
        skipped.append("product")
        # Version rows hang off a product row; nothing to attach to.
        skipped.append("version")

    if props.platform != UNKNOWN:
        catalog.store_platform(record.cve_id, props.platform, _embed_and_save(props.platform, "platform"))
        stored.append("platform")
    else:
        skipped.append("platform")

    if props.problem_type != UNKNOWN:
        catalog.store_problem_type(
            record.cve_id, props.problem_type, _embed_and_save(props.problem_type, "problem_type")
        )
        stored.append("problem_type")
    else:
        skipped.append("problem_type")

    return PreprocessReport(record.cve_id, stored=tuple(stored), skipped=tuple(skipped))

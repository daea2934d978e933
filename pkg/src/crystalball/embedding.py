"""Embedding provider contract, cosine similarity, and vector persistence.

Vectors carry 32-bit components (quantized at construction) so that the file
format round-trips bit-identically. All similarity arithmetic runs in 64-bit.
"""

from __future__ import annotations

import math
import os
import re
import struct
import tempfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

import requests

from .errors import DimensionMismatch, EmbeddingError, FormatError, ZeroNorm

MAGIC = b"CBV1"
STUB_DIM = 64
STUB_PROVIDER_ID = "stub"

# <cve_id>_<property>.<ext>
VECTOR_NAME_RE = re.compile(r"^CVE-\d{4}-\d{4,}_(product|platform|problem_type)\.[A-Za-z0-9]+$")


def _quantize(values: Iterable[float]) -> tuple[float, ...]:
    """Round each component through IEEE-754 binary32."""
    vals = tuple(float(v) for v in values)
    if not vals:
        return vals
    packed = struct.pack(f"<{len(vals)}f", *vals)
    return struct.unpack(f"<{len(vals)}f", packed)


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    provider_id: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _quantize(self.values))

    @property
    def dim(self) -> int:
        return len(self.values)


class EmbeddingProvider(Protocol):
    provider_id: str
    dim: int

    def embed(self, text: str) -> EmbeddingVector: ...


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """dot(a,b) / (|a| |b|), accumulated in 64-bit, clamped to [-1, 1].

    The denominator is sqrt(norm2_a * norm2_b): IEEE-754 guarantees
    sqrt(fl(x*x)) == x, so self-similarity is exactly 1.0 for any vector.
    """
    if a.dim != b.dim:
        raise DimensionMismatch(f"dim {a.dim} vs {b.dim}")
    dot = 0.0
    norm2_a = 0.0
    norm2_b = 0.0
    for x, y in zip(a.values, b.values):
        dot += x * y
        norm2_a += x * x
        norm2_b += y * y
    if norm2_a == 0.0 or norm2_b == 0.0:
        raise ZeroNorm("cosine similarity undefined for a zero vector")
    score = dot / math.sqrt(norm2_a * norm2_b)
    return max(-1.0, min(1.0, score))


def vector_file_name(cve_id: str, prop: str) -> str:
    """Per-property vector file name, e.g. CVE-2019-1234_product.vec."""
    name = f"{cve_id}_{prop}.vec"
    if not VECTOR_NAME_RE.match(name):
        raise ValueError(f"invalid vector file name: {name}")
    return name


def save_vector(vector: EmbeddingVector, path: Path | str) -> Path:
    """Persist a vector; overwrite is atomic (write temp, rename).

    Layout: magic "CBV1", u32-LE provider_id byte length, provider_id UTF-8,
    u32-LE dim, then dim little-endian binary32 values.
    """
    path = Path(path)
    if not VECTOR_NAME_RE.match(path.name):
        raise ValueError(f"vector file name does not follow <cve_id>_<property>.<ext>: {path.name}")
    if vector.dim == 0 or all(v == 0.0 for v in vector.values):
        raise ZeroNorm("refusing to store a zero vector")
    provider = vector.provider_id.encode("utf-8")
    payload = (
        MAGIC
        + struct.pack("<I", len(provider))
        + provider
        + struct.pack("<I", vector.dim)
        + struct.pack(f"<{vector.dim}f", *vector.values)
    )
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def load_vector(path: Path | str) -> EmbeddingVector:
    """Inverse of save_vector; round-trip identity on (dim, values, provider_id)."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 4 or data[: len(MAGIC)] != MAGIC:
        raise FormatError(f"bad magic in {path}")
    offset = len(MAGIC)
    (provider_len,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if len(data) < offset + provider_len + 4:
        raise FormatError(f"truncated header in {path}")
    try:
        provider_id = data[offset : offset + provider_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"provider id is not UTF-8 in {path}") from exc
    offset += provider_len
    (dim,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if dim == 0:
        raise FormatError(f"zero dim in {path}")
    if len(data) != offset + 4 * dim:
        raise FormatError(f"payload length does not match dim={dim} in {path}")
    values = struct.unpack_from(f"<{dim}f", data, offset)
    return EmbeddingVector(values, provider_id)


def stub_embed(text: str) -> EmbeddingVector:
    """Deterministic test embedder: hashed character trigrams, L2-normalized.

    Equal strings (after lowercasing) embed identically; unrelated strings
    land in mostly disjoint hash buckets and score low.
    """
    folded = text.lower()
    if not folded.strip():
        raise EmbeddingError("cannot embed empty text")
    grams = [folded[i : i + 3] for i in range(len(folded) - 2)] or [folded]
    counts = [0.0] * STUB_DIM
    for gram in grams:
        counts[zlib.crc32(gram.encode("utf-8")) % STUB_DIM] += 1.0
    norm = math.sqrt(sum(c * c for c in counts))
    return EmbeddingVector(tuple(c / norm for c in counts), STUB_PROVIDER_ID)


@dataclass
class StubEmbedder:
    provider_id: str = STUB_PROVIDER_ID
    dim: int = STUB_DIM

    def embed(self, text: str) -> EmbeddingVector:
        return stub_embed(text)


@dataclass
class RemoteEmbedder:
    """Remote embedding endpoint adapter: one text per request.

    POSTs {"model": ..., "text": ...} to the configured URL and expects
    {"vector": [...], "dim": n} back.
    """

    url: str
    model: str
    dim: int
    timeout_s: float = 60.0
    provider_id: str = field(init=False)

    def __post_init__(self) -> None:
        self.provider_id = f"remote:{self.model}"

    def embed(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise EmbeddingError("cannot embed empty text")
        try:
            response = requests.post(
                self.url,
                json={"model": self.model, "text": text},
                timeout=self.timeout_s,
            )
            response.raise_for_status()
            body = response.json()
        except (requests.RequestException, ValueError) as exc:
            raise EmbeddingError(f"embedding endpoint failure: {exc}") from exc
        vector = body.get("vector")
        dim = body.get("dim")
        if not isinstance(vector, list) or dim != len(vector):
            raise EmbeddingError(f"malformed embedding response: dim={dim!r}")
        if self.dim and dim != self.dim:
            raise EmbeddingError(f"endpoint returned dim {dim}, expected {self.dim}")
        return EmbeddingVector(tuple(float(v) for v in vector), self.provider_id)

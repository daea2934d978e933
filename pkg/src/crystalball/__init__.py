"""Retrieval-augmented attack-graph generation from CVE records and reports."""

from .catalog import Catalog
from .embedding import (
    EmbeddingVector,
    StubEmbedder,
    cosine_similarity,
    load_vector,
    save_vector,
)
from .errors import CrystalBallError
from .generation import (
    GenerationRequest,
    GenerationResult,
    generate,
    generate_chunked,
    zoom_edge,
)
from .graph_core import AttackGraph, Edge, Node, merge, parse_graph, render_graph_json
from .retriever import RetrievalContext, RetrieverConfig, get_context, preprocess_cve
from .transports import ApiTransport, ManualTransport, StubTransport
from .workspace import Workspace

__version__ = "0.1.0"

__all__ = [
    "AttackGraph",
    "ApiTransport",
    "Catalog",
    "CrystalBallError",
    "Edge",
    "EmbeddingVector",
    "GenerationRequest",
    "GenerationResult",
    "ManualTransport",
    "Node",
    "RetrievalContext",
    "RetrieverConfig",
    "StubEmbedder",
    "StubTransport",
    "Workspace",
    "cosine_similarity",
    "generate",
    "generate_chunked",
    "get_context",
    "load_vector",
    "merge",
    "parse_graph",
    "preprocess_cve",
    "render_graph_json",
    "save_vector",
    "zoom_edge",
    "__version__",
]

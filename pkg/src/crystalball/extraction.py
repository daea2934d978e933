"""Property extraction: build the extraction prompt, parse the model's JSON
answer into ExtractedProperties, and drive the one-retry send loop."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from .errors import ExtractionError
from .prompts import EXTRACTION_PROMPT_PREFIX, EXTRACTION_RETRY_SUFFIX

logger = logging.getLogger(__name__)

# Explicit sentinel, never an empty string, so the catalog can filter
# unembeddable values.
UNKNOWN = "Unknown"

QUALIFIERS = ("<=", ">=", "==", "<", ">")


@dataclass(frozen=True)
class ExtractedProperties:
    product_name: str = UNKNOWN
    version_number: str = UNKNOWN
    version_qualifier: str = UNKNOWN  # one of QUALIFIERS or Unknown
    platform: str = UNKNOWN
    problem_type: str = UNKNOWN

    def __post_init__(self) -> None:
        if self.version_qualifier not in QUALIFIERS + (UNKNOWN,):
            raise ValueError(f"qualifier outside enumeration: {self.version_qualifier!r}")

    def all_unknown(self) -> bool:
        return all(
            value == UNKNOWN
            for value in (
                self.product_name,
                self.version_number,
                self.version_qualifier,
                self.platform,
                self.problem_type,
            )
        )

    def to_answer_json(self) -> str:
        """Render into the canonical answer shape the prompt requests."""
        return json.dumps(
            {
                "ProductInfo": {
                    "ProductName": self.product_name,
                    "Version": {
                        "VersionNumber": self.version_number,
                        "Qualifier": self.version_qualifier,
                    },
                },
                "Platform": self.platform,
                "ProblemType": self.problem_type,
            }
        )


def build_extraction_prompt(description: str) -> str:
    """Compiled-in instruction block followed by the description verbatim."""
    return EXTRACTION_PROMPT_PREFIX + description


def _first_json_object(answer: str) -> dict | None:
    """First balanced {...} region that parses as an object."""
    pos = answer.find("{")
    while pos != -1:
        depth = 0
        in_string = False
        escape = False
        for i in range(pos, len(answer)):
            ch = answer[i]
            if in_string:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch in "{[":
                depth += 1
            elif ch in "}]":
                depth -= 1
                if depth == 0:
                    try:
                        doc = json.loads(answer[pos : i + 1])
                    except json.JSONDecodeError:
                        break
                    if isinstance(doc, dict):
                        return doc
                    break
        pos = answer.find("{", pos + 1)
    return None


def _value(raw: object) -> str:
    """Normalize a model-provided field: missing/empty/unknown-ish -> sentinel."""
    if raw is None or isinstance(raw, (dict, list)):
        return UNKNOWN
    text = raw if isinstance(raw, str) else str(raw)
    text = text.strip()
    if not text or text.lower() in ("unknown", "n/a", "none", "null"):
        return UNKNOWN
    return text


def parse_extraction_response(answer: str) -> ExtractedProperties:
    """Read ProductInfo.ProductName / ProductInfo.Version.{VersionNumber,
    Qualifier} and top-level Platform / ProblemType from the first JSON object
    in the answer. Missing keys map to Unknown."""
    doc = _first_json_object(answer)
    if doc is None:
        raise ExtractionError("no JSON object in answer")

    product_info = doc.get("ProductInfo")
    product_info = product_info if isinstance(product_info, dict) else {}
    version = product_info.get("Version")
    version = version if isinstance(version, dict) else {}

    qualifier = _value(version.get("Qualifier"))
    if qualifier not in QUALIFIERS:
        qualifier = UNKNOWN

    props = ExtractedProperties(
        product_name=_value(product_info.get("ProductName")),
        version_number=_value(version.get("VersionNumber")),
        version_qualifier=qualifier,
        platform=_value(doc.get("Platform")),
        problem_type=_value(doc.get("ProblemType")),
    )
    if props.all_unknown():
        raise ExtractionError("every extracted field is Unknown")
    return props


def extract_properties(description: str, llm) -> ExtractedProperties:
    """Prompt, parse, and retry once with a clarifier on a bad answer.

    `llm` is any transport with send(prompt) -> answer.
    """
    prompt = build_extraction_prompt(description)
    try:
        return parse_extraction_response(llm.send(prompt))
    except ExtractionError as exc:
        logger.info("extraction retry after: %s", exc)
    return parse_extraction_response(llm.send(prompt + EXTRACTION_RETRY_SUFFIX))

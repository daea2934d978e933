"""Prompt catalog: every instruction string sent to a language model.

Builders live next to their callers (extraction, generation); this module is
the single home for the literal texts so they can be audited and digest-pinned
in one place. Prefix constants carry their own trailing separator so builders
are pure concatenation.
"""

from __future__ import annotations

import hashlib

# Property extraction. The variable part (the CVE description) is appended
# directly after the trailing space.
EXTRACTION_PROMPT_PREFIX = (
    "provide the affected product name, platform and version if present using "
    "a key called ProductInfo, platform using a key called Platform, the "
    "problem type using a key called ProblemType in a single json from "
    "vulnerability information given below. ProductInfo should have properties "
    "ProductName and Version. Version should have properties VersionNumber and "
    "Qualifier whose value would be <=, >=, == etc. "
)

# Appended to the prompt on the single retry after an unparseable answer.
EXTRACTION_RETRY_SUFFIX = " Return only the json."

# Graph generation from retrieved CVE context. The context text starts with
# the "---" separator, so concatenation needs no extra joiner.
CVE_CHAIN_PROMPT_PREFIX = (
    "Create an attack graph in json format using nodes and edges from the "
    "vulnerability information given below. Chain the vulnerabilities if "
    "applicable. Vulnerabilities can be chained if precondition of one "
    "vulnerability is similar to the post condition of another vulnerability. "
    "Vulnerability with matching postcondition should be ahead in the chain. "
)

# Graph generation from a free-form threat report. Joined to the report text
# with a blank line by the builder.
REPORT_PROMPT_PREFIX = (
    "Create an attack graph in json format using only nodes and edges as keys "
    "from the attack scenario given below. node should have id, label, edge "
    "should have from, to and label properties. Do not give a simplified "
    "graph. Add as much detail as possible. Incorporate all possible "
    "information in nodes and edges. Do not create separate keys for them in "
    "the json. Give only the graph in json format. Do not put text before or "
    "after json."
)

# Zoom follow-up for one selected edge. Filled with the edge's endpoint node
# labels and the edge label, then the original context is appended verbatim.
# Fields sit on their own lines so answers scripted against this template can
# recover them without guessing at sentence boundaries.
ZOOM_PROMPT_TEMPLATE = (
    "From the attack context given below, return only the part of the context "
    "that is related to the following attack graph edge. Return only that part "
    "of the context. Do not put any text before or after it.\n"
    "Edge source: {from_label}\n"
    "Edge target: {to_label}\n"
    "Edge label: {edge_label}\n"
    "Context:\n"
)


def prompt_digest(text: str) -> str:
    """Hex sha256 of a prompt constant, for pinning in tests."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()

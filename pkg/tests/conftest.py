"""Shared fixtures: eight real CVE descriptions with canned extraction
answers, corpus-file builders, and a fully ingested catalog."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import pytest

from crystalball.catalog import Catalog
from crystalball.cve_ingest import CveRecord
from crystalball.embedding import StubEmbedder
from crystalball.retriever import preprocess_cve
from crystalball.transports import StubTransport

DESCRIPTIONS: dict[str, str] = {
    "CVE-2019-25089": (
        "The web application component of piSignage before 2.6.4 allows a remote "
        "attacker (authenticated as a low-privilege user) to download arbitrary "
        "files from the Raspberry Pi via api/settings/log?file=../ path traversal. "
        "In other words, this issue is in the player API for log download."
    ),
    "CVE-2019-16102": (
        "A remote web page could inject arbitrary HTML code into the Oculus "
        "Browser UI, allowing an attacker to spoof UI and potentially execute "
        "code. This affects the Oculus Browser starting from version 5.2.7 until "
        "5.7.11."
    ),
    "CVE-2020-10293": (
        "Writing to an unprivileged file from a privileged OVRRedir.exe process "
        "in Oculus Desktop before 1.44.0.32849 on Windows allows local users to "
        "write to arbitrary files and consequently gain privileges via vectors "
        "involving a hard link to a log file."
    ),
    "CVE-2020-24572": (
        "An issue was discovered in includes/webconsole.php in RaspAP 2.5. With "
        "authenticated access, an attacker can use a misconfigured (and virtually "
        "unrestricted) web console to attack the underlying OS (Raspberry Pi) "
        "running this software, and execute commands on the system (including "
        "ones for uploading of files and execution of code)."
    ),
    "CVE-2021-33482": (
        "Due to a bug with management of handles in OVRServiceLauncher.exe, an "
        "attacker could expose a privileged process handle to an unprivileged "
        "process, leading to local privilege escalation. This issue affects "
        "Oculus Desktop versions after 1.39 and prior to 31.1.0.67.507."
    ),
    "CVE-2021-30494": (
        "Raspberry Pi 3 B+ and 4 B devices through 2021-08-09, in certain "
        "specific use cases in which the device supplies power to audio-output "
        "equipment, allow remote attackers to recover speech signals from an LED "
        'on the device, via a telescope and an electro-optical sensor, aka a '
        '"Glowworm" attack. We assume that the Raspberry Pi supplies power to '
        "some speakers. The power indicator LED of the Raspberry Pi is connected "
        "directly to the power line, as a result, the intensity of a device's "
        "power indicator LED is correlative to the power consumption. The sound "
        "played by the speakers affects the Raspberry Pi's power consumption and "
        "as a result is also correlative to the light intensity of the LED. By "
        "analyzing measurements obtained from an electro-optical sensor directed "
        "at the power indicator LED of the Raspberry Pi, we can recover the "
        "sound played by the speakers."
    ),
    "CVE-2021-38759": (
        "Raspberry Pi OS through 5.10 has the raspberry default password for the "
        "pi account. If not changed, attackers can gain administrator privileges."
    ),
    "CVE-2022-21819": (
        "NVIDIA distributions of Jetson Linux contain a vulnerability where an "
        "error in the IOMMU configuration may allow an unprivileged attacker "
        "with physical access to the board direct read/write access to the "
        "entire system address space through the PCI bus. Such an attack could "
        "result in denial of service, code execution, escalation of privileges, "
        "and impact to data integrity and confidentiality. The scope impact may "
        "extend to other components."
    ),
}

# Canned extraction results per CVE, in the shape the extraction prompt asks
# for. Values are the ground truth a careful reader takes from each text.
EXTRACTIONS: dict[str, dict] = {
    "CVE-2019-25089": {
        "ProductInfo": {
            "ProductName": "piSignage",
            "Version": {"VersionNumber": "2.6.4", "Qualifier": "<"},
        },
        "Platform": "Raspberry Pi",
        "ProblemType": "Path Traversal",
    },
    "CVE-2019-16102": {
        "ProductInfo": {
            "ProductName": "Oculus Browser",
            "Version": {"VersionNumber": "5.7.11", "Qualifier": "<"},
        },
        "Platform": "Unknown",
        "ProblemType": "HTML Injection",
    },
    "CVE-2020-10293": {
        "ProductInfo": {
            "ProductName": "Oculus Desktop",
            "Version": {"VersionNumber": "1.44.0.32849", "Qualifier": "<"},
        },
        "Platform": "Windows",
        "ProblemType": "Privilege Escalation",
    },
    "CVE-2020-24572": {
        "ProductInfo": {
            "ProductName": "RaspAP",
            "Version": {"VersionNumber": "2.5", "Qualifier": "=="},
        },
        "Platform": "Raspberry Pi",
        "ProblemType": "Remote Code Execution",
    },
    "CVE-2021-33482": {
        "ProductInfo": {
            "ProductName": "Oculus Desktop",
            "Version": {"VersionNumber": "31.1.0.67.507", "Qualifier": "<"},
        },
        "Platform": "Unknown",
        "ProblemType": "Privilege Escalation",
    },
    "CVE-2021-30494": {
        "ProductInfo": {
            "ProductName": "Raspberry Pi",
            "Version": {"VersionNumber": "Unknown", "Qualifier": "Unknown"},
        },
        "Platform": "Raspberry Pi",
        "ProblemType": "Information Disclosure",
    },
    "CVE-2021-38759": {
        "ProductInfo": {
            "ProductName": "Raspberry Pi OS",
            "Version": {"VersionNumber": "5.10", "Qualifier": "<="},
        },
        "Platform": "Raspberry Pi",
        "ProblemType": "Default Credentials",
    },
    "CVE-2022-21819": {
        "ProductInfo": {
            "ProductName": "Jetson Linux",
            "Version": {"VersionNumber": "Unknown", "Qualifier": "Unknown"},
        },
        "Platform": "NVIDIA Jetson",
        "ProblemType": "Improper IOMMU Configuration",
    },
}

# CVEs whose extracted product or platform is exactly "Raspberry Pi".
RASPBERRY_CVES = ("CVE-2019-25089", "CVE-2020-24572", "CVE-2021-30494", "CVE-2021-38759")
# CVEs naming only Oculus products (no Raspberry property at all).
OCULUS_ONLY_CVES = ("CVE-2019-16102", "CVE-2020-10293", "CVE-2021-33482")


def extraction_fixtures() -> dict[str, str]:
    """Stub-transport fixtures: description text -> canned answer json."""
    return {DESCRIPTIONS[cve_id]: json.dumps(EXTRACTIONS[cve_id]) for cve_id in DESCRIPTIONS}


def cve_document(cve_id: str, description: str, state: str = "PUBLISHED") -> dict:
    return {
        "cveMetadata": {"cveId": cve_id, "state": state},
        "containers": {"cna": {"descriptions": [{"lang": "en", "value": description}]}},
    }


def write_corpus(root: Path) -> None:
    root.mkdir(parents=True, exist_ok=True)
    for cve_id, description in DESCRIPTIONS.items():
        (root / f"{cve_id}.json").write_text(
            json.dumps(cve_document(cve_id, description)), encoding="utf-8"
        )


@dataclass
class ScriptedTransport:
    """Returns pre-arranged answers in order; records every prompt."""

    answers: list[str] = field(default_factory=list)
    transport_id: str = "scripted"
    max_prompt_tokens: int = 8192
    max_answer_tokens: int = 4096
    calls: list[str] = field(default_factory=list)

    def send(self, prompt: str) -> str:
        self.calls.append(prompt)
        if not self.answers:
            raise AssertionError("scripted transport ran out of answers")
        return self.answers.pop(0)


class ScriptedEndpoint:
    """Loopback HTTP server answering POSTs from a scripted (status, body) list.

    The last script entry repeats once the list is exhausted. Request bodies
    are recorded for assertions.
    """

    def __init__(self, script: list[tuple[int, str]]):
        import http.server
        import threading

        endpoint = self

        class Handler(http.server.BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", "0") or 0)
                endpoint.requests.append(self.rfile.read(length))
                endpoint.headers_seen.append(dict(self.headers))
                index = min(len(endpoint.requests) - 1, len(endpoint.script) - 1)
                status, body = endpoint.script[index]
                payload = body.encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

        self.script = script
        self.requests: list[bytes] = []
        self.headers_seen: list[dict] = []
        self._server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        self.url = f"http://127.0.0.1:{self._server.server_address[1]}/"

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "ScriptedEndpoint":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


_LABEL_WORDS = (
    "initial", "access", "foothold", "escalation", "pivot", "exfiltration",
    "persistence", "overflow", "traversal", "injection", "spoofing", "disclosure",
)


def random_graph(rng, max_nodes: int = 6, max_edges: int = 8):
    """Well-formed graph with unique ids and unique normalized labels.

    Label uniqueness matters: merge unifies nodes by normalized label, so a
    graph reusing a label would not survive merge(g, empty) unchanged and the
    algebra assertions would be vacuous.
    """
    from crystalball.graph_core import AttackGraph, Edge, Node

    n = rng.randint(1, max_nodes)
    nodes = []
    for i in range(n):
        words = rng.sample(_LABEL_WORDS, rng.randint(1, 3))
        label = f"{' '.join(words)} {i + 1}"
        nodes.append(
            Node(
                id=f"s{i + 1}",
                label=label,
                precondition=rng.choice([None, "network access", f"foothold {i}"]),
                postcondition=rng.choice([None, f"foothold {i + 1}"]),
            )
        )
    ids = [node.id for node in nodes]
    edges = {}
    for _ in range(rng.randint(0, max_edges)):
        key = (rng.choice(ids), rng.choice(ids), rng.choice(["", "enables", "leads to"]))
        edges[key] = Edge(*key)
    return AttackGraph(tuple(nodes), tuple(edges.values()))


@pytest.fixture
def stub_transport() -> StubTransport:
    return StubTransport(fixtures=extraction_fixtures())


@pytest.fixture
def catalog(tmp_path: Path):
    vector_dir = tmp_path / "vectors"
    vector_dir.mkdir()
    with Catalog(tmp_path / "catalog.db", vector_dir) as cat:
        yield cat


def ingest_fixtures(catalog: Catalog, transport: StubTransport | None = None) -> None:
    transport = transport if transport is not None else StubTransport(fixtures=extraction_fixtures())
    embedder = StubEmbedder()
    for cve_id, description in DESCRIPTIONS.items():
        record = CveRecord(cve_id, description, "PUBLISHED", Path(f"{cve_id}.json"))
        report = preprocess_cve(record, transport, embedder, catalog)
        assert not report.failed, f"fixture extraction failed for {cve_id}"


@pytest.fixture
def ingested_catalog(catalog):
    ingest_fixtures(catalog)
    return catalog

"""Run manifests: what went in, what came out, and the digests needed to check a re-run."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def digest_json(obj) -> str:
    return sha256_bytes(canonical_json(obj).encode("utf-8"))


@dataclass
class RunManifest:
    command: str
    args: dict
    tool_version: str
    config_digest: str = ""
    seeds: dict = field(default_factory=dict)
    schedule: dict | None = None
    catalog: list = field(default_factory=list)
    inputs: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.config_digest:
            self.config_digest = digest_json({"command": self.command, "args": self.args})

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))

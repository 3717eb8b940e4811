"""Run manifest: what was run, with which configuration, and what it produced."""
from __future__ import annotations

import json
import os
import time
from dataclasses import asdict, dataclass, field

__all__ = ["MANIFEST_SCHEMA", "RunManifest", "Writer"]

# fields excluded when comparing two runs of the same configuration
VOLATILE = ("created", "stage_times")

MANIFEST_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "speclab run manifest",
    "type": "object",
    "required": ["command", "config", "version", "seed", "created", "stage_times", "outputs", "checks", "status"],
    "additionalProperties": False,
    "properties": {
        "command": {"enum": ["spectrum", "nodal", "sweep", "validate"]},
        "config": {"type": "object"},
        "version": {"type": "string"},
        "seed": {"type": "integer"},
        "created": {"type": "string"},
        "stage_times": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
        "outputs": {"type": "array", "items": {"type": "string"}, "uniqueItems": True},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["number", "name", "passed", "summary"],
                "properties": {
                    "number": {"type": "integer", "minimum": 1, "maximum": 12},
                    "name": {"type": "string"},
                    "passed": {"type": "boolean"},
                    "summary": {"type": "string"},
                    "wall_time": {"type": "number"},
                },
            },
        },
        "status": {"enum": ["pass", "fail", "error"]},
        "summary": {"type": "object"},
    },
}


@dataclass
class RunManifest:
    """One CLI invocation.

    ``outputs`` lists file names relative to the output directory;
    ``checks`` holds one entry per acceptance check that ran.
    """

    command: str
    config: dict
    version: str
    seed: int
    created: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S%z"))
    stage_times: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    status: str = "pass"
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def stable_dict(self) -> dict:
        """The manifest without timestamps and wall times."""
        d = self.to_dict()
        for key in VOLATILE:
            d.pop(key)
        d["checks"] = [{k: v for k, v in c.items() if k != "wall_time"} for c in d["checks"]]
        return d

    def check_invariants(self, out_dir) -> None:
        missing = [f for f in self.outputs if not os.path.exists(os.path.join(out_dir, f))]
        if missing:
            raise RuntimeError(f"manifest lists missing outputs {missing}")
        nums = [c["number"] for c in self.checks]
        if len(nums) != len(set(nums)):
            raise RuntimeError("manifest lists a check more than once")

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


class Writer:
    """The single place a run writes files; records every output in the manifest."""

    def __init__(self, out_dir, manifest: RunManifest):
        self.out_dir = os.fspath(out_dir)
        self.manifest = manifest
        os.makedirs(self.out_dir, exist_ok=True)

    def write(self, name: str, text: str) -> str:
        path = os.path.join(self.out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        if name not in self.manifest.outputs and name != "manifest.json":
            self.manifest.outputs.append(name)
        return path

    def close(self) -> str:
        self.manifest.outputs.sort()
        path = self.write("manifest.json", self.manifest.to_json())
        self.manifest.check_invariants(self.out_dir)
        return path

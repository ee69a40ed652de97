"""Run manifests: every artifact-producing command records what produced it.

Manifests are deterministic (no timestamps): command, flags, seeds, input
digests, tool version.
"""

from __future__ import annotations

import hashlib
import json

VERSION = "0.1.0"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(output_path, command: str, flags: dict, input_paths: list) -> str:
    """Write ``<output>.manifest.json`` next to the artifact; returns its path."""
    manifest = {
        "tool": "phonmt",
        "version": VERSION,
        "command": command,
        "flags": {k: v for k, v in sorted(flags.items())},
        "inputs": {str(p): file_digest(p) for p in sorted(str(x) for x in input_paths)},
    }
    path = str(output_path) + ".manifest.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path

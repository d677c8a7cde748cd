"""Run manifests and seed fan-out for reproducible pipeline stages.

Every stage writes a manifest holding the configuration hash, the stage
seed and the SHA-256 of each input and output file.  Manifests contain no
timestamps or absolute paths, so rerunning a stage with the same
configuration and seed yields a byte-identical manifest.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def stage_seed(master_seed: int, stage: str) -> int:
    """Derive a per-stage seed: first 8 bytes of sha256("<seed>:<stage>")."""
    digest = hashlib.sha256(f"{master_seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(
    out_dir: str | Path,
    stage: str,
    config: dict,
    seed: int,
    inputs: dict[str, str | Path],
    outputs: dict[str, str | Path],
) -> Path:
    from . import __version__

    payload = {
        "stage": stage,
        "version": __version__,
        "seed": seed,
        "config_sha256": config_hash(config),
        "inputs": {name: {"file": Path(p).name, "sha256": file_sha256(p)} for name, p in sorted(inputs.items())},
        "outputs": {name: {"file": Path(p).name, "sha256": file_sha256(p)} for name, p in sorted(outputs.items())},
    }
    path = Path(out_dir) / f"manifest_{stage}.json"
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path

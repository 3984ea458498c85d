"""Parameter checkpoint container.

Single file: one canonical-JSON manifest line (config, step counter, and
per-parameter name/shape/offset), then the raw little-endian float64
payloads back to back. Canonical JSON plus sorted parameter order makes
the bytes reproducible, so identical runs hash identically.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class CheckpointError(Exception):
    pass


def save_checkpoint(path: str | Path, params: dict[str, np.ndarray],
                    config: dict | None = None, step: int = 0) -> None:
    entries = []
    payload = bytearray()
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "offset": len(payload),
        })
        payload.extend(arr.tobytes())
    manifest = {
        "format": "relcoder-checkpoint-v1",
        "step": step,
        "config": config or {},
        "params": entries,
    }
    header = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8") + b"\n")
        fh.write(bytes(payload))


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict, int]:
    with open(path, "rb") as fh:
        header = fh.readline()
        payload = fh.read()
    try:
        manifest = json.loads(header.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"bad checkpoint header in {path}: {exc}") from exc
    if manifest.get("format") != "relcoder-checkpoint-v1":
        raise CheckpointError(f"{path} is not a relcoder checkpoint")
    params: dict[str, np.ndarray] = {}
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        raw = payload[start:start + count * 8]
        if len(raw) != count * 8:
            raise CheckpointError(f"truncated payload for {entry['name']}")
        params[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    return params, manifest.get("config", {}), manifest.get("step", 0)

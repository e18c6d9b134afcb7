"""Write-through persistence for the hub.

One directory per concern, everything canonical JSON or netpbm, so a
restarted hub reloads byte-identical state and files diff cleanly:

    <root>/policy.json
    <root>/alerts/<alert_id>.json
    <root>/chips/<series_id>_<n>.pgm|.ppm
    <root>/models/model_v<N>.json
    <root>/models/manifest_v<N>.json
    <root>/models/registry.json
    <root>/enrollments.json
    <root>/ingested.json
    <root>/joblog.jsonl
    <root>/access.jsonl
"""

from __future__ import annotations

import json
from pathlib import Path


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(doc))
        fh.write("\n")
    tmp.replace(path)


def read_json(path: Path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def append_jsonl(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(canonical_json(doc))
        fh.write("\n")


def read_jsonl(path: Path) -> list:
    if not path.exists():
        return []
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out

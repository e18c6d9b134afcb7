"""Versioned model snapshots: the unit of hub-to-node distribution.

A snapshot bundles embedder weights, the identity gallery, and the accept
threshold. Snapshots are immutable; serialization is canonical JSON so
persisted bytes are reproducible and diffable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import CorruptSnapshot
from .facecore.embedder import EmbedderParams
from .facecore.gallery import GalleryEntry, IdentityGallery

SNAPSHOT_FORMAT = "sof-model/1"

# Accept threshold calibrated at FAR 2% on the reference validation split
# under freshly initialized weights (the bootstrap regime distances).
DEFAULT_TAU_ACCEPT = 0.107


@dataclass(frozen=True)
class ModelSnapshot:
    version: int
    params: EmbedderParams
    gallery: IdentityGallery
    tau_accept: float
    created_at: int  # ms since epoch

    def __post_init__(self):
        if self.version < 1:
            raise CorruptSnapshot(f"snapshot version must be >= 1, got {self.version}")
        if not (self.tau_accept > 0 and np.isfinite(self.tau_accept)):
            raise CorruptSnapshot(f"tau_accept must be positive, got {self.tau_accept}")


def gallery_to_dict(gallery: IdentityGallery) -> dict:
    return {
        pid: {
            "mean": entry.mean_embedding.tolist(),
            "sample_count": entry.sample_count,
            "permission_level": entry.permission_level,
            "display_name": entry.display_name,
            "provenance": entry.provenance,
        }
        for pid, entry in sorted(gallery.entries.items())
    }


def gallery_from_dict(doc: dict) -> IdentityGallery:
    entries = {}
    for pid, e in doc.items():
        entries[pid] = GalleryEntry(
            mean_embedding=np.array(e["mean"], dtype=np.float64),
            sample_count=int(e["sample_count"]),
            permission_level=int(e["permission_level"]),
            display_name=e["display_name"],
            provenance=e["provenance"],
        )
    return IdentityGallery(entries)


def snapshot_to_dict(snapshot: ModelSnapshot) -> dict:
    p = snapshot.params
    return {
        "format": SNAPSHOT_FORMAT,
        "version": snapshot.version,
        "created_at": snapshot.created_at,
        "tau_accept": snapshot.tau_accept,
        "params": {
            "dims": {"S": p.chip_size, "C": p.channels, "H": p.hidden, "D": p.dim},
            "w1": p.w1.tolist(), "b1": p.b1.tolist(),
            "w2": p.w2.tolist(), "b2": p.b2.tolist(),
        },
        "gallery": gallery_to_dict(snapshot.gallery),
    }


def snapshot_from_dict(doc: dict) -> ModelSnapshot:
    try:
        if doc.get("format") != SNAPSHOT_FORMAT:
            raise CorruptSnapshot(f"unsupported snapshot format {doc.get('format')!r}")
        pd = doc["params"]
        dims = pd["dims"]
        params = EmbedderParams(
            dims["S"], dims["C"], dims["H"], dims["D"],
            np.array(pd["w1"], dtype=np.float64), np.array(pd["b1"], dtype=np.float64),
            np.array(pd["w2"], dtype=np.float64), np.array(pd["b2"], dtype=np.float64))
        return ModelSnapshot(
            version=int(doc["version"]),
            params=params,
            gallery=gallery_from_dict(doc["gallery"]),
            tau_accept=float(doc["tau_accept"]),
            created_at=int(doc["created_at"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptSnapshot(f"malformed snapshot: {exc}") from exc


def snapshot_to_json(snapshot: ModelSnapshot) -> str:
    return json.dumps(snapshot_to_dict(snapshot), sort_keys=True, separators=(",", ":"))


def snapshot_from_json(text: str) -> ModelSnapshot:
    try:
        return snapshot_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise CorruptSnapshot(f"snapshot is not valid JSON: {exc}") from exc

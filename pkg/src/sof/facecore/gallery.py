"""Per-person embedding gallery and open-set nearest-centroid classification.

Each entry keeps the raw running mean of its enrollment embeddings; the
exposed centroid is that mean L2-normalized. Storing the unnormalized mean
makes incremental updates equal an exact mean over all samples instead of
accumulating per-step renormalization drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalUnderflow, UnknownPerson

UNKNOWN = "UNKNOWN"

PROVENANCES = ("social", "escalation", "enrollment")

# Permission levels: 0 unknown, 1 guest, 2 resident, 3 owner.
LEVEL_MIN, LEVEL_MAX = 0, 3


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n < 1e-8:
        raise NumericalUnderflow("cannot normalize near-zero vector")
    return v / n


@dataclass(frozen=True)
class GalleryEntry:
    mean_embedding: np.ndarray  # unnormalized running mean over samples
    sample_count: int
    permission_level: int
    display_name: str
    provenance: str

    def __post_init__(self):
        m = np.asarray(self.mean_embedding, dtype=np.float64)
        if not np.all(np.isfinite(m)):
            raise ValueError("gallery mean embedding must be finite")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if not LEVEL_MIN <= self.permission_level <= LEVEL_MAX:
            raise ValueError(f"permission_level out of range: {self.permission_level}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        m.setflags(write=False)
        object.__setattr__(self, "mean_embedding", m)

    @property
    def centroid(self) -> np.ndarray:
        return _unit(self.mean_embedding)


@dataclass(frozen=True)
class IdentityGallery:
    entries: dict[str, GalleryEntry] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, person_id: str) -> bool:
        return person_id in self.entries

    def person_ids(self) -> list[str]:
        return sorted(self.entries)

    def permission_level(self, person_id: str) -> int:
        entry = self.entries.get(person_id)
        return entry.permission_level if entry else LEVEL_MIN

    def with_entry(self, person_id: str, entry: GalleryEntry) -> "IdentityGallery":
        new = dict(self.entries)
        new[person_id] = entry
        return IdentityGallery(new)


@dataclass(frozen=True)
class ClassifyResult:
    label: str  # person_id or UNKNOWN
    distance: float  # squared euclidean distance to nearest centroid
    confidence: float

    @property
    def is_known(self) -> bool:
        return self.label != UNKNOWN


def classify(probe: np.ndarray, gallery: IdentityGallery, tau_accept: float) -> ClassifyResult:
    """Open-set nearest-centroid decision.

    Nearest centroid by squared euclidean distance; lexicographically
    smallest person_id wins exact ties. UNKNOWN when the gallery is empty
    or the nearest distance exceeds tau_accept.
    """
    if tau_accept <= 0:
        raise ValueError("tau_accept must be > 0")
    if not gallery.entries:
        return ClassifyResult(UNKNOWN, float("inf"), 0.0)

    probe = np.asarray(probe, dtype=np.float64)
    best_id, best_d = None, None
    for pid in sorted(gallery.entries):
        diff = probe - gallery.entries[pid].centroid
        d = float(diff @ diff)
        if best_d is None or d < best_d:
            best_id, best_d = pid, d
    if best_d > tau_accept:
        return ClassifyResult(UNKNOWN, best_d, 0.0)
    return ClassifyResult(best_id, best_d, max(0.0, 1.0 - best_d / tau_accept))


def update_centroid(gallery: IdentityGallery, person_id: str, new_embedding: np.ndarray,
                    *, display_name: str | None = None,
                    permission_level: int | None = None,
                    provenance: str = "enrollment") -> IdentityGallery:
    """Fold one embedding into a person's running mean; returns a new gallery.

    Creating a person requires permission_level; updating an existing one
    leaves identity metadata untouched.
    """
    emb = np.asarray(new_embedding, dtype=np.float64)
    existing = gallery.entries.get(person_id)
    if existing is None:
        if permission_level is None:
            raise UnknownPerson(f"person {person_id!r} not enrolled and no creation info given")
        entry = GalleryEntry(emb, 1, permission_level,
                             display_name or person_id, provenance)
        return gallery.with_entry(person_id, entry)

    count = existing.sample_count
    mean = (existing.mean_embedding * count + emb) / (count + 1)
    entry = GalleryEntry(mean, count + 1, existing.permission_level,
                         existing.display_name, existing.provenance)
    return gallery.with_entry(person_id, entry)


def build_gallery(embeddings_by_person: dict[str, np.ndarray],
                  metadata: dict[str, tuple[str, int, str]]) -> IdentityGallery:
    """Construct a gallery from per-person embedding stacks.

    embeddings_by_person maps person_id -> (N, D) array; metadata maps
    person_id -> (display_name, permission_level, provenance).
    """
    entries = {}
    for pid, embs in embeddings_by_person.items():
        embs = np.asarray(embs, dtype=np.float64)
        if embs.ndim == 1:
            embs = embs[None, :]
        name, level, prov = metadata[pid]
        entries[pid] = GalleryEntry(embs.mean(axis=0), embs.shape[0], level, name, prov)
    return IdentityGallery(entries)

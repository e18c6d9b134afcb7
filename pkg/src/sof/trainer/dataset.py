"""Labeled chip collections used for training and evaluation."""

from __future__ import annotations

from dataclasses import dataclass

from ..facecore.chips import FaceChip
from ..facecore.gallery import PROVENANCES


@dataclass(frozen=True)
class LabeledChip:
    chip: FaceChip
    person_id: str
    source: str  # social | escalation | enrollment

    def __post_init__(self):
        if self.source not in PROVENANCES:
            raise ValueError(f"unknown source {self.source!r}")


@dataclass(frozen=True)
class LabeledChipSet:
    records: tuple[LabeledChip, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def labels(self) -> list[str]:
        return [r.person_id for r in self.records]

    def person_ids(self) -> list[str]:
        return sorted({r.person_id for r in self.records})

    def by_person(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {}
        for i, rec in enumerate(self.records):
            out.setdefault(rec.person_id, []).append(i)
        return out

    def subset(self, indices) -> "LabeledChipSet":
        return LabeledChipSet(tuple(self.records[i] for i in indices))

    def merged(self, other: "LabeledChipSet") -> "LabeledChipSet":
        return LabeledChipSet(self.records + other.records)

    def mineable_identities(self) -> list[str]:
        """Identities with at least two chips (usable as anchor/positive)."""
        return sorted(pid for pid, idx in self.by_person().items() if len(idx) >= 2)


@dataclass(frozen=True)
class Triplet:
    anchor: int
    positive: int
    negative: int

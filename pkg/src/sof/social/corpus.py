"""On-disk photo corpus: photos.jsonl plus PGM/PPM image files.

The same format backs the mock graph server, the synthetic generator, and
direct corpus loading for training runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import CorruptCorpus
from ..facecore.chips import FaceChip, align_face, read_image
from ..facecore.geometry import Landmarks
from ..trainer.dataset import LabeledChip, LabeledChipSet


@dataclass(frozen=True)
class PhotoTag:
    """One tagged face: geometry stays raw here and is validated only when a
    consumer actually aligns the face, so one degenerate tag cannot poison a
    whole page."""

    tag_name: str
    left_eye: tuple[float, float]
    right_eye: tuple[float, float]
    nose_tip: tuple[float, float]

    def to_landmarks(self) -> Landmarks:
        return Landmarks(self.left_eye, self.right_eye, self.nose_tip)


@dataclass(frozen=True)
class SocialPhoto:
    photo_id: str
    file: str
    tags: tuple[PhotoTag, ...]
    uploaded_at: int


def _point(values) -> tuple[float, float]:
    x, y = values
    return (float(x), float(y))


def parse_photo_record(doc: dict) -> SocialPhoto:
    try:
        tags = []
        for tag in doc["tags"]:
            lm = tag["landmarks"]
            tags.append(PhotoTag(
                tag_name=tag["tag_name"],
                left_eye=_point(lm["le"]),
                right_eye=_point(lm["re"]),
                nose_tip=_point(lm["nose"]),
            ))
        return SocialPhoto(
            photo_id=doc["photo_id"],
            file=doc["file"],
            tags=tuple(tags),
            uploaded_at=int(doc["uploaded_at"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCorpus(f"malformed photo record: {exc}") from exc


def photo_record_to_dict(photo: SocialPhoto) -> dict:
    return {
        "photo_id": photo.photo_id,
        "file": photo.file,
        "tags": [{
            "tag_name": t.tag_name,
            "landmarks": {
                "le": list(t.left_eye),
                "re": list(t.right_eye),
                "nose": list(t.nose_tip),
            },
        } for t in photo.tags],
        "uploaded_at": photo.uploaded_at,
    }


def load_corpus_index(corpus_dir) -> list[SocialPhoto]:
    """Read photos.jsonl sorted by photo_id (the pagination order)."""
    path = Path(corpus_dir) / "photos.jsonl"
    if not path.exists():
        raise CorruptCorpus(f"missing photos.jsonl in {corpus_dir}")
    photos = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptCorpus(f"bad JSON at photos.jsonl:{line_no}") from exc
            photos.append(parse_photo_record(doc))
    ids = [p.photo_id for p in photos]
    if len(set(ids)) != len(ids):
        raise CorruptCorpus("duplicate photo_id in corpus")
    return sorted(photos, key=lambda p: p.photo_id)


def load_photo_image(corpus_dir, photo: SocialPhoto) -> np.ndarray:
    return read_image(Path(corpus_dir) / photo.file)


def corpus_to_chip_set(corpus_dir, source: str = "social") -> LabeledChipSet:
    """Align every tagged face in the corpus into a labeled chip set."""
    records = []
    for photo in load_corpus_index(corpus_dir):
        image = load_photo_image(corpus_dir, photo)
        for tag in photo.tags:
            chip = align_face(image, tag.to_landmarks())
            records.append(LabeledChip(chip=chip, person_id=tag.tag_name, source=source))
    return LabeledChipSet(tuple(records))


def split_chip_set(chip_set: LabeledChipSet, val_fraction: float = 0.2
                   ) -> tuple[LabeledChipSet, LabeledChipSet]:
    """Per-identity deterministic split: the trailing fraction validates."""
    train_idx, val_idx = [], []
    for pid, idx in sorted(chip_set.by_person().items()):
        n_val = max(1, int(round(len(idx) * val_fraction)))
        train_idx.extend(idx[:-n_val])
        val_idx.extend(idx[-n_val:])
    return chip_set.subset(train_idx), chip_set.subset(val_idx)


def make_verification_pairs(chip_set: LabeledChipSet, n_pairs_per_class: int,
                            seed: int) -> list[tuple[FaceChip, FaceChip, bool]]:
    """Sample same/different chip pairs for the verification protocol.

    Pairs alternate same/different so contiguous cross-validation folds stay
    class-balanced. Deterministic given the seed.
    """
    rng = np.random.default_rng([seed, 17])
    by_person = {pid: idx for pid, idx in chip_set.by_person().items() if len(idx) >= 2}
    pids = sorted(by_person)
    if len(pids) < 2:
        raise ValueError("need >= 2 identities with >= 2 chips to build pairs")

    pairs = []
    for _ in range(n_pairs_per_class):
        pid = pids[rng.integers(len(pids))]
        i, j = rng.choice(by_person[pid], size=2, replace=False)
        pairs.append((chip_set.records[i].chip, chip_set.records[j].chip, True))

        pa, pb = rng.choice(len(pids), size=2, replace=False)
        i = rng.choice(by_person[pids[pa]])
        j = rng.choice(by_person[pids[pb]])
        pairs.append((chip_set.records[i].chip, chip_set.records[j].chip, False))
    return pairs

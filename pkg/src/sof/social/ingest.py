"""Ingest client: page through a graph endpoint, align consented faces.

Faces are deduped by (photo_id, tag_name); callers that persist across
runs pass their seen-key set so a second ingest adds nothing. Tags outside
the consent list are counted and skipped, never fetched into the output.
"""

from __future__ import annotations

import json
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from urllib.parse import urlencode

from ..errors import ServerUnreachable, SofError
from ..facecore.chips import align_face, parse_netpbm
from ..trainer.dataset import LabeledChip, LabeledChipSet
from .corpus import parse_photo_record

RETRIES = 3
BACKOFF_BASE_S = 0.1


@dataclass
class IngestReport:
    photos_seen: int = 0
    faces_ingested: int = 0
    faces_skipped_consent: int = 0
    faces_skipped_error: int = 0
    duplicates_skipped: int = 0
    per_person: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "photos_seen": self.photos_seen,
            "faces_ingested": self.faces_ingested,
            "faces_skipped_consent": self.faces_skipped_consent,
            "faces_skipped_error": self.faces_skipped_error,
            "duplicates_skipped": self.duplicates_skipped,
            "per_person": dict(sorted(self.per_person.items())),
        }


def _fetch(url: str, backoff_base: float = BACKOFF_BASE_S) -> bytes:
    last = None
    for attempt in range(RETRIES):
        try:
            with urllib.request.urlopen(url, timeout=10) as resp:
                return resp.read()
        except (urllib.error.URLError, OSError) as exc:
            last = exc
            if attempt < RETRIES - 1:
                time.sleep(backoff_base * (2 ** attempt))
    raise ServerUnreachable(f"GET {url} failed after {RETRIES} attempts: {last}")


def fetch_pages(endpoint: str, limit: int = 25, backoff_base: float = BACKOFF_BASE_S):
    """Yield photo records across all pages in cursor order."""
    after = None
    while True:
        params = {"limit": str(limit)}
        if after:
            params["after"] = after
        doc = json.loads(_fetch(f"{endpoint}/photos?{urlencode(params)}", backoff_base))
        for rec in doc["data"]:
            yield parse_photo_record(rec)
        after = doc.get("paging", {}).get("next")
        if not after:
            return


def ingest(endpoint: str, consent: set[str] | list[str],
           already_ingested: set[tuple[str, str]] | None = None,
           page_limit: int = 25,
           backoff_base: float = BACKOFF_BASE_S) -> tuple[LabeledChipSet, IngestReport]:
    """Pull every consented tagged face from the endpoint into labeled chips.

    already_ingested is mutated in place with the keys of newly ingested
    faces, letting the caller carry dedupe state across runs.
    """
    consent = set(consent)
    if not consent:
        raise ValueError("consent list must be nonempty for ingestion")
    seen = already_ingested if already_ingested is not None else set()

    report = IngestReport()
    records = []
    for photo in fetch_pages(endpoint, limit=page_limit, backoff_base=backoff_base):
        report.photos_seen += 1
        image = None
        for tag in photo.tags:
            if tag.tag_name not in consent:
                report.faces_skipped_consent += 1
                continue
            key = (photo.photo_id, tag.tag_name)
            if key in seen:
                report.duplicates_skipped += 1
                continue
            try:
                if image is None:
                    blob = _fetch(f"{endpoint}/files/{photo.file}", backoff_base)
                    arr, channels = parse_netpbm(blob)
                    image = arr[:, :, 0] if channels == 1 else arr
                chip = align_face(image, tag.to_landmarks())
            except SofError:
                report.faces_skipped_error += 1
                continue
            seen.add(key)
            records.append(LabeledChip(chip=chip, person_id=tag.tag_name, source="social"))
            report.faces_ingested += 1
            report.per_person[tag.tag_name] = report.per_person.get(tag.tag_name, 0) + 1

    return LabeledChipSet(tuple(records)), report

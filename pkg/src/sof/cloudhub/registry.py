"""Append-only registry of model snapshots."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import NoSuchVersion
from ..snapshot import ModelSnapshot

LATEST = "LATEST"


@dataclass
class ModelRegistry:
    snapshots: list[ModelSnapshot] = field(default_factory=list)

    @property
    def active_version(self) -> int:
        if not self.snapshots:
            raise NoSuchVersion("registry is empty")
        return self.snapshots[-1].version

    def append(self, snapshot: ModelSnapshot) -> None:
        expected = self.snapshots[-1].version + 1 if self.snapshots else 1
        if snapshot.version != expected:
            raise ValueError(
                f"registry versions must increase by 1; expected v{expected}, "
                f"got v{snapshot.version}")
        self.snapshots.append(snapshot)

    def get(self, version) -> ModelSnapshot:
        if version == LATEST:
            version = self.active_version
        for snap in self.snapshots:
            if snap.version == version:
                return snap
        raise NoSuchVersion(f"no snapshot with version {version!r}")

    def versions(self) -> list[int]:
        return [s.version for s in self.snapshots]

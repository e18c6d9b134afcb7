"""Permission-level access policy over smart-home devices.

Levels: 0 unknown, 1 guest, 2 resident, 3 owner. A device carries a
minimum level; a `restricted` device additionally requires the full owner
level regardless of its minimum (dangerous appliances stay off-limits to
kids and guests).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import UnknownDevice
from ..facecore.gallery import UNKNOWN

GRANT = "GRANT"
DENY = "DENY"

OWNER_LEVEL = 3


@dataclass(frozen=True)
class DevicePolicy:
    name: str
    min_level: int
    restricted: bool = False

    def __post_init__(self):
        if not 0 <= self.min_level <= 3:
            raise ValueError(f"min_level out of range: {self.min_level}")


@dataclass(frozen=True)
class AccessPolicy:
    devices: dict[str, DevicePolicy] = field(default_factory=dict)
    persons: dict[str, int] = field(default_factory=dict)  # person_id -> level

    def __post_init__(self):
        for pid, level in self.persons.items():
            if not 0 <= level <= 3:
                raise ValueError(f"permission level out of range for {pid!r}: {level}")
        object.__setattr__(self, "devices", dict(self.devices))
        object.__setattr__(self, "persons", dict(self.persons))

    def level_of(self, person_id: str) -> int:
        if person_id == UNKNOWN:
            return 0
        return self.persons.get(person_id, 0)

    def with_person(self, person_id: str, level: int) -> "AccessPolicy":
        persons = dict(self.persons)
        persons[person_id] = level
        return AccessPolicy(self.devices, persons)

    def with_device(self, device_id: str, device: DevicePolicy) -> "AccessPolicy":
        devices = dict(self.devices)
        devices[device_id] = device
        return AccessPolicy(devices, self.persons)

    def to_dict(self) -> dict:
        return {
            "devices": {
                did: {"name": d.name, "min_level": d.min_level, "restricted": d.restricted}
                for did, d in sorted(self.devices.items())
            },
            "persons": dict(sorted(self.persons.items())),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AccessPolicy":
        devices = {
            did: DevicePolicy(d["name"], int(d["min_level"]), bool(d.get("restricted", False)))
            for did, d in doc.get("devices", {}).items()
        }
        return cls(devices=devices, persons={p: int(v) for p, v in doc.get("persons", {}).items()})


def allows(level: int, device: DevicePolicy) -> bool:
    return level >= device.min_level and not (device.restricted and level < OWNER_LEVEL)


def check_access(person_id: str, device_id: str, policy: AccessPolicy) -> str:
    """GRANT or DENY for a person (or UNKNOWN) against one device."""
    device = policy.devices.get(device_id)
    if device is None:
        raise UnknownDevice(f"no such device: {device_id!r}")
    return GRANT if allows(policy.level_of(person_id), device) else DENY

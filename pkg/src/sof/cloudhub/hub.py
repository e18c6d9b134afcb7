"""The cloud hub: alerts, labeling, training jobs, snapshot distribution.

The hub owns all authoritative state behind one lock. Training jobs copy
their inputs, run without the lock, and rejoin to publish the produced
snapshot. Every mutation writes through to the persistence directory in
canonical JSON, so a restarted hub reloads byte-identical state.
"""

from __future__ import annotations

import re
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

from ..edgenode.node import PhotoSeries
from ..errors import AlertNotPending, SofError, UnknownPerson
from ..facecore.chips import read_chip, write_chip
from ..facecore.embedder import init_params
from ..facecore.gallery import IdentityGallery
from ..snapshot import DEFAULT_TAU_ACCEPT, ModelSnapshot
from ..trainer.config import TrainConfig
from ..trainer.dataset import LabeledChip, LabeledChipSet
from ..trainer.training import incremental_update
from .persist import append_jsonl, read_json, read_jsonl, write_json
from .policy import AccessPolicy, DevicePolicy, check_access
from .registry import LATEST, ModelRegistry

PENDING = "PENDING"
LABELED = "LABELED"
DISMISSED = "DISMISSED"

QUEUED = "QUEUED"
RUNNING = "RUNNING"
DONE = "DONE"
FAILED = "FAILED"


@dataclass(frozen=True)
class Alert:
    alert_id: str
    series_id: str
    node_id: str
    chip_files: tuple[str, ...]
    created_at: int
    status: str = PENDING
    labeled_as: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "series_id": self.series_id,
            "node_id": self.node_id,
            "chips": list(self.chip_files),
            "created_at": self.created_at,
            "status": self.status,
            "labeled_as": self.labeled_as,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Alert":
        return cls(alert_id=doc["alert_id"], series_id=doc["series_id"],
                   node_id=doc["node_id"], chip_files=tuple(doc["chips"]),
                   created_at=int(doc["created_at"]), status=doc["status"],
                   labeled_as=doc.get("labeled_as"))


@dataclass(frozen=True)
class EnrollmentRecord:
    person_id: str
    chip_file: str
    source: str


@dataclass
class TrainingJob:
    job_id: str
    trigger: str  # label | ingest | manual
    delta: tuple[EnrollmentRecord, ...]
    state: str = QUEUED
    produced_version: Optional[int] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "trigger": self.trigger,
            "records": len(self.delta),
            "state": self.state,
            "produced_version": self.produced_version,
            "error": self.error,
        }


def _now_ms() -> int:
    return int(time.time() * 1000)


def default_policy() -> AccessPolicy:
    """Starter device set covering the doorway plus the classic examples."""
    return AccessPolicy(devices={
        "front_door": DevicePolicy("Front door", min_level=1),
        "bedroom_door": DevicePolicy("Bedroom door", min_level=2),
        "appliance": DevicePolicy("Kitchen appliance", min_level=1, restricted=True),
        "lights": DevicePolicy("Living-room lights", min_level=1),
        "thermostat": DevicePolicy("Thermostat", min_level=2),
    })


class CloudHub:
    """Single authoritative state owner; all public methods are commands."""

    def __init__(self, persist_dir, clock: Callable[[], int] = _now_ms,
                 bootstrap_seed: int = 0, embed_dims: tuple = (96, 1, 256, 128),
                 train_config: TrainConfig | None = None,
                 tau_accept: float = DEFAULT_TAU_ACCEPT):
        self.root = Path(persist_dir)
        self.clock = clock
        self.train_config = train_config or TrainConfig(freeze_first_layer=True, epochs=10)
        self._lock = threading.RLock()
        self._subscribers: dict[int, Callable[[dict], None]] = {}
        self._next_subscriber = 1
        self._node_listeners: dict[int, Callable[[ModelSnapshot], None]] = {}
        self._next_listener = 1
        self._running_job: Optional[str] = None

        self.registry = ModelRegistry()
        self.alerts: dict[str, Alert] = {}
        self.jobs: dict[str, TrainingJob] = {}
        self.job_order: list[str] = []
        self.policy = default_policy()
        self.enrollments: list[EnrollmentRecord] = []
        self.ingested_keys: set[tuple[str, str]] = set()
        self._next_job = 1

        if (self.root / "models" / "registry.json").exists():
            self._load()
        else:
            s, c, h, d = embed_dims
            bootstrap = ModelSnapshot(
                version=1,
                params=init_params(s, c, h, d, seed=bootstrap_seed),
                gallery=IdentityGallery({}),
                tau_accept=tau_accept,
                created_at=self.clock(),
            )
            self.registry.append(bootstrap)
            self._persist_snapshot(bootstrap)
            self._persist_core()

    # -- persistence -----------------------------------------------------

    def _persist_core(self) -> None:
        write_json(self.root / "policy.json", self.policy.to_dict())
        write_json(self.root / "enrollments.json",
                   [{"person_id": r.person_id, "chip_file": r.chip_file,
                     "source": r.source} for r in self.enrollments])
        write_json(self.root / "ingested.json",
                   sorted([list(k) for k in self.ingested_keys]))
        write_json(self.root / "counters.json", {"next_job": self._next_job})
        write_json(self.root / "models" / "registry.json",
                   {"versions": self.registry.versions(),
                    "active_version": self.registry.active_version})

    def _persist_alert(self, alert: Alert) -> None:
        write_json(self.root / "alerts" / f"{alert.alert_id}.json", alert.to_dict())

    def _persist_snapshot(self, snapshot: ModelSnapshot) -> None:
        from ..snapshot import snapshot_to_dict
        write_json(self.root / "models" / f"model_v{snapshot.version}.json",
                   snapshot_to_dict(snapshot))

    def persist_all(self) -> None:
        """Rewrite every mutable persisted file (snapshots are immutable)."""
        with self._lock:
            self._persist_core()
            for alert in self.alerts.values():
                self._persist_alert(alert)

    def _load(self) -> None:
        reg = read_json(self.root / "models" / "registry.json")
        from ..snapshot import snapshot_from_dict
        for version in reg["versions"]:
            snap = snapshot_from_dict(
                read_json(self.root / "models" / f"model_v{version}.json"))
            self.registry.append(snap)
        self.policy = AccessPolicy.from_dict(read_json(self.root / "policy.json"))
        for rec in read_json(self.root / "enrollments.json"):
            self.enrollments.append(EnrollmentRecord(
                rec["person_id"], rec["chip_file"], rec["source"]))
        self.ingested_keys = {tuple(k) for k in read_json(self.root / "ingested.json")}
        self._next_job = read_json(self.root / "counters.json")["next_job"]
        alerts_dir = self.root / "alerts"
        if alerts_dir.exists():
            for path in sorted(alerts_dir.glob("*.json")):
                alert = Alert.from_dict(read_json(path))
                self.alerts[alert.alert_id] = alert

    # -- events / node distribution ---------------------------------------

    def subscribe(self, callback: Callable[[dict], None]) -> int:
        with self._lock:
            sid = self._next_subscriber
            self._next_subscriber += 1
            self._subscribers[sid] = callback
            return sid

    def unsubscribe(self, sid: int) -> None:
        with self._lock:
            self._subscribers.pop(sid, None)

    def _emit(self, event: dict) -> None:
        for callback in list(self._subscribers.values()):
            callback(event)

    def register_node_listener(self, callback: Callable[[ModelSnapshot], None]) -> int:
        with self._lock:
            lid = self._next_listener
            self._next_listener += 1
            self._node_listeners[lid] = callback
            return lid

    def unregister_node_listener(self, lid: int) -> None:
        with self._lock:
            self._node_listeners.pop(lid, None)

    def _broadcast(self, snapshot: ModelSnapshot) -> None:
        for callback in list(self._node_listeners.values()):
            callback(snapshot)

    # -- escalations and alerts -------------------------------------------

    def ingest_escalation(self, series: PhotoSeries) -> Alert:
        """Persist the series and open a PENDING alert; idempotent by series_id."""
        with self._lock:
            alert_id = f"alert-{series.series_id}"
            existing = self.alerts.get(alert_id)
            if existing is not None:
                return existing
            ext = "pgm" if series.chips[0].channels == 1 else "ppm"
            files = []
            for k, chip in enumerate(series.chips):
                fname = f"{series.series_id}_{k}.{ext}"
                write_chip(self._chip_path(fname), chip)
                files.append(fname)
            alert = Alert(alert_id=alert_id, series_id=series.series_id,
                          node_id=series.node_id, chip_files=tuple(files),
                          created_at=self.clock())
            self.alerts[alert_id] = alert
            self._persist_alert(alert)
            self._emit({"type": "alert", "alert": alert.to_dict()})
            return alert

    def _chip_path(self, fname: str) -> Path:
        chips_dir = self.root / "chips"
        chips_dir.mkdir(parents=True, exist_ok=True)
        return chips_dir / fname

    def get_alerts(self, status: Optional[str] = None) -> list[Alert]:
        with self._lock:
            alerts = sorted(self.alerts.values(), key=lambda a: a.alert_id)
            if status:
                alerts = [a for a in alerts if a.status == status]
            return alerts

    def get_alert(self, alert_id: str) -> Alert:
        with self._lock:
            if alert_id not in self.alerts:
                raise KeyError(f"no such alert: {alert_id!r}")
            return self.alerts[alert_id]

    def label_alert(self, alert_id: str, person: dict) -> tuple[Alert, TrainingJob]:
        """Resolve an alert to a person and queue a retraining job.

        person is {"existing": person_id} or
        {"new": {"display_name": ..., "permission_level": ...}}.
        """
        with self._lock:
            alert = self.get_alert(alert_id)
            if alert.status != PENDING:
                raise AlertNotPending(f"alert {alert_id} is {alert.status}")

            if "existing" in person:
                pid = person["existing"]
                if pid not in self.policy.persons:
                    raise UnknownPerson(f"no such person: {pid!r}")
            else:
                spec = person["new"]
                pid = self._new_person_id(spec["display_name"])
                self.policy = self.policy.with_person(pid, int(spec["permission_level"]))

            alert = replace(alert, status=LABELED, labeled_as=pid)
            self.alerts[alert_id] = alert
            delta = tuple(EnrollmentRecord(pid, f, "escalation") for f in alert.chip_files)
            self.enrollments.extend(delta)
            job = self._enqueue_job("label", delta)
            self._persist_alert(alert)
            self._persist_core()
            self._emit({"type": "alert", "alert": alert.to_dict()})
            return alert, job

    def dismiss_alert(self, alert_id: str) -> Alert:
        with self._lock:
            alert = self.get_alert(alert_id)
            if alert.status != PENDING:
                raise AlertNotPending(f"alert {alert_id} is {alert.status}")
            alert = replace(alert, status=DISMISSED)
            self.alerts[alert_id] = alert
            self._persist_alert(alert)
            self._emit({"type": "alert", "alert": alert.to_dict()})
            return alert

    def _new_person_id(self, display_name: str) -> str:
        base = re.sub(r"[^a-z0-9]+", "-", display_name.lower()).strip("-") or "person"
        pid = base
        n = 2
        while pid in self.policy.persons:
            pid = f"{base}-{n}"
            n += 1
        return pid

    # -- social ingestion --------------------------------------------------

    def add_social_records(self, labeled: list[tuple[str, str, object]],
                           default_level: int = 1) -> TrainingJob | None:
        """Store aligned social chips (person_id, key_suffix, chip) and queue
        an ingest-triggered job; returns None when nothing new arrived."""
        with self._lock:
            delta = []
            for pid, suffix, chip in labeled:
                fname = f"social_{suffix}.pgm" if chip.channels == 1 else f"social_{suffix}.ppm"
                write_chip(self._chip_path(fname), chip)
                delta.append(EnrollmentRecord(pid, fname, "social"))
                if pid not in self.policy.persons:
                    self.policy = self.policy.with_person(pid, default_level)
            if not delta:
                return None
            self.enrollments.extend(delta)
            job = self._enqueue_job("ingest", tuple(delta))
            self._persist_core()
            return job

    # -- training jobs ------------------------------------------------------

    def _enqueue_job(self, trigger: str, delta: tuple[EnrollmentRecord, ...]) -> TrainingJob:
        job = TrainingJob(job_id=f"job-{self._next_job}", trigger=trigger, delta=delta)
        self._next_job += 1
        self.jobs[job.job_id] = job
        self.job_order.append(job.job_id)
        append_jsonl(self.root / "joblog.jsonl",
                     {"ts": self.clock(), "event": "queued", **job.to_dict()})
        self._persist_core()
        return job

    def enqueue_manual_job(self) -> TrainingJob:
        """Manual trigger: fine-tune over the entire enrollment store."""
        with self._lock:
            return self._enqueue_job("manual", tuple(self.enrollments))

    def pending_jobs(self) -> list[TrainingJob]:
        with self._lock:
            return [self.jobs[j] for j in self.job_order if self.jobs[j].state == QUEUED]

    def run_training_job(self, job: TrainingJob) -> ModelSnapshot:
        """Run one queued job to completion; serialized with other jobs."""
        with self._lock:
            if job.state != QUEUED:
                raise SofError(f"job {job.job_id} is {job.state}, not QUEUED")
            if self._running_job is not None:
                raise SofError(f"job {self._running_job} is already RUNNING")
            self._running_job = job.job_id
            job.state = RUNNING
            append_jsonl(self.root / "joblog.jsonl",
                         {"ts": self.clock(), "event": "running", "job_id": job.job_id})
            base = self.registry.get(LATEST)
            delta = job.delta
            others = [r for r in self.enrollments if r not in delta]
            levels = dict(self.policy.persons)

        loss_log: list = []
        try:
            new_set = self._load_records(delta)
            store = self._load_records(others) if job.trigger != "manual" else None
            params, gallery = incremental_update(
                base.params, base.gallery, new_set,
                cfg=self.train_config,
                enrollment_store=store,
                new_person_levels=levels,
                loss_log=loss_log,
            )
        except SofError as exc:
            with self._lock:
                job.state = FAILED
                job.error = f"{type(exc).__name__}: {exc}"
                self._running_job = None
                append_jsonl(self.root / "joblog.jsonl",
                             {"ts": self.clock(), "event": "failed",
                              "job_id": job.job_id, "error": job.error})
            raise

        with self._lock:
            snapshot = ModelSnapshot(
                version=base.version + 1,
                params=params,
                gallery=gallery,
                tau_accept=base.tau_accept,
                created_at=self.clock(),
            )
            self.registry.append(snapshot)
            self._persist_snapshot(snapshot)
            write_json(self.root / "models" / f"manifest_v{snapshot.version}.json", {
                "job_id": job.job_id,
                "trigger": job.trigger,
                "records": len(delta),
                "config": self.train_config.to_dict(),
                "epoch_losses": loss_log,
                "base_version": base.version,
                "produced_version": snapshot.version,
                "created_at": snapshot.created_at,
            })
            job.state = DONE
            job.produced_version = snapshot.version
            self._running_job = None
            self._persist_core()
            append_jsonl(self.root / "joblog.jsonl",
                         {"ts": self.clock(), "event": "done",
                          "job_id": job.job_id, "produced_version": snapshot.version})
            self._emit({"type": "model_version", "version": snapshot.version})
            self._broadcast(snapshot)
            return snapshot

    def run_pending_jobs(self) -> list[TrainingJob]:
        """Drain the queue in order; failed jobs do not block later ones."""
        done = []
        while True:
            queue = self.pending_jobs()
            if not queue:
                return done
            job = queue[0]
            try:
                self.run_training_job(job)
            except SofError:
                pass
            done.append(job)

    def _load_records(self, records) -> LabeledChipSet:
        chips = []
        for rec in records:
            chip = read_chip(self.root / "chips" / rec.chip_file)
            chips.append(LabeledChip(chip=chip, person_id=rec.person_id, source=rec.source))
        return LabeledChipSet(tuple(chips))

    # -- access control ------------------------------------------------------

    def check_access(self, person_id: str, device_id: str) -> str:
        """Evaluate the ACL and append the outcome to the access log."""
        with self._lock:
            outcome = check_access(person_id, device_id, self.policy)
            append_jsonl(self.root / "access.jsonl",
                         {"ts": self.clock(), "person": person_id,
                          "device": device_id, "outcome": outcome, "kind": "check"})
            return outcome

    def record_decision(self, decision: dict) -> None:
        """Store a node's recognition decision in the access log."""
        with self._lock:
            append_jsonl(self.root / "access.jsonl",
                         {**decision, "kind": "recognition"})

    def access_log(self) -> list[dict]:
        with self._lock:
            return read_jsonl(self.root / "access.jsonl")

    # -- policy / persons ------------------------------------------------------

    def get_policy(self) -> AccessPolicy:
        with self._lock:
            return self.policy

    def put_policy(self, doc: dict) -> AccessPolicy:
        with self._lock:
            self.policy = AccessPolicy.from_dict(doc)
            self._persist_core()
            return self.policy

    def set_device(self, device_id: str, name: str, min_level: int,
                   restricted: bool = False) -> AccessPolicy:
        with self._lock:
            self.policy = self.policy.with_device(
                device_id, DevicePolicy(name, min_level, restricted))
            self._persist_core()
            return self.policy

    def persons(self) -> dict[str, int]:
        with self._lock:
            return dict(sorted(self.policy.persons.items()))

    # -- snapshots ------------------------------------------------------

    def snapshot_for(self, version=LATEST) -> ModelSnapshot:
        with self._lock:
            return self.registry.get(version)

    def model_infos(self) -> list[dict]:
        with self._lock:
            return [{
                "version": s.version,
                "created_at": s.created_at,
                "gallery_size": len(s.gallery),
                "tau_accept": s.tau_accept,
            } for s in self.registry.snapshots]

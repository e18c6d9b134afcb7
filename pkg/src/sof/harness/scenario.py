"""End-to-end scenario runner: in-process hub, nodes, and social server
driven by a simulated clock.

Events are dispatched in time order on a single thread; training jobs run
synchronously at their dequeue point; EXPECT events check predicates and
become report entries rather than errors. Given (scenario, seed), the
report is byte-identical across runs: nothing reads the wall clock.
"""

from __future__ import annotations

import json
import tempfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..cloudhub.hub import CloudHub
from ..cloudhub.policy import check_access
from ..edgenode import node as edge
from ..errors import ScenarioError, SofError
from ..social.ingest import ingest
from ..social.server import GraphServer
from .synth import (
    draw_doorway_params,
    generate_corpus,
    identity_from_seed,
    render_chip,
)

EVENT_TYPES = ("NODE_FRAME", "OWNER_LABEL", "SOCIAL_INGEST", "EXPECT")


@dataclass
class Scenario:
    seed: int
    events: list[dict]

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        events = doc.get("events", [])
        last_t = None
        for ev in events:
            if ev.get("type") not in EVENT_TYPES:
                raise ScenarioError(f"unknown event type {ev.get('type')!r}")
            t = ev.get("t")
            if not isinstance(t, int):
                raise ScenarioError(f"event missing integer timestamp: {ev}")
            if last_t is not None and t < last_t:
                raise ScenarioError("events must be time-ordered")
            last_t = t
        return cls(seed=int(doc.get("seed", 0)), events=list(events))

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class _NodeRuntime:
    state: edge.NodeState
    decisions: list[dict] = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)


class ScenarioRunner:
    def __init__(self, scenario: Scenario, workdir):
        self.scenario = scenario
        self.workdir = Path(workdir)
        self.now = 0
        self.hub = CloudHub(self.workdir / "hub", clock=lambda: self.now)
        self.nodes: dict[str, _NodeRuntime] = {}
        self.expectations: list[dict] = []
        self.escalation_count = 0
        self._frame_counter = 0
        # identities introduced by generated ingest corpora, keyed by name,
        # so later NODE_FRAME events render the same face
        self.known_identities: dict[str, object] = {}

    # -- node management ----------------------------------------------------

    def _node(self, node_id: str) -> _NodeRuntime:
        if node_id not in self.nodes:
            runtime = _NodeRuntime(state=edge.initial_state(
                node_id, device_id="front_door",
                snapshot=self.hub.snapshot_for(),
                device_min_level=1))
            self.nodes[node_id] = runtime
            self.hub.register_node_listener(
                lambda snap, nid=node_id: self._apply_update(nid, snap))
        return self.nodes[node_id]

    def _apply_update(self, node_id: str, snapshot) -> None:
        runtime = self.nodes[node_id]
        runtime.state, effects = edge.apply_model_update(runtime.state, snapshot)
        self._consume_effects(runtime, effects)

    def _consume_effects(self, runtime: _NodeRuntime, effects) -> None:
        for effect in effects:
            if isinstance(effect, edge.DecisionEffect):
                doc = effect.decision.to_dict()
                doc["node"] = runtime.state.node_id
                runtime.decisions.append(doc)
                self.hub.record_decision(doc)
            elif isinstance(effect, edge.LogEffect):
                # the node's local append-only decision log
                log_path = self.workdir / f"node_{runtime.state.node_id}_decisions.jsonl"
                with open(log_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(effect.entry, sort_keys=True,
                                        separators=(",", ":")))
                    fh.write("\n")
            elif isinstance(effect, edge.EscalationEffect):
                self.escalation_count += 1
                self.hub.ingest_escalation(effect.series)
            elif isinstance(effect, edge.DiagnosticEffect):
                runtime.diagnostics.append(
                    {"code": effect.code, "detail": effect.detail, "ts": self.now})

    # -- event dispatch -------------------------------------------------------

    def run(self) -> dict:
        for index, ev in enumerate(self.scenario.events):
            self.step(ev, index)
        return self.report()

    def step(self, ev: dict, index: int) -> None:
        """Dispatch one event; queued training jobs run before control returns."""
        self.now = ev["t"]
        self._tick_nodes()
        kind = ev["type"]
        if kind == "NODE_FRAME":
            self._on_frame(ev, index)
        elif kind == "OWNER_LABEL":
            self._on_label(ev)
        elif kind == "SOCIAL_INGEST":
            self._on_ingest(ev)
        elif kind == "EXPECT":
            self._on_expect(ev)
        self.hub.run_pending_jobs()

    def _tick_nodes(self) -> None:
        for runtime in self.nodes.values():
            runtime.state, effects = edge.handle_tick(runtime.state, self.now)
            self._consume_effects(runtime, effects)

    def _person_name(self, ev: dict) -> str:
        name = ev.get("identity") or ev.get("stranger")
        if not name:
            raise ScenarioError(f"NODE_FRAME needs 'identity' or 'stranger': {ev}")
        return name

    def _on_frame(self, ev: dict, index: int) -> None:
        runtime = self._node(ev.get("node", "n1"))
        self._frame_counter += 1
        if ev.get("no_face"):
            frame = edge.FrameEvent(self.now, np.zeros((96, 96)), None)
        else:
            name = self._person_name(ev)
            key = zlib.crc32(name.encode("utf-8")) & 0x7FFFFFFF
            ident = self.known_identities.get(name)
            if ident is None:
                ident = identity_from_seed(name, self.scenario.seed, key)
            rp = draw_doorway_params(
                np.random.default_rng([self.scenario.seed, 5, key, self._frame_counter]))
            chip, landmarks = render_chip(
                ident, rp, seed=self._frame_seed(key))
            frame = edge.FrameEvent(self.now, chip.pixels[:, :, 0], landmarks)
        runtime.state, effects = edge.handle_frame(runtime.state, frame)
        self._consume_effects(runtime, effects)

    def _frame_seed(self, key: int) -> int:
        return (self.scenario.seed * 1_000_003 + key) * 1_000_003 + self._frame_counter

    def _on_label(self, ev: dict) -> None:
        alert_id = ev.get("alert", "latest")
        if alert_id == "latest":
            pending = self.hub.get_alerts(status="PENDING")
            if not pending:
                raise ScenarioError("OWNER_LABEL with no pending alert")
            alert_id = pending[-1].alert_id
        try:
            self.hub.label_alert(alert_id, ev["person"])
        except KeyError as exc:
            raise ScenarioError(f"label failed: {exc}") from exc

    def _on_ingest(self, ev: dict) -> None:
        corpus = ev["corpus"]
        if isinstance(corpus, dict):
            corpus_dir = Path(tempfile.mkdtemp(prefix="scenario-corpus-",
                                               dir=self.workdir))
            corpus_seed = corpus.get("seed", self.scenario.seed)
            generate_corpus(corpus["identities"], corpus["chips"],
                            corpus_seed, corpus_dir)
            for i in range(corpus["identities"]):
                name = f"person_{i:02d}"
                self.known_identities[name] = identity_from_seed(name, corpus_seed, i)
        else:
            corpus_dir = Path(corpus)
        with GraphServer(corpus_dir) as server:
            chip_set, _report = ingest(server.endpoint, set(ev["consent"]),
                                       already_ingested=self.hub.ingested_keys)
        labeled = []
        for i, rec in enumerate(chip_set):
            labeled.append((rec.person_id, f"{ev['t']}_{i}", rec.chip))
        self.hub.add_social_records(labeled)

    # -- expectations ----------------------------------------------------------

    def _on_expect(self, ev: dict) -> None:
        that = ev.get("that")
        if not isinstance(that, dict) or len(that) != 1:
            raise ScenarioError(f"EXPECT needs a single-predicate 'that': {ev}")
        (pred, arg), = that.items()
        try:
            ok = self._evaluate(pred, arg)
        except SofError as exc:
            raise ScenarioError(f"bad EXPECT {pred}: {exc}") from exc
        desc = ev.get("desc") or f"{pred}={json.dumps(arg, sort_keys=True)}"
        self.expectations.append({"desc": desc, "pass": bool(ok), "t": ev["t"]})

    def _evaluate(self, pred: str, arg) -> bool:
        if pred == "alert_count":
            if isinstance(arg, dict):
                return len(self.hub.get_alerts(arg.get("status"))) == arg["equals"]
            return len(self.hub.get_alerts()) == arg
        if pred == "model_version":
            return self.hub.snapshot_for().version == arg
        if pred == "escalation_count":
            return self.escalation_count == arg
        if pred == "person_exists":
            return arg in self.hub.policy.persons
        if pred == "last_decision":
            decisions = self._decisions(arg.get("node"))
            if not decisions:
                return False
            last = decisions[-1]
            return all(last.get(k) == v for k, v in arg.items() if k != "node")
        if pred == "decision_count":
            decisions = self._decisions(arg.get("node"))
            matching = [d for d in decisions
                        if all(d.get(k) == v for k, v in arg.items()
                               if k not in ("node", "equals"))]
            return len(matching) == arg["equals"]
        if pred == "access":
            outcome = check_access(arg["person"], arg["device"], self.hub.policy)
            return outcome == arg["outcome"]
        raise ScenarioError(f"unknown predicate {pred!r}")

    def _decisions(self, node_id=None) -> list[dict]:
        if node_id:
            return self.nodes[node_id].decisions if node_id in self.nodes else []
        out = []
        for runtime in self.nodes.values():
            out.extend(runtime.decisions)
        out.sort(key=lambda d: d["ts"])
        return out

    # -- report ------------------------------------------------------------------

    def report(self) -> dict:
        return {
            "expectations": [{"desc": e["desc"], "pass": e["pass"]}
                             for e in self.expectations],
            "traces": {
                "decisions": self._decisions(),
                "alerts": [a.to_dict() for a in self.hub.get_alerts()],
                "versions": self.hub.registry.versions(),
                "diagnostics": [d for rt in self.nodes.values()
                                for d in rt.diagnostics],
            },
        }


def run_scenario(scenario: Scenario | dict, workdir=None) -> dict:
    """Run a scenario in a scratch directory; returns the report dict."""
    if isinstance(scenario, dict):
        scenario = Scenario.from_dict(scenario)
    if workdir is None:
        with tempfile.TemporaryDirectory(prefix="sof-scenario-") as tmp:
            return ScenarioRunner(scenario, tmp).run()
    return ScenarioRunner(scenario, workdir).run()


def all_passed(report: dict) -> bool:
    return all(e["pass"] for e in report["expectations"])

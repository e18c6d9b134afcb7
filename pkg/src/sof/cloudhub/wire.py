"""sof-wire/1: node-to-hub protocol.

Line-delimited JSON over one persistent TCP stream. Every message carries
`proto` and a per-sender strictly increasing `seq`. The hub pushes
MODEL_UPDATE to stale nodes on HELLO and to every connected node when a
new version lands; PING/PONG heartbeats keep the link observable.
"""

from __future__ import annotations

import base64
import json
import socket
import threading
from typing import Callable, Optional

from ..edgenode.node import PhotoSeries
from ..errors import CorruptSnapshot, SofError
from ..facecore.chips import chip_to_netpbm, netpbm_to_chip
from ..snapshot import ModelSnapshot, snapshot_from_dict, snapshot_to_dict
from .hub import CloudHub

PROTO = "sof-wire/1"
HEARTBEAT_S = 10.0

HELLO = "HELLO"
MODEL_UPDATE = "MODEL_UPDATE"
RECOGNITION_EVENT = "RECOGNITION_EVENT"
ESCALATION = "ESCALATION"
PING = "PING"
PONG = "PONG"


class WireProtocolError(SofError):
    pass


def series_to_dict(series: PhotoSeries) -> dict:
    return {
        "series_id": series.series_id,
        "node_id": series.node_id,
        "first_seen": series.first_seen,
        "chips": [base64.b64encode(chip_to_netpbm(c)).decode("ascii")
                  for c in series.chips],
    }


def series_from_dict(doc: dict) -> PhotoSeries:
    return PhotoSeries(
        series_id=doc["series_id"],
        node_id=doc["node_id"],
        first_seen=int(doc["first_seen"]),
        chips=tuple(netpbm_to_chip(base64.b64decode(b)) for b in doc["chips"]),
    )


class _Peer:
    """One side of a wire connection: framed sends with seq, validated reads."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.reader = sock.makefile("r", encoding="utf-8", newline="\n")
        self._send_lock = threading.Lock()
        self._send_seq = 0
        self._last_recv_seq = 0

    def send(self, msg_type: str, **fields) -> None:
        with self._send_lock:
            self._send_seq += 1
            doc = {"proto": PROTO, "seq": self._send_seq, "type": msg_type, **fields}
            try:
                self.sock.sendall((json.dumps(doc) + "\n").encode("utf-8"))
            except OSError as exc:
                raise WireProtocolError(f"send failed: {exc}") from exc

    def recv(self) -> Optional[dict]:
        """Next message, or None when the stream closed."""
        try:
            line = self.reader.readline()
        except OSError:
            return None
        if not line:
            return None
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise WireProtocolError(f"bad frame: {exc}") from exc
        if doc.get("proto") != PROTO:
            raise WireProtocolError(f"unsupported proto {doc.get('proto')!r}")
        seq = doc.get("seq")
        if not isinstance(seq, int) or seq <= self._last_recv_seq:
            raise WireProtocolError(
                f"seq must increase: got {seq!r} after {self._last_recv_seq}")
        self._last_recv_seq = seq
        return doc

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


class WireServer:
    """Hub-side wire endpoint; one reader thread per connected node."""

    def __init__(self, hub: CloudHub, port: int = 0,
                 heartbeat_s: float = HEARTBEAT_S):
        self.hub = hub
        self.heartbeat_s = heartbeat_s
        self.listener = socket.create_server(("127.0.0.1", port))
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)

    @property
    def port(self) -> int:
        return self.listener.getsockname()[1]

    def start(self) -> "WireServer":
        self._accept_thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        try:
            self.listener.close()
        except OSError:
            pass

    def __enter__(self) -> "WireServer":
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, _ = self.listener.accept()
            except OSError:
                return
            thread = threading.Thread(target=self._serve_peer, args=(sock,), daemon=True)
            thread.start()
            self._threads.append(thread)

    def _serve_peer(self, sock: socket.socket) -> None:
        peer = _Peer(sock)
        listener_id = None
        stop_heartbeat = threading.Event()

        def heartbeat():
            while not stop_heartbeat.wait(self.heartbeat_s):
                try:
                    peer.send(PING)
                except WireProtocolError:
                    return

        hb_thread = threading.Thread(target=heartbeat, daemon=True)
        hb_thread.start()
        try:
            while True:
                msg = peer.recv()
                if msg is None:
                    return
                mtype = msg["type"]
                if mtype == HELLO:
                    node_version = int(msg.get("model_version", 0))
                    listener_id = self.hub.register_node_listener(
                        lambda snap: self._push_snapshot(peer, snap))
                    latest = self.hub.snapshot_for()
                    if node_version < latest.version:
                        self._push_snapshot(peer, latest)
                elif mtype == RECOGNITION_EVENT:
                    self.hub.record_decision(msg["decision"])
                elif mtype == ESCALATION:
                    self.hub.ingest_escalation(series_from_dict(msg["series"]))
                elif mtype == PING:
                    peer.send(PONG)
                elif mtype == PONG:
                    pass
                else:
                    raise WireProtocolError(f"unknown message type {mtype!r}")
        except (WireProtocolError, CorruptSnapshot, KeyError):
            pass  # drop the misbehaving connection
        finally:
            stop_heartbeat.set()
            if listener_id is not None:
                self.hub.unregister_node_listener(listener_id)
            peer.close()

    def _push_snapshot(self, peer: _Peer, snapshot: ModelSnapshot) -> None:
        try:
            peer.send(MODEL_UPDATE, snapshot=snapshot_to_dict(snapshot))
        except WireProtocolError:
            pass


class WireClient:
    """Node-side wire endpoint.

    Sends HELLO on connect; MODEL_UPDATE frames invoke on_snapshot (e.g. a
    node's apply_model_update); PINGs are answered automatically.
    """

    def __init__(self, host: str, port: int, node_id: str, model_version: int = 0,
                 on_snapshot: Callable[[ModelSnapshot], None] | None = None,
                 heartbeat_s: float = HEARTBEAT_S):
        self.node_id = node_id
        self.on_snapshot = on_snapshot
        self.heartbeat_s = heartbeat_s
        sock = socket.create_connection((host, port), timeout=10)
        sock.settimeout(None)
        self.peer = _Peer(sock)
        self._stop = threading.Event()
        self.peer.send(HELLO, node_id=node_id, model_version=model_version)
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self._hb = threading.Thread(target=self._heartbeat_loop, daemon=True)
        self._hb.start()

    def _read_loop(self) -> None:
        try:
            while not self._stop.is_set():
                msg = self.peer.recv()
                if msg is None:
                    return
                if msg["type"] == MODEL_UPDATE:
                    if self.on_snapshot is not None:
                        self.on_snapshot(snapshot_from_dict(msg["snapshot"]))
                elif msg["type"] == PING:
                    self.peer.send(PONG)
        except (WireProtocolError, CorruptSnapshot, KeyError):
            pass

    def _heartbeat_loop(self) -> None:
        while not self._stop.wait(self.heartbeat_s):
            try:
                self.peer.send(PING)
            except WireProtocolError:
                return

    def send_decision(self, decision: dict) -> None:
        self.peer.send(RECOGNITION_EVENT, decision=decision)

    def send_escalation(self, series: PhotoSeries) -> None:
        self.peer.send(ESCALATION, series=series_to_dict(series))

    def close(self) -> None:
        self._stop.set()
        self.peer.close()

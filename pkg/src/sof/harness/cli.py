"""The `sof` command line: corpus generation, training, evaluation,
scenario replay, and the live hub.

Training flags mirror TrainConfig fields; every run writes a manifest next
to its model so results can be audited and reproduced.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import time
from pathlib import Path

import numpy as np

from ..cloudhub.api import HubApiServer
from ..cloudhub.hub import CloudHub
from ..cloudhub.wire import WireClient
from ..edgenode.node import PhotoSeries
from ..facecore.embedder import init_params
from ..facecore.gallery import IdentityGallery
from ..snapshot import (
    DEFAULT_TAU_ACCEPT,
    ModelSnapshot,
    snapshot_from_json,
    snapshot_to_json,
)
from ..social.corpus import (
    corpus_to_chip_set,
    make_verification_pairs,
    split_chip_set,
)
from ..social.server import serve_graph
from ..trainer.config import TrainConfig
from ..trainer.evaluation import calibrate_threshold, evaluate_pairs
from ..trainer.training import rebuild_gallery, train
from .scenario import Scenario, all_passed, run_scenario
from .synth import draw_doorway_params, generate_corpus, identity_from_seed, render_chip


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--margin", type=float, default=0.2)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--mining", choices=["all", "semi-hard"], default="semi-hard")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--freeze-first-layer", action="store_true")


def _config_from_args(args) -> TrainConfig:
    return TrainConfig(margin=args.margin, learning_rate=args.lr,
                       epochs=args.epochs, batch_size=args.batch_size,
                       mining_mode=args.mining, rng_seed=args.seed,
                       freeze_first_layer=args.freeze_first_layer)


def _write_manifest(path: Path, cfg: TrainConfig, losses, extra: dict) -> None:
    doc = {"config": cfg.to_dict(), "epoch_losses": losses, **extra}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_gen_corpus(args) -> int:
    out = generate_corpus(args.identities, args.chips, args.seed, args.out,
                          noise_sigma=args.noise_sigma)
    print(f"wrote {args.identities}x{args.chips} corpus to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    chip_set = corpus_to_chip_set(args.corpus)
    train_set, val_set = split_chip_set(chip_set, args.val_fraction)
    params = init_params(seed=args.init_seed)
    params, losses = train(train_set, params, cfg)

    pairs = make_verification_pairs(val_set, args.pairs, seed=cfg.rng_seed)
    report = evaluate_pairs(pairs, params)
    tau = calibrate_threshold(report, args.target_far)
    gallery = rebuild_gallery(train_set, params, IdentityGallery({}))
    snapshot = ModelSnapshot(version=1, params=params, gallery=gallery,
                             tau_accept=tau, created_at=int(time.time() * 1000))

    out = Path(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(snapshot_to_json(snapshot))
        fh.write("\n")
    _write_manifest(out.with_suffix(".manifest.json"), cfg, losses, {
        "val_auc": report.auc,
        "val_accuracy": report.mean_accuracy,
        "val_accuracy_std": report.std_accuracy,
        "tau_accept": tau,
    })
    print(f"trained {cfg.epochs} epochs: loss {losses[0]:.4f} -> {losses[-1]:.4f}, "
          f"val AUC {report.auc:.4f}, acc {report.mean_accuracy:.4f}, tau {tau:.4f}")
    return 0


def cmd_eval(args) -> int:
    snapshot = _load_snapshot(args.model)
    chip_set = corpus_to_chip_set(args.corpus)
    pairs = make_verification_pairs(chip_set, args.pairs, seed=args.seed)
    report = evaluate_pairs(pairs, snapshot.params)
    print(json.dumps(report.to_dict() | {"model_version": snapshot.version},
                     indent=2, sort_keys=True))
    return 0


def cmd_finetune(args) -> int:
    from ..trainer.training import incremental_update

    snapshot = _load_snapshot(args.model)
    new_data = corpus_to_chip_set(args.corpus)
    cfg = _config_from_args(args)
    params, gallery = incremental_update(snapshot.params, snapshot.gallery,
                                         new_data, cfg=cfg)
    out_snapshot = ModelSnapshot(version=snapshot.version + 1, params=params,
                                 gallery=gallery, tau_accept=snapshot.tau_accept,
                                 created_at=int(time.time() * 1000))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(snapshot_to_json(out_snapshot))
        fh.write("\n")
    print(f"fine-tuned v{snapshot.version} -> v{out_snapshot.version}; "
          f"gallery {len(gallery)} identities")
    return 0


def _load_snapshot(path) -> ModelSnapshot:
    with open(path, "r", encoding="utf-8") as fh:
        return snapshot_from_json(fh.read())


def cmd_run_scenario(args) -> int:
    scenario = Scenario.load(args.scenario)
    report = run_scenario(scenario)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
    for entry in report["expectations"]:
        print(("PASS" if entry["pass"] else "FAIL"), entry["desc"])
    ok = all_passed(report)
    print("scenario", "PASSED" if ok else "FAILED")
    return 0 if ok else 1


def cmd_serve(args) -> int:
    hub = CloudHub(args.persist)
    from ..cloudhub.wire import WireServer

    wire = WireServer(hub, port=args.wire_port).start()
    api = HubApiServer(hub, port=args.http_port, console_dir=args.console,
                       sse_heartbeat_s=args.sse_heartbeat).start()
    graph = None
    if args.graph_corpus:
        graph = serve_graph(args.graph_corpus, port=args.graph_port)
        print(f"graph:  {graph.endpoint}")
    print(f"hub:    {api.endpoint}")
    print(f"wire:   127.0.0.1:{wire.port}")
    print("ready", flush=True)

    stop = []
    signal.signal(signal.SIGTERM, lambda *a: stop.append(1))
    signal.signal(signal.SIGINT, lambda *a: stop.append(1))
    try:
        while not stop:
            time.sleep(0.1)
    finally:
        api.stop()
        wire.stop()
        if graph:
            graph.stop()
    return 0


def cmd_send_escalation(args) -> int:
    """Push a synthetic photo series to a live hub over the wire protocol."""
    host, port = args.wire.split(":")
    key = abs(hash(args.name)) % (2 ** 31)
    ident = identity_from_seed(args.name, args.seed, key)
    chips = []
    first_seen = int(time.time() * 1000)
    for k in range(args.chips):
        rp = draw_doorway_params(np.random.default_rng([args.seed, 5, key, k]))
        chip, _ = render_chip(ident, rp, seed=args.seed * 1_000_003 + k)
        chips.append(chip)
    series = PhotoSeries(series_id=args.series_id, node_id=args.node_id,
                         chips=tuple(chips), first_seen=first_seen)
    client = WireClient(host, int(port), node_id=args.node_id)
    client.send_escalation(series)
    time.sleep(args.linger)
    client.close()
    print(f"sent series {args.series_id} ({args.chips} chips)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sof", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a synthetic photo corpus")
    p.add_argument("--identities", type=int, required=True)
    p.add_argument("--chips", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--noise-sigma", type=float, default=0.02)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train", help="train an embedder on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--pairs", type=int, default=300)
    p.add_argument("--target-far", type=float, default=0.02)
    p.add_argument("--init-seed", type=int, default=0)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--pairs", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("finetune", help="incrementally fine-tune a model")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("run-scenario", help="replay a scenario file")
    p.add_argument("scenario")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_run_scenario)

    p = sub.add_parser("serve", help="run hub + wire + HTTP API (+ console)")
    p.add_argument("--persist", required=True)
    p.add_argument("--http-port", type=int, default=0)
    p.add_argument("--wire-port", type=int, default=0)
    p.add_argument("--console", help="directory of built console assets")
    p.add_argument("--graph-corpus", help="also serve a mock graph from this corpus")
    p.add_argument("--graph-port", type=int, default=0)
    p.add_argument("--sse-heartbeat", type=float, default=10.0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("send-escalation", help="push a synthetic escalation to a hub")
    p.add_argument("--wire", required=True, help="host:port of the wire endpoint")
    p.add_argument("--series-id", required=True)
    p.add_argument("--node-id", default="cli-node")
    p.add_argument("--name", default="visitor")
    p.add_argument("--chips", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--linger", type=float, default=0.3)
    p.set_defaults(func=cmd_send_escalation)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

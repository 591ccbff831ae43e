"""Command-line entry point.

Subcommands: validate, enumerate, derive, train, eval, export-dot, serve.
Exit codes: 0 success, 1 domain error (bad shapes, hash mismatch, ...),
2 usage error (unknown flags, unreadable paths, out-of-range arguments).
Every report has a --json mode; train streams "iter,loss" lines.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import backprop as bp
from . import capsule as cm
from . import generation as gen
from . import model_io as mio
from .errors import CapsForgeError
from .graph import classify_layering


def _read_text(path: str, parser: argparse.ArgumentParser) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        parser.error(f"cannot read {path}: {e.strerror}")


def _emit_json(obj) -> None:
    sys.stdout.write(mio.canonical_json(obj))


# --- validate -----------------------------------------------------------------

def cmd_validate(args, parser) -> int:
    text = _read_text(args.graph, parser)
    doc = mio.parse_document(text)
    try:
        net = mio.document_to_network(doc)
    except CapsForgeError as e:
        issues = getattr(e, "issues", None)
        if args.json:
            _emit_json({"valid": False,
                        "errors": ([i.to_json() for i in issues]
                                   if issues else [str(e)])})
        else:
            print("invalid")
            for line in (issues or [e]):
                print(f"  {line}")
        return 1
    report = cm.validate_shapes(net)
    layering = classify_layering(net.dag)
    classification = "layered" if layering is not None else "skip"
    if args.json:
        _emit_json({"valid": True,
                    "shapes": {vid: list(s) for vid, s in report.shapes.items()},
                    "classification": classification})
    else:
        print("valid")
        for vid in net.dag.vertices:
            shape = "x".join(str(d) for d in report.shapes[vid])
            print(f"  {vid}: {shape}")
        print(f"classification: {classification}")
    return 0


# --- enumerate ----------------------------------------------------------------

def cmd_enumerate(args, parser) -> int:
    if args.inputs not in (1, 2):
        parser.error("--inputs must be 1 or 2")
    if not 1 <= args.generations <= 3:
        parser.error("--generations must be between 1 and 3")
    base = gen.one_one_network() if args.inputs == 1 else gen.two_one_network()
    rows = []
    for g in range(1, args.generations + 1):
        row = {"generation": g,
               "count": gen.count_growth_descendants(base, g)}
        if args.dedup:
            row["distinct"] = gen.count_distinct_growth_descendants(base, g)
        rows.append(row)
    if args.json:
        _emit_json({"inputs": args.inputs, "rows": rows})
    else:
        header = "generation,count" + (",distinct" if args.dedup else "")
        print(header)
        for row in rows:
            line = f"{row['generation']},{row['count']}"
            if args.dedup:
                line += f",{row['distinct']}"
            print(line)
    return 0


# --- derive -------------------------------------------------------------------

def cmd_derive(args, parser) -> int:
    text = _read_text(args.graph, parser)
    net = mio.parse_graph_document(text)
    steps = gen.derive_generation_sequence(net.dag)
    verified = None
    if args.verify:
        replayed = gen.replay(steps)
        verified = (set(replayed.to_dag().edges) == set(net.dag.edges)
                    and set(replayed.node_ids) == set(net.dag.vertices))
    if args.json:
        payload = {"steps": [{"rule": s.rule, "new_id": s.new_id,
                              "sources": list(s.sources),
                              "groups": [list(g) for g in s.groups]}
                             for s in steps]}
        if verified is not None:
            payload["verified"] = verified
        _emit_json(payload)
    else:
        for i, step in enumerate(steps, start=1):
            print(f"{i}. {step.describe()}")
        if verified is not None:
            print(f"verified: {'edge sets match' if verified else 'MISMATCH'}")
    return 0 if verified in (None, True) else 1


# --- train / eval ----------------------------------------------------------------

def _dataset_spec_for(net: cm.CapsuleNetwork, args,
                      parser) -> mio.DatasetSpec:
    parts = net.parts
    if len(net.input_shapes) != 1 or len(parts.outputs) != 1:
        parser.error("training data files need a single-input single-output "
                     "network")
    report = cm.validate_shapes(net)
    feature_shape = net.input_shapes[parts.inputs[0]]
    target_shape = report.shapes[parts.outputs[0]]
    if args.data_format == "idx" and not args.labels:
        parser.error("--data-format idx requires --labels")
    return mio.DatasetSpec(args.data_format, tuple(feature_shape),
                           tuple(target_shape), labels_path=args.labels,
                           dtype=net.dtype)


def cmd_train(args, parser) -> int:
    text = _read_text(args.graph, parser)
    doc = mio.parse_document(text)
    net = mio.document_to_network(doc)
    spec = _dataset_spec_for(net, args, parser)
    pairs = mio.load_dataset(args.data, spec)
    config = bp.TrainConfig(learning_rate=args.lr, max_iter=args.iters,
                            loss=args.loss, seed=args.seed,
                            log_stride=args.log_stride)
    has_payloads = (any(c.bias is not None for c in doc.capsules)
                    or any(c.weight is not None for c in doc.connections))
    init = net.parameters() if has_payloads else None
    if args.json:
        params, history = bp.train(net, pairs, config, init_params=init)
    else:
        def stream(it, lo):
            if it % config.log_stride == 0 or it == config.max_iter:
                print(f"{it},{lo!r}")
        params, history = bp.train(net, pairs, config, init_params=init,
                                   on_iteration=stream)
    if args.checkpoint_out:
        ckpt = mio.checkpoint_from_training(text, params, config.max_iter,
                                            history)
        mio.save_checkpoint(args.checkpoint_out, ckpt)
    if args.json:
        safe = lambda lo: lo if math.isfinite(lo) else None
        payload = {"history": [[it, safe(lo)] for it, lo in history],
                   "final_loss": safe(history[-1][1])}
        if args.checkpoint_out:
            payload["checkpoint"] = args.checkpoint_out
        _emit_json(payload)
    return 0


def cmd_eval(args, parser) -> int:
    text = _read_text(args.graph, parser)
    net = mio.parse_graph_document(text)
    ckpt = mio.load_checkpoint(args.checkpoint, expected_document=text)
    params = mio.checkpoint_parameters(ckpt, net)
    spec = _dataset_spec_for(net, args, parser)
    pairs = mio.load_dataset(args.data, spec)
    report = bp.evaluate(net, pairs, params, loss_fn=args.loss)
    if args.json:
        safe = dict(report)
        if not math.isfinite(safe["mean_loss"]):
            safe["mean_loss"] = None
        _emit_json(safe)
    else:
        print(f"pairs: {report['pairs']}")
        print(f"mean_loss: {report['mean_loss']!r}")
        if "accuracy" in report:
            print(f"accuracy: {report['correct']}/{report['classified']}")
    return 0


# --- export-dot -----------------------------------------------------------------

def cmd_export_dot(args, parser) -> int:
    text = _read_text(args.graph, parser)
    net = mio.parse_graph_document(text)
    dot = mio.export_dot(net)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(dot)
    else:
        sys.stdout.write(dot)
    return 0


# --- serve ----------------------------------------------------------------------

def cmd_serve(args, parser) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(state_dir=args.state_dir), host=args.host,
                port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capsforge",
        description="Capsule computational-graph toolkit: validate, "
                    "enumerate, derive, train, evaluate, export, serve.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("validate", help="shape-check a graph document")
    p.add_argument("graph")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = subs.add_parser("enumerate",
                        help="count networks generated by repeated growth")
    p.add_argument("--inputs", type=int, required=True)
    p.add_argument("--generations", type=int, required=True)
    p.add_argument("--dedup", action="store_true",
                   help="also report isomorphism-deduplicated counts")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_enumerate)

    p = subs.add_parser("derive",
                        help="derive a generation sequence for a document")
    p.add_argument("graph")
    p.add_argument("--verify", action="store_true",
                   help="replay the steps and compare edge sets")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_derive)

    p = subs.add_parser("train", help="full-batch gradient descent")
    p.add_argument("graph")
    p.add_argument("--data", required=True)
    p.add_argument("--data-format", choices=["csv", "idx"], default="csv")
    p.add_argument("--labels", help="labels file for idx datasets")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--loss", choices=list(bp.LOSS_KINDS), default="sse")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-stride", type=int, default=1)
    p.add_argument("--checkpoint-out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("graph")
    p.add_argument("checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--data-format", choices=["csv", "idx"], default="csv")
    p.add_argument("--labels")
    p.add_argument("--loss", choices=list(bp.LOSS_KINDS), default="sse")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("export-dot", help="emit a DOT rendering")
    p.add_argument("graph")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export_dot)

    p = subs.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--state-dir",
                   help="directory for settled job records; restarting then "
                        "loses only in-flight jobs")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except CapsForgeError as e:
        issues = getattr(e, "issues", None)
        if issues:
            for issue in issues:
                print(f"error: {issue}", file=sys.stderr)
        else:
            print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Machine-readable JSON goes to stdout, diagnostics to stderr.  Exit codes:
0 success, 2 usage/config/data errors, 3 numeric failures.  A config file
can come from --config or the SENTORDER_CONFIG environment variable; file
locations (--data, --checkpoint, --out-dir) fall back to config fields.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .autodiff import CheckpointError, NumericError
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .data import (ParseError, SizeError, load_corpus, record_from_dict,
                   record_to_dict, save_corpus, split_corpus, generate_synthetic)
from .decode import beam_decode, forced_path_probs, greedy_decode
from .graph import ValidationError, build_graph
from .metrics import gold_sequence
from .model import Model
from .refine import construct_irse_graph
from .train import (aggregate_eval, derived_seed, eval_one, evaluate_corpus,
                    train_pipeline, _EVAL_ORDER)
from . import autodiff as ad


def _resolve_config(args) -> RunConfig:
    path = args.config or os.environ.get("SENTORDER_CONFIG")
    cfg = load_config(path) if path else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "beam_width", None) is not None:
        cfg.beam_width = args.beam_width
    cfg.validate()
    return cfg


def _need(flag_value, cfg_value, flag: str):
    value = flag_value if flag_value is not None else cfg_value
    if not value:
        raise ConfigError(f"{flag} is required (pass the flag or set it in the config)")
    return value


def _emit(doc) -> None:
    print(json.dumps(doc))


def _pick_split(records, cfg, which: str):
    if which == "all":
        return records
    train, val, test = split_corpus(records, seed=cfg.seed)
    return {"train": train, "val": val, "test": test}[which]


# worker state for --jobs parallelism; each process loads the checkpoint once
_WORKER: dict = {}


def _init_worker(ckpt_path: str, cfg_doc: dict, mode: str, width: int,
                 step_probs: bool = False) -> None:
    _WORKER["model"] = Model.load(ckpt_path)
    _WORKER["cfg"] = config_from_dict(cfg_doc)
    _WORKER["mode"] = mode
    _WORKER["width"] = width
    _WORKER["step_probs"] = step_probs


def _eval_task(payload):
    idx, doc = payload
    return eval_one(_WORKER["model"], _WORKER["cfg"], record_from_dict(doc), idx,
                    _WORKER["mode"], _WORKER["width"])


def _predict_task(payload):
    idx, doc = payload
    return _predict_one(_WORKER["model"], _WORKER["cfg"], record_from_dict(doc), idx,
                        _WORKER["mode"], _WORKER["width"], _WORKER["step_probs"])


def _predict_one(model, cfg, record, idx: int, mode: str, width: int,
                 step_probs: bool) -> dict:
    # same presentation stream as eval, so rows line up across commands
    graph, gold = build_graph(record, derived_seed(cfg.seed, _EVAL_ORDER, idx))
    with ad.no_grad():
        state, _ = construct_irse_graph(model, graph, cfg.delta_min, cfg.delta_max,
                                        cfg.k_max, mode)
        seq = beam_decode(model, state, width) if width > 1 else greedy_decode(model, state)
        row = {"id": record.id, "predicted_order": seq,
               "gold_order": gold_sequence(gold)}
        if step_probs:
            row["step_probs"] = [[float(p) for p in dist]
                                 for dist in forced_path_probs(model, state, seq)]
    return row


def _parallel_map(task, payloads, jobs, initargs):
    if jobs <= 1:
        _init_worker(*initargs)
        return [task(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                             initargs=initargs) as pool:
        return list(pool.map(task, payloads))


def cmd_gen_data(args) -> int:
    cfg = _resolve_config(args)
    synth = cfg.synth()
    if args.n is not None:
        synth.n_paragraphs = args.n
    records = generate_synthetic(synth)
    save_corpus(records, args.out)
    _emit({"written": len(records), "path": args.out})
    return 0


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    data = _need(args.data, cfg.data_path, "--data")
    out_dir = _need(args.out_dir, cfg.out_dir, "--out-dir")
    records = load_corpus(data)
    _, history = train_pipeline(cfg, records, out_dir=out_dir, phases=args.phases,
                                resume=args.resume)
    _emit({"checkpoint": os.path.join(out_dir, "checkpoint.json"),
           "history": history})
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    data = _need(args.data, cfg.data_path, "--data")
    ckpt = _need(args.checkpoint, cfg.checkpoint_path, "--checkpoint")
    records = _pick_split(load_corpus(data), cfg, args.split)
    mode = args.mode or cfg.refine_mode
    if args.jobs > 1:
        payloads = [(idx, record_to_dict(r)) for idx, r in enumerate(records)]
        rows = _parallel_map(_eval_task, payloads, args.jobs,
                             (ckpt, cfg.to_dict(), mode, cfg.beam_width))
        metrics = aggregate_eval(rows)
    else:
        model = Model.load(ckpt)
        metrics = evaluate_corpus(model, records, cfg, mode=mode)
    metrics["mode"] = mode
    metrics["split"] = args.split
    _emit(metrics)
    return 0


def cmd_predict(args) -> int:
    cfg = _resolve_config(args)
    data = _need(args.data, cfg.data_path, "--data")
    ckpt = _need(args.checkpoint, cfg.checkpoint_path, "--checkpoint")
    records = load_corpus(data)
    mode = args.mode or cfg.refine_mode
    payloads = [(idx, record_to_dict(r)) for idx, r in enumerate(records)]
    rows = _parallel_map(_predict_task, payloads, args.jobs,
                         (ckpt, cfg.to_dict(), mode, cfg.beam_width, args.step_probs))
    for row in rows:
        _emit(row)
    return 0


def cmd_inspect_graph(args) -> int:
    cfg = _resolve_config(args)
    data = _need(args.data, cfg.data_path, "--data")
    records = load_corpus(data)
    if args.id is not None:
        matches = [r for r in records if r.id == args.id]
        if not matches:
            raise ParseError(f"no record with id {args.id!r} in {data}")
        record = matches[0]
    else:
        if not (0 <= args.index < len(records)):
            raise ParseError(f"--index {args.index} out of range for {len(records)} records")
        record = records[args.index]
    graph, presented = build_graph(record, None)  # sentences as given in the file
    payload = {"id": record.id,
               "n_sentences": graph.n_sentences,
               "n_entities": graph.n_entities,
               "entities": graph.entity_surfaces,
               "se_edges": [[i, j, role] for (i, j, role) in graph.se_edges],
               "ee_edges": [list(e) for e in graph.ee_edges],
               "ss_pairs": [list(p) for p in graph.linked_pairs()],
               "presented_order": presented}
    if args.checkpoint or cfg.checkpoint_path:
        model = Model.load(args.checkpoint or cfg.checkpoint_path)
        mode = args.mode or cfg.refine_mode
        with ad.no_grad():
            _, info = construct_irse_graph(model, graph, cfg.delta_min, cfg.delta_max,
                                           cfg.k_max, mode)
        payload["refinement"] = {
            "mode": info.mode,
            "weights_initial": [[i, j, w] for (i, j), w in sorted(info.initial_weights.items())],
            "weights_final": [[i, j, w] for (i, j), w in sorted(info.final_weights.items())],
            "vp_sizes": info.vp_sizes,
            "iterations_run": info.iterations_run,
            "converged": info.converged}
    _emit(payload)
    return 0


def cmd_refine_stats(args) -> int:
    cfg = _resolve_config(args)
    data = _need(args.data, cfg.data_path, "--data")
    ckpt = _need(args.checkpoint, cfg.checkpoint_path, "--checkpoint")
    model = Model.load(ckpt)
    records = load_corpus(data)
    if args.limit is not None:
        records = records[:args.limit]
    mode = args.mode or cfg.refine_mode
    per_record = []
    with ad.no_grad():
        for idx, record in enumerate(records):
            graph, _ = build_graph(record, derived_seed(cfg.seed, _EVAL_ORDER, idx))
            _, info = construct_irse_graph(model, graph, cfg.delta_min, cfg.delta_max,
                                           cfg.k_max, mode)
            per_record.append({"id": record.id,
                               "iterations": info.iterations_run,
                               "vp_sizes": info.vp_sizes,
                               "uncertain_initial": len(info.uncertain_initial),
                               "uncertain_final": len(info.uncertain_final),
                               "converged": info.converged})
    n = len(per_record)
    summary = {"n": n, "mode": mode}
    if n:
        summary["iterations_mean"] = sum(r["iterations"] for r in per_record) / n
        summary["iterations_max"] = max(r["iterations"] for r in per_record)
        summary["converged_frac"] = sum(r["converged"] for r in per_record) / n
        summary["uncertain_initial_mean"] = sum(r["uncertain_initial"] for r in per_record) / n
        summary["uncertain_final_mean"] = sum(r["uncertain_final"] for r in per_record) / n
    _emit({"summary": summary, "records": per_record})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sentorder",
        description="Order shuffled paragraph sentences with a refined sentence-entity graph.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (or set SENTORDER_CONFIG)")
    common.add_argument("--seed", type=int, help="override the config seed")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="write a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, help="paragraph count override")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="run the training phases")
    p.add_argument("--data")
    p.add_argument("--out-dir")
    p.add_argument("--phases", default="ABC")
    p.add_argument("--resume", action="store_true",
                   help="skip phases whose checkpoint already exists in --out-dir")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="aggregate ordering metrics")
    p.add_argument("--data")
    p.add_argument("--checkpoint")
    p.add_argument("--split", choices=("train", "val", "test", "all"), default="test")
    p.add_argument("--mode", choices=("full", "initial_only", "frozen"))
    p.add_argument("--beam-width", type=int)
    p.add_argument("--head-tail", action="store_true",
                   help="accepted for compatibility; head/tail accuracy is always reported")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("predict", parents=[common],
                       help="order each record under the same presentation as eval")
    p.add_argument("--data")
    p.add_argument("--checkpoint")
    p.add_argument("--mode", choices=("full", "initial_only", "frozen"))
    p.add_argument("--beam-width", type=int)
    p.add_argument("--step-probs", action="store_true",
                   help="include the per-step distributions along the predicted path")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("inspect-graph", parents=[common], help="dump one record's graph")
    p.add_argument("--data")
    p.add_argument("--id")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--checkpoint", help="also run refinement and report the weight trace")
    p.add_argument("--mode", choices=("full", "initial_only", "frozen"))
    p.set_defaults(fn=cmd_inspect_graph)

    p = sub.add_parser("refine-stats", parents=[common], help="refinement trace statistics")
    p.add_argument("--data")
    p.add_argument("--checkpoint")
    p.add_argument("--mode", choices=("full", "initial_only", "frozen"))
    p.add_argument("--limit", type=int)
    p.set_defaults(fn=cmd_refine_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ParseError, SizeError, ValidationError, CheckpointError,
            FileNotFoundError, IsADirectoryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

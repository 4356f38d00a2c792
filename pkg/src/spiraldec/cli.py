"""Command-line surface.

Machine-readable JSON goes to stdout, human logs to stderr. Exit codes:
0 success, 1 operation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .config import PipelineConfig
from .decoder import build_decoder
from .errors import SpiraldecError
from .mesh import load_obj
from .metrics import f_score, pa_mpjpe, pa_mpvpe
from .regions import RegionPartition, validate_partition, wedge_partition
from .spirals import build_spiral_table
from .synth import synth_dataset
from .training import evaluate, split_dataset, train
from .verification import run_suite


def _sig6(x: float) -> float:
    return float(f"{x:.6g}")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_joints(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        return np.asarray(json.load(fh), dtype=np.float64).reshape(-1, 3)


def _cmd_spirals(args) -> int:
    mesh = load_obj(args.mesh)
    partition = None
    if args.regions:
        with open(args.regions, "r", encoding="utf-8") as fh:
            partition = RegionPartition.from_json(fh.read())
    table = build_spiral_table(mesh, args.length, args.dilation, partition=partition)
    print(table.to_json())
    return 0


def _cmd_regions(args) -> int:
    mesh = load_obj(args.mesh)
    if args.validate:
        with open(args.validate, "r", encoding="utf-8") as fh:
            partition = RegionPartition.from_json(fh.read())
        validate_partition(partition, mesh, require_all_regions=not args.relaxed)
        print(json.dumps({"valid": True, "vertices": partition.vertex_count}))
        return 0
    partition = wedge_partition(mesh)
    validate_partition(partition, mesh, require_all_regions=not args.relaxed)
    print(partition.to_json())
    return 0


def _cmd_metrics(args) -> int:
    pred = load_obj(args.pred).vertices
    gt = load_obj(args.gt).vertices
    out = {
        "pv_mm": _sig6(pa_mpvpe(pred, gt)),
        "f5": _sig6(f_score(pred, gt, 5.0)),
        "f15": _sig6(f_score(pred, gt, 15.0)),
    }
    if args.pred_joints and args.gt_joints:
        out["pj_mm"] = _sig6(pa_mpjpe(_load_joints(args.pred_joints),
                                      _load_joints(args.gt_joints)))
    print(json.dumps(out))
    return 0


def _cmd_gradcheck(args) -> int:
    report = run_suite(h=args.h, tol=args.tol, inject_fault=args.inject_fault)
    print(json.dumps(report))
    return 0 if report["passed"] else 1


def _load_config(args) -> PipelineConfig:
    config = PipelineConfig.load(args.config)
    if args.seed is not None:
        config.seed = args.seed
    return config


def _cmd_synth(args) -> int:
    config = _load_config(args)
    decoder = build_decoder(config)
    samples = synth_dataset(config, decoder.finest_template,
                            chain=(decoder.templates, decoder.upsample_maps))
    arrays = {}
    for view in (1, 2):
        get = lambda s: getattr(s, f"view{view}")
        arrays[f"feature_map{view}"] = np.stack([get(s).feature_map for s in samples])
        arrays[f"landmarks{view}"] = np.stack([get(s).landmarks2d for s in samples])
        arrays[f"landmarks_input{view}"] = np.stack([get(s).landmarks_input for s in samples])
        arrays[f"target{view}"] = np.stack([get(s).target_vertices for s in samples])
    arrays["rotation"] = np.stack([s.view2_to_view1.rotation for s in samples])
    arrays["translation"] = np.stack([s.view2_to_view1.translation for s in samples])
    arrays["scale"] = np.asarray([s.view2_to_view1.scale for s in samples])
    arrays["faces"] = decoder.finest_template.faces
    np.savez(args.out, **arrays)
    print(json.dumps({"samples": len(samples), "vertices": decoder.finest_template.vertex_count,
                      "seed": config.seed, "path": args.out}))
    return 0


def _cmd_train(args) -> int:
    config = _load_config(args)
    _log(f"training: seed={config.seed} epochs={config.epochs}")
    result = train(config, log=sys.stdout)
    if args.out:
        result.decoder.save(args.out)
        _log(f"checkpoint written to {args.out}")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(result.report_lines() + "\n")
    return 0


def _cmd_eval(args) -> int:
    config = _load_config(args)
    decoder = build_decoder(config)
    decoder.load(args.checkpoint)
    dataset = synth_dataset(config, decoder.finest_template,
                            chain=(decoder.templates, decoder.upsample_maps))
    train_set, holdout = split_dataset(config, dataset)
    samples = {"train": train_set, "holdout": holdout, "all": dataset}[args.split]
    out = evaluate(decoder, samples)
    print(json.dumps({k: _sig6(v) for k, v in out.items()}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spiraldec",
                                     description="Spiral-convolution mesh decoder toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spirals", help="mesh -> spiral table JSON")
    p.add_argument("--mesh", required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--dilation", type=int, default=1)
    p.add_argument("--regions", help="region labels JSON; clips spirals to regions")
    p.set_defaults(func=_cmd_spirals)

    p = sub.add_parser("regions", help="emit or validate region partitions")
    p.add_argument("--mesh", required=True)
    p.add_argument("--validate", help="labels JSON to validate instead of emitting")
    p.add_argument("--relaxed", action="store_true",
                   help="allow empty region classes (synthetic fixtures)")
    p.set_defaults(func=_cmd_regions)

    p = sub.add_parser("metrics", help="pred vs gt meshes -> metric JSON")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--pred-joints")
    p.add_argument("--gt-joints")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("gradcheck", help="finite-difference suite; exit 1 on failure")
    p.add_argument("--h", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--inject-fault", choices=("relu", "softmax", "matmul"),
                   help="test hook: corrupt one backward rule; the suite must fail")
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("synth", help="generate the synthetic dataset (npz)")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train on the synthetic task")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="checkpoint path")
    p.add_argument("--report", help="also write the JSONL report here")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--split", choices=("train", "holdout", "all"), default="holdout")
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except SpiraldecError as exc:
        _log(f"error: {exc}")
        return 1
    except OSError as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Training loop, evaluation and the ablation runner for the synthetic task."""

from __future__ import annotations

import copy
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from .autograd import Tensor
from .config import PipelineConfig
from .decoder import Decoder, build_decoder
from .errors import NonFiniteLoss
from .losses import (MeshPrediction, consistency_losses, edge_loss, l1_loss, mesh_loss,
                     normal_loss, pose2d_loss, total_loss)
from .mesh import TriMesh
from .metrics import f_score, pa_mpvpe
from .optim import AdamState, adam_step, zero_grads
from .synth import SyntheticSample, synth_dataset

REPORT_FIELDS = ("epoch", "lr", "loss_total", "loss_mesh", "loss_pose2d", "loss_norm",
                 "loss_edge", "loss_con3d", "loss_con2d", "holdout_pv_mm")


@dataclass
class TrainResult:
    report: list[dict] = field(default_factory=list)
    decoder: Decoder | None = None

    def report_lines(self) -> str:
        return "\n".join(json.dumps(row) for row in self.report)


def lr_for_epoch(config: PipelineConfig, epoch: int) -> float:
    opt = config.optimizer
    if epoch >= opt.decay_epoch:
        return opt.lr / opt.decay_factor
    return opt.lr


def _sample_losses(decoder: Decoder, sample: SyntheticSample) -> dict:
    """All loss terms of one two-view sample (averaged over the views).

    The per-sample reference path; training batches samples through
    :func:`_batch_losses`, which agrees with this up to summation order.
    """
    faces = decoder.finest_template.faces
    terms = {}
    preds = []
    for view in (sample.view1, sample.view2):
        pred = decoder.forward(view.feature_map, view.landmarks_input)
        gt_mesh = TriMesh(view.target_vertices, faces)
        terms.setdefault("mesh", []).append(mesh_loss(pred.vertices, view.target_vertices))
        terms.setdefault("pose2d", []).append(pose2d_loss(pred.landmarks2d, view.landmarks2d))
        terms.setdefault("norm", []).append(normal_loss(pred.vertices, gt_mesh))
        terms.setdefault("edge", []).append(edge_loss(pred.vertices, view.target_vertices, gt_mesh))
        preds.append(pred)
    out = {name: 0.5 * (a + b) for name, (a, b) in terms.items()}
    con3d, con2d = consistency_losses(preds[0], preds[1], sample.view2_to_view1)
    out["con3d"] = con3d
    out["con2d"] = con2d
    return out


def _batch_losses(decoder: Decoder, samples: list[SyntheticSample]) -> dict:
    """Loss terms averaged over a batch, evaluated in one stacked pass."""
    b = len(samples)
    n = decoder.finest_template.vertex_count
    views = [s.view1 for s in samples] + [s.view2 for s in samples]
    pred = decoder.forward_many([v.feature_map for v in views],
                                [v.landmarks_input for v in views])

    targets = np.concatenate([v.target_vertices for v in views])
    faces = decoder.finest_template.faces
    offs = (np.arange(2 * b) * n)[:, None, None]
    stacked_mesh = TriMesh(targets, (faces[None, :, :] + offs).reshape(-1, 3))

    terms = {
        "mesh": mesh_loss(pred, targets),
        "pose2d": float(np.mean([np.abs(v.landmarks_input - v.landmarks2d).mean()
                                 for v in views])),
        "norm": normal_loss(pred, stacked_mesh) * (1.0 / (2 * b)),
        "edge": edge_loss(pred, targets, stacked_mesh) * (1.0 / (2 * b)),
    }

    pred3 = pred.reshape(2 * b, n, 3)
    rots = np.stack([s.view2_to_view1.rotation for s in samples])
    scales = np.array([s.view2_to_view1.scale for s in samples])[:, None, None]
    trans = np.stack([s.view2_to_view1.translation for s in samples])[:, None, :]
    v1 = pred3.take_rows(np.arange(b))
    v2 = pred3.take_rows(np.arange(b, 2 * b))
    v2_aligned = (v2 @ np.swapaxes(rots, 1, 2)) * scales + trans
    terms["con3d"] = l1_loss(v1, v2_aligned)

    con2d = 0.0
    for s in samples:
        lm2 = s.view2_to_view1.apply_points2d(s.view2.landmarks_input)
        con2d += np.abs(s.view1.landmarks_input - lm2).mean()
    terms["con2d"] = con2d / b
    return terms


def _holdout_pv(decoder: Decoder, holdout: list[SyntheticSample]) -> float:
    if not holdout:
        return float("nan")
    pred = decoder.forward_many([s.view1.feature_map for s in holdout],
                                [s.view1.landmarks_input for s in holdout])
    n = decoder.finest_template.vertex_count
    pred3 = pred.data.reshape(len(holdout), n, 3)
    errors = [pa_mpvpe(pred3[i], s.view1.target_vertices) for i, s in enumerate(holdout)]
    return float(np.mean(errors))


def split_dataset(config: PipelineConfig, dataset: list[SyntheticSample]):
    n_train = config.dataset.train_size
    return dataset[:n_train], dataset[n_train:n_train + config.dataset.holdout_size]


def train(config: PipelineConfig, dataset: list[SyntheticSample] | None = None,
          log=None) -> TrainResult:
    """Train a decoder on the synthetic task; deterministic given the config.

    Emits one report row per epoch (row 0 is the untrained model). A
    non-finite loss aborts with a diagnostic dump of the offending batch
    on stderr.
    """
    decoder = build_decoder(config)
    if dataset is None:
        dataset = synth_dataset(config, decoder.finest_template,
                                chain=(decoder.templates, decoder.upsample_maps))
    train_set, holdout = split_dataset(config, dataset)
    if not train_set:
        raise NonFiniteLoss("empty training set")

    params = decoder.params()
    state = AdamState(params, lr=config.optimizer.lr, beta1=config.optimizer.beta1,
                      beta2=config.optimizer.beta2, eps=config.optimizer.eps)
    shuffle_rng = np.random.default_rng([config.seed, 0xA5])
    result = TrainResult(decoder=decoder)

    def weighted(terms: dict) -> dict:
        return {k: float(config.loss_weights.get(k, 1.0)) * float(
            v.data if isinstance(v, Tensor) else v) for k, v in terms.items()}

    def emit(epoch: int, lr: float, term_means: dict):
        row = {"epoch": epoch, "lr": lr,
               "loss_total": float(sum(term_means.values())),
               **{f"loss_{k}": float(v) for k, v in term_means.items()},
               "holdout_pv_mm": _holdout_pv(decoder, holdout)}
        result.report.append(row)
        if log is not None:
            print(json.dumps(row), file=log, flush=True)

    init_rows = [weighted(_batch_losses(decoder, train_set[lo:lo + config.batch_size]))
                 for lo in range(0, len(train_set), config.batch_size)]
    emit(0, lr_for_epoch(config, 1), _mean_dicts(init_rows))

    order = np.arange(len(train_set))
    for epoch in range(1, config.epochs + 1):
        state.lr = lr_for_epoch(config, epoch)
        shuffle_rng.shuffle(order)
        epoch_terms = []
        for lo in range(0, len(order), config.batch_size):
            batch = [train_set[si] for si in order[lo:lo + config.batch_size]]
            zero_grads(params)
            try:
                terms = _batch_losses(decoder, batch)
                loss = total_loss(terms, config.loss_weights)
            except NonFiniteLoss as exc:
                dump = {"epoch": epoch, "batch_start": int(lo),
                        "samples": [int(si) for si in order[lo:lo + config.batch_size]],
                        "error": str(exc)}
                print("non-finite loss, aborting: " + json.dumps(dump), file=sys.stderr)
                raise
            loss.backward()
            epoch_terms.append(weighted(terms))
            adam_step(state, params)
        emit(epoch, state.lr, _mean_dicts(epoch_terms))
    return result


def _mean_dicts(dicts: list[dict]) -> dict:
    keys = dicts[0].keys()
    return {k: float(np.mean([d[k] for d in dicts])) for k in keys}


def evaluate(decoder: Decoder, samples: list[SyntheticSample]) -> dict:
    """Mean PA-MPVPE and F-scores of view-1 predictions over ``samples``."""
    pv, f5, f15 = [], [], []
    for s in samples:
        pred = decoder.predict(s.view1.feature_map, s.view1.landmarks_input)
        gt = s.view1.target_vertices
        pv.append(pa_mpvpe(pred, gt))
        f5.append(f_score(pred, gt, 5.0))
        f15.append(f_score(pred, gt, 15.0))
    return {"pv_mm": float(np.mean(pv)), "f5": float(np.mean(f5)), "f15": float(np.mean(f15))}


def ablation_variants(config: PipelineConfig) -> dict:
    """The committed ablation family: full model, no region layer, K=1."""
    full = copy.deepcopy(config)
    no_roi = copy.deepcopy(config)
    no_roi.roi.kernel = "none"
    k1 = copy.deepcopy(config)
    for st in k1.stages:
        st.kernel_count = 1
    k1.roi.kernel_count = 1
    return {"full": full, "no_roi": no_roi, "k1": k1}


def run_ablation(config: PipelineConfig, seeds: list[int]) -> dict:
    """Final holdout PA-MPVPE per variant and seed, plus medians."""
    results = {name: [] for name in ("full", "no_roi", "k1")}
    for seed in seeds:
        for name, variant in ablation_variants(config).items():
            cfg = copy.deepcopy(variant)
            cfg.seed = int(seed)
            res = train(cfg)
            results[name].append(res.report[-1]["holdout_pv_mm"])
    return {"per_seed": results,
            "median": {name: float(np.median(vals)) for name, vals in results.items()},
            "seeds": list(map(int, seeds))}

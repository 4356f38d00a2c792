"""Finite-difference verification suite over primitives, losses and the
composed micro pipeline."""

from __future__ import annotations

import numpy as np

from . import autograd
from .autograd import Param, Tensor, l1_loss, linear, relu, softmax
from .config import DatasetConfig, OptimizerConfig, PipelineConfig, RoiConfig, StageConfig
from .decoder import build_decoder
from .gradcheck import finite_diff_check
from .layers import (DscParams, SpiralConvParams, dynamic_spiral_conv, grid_sample,
                     kernel_attention, lift, LiftMatrix, roi_conv, spiral_conv,
                     upsample_features)
from .losses import (MeshPrediction, consistency_losses, edge_loss, mesh_loss,
                     normal_loss, pose2d_loss, total_loss)
from .mesh import TriMesh, icosahedron
from .procrustes import SimilarityTransform
from .regions import two_region_partition
from .spirals import build_spiral_table
from .synth import synth_dataset
from .training import _sample_losses
from .upsampling import identity_upsample


def micro_config() -> PipelineConfig:
    """Two scales (12 and 42 vertices), tiny channels: cheap to difference."""
    return PipelineConfig(
        seed=7,
        template_levels=2,
        template_radius=10.0,
        landmarks=4,
        stages=[StageConfig(spiral_length=5, dilation=1, kernel_count=2, channels=6),
                StageConfig(spiral_length=5, dilation=1, kernel_count=2, channels=5)],
        roi=RoiConfig(kernel="dynamic", spiral_length=5, dilation=2, kernel_count=2),
        optimizer=OptimizerConfig(lr=0.001, decay_epoch=2),
        epochs=1,
        batch_size=1,
        dataset=DatasetConfig(train_size=1, holdout_size=1, image_size=5,
                              amplitude=0.6, z_amplitude=0.3),
    )


def _weighted_sum(out: Tensor, rng: np.random.Generator) -> Tensor:
    """Random fixed projection to a scalar, so every output entry matters."""
    return (out * rng.normal(size=out.shape)).sum()


def suite_checks(h: float = 1e-6, tol: float = 1e-5) -> list[tuple[str, object]]:
    """(name, GradCheckReport) for every primitive, loss and the pipeline."""
    checks = []
    rng = np.random.default_rng(20240917)

    def check(name, f, params):
        checks.append((name, finite_diff_check(f, params, h=h, tol=tol)))

    # --- primitives -----------------------------------------------------
    w = Param(rng.normal(size=(4, 3)), name="w")
    b = Param(rng.normal(size=3), name="b")
    x = Param(rng.normal(size=(5, 4)), name="x")
    proj = np.random.default_rng(1).normal(size=(5, 3))
    check("linear", lambda: (linear(x, w, b) * proj).sum(), [x, w, b])

    xs = Param(rng.normal(size=(3, 8)), name="xs")
    check("softmax", lambda: _weighted_sum(softmax(xs), np.random.default_rng(2)), [xs])

    raw = rng.normal(size=(4, 6))
    xr = Param(raw + np.sign(raw) * 0.2, name="xr")  # keep away from the kink
    check("relu", lambda: _weighted_sum(relu(xr), np.random.default_rng(3)), [xr])

    xa = Param(rng.normal(size=(7,)) + np.sign(rng.normal(size=7)) * 0.2, name="xa")
    check("abs", lambda: _weighted_sum(xa.abs(), np.random.default_rng(4)), [xa])

    a = Param(rng.normal(size=(3, 4)), name="a")
    bb = Param(rng.normal(size=(4, 2)), name="b")
    check("matmul", lambda: _weighted_sum(a @ bb, np.random.default_rng(5)), [a, bb])

    am = Param(rng.normal(size=(2, 3)) * 0.5 + 2.0, name="am")
    bm = Param(rng.normal(size=(2, 3)) * 0.5 + 5.0, name="bm")
    check("mul_div", lambda: _weighted_sum(am * bm / (am + bm), np.random.default_rng(6)), [am, bm])

    gsrc = Param(rng.normal(size=(6, 3)), name="gather_src")
    gidx = rng.integers(0, 6, size=(4, 2))
    check("take_rows", lambda: _weighted_sum(gsrc.take_rows(gidx), np.random.default_rng(7)), [gsrc])

    sq = Param(rng.uniform(1.0, 4.0, size=(5,)), name="sqrt_in")
    check("sqrt", lambda: _weighted_sum(sq.sqrt(), np.random.default_rng(8)), [sq])

    # --- mesh layers -----------------------------------------------------
    ico = icosahedron(2.0)
    table = build_spiral_table(ico, length=6)
    feats = Param(rng.normal(size=(12, 4)), name="features")
    sc = SpiralConvParams.create(rng, table, 4, 3, name="sc")
    check("spiral_conv", lambda: _weighted_sum(spiral_conv(feats, table, sc),
                                               np.random.default_rng(9)),
          [feats, sc.w, sc.b])

    dp = DscParams.create(rng, 6, 4, 3, kernel_count=2, name="dsc")
    check("kernel_attention", lambda: _weighted_sum(kernel_attention(feats, dp),
                                                    np.random.default_rng(10)),
          [feats, dp.attn1_w, dp.attn1_b, dp.attn2_w, dp.attn2_b])
    check("dynamic_spiral_conv", lambda: _weighted_sum(dynamic_spiral_conv(feats, table, dp),
                                                       np.random.default_rng(11)),
          [feats] + dp.params())

    clipped = build_spiral_table(ico, length=5, dilation=2,
                                 partition=two_region_partition(ico))
    rp = SpiralConvParams.create(rng, clipped, 4, 3, name="roi")
    check("roi_conv", lambda: _weighted_sum(roi_conv(feats, clipped, rp),
                                            np.random.default_rng(12)),
          [feats, rp.w, rp.b])

    fmap = Param(rng.normal(size=(5, 6, 3)), name="feature_map")
    # strictly inside grid cells: finite differences stay within one cell
    lmk = Param(np.array([[0.23, 0.41], [0.66, 0.12], [0.87, 0.93]]), name="landmarks")
    check("grid_sample", lambda: _weighted_sum(grid_sample(fmap, lmk),
                                               np.random.default_rng(13)),
          [fmap, lmk])

    lm = LiftMatrix.create(rng, 7, 3, name="lift")
    pose = Param(rng.normal(size=(3, 5)), name="pose_features")
    check("lift", lambda: _weighted_sum(lift(pose, lm), np.random.default_rng(14)),
          [pose, lm.m])

    up = identity_upsample(12)
    check("upsample_features", lambda: _weighted_sum(upsample_features(feats, up),
                                                     np.random.default_rng(15)), [feats])

    # --- losses ----------------------------------------------------------
    gt_mesh = icosahedron(2.0)
    pred_v = Param(gt_mesh.vertices + 0.1 * rng.normal(size=(12, 3)), name="pred_vertices")
    gt_v = gt_mesh.vertices + 0.05 * rng.normal(size=(12, 3))
    check("mesh_loss", lambda: mesh_loss(pred_v, gt_v), [pred_v])

    plm = Param(rng.uniform(0.2, 0.8, size=(4, 2)), name="pred_landmarks")
    glm = rng.uniform(0.2, 0.8, size=(4, 2))
    check("pose2d_loss", lambda: pose2d_loss(plm, glm), [plm])

    gt_for_normals = TriMesh(gt_v, gt_mesh.faces)
    check("normal_loss", lambda: normal_loss(pred_v, gt_for_normals), [pred_v])
    check("edge_loss", lambda: edge_loss(pred_v, gt_v, gt_mesh), [pred_v])

    v2 = Param(gt_mesh.vertices + 0.1 * rng.normal(size=(12, 3)), name="view2_vertices")
    lm2 = Param(rng.uniform(0.2, 0.8, size=(4, 2)), name="view2_landmarks")
    angle = 0.3
    rot = np.array([[np.cos(angle), -np.sin(angle), 0.0],
                    [np.sin(angle), np.cos(angle), 0.0], [0.0, 0.0, 1.0]])
    align = SimilarityTransform(1.0, rot, np.array([0.2, -0.1, 0.3]))

    def con_total():
        c3, c2 = consistency_losses(MeshPrediction(pred_v, landmarks2d=plm),
                                    MeshPrediction(v2, landmarks2d=lm2), align)
        return c3 + c2
    check("consistency_losses", con_total, [pred_v, v2, plm, lm2])

    # --- composed micro pipeline ------------------------------------------
    cfg = micro_config()
    decoder = build_decoder(cfg)
    sample = synth_dataset(cfg, decoder.finest_template,
                           chain=(decoder.templates, decoder.upsample_maps))[0]

    def pipeline_loss():
        return total_loss(_sample_losses(decoder, sample), cfg.loss_weights)
    check("micro_pipeline", pipeline_loss, decoder.params())

    return checks


def run_suite(h: float = 1e-6, tol: float = 1e-5, inject_fault: str | None = None) -> dict:
    """Run every check; returns a JSON-ready summary."""
    autograd.set_backward_fault(inject_fault)
    try:
        checks = suite_checks(h=h, tol=tol)
    finally:
        autograd.set_backward_fault(None)
    report = {
        "h": h,
        "tol": tol,
        "checks": [{"name": name, "max_rel_err": rep.max_rel_err, "passed": rep.passed}
                   for name, rep in checks],
    }
    report["max_rel_err"] = max(c["max_rel_err"] for c in report["checks"])
    report["passed"] = all(c["passed"] for c in report["checks"])
    if inject_fault:
        report["injected_fault"] = inject_fault
    return report

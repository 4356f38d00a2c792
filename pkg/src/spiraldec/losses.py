"""Training losses: vertex/landmark L1, surface normals, edge lengths and
two-view consistency.

All losses return scalar :class:`~spiraldec.autograd.Tensor` values and are
differentiable with respect to any Tensor argument. Ground truth may be
passed as plain arrays. L1 terms are means over elements so magnitudes do
not depend on template size; the normal and edge terms follow the
face-then-edge double sum.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .autograd import Tensor, l1_loss
from .errors import DegenerateEdgeWarning, NonFiniteLoss, ShapeMismatch
from .mesh import TriMesh
from .procrustes import SimilarityTransform

LOSS_TERMS = ("mesh", "pose2d", "norm", "edge", "con3d", "con2d")


@dataclass
class MeshPrediction:
    """One view's predicted mesh: vertices (mm) plus optional extras."""

    vertices: Tensor
    joints: Optional[Tensor] = None
    landmarks2d: Optional[Tensor] = None

    def __post_init__(self):
        self.vertices = Tensor._coerce(self.vertices)
        if self.joints is not None:
            self.joints = Tensor._coerce(self.joints)
        if self.landmarks2d is not None:
            self.landmarks2d = Tensor._coerce(self.landmarks2d)


def mesh_loss(pred_vertices, gt_vertices) -> Tensor:
    """Mean absolute vertex deviation."""
    return l1_loss(pred_vertices, gt_vertices)


def pose2d_loss(pred_landmarks, gt_landmarks) -> Tensor:
    """Mean absolute 2D landmark deviation."""
    return l1_loss(pred_landmarks, gt_landmarks)


def _face_edge_indices(faces: np.ndarray):
    """Tail and head vertex indices of the three edges of every face."""
    tails = np.concatenate([faces[:, 0], faces[:, 1], faces[:, 2]])
    heads = np.concatenate([faces[:, 1], faces[:, 2], faces[:, 0]])
    return tails, heads


def _gt_face_normals(gt_mesh: TriMesh) -> np.ndarray:
    v = gt_mesh.vertices
    f = gt_mesh.faces
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def normal_loss(pred_vertices, gt_mesh: TriMesh, min_edge: float = 1e-9) -> Tensor:
    """Sum over faces and their edges of |unit predicted edge . gt face normal|.

    Predicted edges shorter than ``min_edge`` are reported through a
    :class:`DegenerateEdgeWarning` and skipped (their unit direction, and
    hence gradient, is undefined).
    """
    pred = Tensor._coerce(pred_vertices)
    if pred.shape != (gt_mesh.vertex_count, 3):
        raise ShapeMismatch(f"expected {(gt_mesh.vertex_count, 3)} vertices, got {pred.shape}")
    tails, heads = _face_edge_indices(gt_mesh.faces)
    normals = np.concatenate([_gt_face_normals(gt_mesh)] * 3, axis=0)

    edges = pred.take_rows(tails) - pred.take_rows(heads)
    lengths_sq = (edges * edges).sum(axis=-1)
    keep = np.nonzero(lengths_sq.data >= min_edge * min_edge)[0]
    if keep.size < tails.size:
        warnings.warn(f"skipped {tails.size - keep.size} degenerate predicted edges",
                      DegenerateEdgeWarning, stacklevel=2)
        if keep.size == 0:
            return Tensor(0.0)
        edges = edges.take_rows(keep)
        lengths_sq = lengths_sq.take_rows(keep)
        normals = normals[keep]
    unit = edges / lengths_sq.sqrt().reshape(-1, 1)
    return (unit * normals).sum(axis=-1).abs().sum()


def edge_loss(pred_vertices, gt_vertices, mesh: TriMesh) -> Tensor:
    """Sum over face edges of |predicted length - ground truth length|."""
    pred = Tensor._coerce(pred_vertices)
    gt = np.asarray(gt_vertices.data if isinstance(gt_vertices, Tensor) else gt_vertices,
                    dtype=np.float64)
    if pred.shape != gt.shape or pred.shape != (mesh.vertex_count, 3):
        raise ShapeMismatch("pred/gt vertices must both match the mesh")
    tails, heads = _face_edge_indices(mesh.faces)
    pred_edges = pred.take_rows(tails) - pred.take_rows(heads)
    pred_lengths = (pred_edges * pred_edges).sum(axis=-1).sqrt()
    gt_lengths = np.linalg.norm(gt[tails] - gt[heads], axis=1)
    return (pred_lengths - gt_lengths).abs().sum()


def consistency_losses(pred_view1: MeshPrediction, pred_view2: MeshPrediction,
                       align: SimilarityTransform):
    """L1 agreement of two views after mapping view 2 into view 1's frame.

    Returns ``(con3d, con2d)``: mean vertex deviation of the aligned 3D
    meshes and mean deviation of the aligned 2D landmarks. The 2D term is
    zero when either view carries no landmarks.
    """
    v2 = align.apply_tensor(pred_view2.vertices)
    con3d = l1_loss(pred_view1.vertices, v2)
    if pred_view1.landmarks2d is None or pred_view2.landmarks2d is None:
        return con3d, Tensor(0.0)
    centre = np.array([0.5, 0.5])
    lm2 = (pred_view2.landmarks2d - centre) @ align.rotation[:2, :2].T * align.scale + centre
    con2d = l1_loss(pred_view1.landmarks2d, lm2)
    return con3d, con2d


def total_loss(terms: dict, weights: dict | None = None) -> Tensor:
    """Weighted sum of loss terms; every weight defaults to 1.0."""
    weights = dict(weights or {})
    out = Tensor(0.0)
    for name, term in terms.items():
        term = Tensor._coerce(term)
        if not np.isfinite(term.data).all():
            raise NonFiniteLoss(f"loss term '{name}' is not finite")
        out = out + float(weights.get(name, 1.0)) * term
    return out

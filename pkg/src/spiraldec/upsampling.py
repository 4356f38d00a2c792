"""Coarse-to-fine vertex maps for feature upsampling between mesh scales."""

from __future__ import annotations

import json

import numpy as np

from .errors import MeshError, MissingCorrespondence, ShapeMismatch
from .mesh import TriMesh


class UpsampleMap:
    """Sparse row-stochastic matrix mapping coarse to fine vertex features.

    Stored in compressed-row form: row ``i`` of the fine mesh combines
    ``weights[indptr[i]:indptr[i+1]]`` of the coarse vertices
    ``cols[indptr[i]:indptr[i+1]]``. Each row has at least one entry and
    its weights sum to one (within 1e-9).
    """

    __slots__ = ("n_fine", "n_coarse", "indptr", "cols", "weights")

    def __init__(self, n_fine, n_coarse, indptr, cols, weights):
        self.n_fine = int(n_fine)
        self.n_coarse = int(n_coarse)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.indptr.shape != (self.n_fine + 1,):
            raise MeshError("indptr length must be n_fine + 1")
        counts = np.diff(self.indptr)
        if (counts < 1).any():
            raise MeshError("every fine vertex needs at least one coarse parent")
        if self.cols.size and (self.cols.min() < 0 or self.cols.max() >= self.n_coarse):
            raise MeshError("coarse parent index out of range")
        sums = np.add.reduceat(self.weights, self.indptr[:-1])
        if np.abs(sums - 1.0).max() > 1e-9:
            raise MeshError("rows must sum to 1 within 1e-9")
        for a in (self.indptr, self.cols, self.weights):
            a.setflags(write=False)

    @property
    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_fine), np.diff(self.indptr))

    def apply(self, features: np.ndarray) -> np.ndarray:
        """Dense product ``U @ features`` on a raw array."""
        features = np.asarray(features, dtype=np.float64)
        if features.shape[0] != self.n_coarse:
            raise ShapeMismatch(f"expected {self.n_coarse} coarse rows, got {features.shape[0]}")
        out = np.zeros((self.n_fine,) + features.shape[1:], dtype=np.float64)
        contrib = self.weights.reshape((-1,) + (1,) * (features.ndim - 1)) * features[self.cols]
        np.add.at(out, self.row_ids, contrib)
        return out

    def apply_transpose(self, fine_values: np.ndarray) -> np.ndarray:
        """Dense product ``U.T @ fine_values`` (the backward of ``apply``)."""
        fine_values = np.asarray(fine_values, dtype=np.float64)
        out = np.zeros((self.n_coarse,) + fine_values.shape[1:], dtype=np.float64)
        contrib = self.weights.reshape((-1,) + (1,) * (fine_values.ndim - 1)) * fine_values[self.row_ids]
        np.add.at(out, self.cols, contrib)
        return out

    def to_json(self) -> str:
        return json.dumps({
            "n_fine": self.n_fine,
            "n_coarse": self.n_coarse,
            "indptr": self.indptr.tolist(),
            "cols": self.cols.tolist(),
            "weights": self.weights.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "UpsampleMap":
        obj = json.loads(text)
        return cls(obj["n_fine"], obj["n_coarse"], obj["indptr"], obj["cols"], obj["weights"])


def build_upsample_map(coarse: TriMesh, fine: TriMesh, correspondence) -> UpsampleMap:
    """Upsample map from a parent correspondence.

    ``correspondence[i]`` names the coarse parent of fine vertex ``i``:
    an ``int`` (vertex parent, weight 1.0) or an ``(a, b)`` pair (edge
    parent, weights 0.5/0.5). :func:`spiraldec.mesh.subdivide_midpoint`
    produces exactly this structure.
    """
    if len(correspondence) < fine.vertex_count:
        raise MissingCorrespondence(
            f"{fine.vertex_count - len(correspondence)} fine vertices unassigned")
    indptr = [0]
    cols = []
    weights = []
    for i in range(fine.vertex_count):
        parent = correspondence[i]
        if parent is None:
            raise MissingCorrespondence(f"fine vertex {i} unassigned")
        if isinstance(parent, (int, np.integer)):
            cols.append(int(parent))
            weights.append(1.0)
        else:
            a, b = parent
            cols.extend((int(a), int(b)))
            weights.extend((0.5, 0.5))
        indptr.append(len(cols))
    return UpsampleMap(fine.vertex_count, coarse.vertex_count, indptr, cols, weights)


def identity_upsample(n: int) -> UpsampleMap:
    return UpsampleMap(n, n, np.arange(n + 1), np.arange(n), np.ones(n))

"""Closed-form similarity alignment of point sets (scale, rotation, translation)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfigurationWarning, ShapeMismatch


@dataclass(frozen=True)
class SimilarityTransform:
    """p -> scale * rotation @ p + translation, with det(rotation) = +1."""

    scale: float
    rotation: np.ndarray     # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64))

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform (M, 3) points."""
        points = np.asarray(points, dtype=np.float64)
        return self.scale * (points @ self.rotation.T) + self.translation

    def apply_tensor(self, points):
        """Autograd-friendly variant for (M, 3) Tensors."""
        return points @ self.rotation.T * self.scale + self.translation

    def apply_points2d(self, points: np.ndarray, centre=(0.5, 0.5)) -> np.ndarray:
        """Induced action on normalized image points, rotating about ``centre``.

        Exact when the transform is an in-plane rotation about the
        projection axis (the synthetic two-view generator's case); for
        general transforms it is the projected approximation.
        """
        points = np.asarray(points, dtype=np.float64)
        centre = np.asarray(centre, dtype=np.float64)
        return self.scale * ((points - centre) @ self.rotation[:2, :2].T) + centre

    def inverse(self) -> "SimilarityTransform":
        rot_inv = self.rotation.T
        s_inv = 1.0 / self.scale
        return SimilarityTransform(s_inv, rot_inv, -s_inv * (rot_inv @ self.translation))

    def compose(self, other: "SimilarityTransform") -> "SimilarityTransform":
        """Transform applying ``other`` first, then ``self``."""
        return SimilarityTransform(
            self.scale * other.scale,
            self.rotation @ other.rotation,
            self.scale * (self.rotation @ other.translation) + self.translation)


def procrustes_align(pred: np.ndarray, gt: np.ndarray):
    """Best-fit similarity transform of ``pred`` onto ``gt``.

    Minimizes sum ||s R p_i + t - g_i||^2 in closed form via SVD of the
    cross-covariance, with the reflection corrected so det(R) = +1.

    Bitwise-identical inputs short-circuit to the identity transform,
    which is the exact optimum; this keeps self-alignment residuals at
    exactly zero.

    Returns
    -------
    (SimilarityTransform, np.ndarray)
        The transform and the transformed copy of ``pred``.

    Warns
    -----
    DegenerateConfigurationWarning
        When the cross-covariance is rank-deficient and the rotation is
        not unique; the smallest-singular-vector sign convention is applied.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 2 or pred.shape[1] != 3:
        raise ShapeMismatch(f"point sets must share shape (M, 3): {pred.shape} vs {gt.shape}")
    if pred.shape[0] < 3:
        raise ShapeMismatch("alignment needs at least 3 points")

    if np.array_equal(pred, gt):
        return SimilarityTransform.identity(), pred.copy()

    mu_p = pred.mean(axis=0)
    mu_g = gt.mean(axis=0)
    p0 = pred - mu_p
    g0 = gt - mu_g
    var_p = (p0 * p0).sum()
    if var_p == 0.0 or (g0 * g0).sum() == 0.0:
        raise ShapeMismatch("alignment undefined for all-coincident points")

    cov = g0.T @ p0  # (3, 3)
    u, s, vt = np.linalg.svd(cov)
    if s[0] > 0 and s[-1] / s[0] < 1e-12:
        warnings.warn("cross-covariance is rank-deficient; rotation is not unique",
                      DegenerateConfigurationWarning, stacklevel=2)
    d = np.sign(np.linalg.det(u @ vt))
    if d == 0.0:
        d = 1.0
    corr = np.ones(3)
    corr[-1] = d
    rotation = (u * corr) @ vt
    scale = float((s * corr).sum() / var_p)
    translation = mu_g - scale * (rotation @ mu_p)

    transform = SimilarityTransform(scale, rotation, translation)
    return transform, transform.apply(pred)

"""Procrustes-aligned evaluation metrics: PA-MPJPE, PA-MPVPE, F-score."""

from __future__ import annotations

import numpy as np

from .procrustes import procrustes_align

# Above this size the nearest-neighbor search switches from the chunked
# all-pairs scan to a uniform spatial grid (both exact).
_BRUTE_FORCE_LIMIT = 5000


def pa_mpjpe(pred_joints: np.ndarray, gt_joints: np.ndarray) -> float:
    """Mean per-joint position error (mm) after similarity alignment."""
    _, aligned = procrustes_align(pred_joints, gt_joints)
    return float(np.linalg.norm(aligned - np.asarray(gt_joints, dtype=np.float64), axis=1).mean())


def pa_mpvpe(pred_vertices: np.ndarray, gt_vertices: np.ndarray) -> float:
    """Mean per-vertex position error (mm) after similarity alignment."""
    return pa_mpjpe(pred_vertices, gt_vertices)


def _nn_distances_brute(queries: np.ndarray, refs: np.ndarray) -> np.ndarray:
    out = np.empty(queries.shape[0])
    chunk = max(1, 2_000_000 // max(refs.shape[0], 1))
    for lo in range(0, queries.shape[0], chunk):
        q = queries[lo:lo + chunk]
        d2 = ((q[:, None, :] - refs[None, :, :]) ** 2).sum(axis=2)
        out[lo:lo + chunk] = np.sqrt(d2.min(axis=1))
    return out


def _nn_distances_grid(queries: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Exact nearest-neighbor distances via a uniform grid.

    Cells are searched in expanding shells; a shell can be skipped only
    when every point it could hold is provably farther than the best
    distance found so far.
    """
    lo = refs.min(axis=0)
    span = refs.max(axis=0) - lo
    ncell = max(1, int(round(refs.shape[0] ** (1.0 / 3.0))))
    cell = max(span.max() / ncell, 1e-12)
    key = np.floor((refs - lo) / cell).astype(np.int64)
    buckets: dict[tuple, list] = {}
    for i, k in enumerate(map(tuple, key)):
        buckets.setdefault(k, []).append(i)

    out = np.empty(queries.shape[0])
    for qi, q in enumerate(queries):
        kq = np.floor((q - lo) / cell).astype(np.int64)
        best = np.inf
        radius = 0
        # a point in shell r is at least (r - 1) * cell away from q
        while radius == 0 or best > (radius - 1) * cell:
            for dx in range(-radius, radius + 1):
                for dy in range(-radius, radius + 1):
                    for dz in range(-radius, radius + 1):
                        if max(abs(dx), abs(dy), abs(dz)) != radius:
                            continue
                        ids = buckets.get((kq[0] + dx, kq[1] + dy, kq[2] + dz))
                        if ids:
                            d = np.linalg.norm(refs[ids] - q, axis=1).min()
                            best = min(best, d)
            radius += 1
        out[qi] = best
    return out


def nearest_neighbor_distances(queries: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Distance from each query point to the closest reference point."""
    queries = np.asarray(queries, dtype=np.float64)
    refs = np.asarray(refs, dtype=np.float64)
    if max(queries.shape[0], refs.shape[0]) <= _BRUTE_FORCE_LIMIT:
        return _nn_distances_brute(queries, refs)
    return _nn_distances_grid(queries, refs)


def f_score(pred_vertices: np.ndarray, gt_vertices: np.ndarray, tau_mm: float,
            align: bool = True) -> float:
    """Harmonic mean of precision and recall at threshold ``tau_mm``.

    Precision is the fraction of predicted points whose nearest ground
    truth point lies within ``tau_mm``; recall is symmetric. Points are
    similarity-aligned first (the PA-metric convention) unless ``align``
    is disabled. Returns 0 when precision + recall is 0.
    """
    pred = np.asarray(pred_vertices, dtype=np.float64)
    gt = np.asarray(gt_vertices, dtype=np.float64)
    if tau_mm <= 0:
        raise ValueError("tau must be positive")
    if pred.size == 0 or gt.size == 0:
        raise ValueError("point sets must be non-empty")
    if align:
        _, pred = procrustes_align(pred, gt)
    precision = float((nearest_neighbor_distances(pred, gt) <= tau_mm).mean())
    recall = float((nearest_neighbor_distances(gt, pred) <= tau_mm).mean())
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)

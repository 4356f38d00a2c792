"""Synthetic two-view mesh deformation task.

Each sample deforms the finest sphere template with a smooth random
low-frequency field, projects a fixed set of marker vertices to 2D
landmarks, and rasterizes a feature map of Gaussian blobs (one channel
per landmark, blob amplitude encodes the marker's depth offset) plus two
coordinate ramp channels. The second view is the same latent deformation
rotated in-plane; the exact view2-to-view1 transform is recorded, so the
consistency losses have a clean supervisory signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .mesh import TriMesh
from .procrustes import SimilarityTransform
from .regions import REGION_NAMES, wedge_partition

# landmarks are projected as 0.5 + PROJ_SCALE * (x, y) / template_radius
PROJ_SCALE = 0.35


@dataclass
class SampleView:
    feature_map: np.ndarray      # (H, W, landmarks + 2)
    landmarks2d: np.ndarray      # (J, 2) ground truth, in [0, 1]^2
    landmarks_input: np.ndarray  # (J, 2) what the decoder is fed (gt + noise)
    target_vertices: np.ndarray  # (N, 3)


@dataclass
class SyntheticSample:
    view1: SampleView
    view2: SampleView
    view2_to_view1: SimilarityTransform


def farthest_point_ids(mesh: TriMesh, count: int) -> np.ndarray:
    """Deterministic well-spread vertex ids (greedy farthest point, from 0)."""
    v = mesh.vertices
    ids = [0]
    dist = np.linalg.norm(v - v[0], axis=1)
    for _ in range(count - 1):
        nxt = int(dist.argmax())
        ids.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(v - v[nxt], axis=1))
    return np.asarray(ids, dtype=np.int64)


class DeformationBasis:
    """Per-axis sinusoidal basis; a sample is its coefficient array (3, B)."""

    def __init__(self, rng: np.random.Generator, basis_size: int, radius: float,
                 freq_min: float = 0.5, freq_max: float = 1.5):
        # wavelengths on the order of the template size keep fields smooth
        self.freq = rng.uniform(freq_min, freq_max, size=(3, basis_size, 3)) / radius
        self.freq *= rng.choice([-1.0, 1.0], size=self.freq.shape)
        self.phase = rng.uniform(0.0, 2.0 * np.pi, size=(3, basis_size))
        self.basis_size = basis_size

    def field(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Evaluate the displacement field at (N, 3) points."""
        out = np.zeros_like(points)
        for q in range(3):
            phases = points @ self.freq[q].T + self.phase[q]  # (N, B)
            out[:, q] = np.sin(phases) @ coeffs[q]
        return out


def _rasterize_feature_map(landmarks: np.ndarray, amplitudes: np.ndarray,
                           size: int, sigma_px: float) -> np.ndarray:
    j = landmarks.shape[0]
    fm = np.empty((size, size, j + 2))
    axis = np.arange(size, dtype=np.float64)
    px = landmarks[:, 0] * (size - 1)
    py = landmarks[:, 1] * (size - 1)
    dx2 = (axis[None, :] - px[:, None]) ** 2  # (J, W)
    dy2 = (axis[None, :] - py[:, None]) ** 2  # (J, H)
    for k in range(j):
        fm[:, :, k] = amplitudes[k] * np.exp(-(dy2[k][:, None] + dx2[k][None, :])
                                             / (2.0 * sigma_px * sigma_px))
    ramp = axis / (size - 1)
    fm[:, :, j] = ramp[None, :]   # x ramp
    fm[:, :, j + 1] = ramp[:, None]  # y ramp
    return fm


def _rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def synth_dataset(config: PipelineConfig, template: TriMesh, seed: int | None = None,
                  chain=None) -> list[SyntheticSample]:
    """Generate ``train_size + holdout_size`` samples on the finest template.

    With ``field_scale >= 0`` the deformation is sampled at that template
    level and carried to the finest mesh through the upsample ``chain``
    (pairs of ``(template, upsample_map)``), so targets live in the same
    coarse-to-fine space the decoder predicts in.
    """
    ds = config.dataset
    rng = np.random.default_rng(config.seed if seed is None else seed)
    basis = DeformationBasis(rng, ds.basis_size, config.template_radius,
                             ds.field_freq_min, ds.field_freq_max)
    marker_ids = farthest_point_ids(template, config.landmarks)
    base = template.vertices

    if ds.field_scale >= 0:
        if chain is None:
            raise ValueError("field_scale >= 0 needs the template/upsample chain")
        templates, upsamples = chain
        level = min(ds.field_scale, len(templates) - 1)
        field_points = templates[level].vertices
        lift_maps = upsamples[level:]

        def field_at_finest(coeffs):
            values = basis.field(coeffs, field_points)
            for u in lift_maps:
                values = u.apply(values)
            return values
    else:
        def field_at_finest(coeffs):
            return basis.field(coeffs, base)

    def make_view(target: np.ndarray) -> SampleView:
        markers = target[marker_ids]
        landmarks = 0.5 + PROJ_SCALE * markers[:, :2] / config.template_radius
        z_off = markers[:, 2] - base[marker_ids, 2]
        # blob amplitude encodes depth offset; bounded away from 0 and 1
        amplitudes = 0.5 + z_off / (8.0 * max(ds.z_amplitude, 1e-12))
        fm = _rasterize_feature_map(landmarks, amplitudes, ds.image_size, ds.blob_sigma_px)
        noise = rng.normal(0.0, ds.landmark_noise, size=landmarks.shape) \
            if ds.landmark_noise > 0 else 0.0
        return SampleView(fm, landmarks, landmarks + noise, target)

    labels = wedge_partition(template).labels if ds.region_gain_spread > 0 else None

    samples = []
    for _ in range(ds.train_size + ds.holdout_size):
        coeffs = rng.uniform(-1.0, 1.0, size=(3, ds.basis_size))
        coeffs[:2] *= ds.amplitude
        coeffs[2] *= ds.z_amplitude
        field = field_at_finest(coeffs)
        if labels is not None:
            gains = rng.uniform(1.0 - ds.region_gain_spread, 1.0 + ds.region_gain_spread,
                                size=(len(REGION_NAMES), 3))
            field = field * gains[labels]
        target1 = base + field
        angle = rng.uniform(-ds.view_rotation_max, ds.view_rotation_max)
        target2 = target1 @ _rot_z(angle).T
        transform = SimilarityTransform(1.0, _rot_z(-angle), np.zeros(3))
        samples.append(SyntheticSample(make_view(target1), make_view(target2), transform))
    return samples

"""Mesh decoder layers: spiral convolution, dynamic kernel mixing, region
refinement, 2D-to-3D lifting and bilinear grid sampling.

All layers consume and produce :class:`~spiraldec.autograd.Tensor` values,
so gradients flow through every parameter including the attention maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autograd import Param, Tensor, _accum, glorot_uniform, linear, relu, softmax
from .errors import ShapeMismatch, TableMeshMismatch, UnclippedTable
from .spirals import SpiralTable
from .upsampling import UpsampleMap


def _check_table(features: Tensor, table: SpiralTable, length: int) -> None:
    if table.vertex_count != features.shape[0]:
        raise TableMeshMismatch(
            f"table has {table.vertex_count} rows, features have {features.shape[0]}")
    if table.length != length:
        raise TableMeshMismatch(f"table length {table.length} != kernel length {length}")


def _gather_spiral(features: Tensor, table: SpiralTable) -> Tensor:
    """Concatenate the features of each vertex's spiral: (N, L*C)."""
    n = features.shape[0]
    return features.take_rows(table.indices).reshape(n, table.length * features.shape[1])


@dataclass
class SpiralConvParams:
    """Single spiral-convolution kernel bound to its table."""

    w: Param  # (L * c_in, c_out)
    b: Param  # (c_out,)
    table: SpiralTable
    c_in: int

    @classmethod
    def create(cls, rng: np.random.Generator, table: SpiralTable, c_in: int, c_out: int,
               name: str = "spiral", near_identity: bool = False) -> "SpiralConvParams":
        fan_in = table.length * c_in
        w = glorot_uniform(rng, (fan_in, c_out), fan_in, c_out)
        if near_identity:
            # refinement layers start close to passing the centre feature
            # through, so they cannot slow training before they help
            if c_in != c_out:
                raise ShapeMismatch("near-identity init needs c_in == c_out")
            w = 0.05 * w
            w[:c_in, :] += np.eye(c_in)
        b = Param(np.zeros(c_out), name=f"{name}.b")
        return cls(Param(w, name=f"{name}.w"), b, table, c_in)

    def params(self) -> list[Param]:
        return [self.w, self.b]


def spiral_conv(features: Tensor, table: SpiralTable, params: SpiralConvParams) -> Tensor:
    """Affine map of the concatenated spiral features of every vertex."""
    if features.shape[1] != params.c_in:
        raise ShapeMismatch(f"expected {params.c_in} input channels, got {features.shape[1]}")
    length = params.w.shape[0] // params.c_in
    _check_table(features, table, length)
    return linear(_gather_spiral(features, table), params.w, params.b)


@dataclass
class DscParams:
    """K parallel two-stage spiral kernels plus the attention maps.

    The attention sub-network maps a vertex's own feature vector to K
    normalized kernel weights: a half-width reduction, a relu, a second
    map to K logits, and a softmax.
    """

    kernel_count: int
    stage1_w: Param  # (K, L * c_in, c_mid)
    stage1_b: Param  # (K, c_mid)
    stage2_w: Param  # (K, c_mid, c_out)
    stage2_b: Param  # (K, c_out)
    attn1_w: Param   # (c_in, ceil(c_in / 2))
    attn1_b: Param
    attn2_w: Param   # (ceil(c_in / 2), K)
    attn2_b: Param
    length: int
    c_in: int

    @classmethod
    def create(cls, rng: np.random.Generator, length: int, c_in: int, c_out: int,
               kernel_count: int, c_mid: int | None = None, name: str = "dsc",
               near_identity: bool = False) -> "DscParams":
        if c_mid is None:
            c_mid = c_out
        a = length * c_in
        hidden = math.ceil(c_in / 2)
        k = kernel_count
        # near-uniform attention averages K independent kernels, shrinking the
        # mixed kernel's variance by K; compensate so the effective kernel
        # starts at glorot scale
        gain = math.sqrt(k)
        w1 = gain * glorot_uniform(rng, (k, a, c_mid), a, c_mid)
        w2 = gain * glorot_uniform(rng, (k, c_mid, c_out), c_mid, c_out)
        if near_identity:
            if not (c_in == c_mid == c_out):
                raise ShapeMismatch("near-identity init needs c_in == c_mid == c_out")
            w1 *= 0.05
            w2 *= 0.05
            w1[:, :c_in, :] += np.eye(c_in)
            w2 += np.eye(c_in)
        return cls(
            kernel_count=k,
            stage1_w=Param(w1, name=f"{name}.stage1_w"),
            stage1_b=Param(np.zeros((k, c_mid)), name=f"{name}.stage1_b"),
            stage2_w=Param(w2, name=f"{name}.stage2_w"),
            stage2_b=Param(np.zeros((k, c_out)), name=f"{name}.stage2_b"),
            attn1_w=Param(glorot_uniform(rng, (c_in, hidden), c_in, hidden), name=f"{name}.attn1_w"),
            attn1_b=Param(np.zeros(hidden), name=f"{name}.attn1_b"),
            attn2_w=Param(glorot_uniform(rng, (hidden, k), hidden, k), name=f"{name}.attn2_w"),
            attn2_b=Param(np.zeros(k), name=f"{name}.attn2_b"),
            length=length,
            c_in=c_in,
        )

    @property
    def c_mid(self) -> int:
        return self.stage1_w.shape[2]

    @property
    def c_out(self) -> int:
        return self.stage2_w.shape[2]

    def params(self) -> list[Param]:
        return [self.stage1_w, self.stage1_b, self.stage2_w, self.stage2_b,
                self.attn1_w, self.attn1_b, self.attn2_w, self.attn2_b]


def kernel_attention(centre_features: Tensor, params: DscParams) -> Tensor:
    """Per-vertex kernel weights on the simplex: softmax over K logits."""
    if centre_features.shape[-1] != params.c_in:
        raise ShapeMismatch(
            f"expected {params.c_in} input channels, got {centre_features.shape[-1]}")
    hidden = relu(linear(centre_features, params.attn1_w, params.attn1_b))
    return softmax(linear(hidden, params.attn2_w, params.attn2_b), axis=-1)


def dynamic_spiral_conv(features: Tensor, table: SpiralTable, params: DscParams) -> Tensor:
    """Spiral convolution with per-vertex attention-mixed kernels.

    Each vertex's effective two-stage kernel is the convex combination of
    the K kernels under its attention weights; the mixed kernel is then
    applied to the concatenated spiral features in one affine pass per
    stage. Gradients flow through both the kernels and the attention maps.
    """
    if features.shape[1] != params.c_in:
        raise ShapeMismatch(f"expected {params.c_in} input channels, got {features.shape[1]}")
    _check_table(features, table, params.length)
    n = features.shape[0]
    k = params.kernel_count
    a = params.length * params.c_in
    mid, out = params.c_mid, params.c_out

    xs = _gather_spiral(features, table)
    pi = kernel_attention(features, params)

    w1 = (pi @ params.stage1_w.reshape(k, a * mid)).reshape(n, a, mid)
    b1 = pi @ params.stage1_b
    h = (xs.reshape(n, 1, a) @ w1).reshape(n, mid) + b1

    w2 = (pi @ params.stage2_w.reshape(k, mid * out)).reshape(n, mid, out)
    b2 = pi @ params.stage2_b
    return (h.reshape(n, 1, mid) @ w2).reshape(n, out) + b2


def roi_conv(features: Tensor, table: SpiralTable, params) -> Tensor:
    """Region refinement: spiral convolution over a region-clipped table.

    The table keeps every row inside its centre's region, so the output
    at a vertex depends only on features from that vertex's region.
    """
    if not table.region_clipped:
        raise UnclippedTable("region refinement requires a region-clipped table")
    if isinstance(params, DscParams):
        return dynamic_spiral_conv(features, table, params)
    return spiral_conv(features, table, params)


@dataclass
class LiftMatrix:
    """Learnable map from J landmark feature rows to coarse vertex rows."""

    m: Param  # (n_coarse, n_landmarks)

    @classmethod
    def create(cls, rng: np.random.Generator, n_coarse: int, n_landmarks: int,
               name: str = "lift") -> "LiftMatrix":
        return cls(Param(glorot_uniform(rng, (n_coarse, n_landmarks), n_landmarks, n_coarse),
                         name=f"{name}.m"))

    def params(self) -> list[Param]:
        return [self.m]


def lift(pose_features: Tensor, lift_matrix: LiftMatrix) -> Tensor:
    """Matrix product: landmark features to coarse mesh vertex features."""
    if lift_matrix.m.shape[1] != pose_features.shape[0]:
        raise ShapeMismatch(
            f"lift expects {lift_matrix.m.shape[1]} landmark rows, got {pose_features.shape[0]}")
    return lift_matrix.m @ pose_features


def grid_sample(feature_map: Tensor, landmarks: Tensor) -> Tensor:
    """Bilinear sample of a (H, W, C) map at J points in [0, 1]^2.

    Landmark (x, y) maps to pixel (x * (W - 1), y * (H - 1)); coordinates
    outside the unit square are clamped. Differentiable with respect to
    the map and, away from cell boundaries, the landmarks.
    """
    if len(feature_map.shape) != 3:
        raise ShapeMismatch(f"feature map must be (H, W, C), got {feature_map.shape}")
    if len(landmarks.shape) != 2 or landmarks.shape[1] != 2:
        raise ShapeMismatch(f"landmarks must be (J, 2), got {landmarks.shape}")
    h, w, c = feature_map.shape
    j = landmarks.shape[0]

    xy = landmarks.clip(0.0, 1.0)
    px = xy.slice_last(0) * float(w - 1)
    py = xy.slice_last(1) * float(h - 1)

    # cell corner (constant w.r.t. gradients); clamp so x0 + 1 stays valid
    x0 = np.minimum(np.floor(px.data), max(w - 2, 0)).astype(np.int64)
    y0 = np.minimum(np.floor(py.data), max(h - 2, 0)).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)

    tx = px - x0.astype(np.float64)
    ty = py - y0.astype(np.float64)

    flat = feature_map.reshape(h * w, c)
    f00 = flat.take_rows(y0 * w + x0)
    f01 = flat.take_rows(y0 * w + x1)
    f10 = flat.take_rows(y1 * w + x0)
    f11 = flat.take_rows(y1 * w + x1)

    one = Tensor(np.ones(j))
    w00 = ((one - tx) * (one - ty)).reshape(j, 1)
    w01 = (tx * (one - ty)).reshape(j, 1)
    w10 = ((one - tx) * ty).reshape(j, 1)
    w11 = (tx * ty).reshape(j, 1)
    return f00 * w00 + f01 * w01 + f10 * w10 + f11 * w11


def upsample_features(features: Tensor, u: UpsampleMap) -> Tensor:
    """Sparse product ``U @ features`` lifting coarse rows to fine rows."""
    if features.shape[0] != u.n_coarse:
        raise ShapeMismatch(f"expected {u.n_coarse} coarse rows, got {features.shape[0]}")
    out_data = u.apply(features.data)

    def backward(g):
        _accum(features, u.apply_transpose(g))
    return Tensor._from_op(out_data, (features,), backward)

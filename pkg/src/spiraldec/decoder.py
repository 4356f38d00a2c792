"""Coarse-to-fine mesh decoder.

Pipeline per sample: grid-sample the encoder feature map at the 2D
landmarks, lift the landmark features onto the coarsest template, then one
spiral layer per scale with feature upsampling between scales, an optional
region-refinement layer on the finest scale and a zero-initialized linear
head that predicts per-vertex offsets from the finest template.
"""

from __future__ import annotations

import numpy as np

from .autograd import Param, Tensor, glorot_uniform, linear, relu
from .checkpoint import config_hash, load_checkpoint, save_checkpoint
from .config import PipelineConfig
from .errors import ConfigMismatch
from .layers import (DscParams, LiftMatrix, SpiralConvParams, dynamic_spiral_conv,
                     grid_sample, lift, roi_conv, upsample_features)
from .losses import MeshPrediction
from .mesh import TriMesh, load_obj, template_chain
from .regions import RegionPartition, validate_partition, wedge_partition
from .spirals import SpiralTable, build_spiral_table
from .upsampling import UpsampleMap, build_upsample_map


def _load_templates(config: PipelineConfig):
    if config.template_paths is None:
        meshes, correspondences = template_chain(config.template_levels, config.template_radius,
                                                 base=config.template_base)
        ups = [build_upsample_map(meshes[i], meshes[i + 1], correspondences[i])
               for i in range(len(meshes) - 1)]
        return meshes, ups
    meshes = [load_obj(p) for p in config.template_paths]
    ups = []
    for i, path in enumerate(config.upsample_paths):
        with open(path, "r", encoding="utf-8") as fh:
            u = UpsampleMap.from_json(fh.read())
        if u.n_coarse != meshes[i].vertex_count or u.n_fine != meshes[i + 1].vertex_count:
            raise ConfigMismatch(f"upsample map {path} does not chain scales {i} -> {i + 1}")
        ups.append(u)
    return meshes, ups


class Decoder:
    """Model instance: templates, tables and parameters for one config."""

    def __init__(self, config: PipelineConfig):
        config.validate()
        self.config = config
        self.config_hash = config_hash(config.to_dict())
        rng = np.random.default_rng(config.seed)

        self.templates, self.upsample_maps = _load_templates(config)
        if len(self.templates) != len(config.stages):
            raise ConfigMismatch("template scales and stages must match")

        self.tables = [build_spiral_table(mesh, st.spiral_length, st.dilation)
                       for mesh, st in zip(self.templates, config.stages)]

        finest = self.templates[-1]
        self.partition: RegionPartition | None = None
        self.roi_table = None
        self.roi_params = None
        if config.roi.kernel != "none":
            if config.region_labels_path is not None:
                with open(config.region_labels_path, "r", encoding="utf-8") as fh:
                    self.partition = RegionPartition.from_json(fh.read())
                validate_partition(self.partition, finest)
            else:
                self.partition = wedge_partition(finest)
            self.roi_table = build_spiral_table(finest, config.roi.spiral_length,
                                                config.roi.dilation, partition=self.partition)

        c_in = config.feature_channels
        self.lift_matrix = LiftMatrix.create(rng, self.templates[0].vertex_count,
                                             config.landmarks)
        self.stage_params = []
        for i, st in enumerate(config.stages):
            self.stage_params.append(DscParams.create(
                rng, st.spiral_length, c_in, st.channels, st.kernel_count,
                c_mid=st.c_mid, name=f"stage{i}"))
            c_in = st.channels

        if config.roi.kernel == "plain":
            self.roi_params = SpiralConvParams.create(rng, self.roi_table, c_in, c_in,
                                                      name="roi", near_identity=True)
        elif config.roi.kernel == "dynamic":
            self.roi_params = DscParams.create(rng, config.roi.spiral_length, c_in, c_in,
                                               config.roi.kernel_count, name="roi",
                                               near_identity=True)

        if config.head_init == "zeros":
            # zero-initialized head: the untrained decoder emits the template
            self.head_w = Param(np.zeros((c_in, 3)), name="head.w")
        else:
            self.head_w = Param(glorot_uniform(rng, (c_in, 3), c_in, 3), name="head.w")
        self.head_b = Param(np.zeros(3), name="head.b")

        self._flat_cache: dict = {}

    def params(self) -> list[Param]:
        out = self.lift_matrix.params()
        for sp in self.stage_params:
            out.extend(sp.params())
        if self.roi_params is not None:
            out.extend(self.roi_params.params())
        out.extend([self.head_w, self.head_b])
        return out

    def param_count(self) -> int:
        return sum(p.data.size for p in self.params())

    def forward(self, feature_map, landmarks) -> MeshPrediction:
        """Decode one view. Inputs may be arrays or Tensors."""
        fm = Tensor._coerce(feature_map)
        lm = Tensor._coerce(landmarks)
        # fixed input conditioning: centre and rescale the [0, 1]-ranged
        # readouts so the landmark displacement signal is O(1)
        fp = (grid_sample(fm, lm) - self.config.input_center) * self.config.input_gain
        x = lift(fp, self.lift_matrix)
        # relu between spiral stages; the refinement layer and head read the
        # last stage's full-range linear output
        for i, sp in enumerate(self.stage_params):
            if i > 0:
                x = relu(x)
            x = dynamic_spiral_conv(x, self.tables[i], sp)
            if i + 1 < len(self.stage_params):
                x = upsample_features(x, self.upsample_maps[i])
        if self.roi_params is not None:
            x = roi_conv(x, self.roi_table, self.roi_params)
        offsets = linear(x, self.head_w, self.head_b) * self.config.offset_scale
        vertices = offsets + self.templates[-1].vertices
        return MeshPrediction(vertices=vertices, landmarks2d=lm)

    def predict(self, feature_map, landmarks) -> np.ndarray:
        """Forward pass returning plain (N, 3) vertex positions."""
        return self.forward(feature_map, landmarks).vertices.data

    # -- stacked multi-view forward ---------------------------------------

    def _flat_artifacts(self, views: int) -> dict:
        """Row-offset tables and upsample maps for ``views`` stacked copies.

        Stacking views along the vertex axis lets every layer run once per
        batch instead of once per view; the layer code is unchanged.
        """
        if views in self._flat_cache:
            return self._flat_cache[views]

        def stack_table(table: SpiralTable) -> SpiralTable:
            n = table.vertex_count
            offs = (np.arange(views) * n)[:, None, None]
            idx = (table.indices[None, :, :] + offs).reshape(views * n, table.length)
            return SpiralTable(table.length, table.dilation, idx, table.region_clipped)

        def stack_upsample(u: UpsampleMap) -> UpsampleMap:
            nnz = u.cols.size
            indptr = np.concatenate([u.indptr[:-1] + v * nnz for v in range(views)]
                                    + [np.array([views * nnz])])
            cols = np.concatenate([u.cols + v * u.n_coarse for v in range(views)])
            weights = np.tile(u.weights, views)
            return UpsampleMap(views * u.n_fine, views * u.n_coarse, indptr, cols, weights)

        art = {
            "tables": [stack_table(t) for t in self.tables],
            "upsamples": [stack_upsample(u) for u in self.upsample_maps],
            "roi_table": stack_table(self.roi_table) if self.roi_table is not None else None,
            "template": np.tile(self.templates[-1].vertices, (views, 1)),
        }
        self._flat_cache[views] = art
        return art

    def forward_many(self, feature_maps, landmarks) -> Tensor:
        """Decode ``V`` views at once; returns stacked vertices (V * N, 3).

        Equivalent to ``V`` forward passes up to floating-point summation
        order. Inputs are treated as constants (no gradients flow to them).
        """
        views = len(feature_maps)
        art = self._flat_artifacts(views)
        fp_rows = [grid_sample(Tensor._coerce(fm), Tensor._coerce(lm)).data
                   for fm, lm in zip(feature_maps, landmarks)]
        fp = Tensor((np.stack(fp_rows) - self.config.input_center) * self.config.input_gain)
        x = (self.lift_matrix.m @ fp).reshape(views * self.templates[0].vertex_count, -1)
        for i, sp in enumerate(self.stage_params):
            if i > 0:
                x = relu(x)
            x = dynamic_spiral_conv(x, art["tables"][i], sp)
            if i + 1 < len(self.stage_params):
                x = upsample_features(x, art["upsamples"][i])
        if self.roi_params is not None:
            x = roi_conv(x, art["roi_table"], self.roi_params)
        offsets = linear(x, self.head_w, self.head_b) * self.config.offset_scale
        return offsets + art["template"]

    @property
    def finest_template(self) -> TriMesh:
        return self.templates[-1]

    def save(self, path) -> None:
        save_checkpoint(path, self.params(), self.config_hash)

    def load(self, path) -> None:
        load_checkpoint(path, self.params(), self.config_hash)


def build_decoder(config: PipelineConfig) -> Decoder:
    return Decoder(config)

"""Hand-region vertex partitions: palm plus five fingers.

Hand templates load their labeling from a JSON file; synthetic sphere
meshes get a procedural labeling (southern cap = palm, five longitude
wedges of the northern hemisphere = fingers).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .adjacency import build_adjacency
from .errors import MeshError
from .mesh import TriMesh

REGION_NAMES = ("palm", "thumb", "index", "middle", "ring", "little")


@dataclass(frozen=True)
class RegionPartition:
    """Total labeling of mesh vertices into the six hand regions.

    ``labels[v]`` is an index into :data:`REGION_NAMES`.
    """

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.ndim != 1:
            raise MeshError("labels must be a 1-d array")
        if lab.size and (lab.min() < 0 or lab.max() >= len(REGION_NAMES)):
            raise MeshError("label out of range")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @property
    def vertex_count(self) -> int:
        return self.labels.shape[0]

    def region_vertices(self, region: int) -> np.ndarray:
        return np.nonzero(self.labels == region)[0]

    def to_json(self) -> str:
        return json.dumps({
            "region_names": list(REGION_NAMES),
            "labels": self.labels.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "RegionPartition":
        obj = json.loads(text)
        labels = obj["labels"]
        if obj.get("region_names", list(REGION_NAMES)) != list(REGION_NAMES):
            names = obj["region_names"]
            remap = {i: REGION_NAMES.index(n) for i, n in enumerate(names)}
            labels = [remap[i] for i in labels]
        return cls(np.asarray(labels, dtype=np.int64))


def validate_partition(partition: RegionPartition, mesh: TriMesh,
                       require_all_regions: bool = True) -> None:
    """Check partition invariants against a mesh.

    Every vertex must carry a label (guaranteed by construction), each
    occupied label class must be edge-connected, and with
    ``require_all_regions`` all six classes must be non-empty. Synthetic
    two-region fixtures validate with ``require_all_regions=False``.
    """
    if partition.vertex_count != mesh.vertex_count:
        raise MeshError(f"partition covers {partition.vertex_count} vertices, "
                        f"mesh has {mesh.vertex_count}")
    labels = partition.labels
    adj = build_adjacency(mesh)
    for region in range(len(REGION_NAMES)):
        members = partition.region_vertices(region)
        if members.size == 0:
            if require_all_regions:
                raise MeshError(f"region '{REGION_NAMES[region]}' is empty")
            continue
        seen = {int(members[0])}
        stack = [int(members[0])]
        while stack:
            u = stack.pop()
            for w in adj.neighbors[u]:
                w = int(w)
                if labels[w] == region and w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != members.size:
            raise MeshError(f"region '{REGION_NAMES[region]}' is not edge-connected")


def wedge_partition(mesh: TriMesh) -> RegionPartition:
    """Procedural labeling for sphere-like meshes.

    Vertices with z <= 0 become the palm; the open northern hemisphere is
    split into five 72-degree longitude wedges, one per finger.
    """
    v = mesh.vertices
    labels = np.zeros(mesh.vertex_count, dtype=np.int64)
    north = v[:, 2] > 0
    lon = np.arctan2(v[north, 1], v[north, 0])  # [-pi, pi)
    wedge = np.floor((lon + math.pi) / (2.0 * math.pi) * 5.0).astype(np.int64)
    wedge = np.clip(wedge, 0, 4)
    labels[north] = 1 + wedge
    return RegionPartition(labels)


def two_region_partition(mesh: TriMesh) -> RegionPartition:
    """Equator split used by locality tests: palm below, thumb above."""
    labels = np.where(mesh.vertices[:, 2] > 0, 1, 0).astype(np.int64)
    return RegionPartition(labels)

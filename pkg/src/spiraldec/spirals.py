"""Canonical spiral enumeration and fixed-length spiral tables.

A spiral is the centre vertex followed by its 1-ring, 2-ring, ... in a
deterministic, topology-only order:

* ring 1 is the winding-ordered 1-ring (closed rings start at the
  smallest neighbor index);
* ring ``n+1`` is emitted by walking ring ``n`` in order and, for each
  element ``r``, appending the not-yet-emitted next-ring neighbors of
  ``r`` in ``r``'s own winding order, starting just after ``r``'s
  predecessor in ring ``n``.

Identical meshes therefore always produce bit-identical tables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .adjacency import AdjacencyIndex, build_adjacency
from .mesh import TriMesh


def _rotated(ring: np.ndarray, anchor: int, open_chain: bool):
    """Ring order starting just after ``anchor``; open chains keep chain order."""
    if open_chain:
        return ring
    pos = np.nonzero(ring == anchor)[0]
    if pos.size == 0:
        return ring
    k = (int(pos[0]) + 1) % len(ring)
    return np.concatenate([ring[k:], ring[:k]])


def _enumerate_spiral(adj: AdjacencyIndex, v: int, needed: int, accept=None) -> list:
    """Undilated spiral order around ``v`` until ``needed`` accepted entries.

    ``accept`` filters entries (region clipping); enumeration still walks
    the full graph so ring ranks are graph distances, not in-region
    distances. Stops early when the connected component is exhausted.
    """
    out = [v] if (accept is None or accept(v)) else []
    disk = {v}
    ring = [v]
    while len(out) < needed and ring:
        ring_set = set()
        for r in ring:
            for u in adj.neighbors[r]:
                u = int(u)
                if u not in disk:
                    ring_set.add(u)
        nxt = []
        for i, r in enumerate(ring):
            anchor = ring[i - 1]  # cyclic predecessor; ring[-1] for i == 0
            for u in _rotated(adj.neighbors[r], anchor, bool(adj.is_boundary[r])):
                u = int(u)
                if u in ring_set:
                    ring_set.remove(u)
                    nxt.append(u)
                    if accept is None or accept(u):
                        out.append(u)
        disk.update(nxt)
        ring = nxt
    return out


def spiral_sequence(adj: AdjacencyIndex, v: int, length: int, dilation: int = 1) -> np.ndarray:
    """Fixed-length spiral of ``v``: centre, 1-ring, 2-ring, ...

    Dilation keeps every ``dilation``-th element of the undilated
    sequence (the centre is element 0 and always kept). Sequences that
    run out of reachable vertices are padded by repeating the centre.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    undilated = _enumerate_spiral(adj, v, (length - 1) * dilation + 1)
    seq = undilated[::dilation][:length]
    seq.extend([v] * (length - len(seq)))
    return np.asarray(seq, dtype=np.int64)


@dataclass(frozen=True)
class SpiralTable:
    """Per-vertex fixed-length ordered neighbor indices.

    ``indices[v][0] == v`` for every vertex; when ``region_clipped`` every
    entry of row ``v`` shares ``v``'s region label.
    """

    length: int
    dilation: int
    indices: np.ndarray  # (vertex_count, length) int64
    region_clipped: bool = False

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def vertex_count(self) -> int:
        return self.indices.shape[0]

    def to_json(self) -> str:
        return json.dumps({
            "length": self.length,
            "dilation": self.dilation,
            "region_clipped": self.region_clipped,
            "indices": self.indices.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "SpiralTable":
        obj = json.loads(text)
        return cls(length=int(obj["length"]), dilation=int(obj["dilation"]),
                   indices=np.asarray(obj["indices"], dtype=np.int64),
                   region_clipped=bool(obj["region_clipped"]))


def build_spiral_table(mesh: TriMesh, length: int, dilation: int = 1,
                       partition=None, adj: AdjacencyIndex | None = None) -> SpiralTable:
    """Spiral table for every vertex of ``mesh``.

    With a region ``partition``, out-of-region entries are removed from
    the undilated spiral before dilation, truncation and padding, so each
    row stays inside its centre's region.
    """
    if adj is None:
        adj = build_adjacency(mesh)
    needed = (length - 1) * dilation + 1
    rows = np.empty((mesh.vertex_count, length), dtype=np.int64)
    if partition is None:
        for v in range(mesh.vertex_count):
            rows[v] = spiral_sequence(adj, v, length, dilation)
        return SpiralTable(length, dilation, rows, region_clipped=False)

    labels = partition.labels
    for v in range(mesh.vertex_count):
        lab = labels[v]
        undilated = _enumerate_spiral(adj, v, needed, accept=lambda u: labels[u] == lab)
        seq = undilated[::dilation][:length]
        seq.extend([v] * (length - len(seq)))
        rows[v] = seq
    return SpiralTable(length, dilation, rows, region_clipped=True)

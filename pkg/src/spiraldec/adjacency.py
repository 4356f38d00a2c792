"""Winding-ordered vertex adjacency and graph-distance rings."""

from __future__ import annotations

import numpy as np

from .errors import InconsistentWinding, NonManifoldEdge
from .mesh import TriMesh


class AdjacencyIndex:
    """Per-vertex ordered 1-ring neighbor lists and incident-face lists.

    Neighbor order is rotationally consistent with face winding: walking a
    ring visits neighbors in the order the incident faces wrap around the
    vertex. Closed rings are rotated to start at the smallest neighbor
    index; open rings (boundary vertices) keep chain order, head first.
    """

    __slots__ = ("neighbors", "incident_faces", "is_boundary", "vertex_count")

    def __init__(self, neighbors, incident_faces, is_boundary):
        self.neighbors = neighbors
        self.incident_faces = incident_faces
        self.is_boundary = is_boundary
        self.vertex_count = len(neighbors)

    def degree(self, v: int) -> int:
        return len(self.neighbors[v])


def build_adjacency(mesh: TriMesh) -> AdjacencyIndex:
    """Build the winding-ordered adjacency index of a mesh.

    Raises
    ------
    NonManifoldEdge
        If an undirected edge borders more than two faces.
    InconsistentWinding
        If two faces traverse a shared edge in the same direction.
    """
    f = mesh.faces
    nv = mesh.vertex_count

    halfedges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)
    directed, d_counts = np.unique(halfedges, axis=0, return_counts=True)
    und, u_counts = np.unique(np.sort(halfedges, axis=1), axis=0, return_counts=True)
    bad = u_counts > 2
    if bad.any():
        raise NonManifoldEdge(f"edges bordering >2 faces: {und[bad][:8].tolist()}")
    if (d_counts > 1).any():
        dup = directed[d_counts > 1]
        raise InconsistentWinding(f"repeated directed edges: {dup[:8].tolist()}")

    # successor[v][a] = b for each face (v, a, b) rotated so v comes first:
    # around v, neighbor b follows neighbor a in winding order.
    successor = [dict() for _ in range(nv)]
    incident = [[] for _ in range(nv)]
    for fi, (a, b, c) in enumerate(f):
        successor[a][b] = c
        successor[b][c] = a
        successor[c][a] = b
        incident[a].append(fi)
        incident[b].append(fi)
        incident[c].append(fi)

    neighbors = []
    is_boundary = np.zeros(nv, dtype=bool)
    for v in range(nv):
        succ = successor[v]
        if not succ:
            neighbors.append(np.empty(0, dtype=np.int64))
            continue
        ring = set(succ.keys()) | set(succ.values())
        heads = sorted(ring - set(succ.values()))
        if not heads:
            # closed fan: walk the cycle from the smallest neighbor
            start = min(ring)
            order = [start]
            cur = succ[start]
            while cur != start:
                order.append(cur)
                cur = succ[cur]
        else:
            # one open chain per fan; bowtie vertices concatenate chains
            is_boundary[v] = True
            order = []
            for head in heads:
                order.append(head)
                cur = head
                while cur in succ:
                    cur = succ[cur]
                    order.append(cur)
        if len(order) != len(ring):
            raise InconsistentWinding(f"vertex {v}: fan does not cover its neighbors")
        neighbors.append(np.asarray(order, dtype=np.int64))

    incident_faces = [np.asarray(fs, dtype=np.int64) for fs in incident]
    return AdjacencyIndex(neighbors, incident_faces, is_boundary)


def n_ring(adj: AdjacencyIndex, v: int, n: int) -> set:
    """Vertices at graph distance exactly ``n`` from ``v``.

    ``n_ring(adj, v, 0) == {v}``; ring ``n+1`` is the neighborhood of ring
    ``n`` minus the ``n``-disk.
    """
    if not 0 <= v < adj.vertex_count:
        raise IndexError(f"vertex {v} out of range")
    if n < 0:
        raise ValueError("n must be non-negative")
    ring = {v}
    disk = {v}
    for _ in range(n):
        nxt = set()
        for u in ring:
            nxt.update(int(w) for w in adj.neighbors[u])
        ring = nxt - disk
        disk |= ring
        if not ring:
            return set()
    return ring

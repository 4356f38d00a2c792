"""Triangle mesh container, OBJ subset I/O and template mesh generators."""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateFace, MeshError


class TriMesh:
    """Immutable triangle mesh: vertex positions plus face indices.

    Parameters
    ----------
    vertices : array_like
        (n, 3) float coordinates. Hand templates are in millimetres;
        synthetic meshes use arbitrary units.
    faces : array_like
        (m, 3) int vertex indices with consistent winding (all faces
        oriented the same way).

    Raises
    ------
    MeshError
        If a face index is out of range or the arrays are malformed.
    DegenerateFace
        If a face references the same vertex more than once.
    """

    __slots__ = ("vertices", "faces")

    def __init__(self, vertices, faces):
        v = np.asarray(vertices, dtype=np.float64)
        f = np.asarray(faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must be (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError(f"faces must be (m, 3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= v.shape[0]):
            raise MeshError("face index out of range")
        same = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        if same.any():
            raise DegenerateFace(f"faces with repeated indices: {np.nonzero(same)[0][:8].tolist()}")
        v.setflags(write=False)
        f.setflags(write=False)
        self.vertices = v
        self.faces = f

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def face_count(self) -> int:
        return self.faces.shape[0]

    def with_vertices(self, vertices) -> "TriMesh":
        """Same topology, new vertex positions."""
        return TriMesh(vertices, self.faces)

    def __repr__(self):
        return f"TriMesh({self.vertex_count} vertices, {self.face_count} faces)"


def load_obj(path) -> TriMesh:
    """Read the OBJ subset: ``v x y z`` and ``f i j k`` (1-based).

    Face entries of the form ``i/t/n`` are accepted; only the vertex index
    is used. Other line types are ignored.
    """
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "v":
                if len(parts) < 4:
                    raise MeshError(f"{path}:{lineno}: malformed vertex line")
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif parts[0] == "f":
                if len(parts) != 4:
                    raise MeshError(f"{path}:{lineno}: only triangular faces are supported")
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if any(i < 1 for i in idx):
                    raise MeshError(f"{path}:{lineno}: negative face indices are not supported")
                faces.append([i - 1 for i in idx])
    return TriMesh(np.array(vertices, dtype=np.float64).reshape(-1, 3),
                   np.array(faces, dtype=np.int64).reshape(-1, 3))


def save_obj(mesh: TriMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {x!r} {y!r} {z!r}\n")
        for a, b, c in mesh.faces:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


def icosahedron(radius: float = 1.0) -> TriMesh:
    """Pole-aligned regular icosahedron with outward (CCW) winding.

    Vertex 0 is the north pole (0, 0, r), vertex 11 the south pole; two
    five-vertex rings sit at latitude ±atan(1/2). Pole alignment keeps
    longitude-wedge region labelings clean.
    """
    lat = math.atan(0.5)
    verts = [(0.0, 0.0, radius)]
    for k in range(5):  # upper ring
        lon = 2.0 * math.pi * k / 5.0
        verts.append((radius * math.cos(lat) * math.cos(lon),
                      radius * math.cos(lat) * math.sin(lon),
                      radius * math.sin(lat)))
    for k in range(5):  # lower ring, offset by 36 degrees
        lon = 2.0 * math.pi * (k + 0.5) / 5.0
        verts.append((radius * math.cos(lat) * math.cos(lon),
                      radius * math.cos(lat) * math.sin(lon),
                      -radius * math.sin(lat)))
    verts.append((0.0, 0.0, -radius))

    up = [1 + k for k in range(5)]
    lo = [6 + k for k in range(5)]
    faces = []
    for k in range(5):
        kn = (k + 1) % 5
        faces.append((0, up[k], up[kn]))            # top cap
        faces.append((up[k], lo[k], up[kn]))        # upper band
        faces.append((up[kn], lo[k], lo[kn]))       # lower band
        faces.append((11, lo[kn], lo[k]))           # bottom cap
    return TriMesh(np.array(verts), np.array(faces))


def tetrahedron(radius: float = 1.0) -> TriMesh:
    """Regular tetrahedron with outward winding, first vertex at the +z pole."""
    verts = np.array([
        (0.0, 0.0, 1.0),
        (2.0 * math.sqrt(2.0) / 3.0, 0.0, -1.0 / 3.0),
        (-math.sqrt(2.0) / 3.0, math.sqrt(6.0) / 3.0, -1.0 / 3.0),
        (-math.sqrt(2.0) / 3.0, -math.sqrt(6.0) / 3.0, -1.0 / 3.0),
    ]) * radius
    faces = np.array([(0, 1, 2), (0, 2, 3), (0, 3, 1), (1, 3, 2)])
    return TriMesh(verts, faces)


def octahedron(radius: float = 1.0) -> TriMesh:
    """Regular octahedron with outward winding, poles on the z axis."""
    verts = np.array([
        (0.0, 0.0, 1.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0),
        (-1.0, 0.0, 0.0), (0.0, -1.0, 0.0), (0.0, 0.0, -1.0),
    ]) * radius
    faces = np.array([
        (0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 1),
        (5, 2, 1), (5, 3, 2), (5, 4, 3), (5, 1, 4),
    ])
    return TriMesh(verts, faces)


_BASE_SOLIDS = {"icosahedron": icosahedron, "tetrahedron": tetrahedron, "octahedron": octahedron}


def subdivide_midpoint(mesh: TriMesh):
    """One step of midpoint (1-to-4) subdivision.

    New vertices sit exactly at edge midpoints; no reprojection is applied.

    Returns
    -------
    fine : TriMesh
    correspondence : list
        Per fine vertex: parent vertex index ``i`` for inherited vertices,
        or parent edge ``(i, j)`` for midpoint vertices. This is the input
        expected by :func:`spiraldec.upsampling.build_upsample_map`.
    """
    v = mesh.vertices
    f = mesh.faces
    nv = mesh.vertex_count

    halfedges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)
    und = np.sort(halfedges, axis=1)
    edges, inverse = np.unique(und, axis=0, return_inverse=True)
    inverse = inverse.reshape(3, -1).T  # per face: edge ids of (01, 12, 20)

    mid = 0.5 * (v[edges[:, 0]] + v[edges[:, 1]])
    fine_v = np.concatenate([v, mid], axis=0)

    e01 = nv + inverse[:, 0]
    e12 = nv + inverse[:, 1]
    e20 = nv + inverse[:, 2]
    fine_f = np.concatenate([
        np.stack([f[:, 0], e01, e20], axis=1),
        np.stack([f[:, 1], e12, e01], axis=1),
        np.stack([f[:, 2], e20, e12], axis=1),
        np.stack([e01, e12, e20], axis=1),
    ], axis=0)

    correspondence = [int(i) for i in range(nv)]
    correspondence += [(int(a), int(b)) for a, b in edges]
    return TriMesh(fine_v, fine_f), correspondence


def template_chain(levels: int, radius: float = 1.0, reproject: bool = True,
                   base: str = "icosahedron"):
    """Coarse-to-fine chain of sphere templates by repeated subdivision.

    Returns ``(meshes, correspondences)`` where ``meshes[0]`` is the base
    solid and ``correspondences[i]`` maps ``meshes[i+1]`` onto
    ``meshes[i]``. With ``reproject`` the positions are pushed back onto
    the sphere after each split (topology and correspondences unchanged).
    """
    if base not in _BASE_SOLIDS:
        raise MeshError(f"unknown base solid {base!r}; options: {sorted(_BASE_SOLIDS)}")
    meshes = [_BASE_SOLIDS[base](radius)]
    correspondences = []
    for _ in range(levels - 1):
        fine, corr = subdivide_midpoint(meshes[-1])
        if reproject:
            pos = fine.vertices
            norms = np.linalg.norm(pos, axis=1, keepdims=True)
            fine = fine.with_vertices(radius * pos / norms)
        meshes.append(fine)
        correspondences.append(corr)
    return meshes, correspondences

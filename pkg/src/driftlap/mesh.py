"""Triangle meshes for planar domains and closed surfaces.

A mesh is a flat array of vertices plus integer triangles.  Closed
surfaces come in two flavours: embedded (sphere in R^3) and flat
quotients (torus as a rectangle with opposite sides identified).  The
quotient case keeps duplicate seam vertices for geometry and records the
identification in ``periodic_map``; all topological checks (manifold,
Euler characteristic, boundary) run on the quotient.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from . import jsonio


class MeshError(ValueError):
    """Raised when mesh data violates a structural requirement."""


GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0

# vertices of the unit-circumradius icosahedron, before normalization
_ICO_VERTS = np.array(
    [
        (-1, GOLDEN, 0), (1, GOLDEN, 0), (-1, -GOLDEN, 0), (1, -GOLDEN, 0),
        (0, -1, GOLDEN), (0, 1, GOLDEN), (0, -1, -GOLDEN), (0, 1, -GOLDEN),
        (GOLDEN, 0, -1), (GOLDEN, 0, 1), (-GOLDEN, 0, -1), (-GOLDEN, 0, 1),
    ],
    dtype=np.float64,
)

_ICO_FACES = np.array(
    [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ],
    dtype=np.int64,
)


class TriMesh:
    """Immutable triangle mesh.

    Parameters
    ----------
    vertices : (V, 2) or (V, 3) float array
    triangles : (F, 3) int array
        Consistently oriented (counterclockwise for planar meshes).
    periodic_map : dict, optional
        Maps duplicate vertex index -> canonical vertex index.  Used by
        flat quotient surfaces; the duplicates carry seam geometry.
    genus : int, optional
        Required for closed meshes; checked against the Euler formula.
    require_closed_quotient : bool
        When a ``periodic_map`` is present, insist that identification
        closes the mesh (no boundary).  Submeshes cut out of a quotient
        surface legitimately have both, so extraction disables this.
    """

    def __init__(self, vertices, triangles, periodic_map=None, genus=None,
                 require_closed_quotient=True):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
            raise MeshError("vertices must be (V, 2) or (V, 3)")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError("triangles must be (F, 3)")
        if len(triangles) == 0:
            raise MeshError("mesh has no triangles")
        if not np.isfinite(vertices).all():
            raise MeshError("vertices contain non-finite coordinates")

        self.vertices = vertices
        self.triangles = triangles
        self.periodic_map = dict(periodic_map) if periodic_map else {}
        self._validate_indices()
        self.canonical = self._build_canonical()
        self._validate_structure(genus, require_closed_quotient)
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)

    # -- construction checks ------------------------------------------------

    def _validate_indices(self):
        V = len(self.vertices)
        tri = self.triangles
        if tri.min() < 0 or tri.max() >= V:
            raise MeshError("triangle references a vertex index out of range")
        if ((tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2])
                | (tri[:, 0] == tri[:, 2])).any():
            raise MeshError("triangle with repeated vertex")
        used = np.zeros(V, dtype=bool)
        used[tri] = True
        if not used.all():
            raise MeshError("mesh has vertices not referenced by any triangle")
        for dup, canon in self.periodic_map.items():
            if not (0 <= dup < V and 0 <= canon < V):
                raise MeshError("periodic_map index out of range")
            if dup == canon:
                raise MeshError("periodic_map maps a vertex to itself")
            if canon in self.periodic_map:
                raise MeshError("periodic_map chains are not allowed")

    def _build_canonical(self):
        canon = np.arange(len(self.vertices), dtype=np.int64)
        for dup, target in self.periodic_map.items():
            canon[dup] = target
        return canon

    def _validate_structure(self, genus, require_closed_quotient):
        tri_q = self.canonical[self.triangles]
        if ((tri_q[:, 0] == tri_q[:, 1]) | (tri_q[:, 1] == tri_q[:, 2])
                | (tri_q[:, 0] == tri_q[:, 2])).any():
            raise MeshError("triangle degenerates under periodic identification")

        # geometric degeneracy and planar orientation
        areas = triangle_areas(self.vertices, self.triangles)
        if (areas <= 0).any() or not np.isfinite(areas).all():
            raise MeshError("degenerate (zero-area) triangle")
        if self.dim == 2:
            signed = _signed_areas_2d(self.vertices, self.triangles)
            if (signed <= 0).any():
                raise MeshError("planar triangle with clockwise orientation")

        # each directed quotient edge must be unique (consistent orientation)
        directed = np.concatenate(
            [tri_q[:, [0, 1]], tri_q[:, [1, 2]], tri_q[:, [2, 0]]]
        )
        uniq_dir = np.unique(directed, axis=0)
        if len(uniq_dir) != len(directed):
            raise MeshError("inconsistent triangle orientation "
                            "(a directed edge appears twice)")

        # undirected quotient edges border one or two triangles
        und = np.sort(directed, axis=1)
        uniq, counts = np.unique(und, axis=0, return_counts=True)
        if (counts > 2).any():
            raise MeshError("non-manifold edge (more than two triangles)")
        self._quotient_edges = uniq
        boundary_q = np.unique(uniq[counts == 1])
        bset = np.zeros(len(self.vertices), dtype=bool)
        bset[boundary_q] = True
        self.boundary_vertices = np.flatnonzero(bset[self.canonical])
        self.boundary_vertices.setflags(write=False)

        if self.periodic_map and require_closed_quotient and not self.is_closed:
            raise MeshError("periodic identification leaves a boundary")

        if self.is_closed:
            chi = self.quotient_vertex_count - len(uniq) + len(self.triangles)
            if chi % 2 != 0 or chi > 2:
                raise MeshError(f"Euler characteristic {chi} is not 2 - 2g")
            derived = (2 - chi) // 2
            if genus is not None and genus != derived:
                raise MeshError(
                    f"genus {genus} inconsistent with Euler characteristic "
                    f"{chi} (expected genus {derived})")
            self.genus = derived
        else:
            self.genus = genus

    # -- basic properties ---------------------------------------------------

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def is_closed(self) -> bool:
        return len(self.boundary_vertices) == 0

    @property
    def quotient_vertex_count(self) -> int:
        return len(np.unique(self.canonical))

    @property
    def quotient_edge_count(self) -> int:
        return len(self._quotient_edges)

    def euler_characteristic(self) -> int:
        return (self.quotient_vertex_count - self.quotient_edge_count
                + self.num_triangles)

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected raw edges, each row sorted, (E, 2)."""
        if not hasattr(self, "_raw_edges"):
            tri = self.triangles
            e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
            self._raw_edges = np.unique(np.sort(e, axis=1), axis=0)
            self._raw_edges.setflags(write=False)
        return self._raw_edges

    @property
    def mean_edge_length(self) -> float:
        if not hasattr(self, "_mean_edge"):
            e = self.edges
            d = self.vertices[e[:, 0]] - self.vertices[e[:, 1]]
            self._mean_edge = float(np.linalg.norm(d, axis=1).mean())
        return self._mean_edge

    def quotient_edge_key(self, a: int, b: int) -> tuple:
        """Canonical identity of the undirected edge (a, b)."""
        ca, cb = int(self.canonical[a]), int(self.canonical[b])
        return (ca, cb) if ca <= cb else (cb, ca)

    def triangle_areas(self) -> np.ndarray:
        return triangle_areas(self.vertices, self.triangles)

    def min_angle_degrees(self) -> float:
        """Smallest interior angle over all triangles."""
        v = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            a = v[:, (i + 1) % 3] - v[:, i]
            b = v[:, (i + 2) % 3] - v[:, i]
            na = np.linalg.norm(a, axis=1)
            nb = np.linalg.norm(b, axis=1)
            cosang = np.clip((a * b).sum(axis=1) / (na * nb), -1.0, 1.0)
            angles.append(np.degrees(np.arccos(cosang)))
        return float(np.min(angles))


def triangle_areas(vertices, triangles) -> np.ndarray:
    p = vertices[triangles]
    u = p[:, 1] - p[:, 0]
    v = p[:, 2] - p[:, 0]
    if vertices.shape[1] == 2:
        return np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]) / 2.0
    return np.linalg.norm(np.cross(u, v), axis=1) / 2.0


def _signed_areas_2d(vertices, triangles) -> np.ndarray:
    p = vertices[triangles]
    u = p[:, 1] - p[:, 0]
    v = p[:, 2] - p[:, 0]
    return (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]) / 2.0


# -- generators --------------------------------------------------------------


def rectangle(width: float, height: float, target_h: float) -> TriMesh:
    """Structured triangulation of [0, width] x [0, height]."""
    _check_sizes(width=width, height=height, target_h=target_h)
    nx = max(2, round(width / target_h))
    ny = max(2, round(height / target_h))
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    def idx(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            v00, v10 = idx(i, j), idx(i + 1, j)
            v01, v11 = idx(i, j + 1), idx(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return TriMesh(vertices, np.array(tris, dtype=np.int64))


def disk(radius: float, target_h: float) -> TriMesh:
    """Near-equilateral triangulation of a disk from concentric hex rings."""
    _check_sizes(radius=radius, target_h=target_h)
    n = max(2, round(radius / target_h))
    dr = radius / n

    verts = [(0.0, 0.0)]
    ring_start = [0]
    for j in range(1, n + 1):
        ring_start.append(len(verts))
        m = 6 * j
        ang = 2.0 * np.pi * np.arange(m) / m
        r = j * dr
        verts.extend(zip(r * np.cos(ang), r * np.sin(ang)))
    vertices = np.array(verts)

    o = [ring_start[1] + t % 6 for t in range(7)]
    tris = [(o[t], o[t + 1], 0) for t in range(6)]
    for j in range(2, n + 1):
        mo, mi = 6 * j, 6 * (j - 1)
        for s in range(6):
            outer = [ring_start[j] + (s * j + t) % mo for t in range(j + 1)]
            inner = [ring_start[j - 1] + (s * (j - 1) + t) % mi
                     for t in range(j)]
            for t in range(j):
                tris.append((outer[t], outer[t + 1], inner[t]))
            for t in range(j - 1):
                tris.append((inner[t], outer[t + 1], inner[t + 1]))
    return TriMesh(vertices, np.array(tris, dtype=np.int64))


def annulus(inner_radius: float, outer_radius: float,
            target_h: float) -> TriMesh:
    """Polar grid triangulation of an annulus."""
    if inner_radius <= 0 or outer_radius <= inner_radius:
        raise MeshError("annulus requires 0 < inner_radius < outer_radius")
    _check_sizes(target_h=target_h)
    nr = max(1, round((outer_radius - inner_radius) / target_h))
    r_mid = (inner_radius + outer_radius) / 2.0
    m = max(8, round(2.0 * np.pi * r_mid / target_h))

    radii = np.linspace(inner_radius, outer_radius, nr + 1)
    ang = 2.0 * np.pi * np.arange(m) / m
    verts = []
    for r in radii:
        verts.extend(zip(r * np.cos(ang), r * np.sin(ang)))
    vertices = np.array(verts)

    def idx(i, k):
        return i * m + k % m

    tris = []
    for i in range(nr):
        for k in range(m):
            a, b = idx(i, k), idx(i + 1, k)
            c, d = idx(i + 1, k + 1), idx(i, k + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    return TriMesh(vertices, np.array(tris, dtype=np.int64))


def flat_torus(width: float, height: float, target_h: float) -> TriMesh:
    """Flat torus: periodic rectangle with seam vertices identified."""
    _check_sizes(width=width, height=height, target_h=target_h)
    nx = max(3, round(width / target_h))
    ny = max(3, round(height / target_h))
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    def idx(i, j):
        return j * (nx + 1) + i

    periodic = {}
    for j in range(ny + 1):
        for i in range(nx + 1):
            ci, cj = i % nx, j % ny
            if (ci, cj) != (i, j):
                periodic[idx(i, j)] = idx(ci, cj)

    tris = []
    for j in range(ny):
        for i in range(nx):
            v00, v10 = idx(i, j), idx(i + 1, j)
            v01, v11 = idx(i, j + 1), idx(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return TriMesh(vertices, np.array(tris, dtype=np.int64),
                   periodic_map=periodic, genus=1)


def sphere(radius: float, target_h: float) -> TriMesh:
    """Geodesic sphere from a subdivided icosahedron."""
    _check_sizes(radius=radius, target_h=target_h)
    verts = _ICO_VERTS / np.linalg.norm(_ICO_VERTS, axis=1, keepdims=True)
    faces = _ICO_FACES.copy()
    # enforce outward orientation regardless of the table's convention
    for f in faces:
        p = verts[f]
        if np.dot(np.cross(p[1] - p[0], p[2] - p[0]), p.mean(axis=0)) < 0:
            f[1], f[2] = f[2], f[1]

    edge0 = radius * np.linalg.norm(verts[faces[0][0]] - verts[faces[0][1]])
    if target_h > 2.0 * edge0:
        raise MeshError("target_h too coarse for a sphere "
                        f"(coarsest mean edge is about {edge0:.3g})")
    level = max(0, math.ceil(math.log2(edge0 / target_h)))

    for _ in range(level):
        verts, faces = _subdivide_unit_sphere(verts, faces)
    return TriMesh(radius * verts, faces, genus=0)


def sphere_at_level(radius: float, level: int) -> TriMesh:
    """Geodesic sphere with an explicit subdivision level."""
    if level < 0:
        raise MeshError("subdivision level must be >= 0")
    verts = _ICO_VERTS / np.linalg.norm(_ICO_VERTS, axis=1, keepdims=True)
    faces = _ICO_FACES.copy()
    for f in faces:
        p = verts[f]
        if np.dot(np.cross(p[1] - p[0], p[2] - p[0]), p.mean(axis=0)) < 0:
            f[1], f[2] = f[2], f[1]
    for _ in range(level):
        verts, faces = _subdivide_unit_sphere(verts, faces)
    return TriMesh(radius * verts, faces, genus=0)


def _subdivide_unit_sphere(verts, faces):
    verts = list(map(tuple, verts))
    cache = {}

    def midpoint(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in cache:
            p = np.array(verts[a]) + np.array(verts[b])
            p /= np.linalg.norm(p)
            cache[key] = len(verts)
            verts.append(tuple(p))
        return cache[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        new_faces.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
    return np.array(verts), np.array(new_faces, dtype=np.int64)


def _check_sizes(**kwargs):
    for name, value in kwargs.items():
        if not (value > 0) or not math.isfinite(value):
            raise MeshError(f"{name} must be positive and finite")


# -- refinement ---------------------------------------------------------------


def refine(mesh: TriMesh) -> TriMesh:
    """Uniform 1-to-4 subdivision (each edge gets a midpoint vertex).

    Sphere meshes are detected (closed, embedded, genus 0, vertices at
    constant distance from their centroid) and new vertices are pushed
    back onto the sphere.  Periodic identifications are extended to the
    new seam midpoints.
    """
    V = mesh.num_vertices
    edges = mesh.edges
    mid_index = {(int(a), int(b)): V + k for k, (a, b) in enumerate(edges)}
    midpoints = (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]]) / 2.0

    if _is_round_sphere(mesh):
        center = mesh.vertices.mean(axis=0)
        radius = float(np.linalg.norm(mesh.vertices - center, axis=1).mean())
        d = midpoints - center
        midpoints = center + radius * d / np.linalg.norm(d, axis=1,
                                                         keepdims=True)

    vertices = np.vstack([mesh.vertices, midpoints])

    def mid(a, b):
        return mid_index[(a, b) if a < b else (b, a)]

    tris = []
    for a, b, c in mesh.triangles:
        a, b, c = int(a), int(b), int(c)
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        tris.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])

    periodic = dict(mesh.periodic_map)
    if periodic:
        # midpoints of raw edges with the same quotient identity are the
        # same point of the surface; keep the lexicographically smallest
        # raw edge as canonical
        groups = {}
        for a, b in edges:
            key = mesh.quotient_edge_key(int(a), int(b))
            groups.setdefault(key, []).append((int(a), int(b)))
        for group in groups.values():
            if len(group) > 1:
                group.sort()
                canon = mid(*group[0])
                for dup_edge in group[1:]:
                    periodic[mid(*dup_edge)] = canon

    return TriMesh(vertices, np.array(tris, dtype=np.int64),
                   periodic_map=periodic or None, genus=mesh.genus,
                   require_closed_quotient=mesh.is_closed)


def _is_round_sphere(mesh: TriMesh) -> bool:
    if not (mesh.is_closed and mesh.dim == 3 and mesh.genus == 0):
        return False
    center = mesh.vertices.mean(axis=0)
    r = np.linalg.norm(mesh.vertices - center, axis=1)
    return bool(r.std() <= 1e-9 * r.mean())


# -- submesh extraction -------------------------------------------------------


@dataclass(frozen=True)
class SubmeshExtraction:
    """A submesh plus the injection of its vertices into the parent."""

    submesh: TriMesh
    vertex_lift: np.ndarray  # submesh vertex index -> parent vertex index
    origin_domain_id: int


def extract_submesh(mesh: TriMesh, triangle_ids,
                    origin_domain_id: int = -1) -> SubmeshExtraction:
    """Cut the closure of a set of triangles out of a mesh.

    The selected set must be nonempty, duplicate-free, in range, and
    edge-connected (through quotient edges on periodic meshes).
    """
    tri_ids = np.asarray(sorted(triangle_ids), dtype=np.int64)
    if len(tri_ids) == 0:
        raise MeshError("empty triangle selection")
    if len(np.unique(tri_ids)) != len(tri_ids):
        raise MeshError("duplicate triangle ids in selection")
    if tri_ids.min() < 0 or tri_ids.max() >= mesh.num_triangles:
        raise MeshError("triangle id out of range")
    _check_edge_connected(mesh, tri_ids)

    tris = mesh.triangles[tri_ids]
    lift = np.unique(tris)
    new_index = np.full(mesh.num_vertices, -1, dtype=np.int64)
    new_index[lift] = np.arange(len(lift))

    periodic = {}
    for dup, canon in mesh.periodic_map.items():
        if new_index[dup] >= 0 and new_index[canon] >= 0:
            periodic[int(new_index[dup])] = int(new_index[canon])

    sub = TriMesh(mesh.vertices[lift], new_index[tris],
                  periodic_map=periodic or None,
                  genus=None, require_closed_quotient=False)
    if sub.is_closed:
        # the selection covered a whole closed component
        sub = TriMesh(mesh.vertices[lift], new_index[tris],
                      periodic_map=periodic or None, genus=mesh.genus,
                      require_closed_quotient=False)
    return SubmeshExtraction(sub, lift, origin_domain_id)


def _check_edge_connected(mesh: TriMesh, tri_ids: np.ndarray):
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    tri_q = mesh.canonical[mesh.triangles[tri_ids]]
    edge_owner = {}
    rows, cols = [], []
    for local, tq in enumerate(tri_q):
        for a, b in ((tq[0], tq[1]), (tq[1], tq[2]), (tq[2], tq[0])):
            key = (int(a), int(b)) if a < b else (int(b), int(a))
            if key in edge_owner:
                rows.append(edge_owner[key])
                cols.append(local)
            else:
                edge_owner[key] = local
    n = len(tri_ids)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    ncomp, _ = connected_components(graph, directed=False)
    if ncomp != 1:
        raise MeshError("triangle selection is not edge-connected")


# -- serialization ------------------------------------------------------------


def mesh_to_dict(mesh: TriMesh) -> dict:
    return {
        "format": "trimesh",
        "dim": mesh.dim,
        "vertices": [[float(x) for x in row] for row in mesh.vertices],
        "triangles": [[int(i) for i in row] for row in mesh.triangles],
        "periodic_map": {str(k): int(v)
                         for k, v in sorted(mesh.periodic_map.items())},
        "genus": mesh.genus,
    }


def mesh_from_dict(data: dict) -> TriMesh:
    try:
        vertices = np.array(data["vertices"], dtype=np.float64)
        triangles = np.array(data["triangles"], dtype=np.int64)
        periodic = {int(k): int(v)
                    for k, v in data.get("periodic_map", {}).items()}
        genus = data.get("genus")
    except (KeyError, TypeError, ValueError) as exc:
        raise MeshError(f"malformed mesh data: {exc}") from exc
    return TriMesh(vertices, triangles, periodic_map=periodic or None,
                   genus=genus)


def save(mesh: TriMesh, path: str) -> None:
    jsonio.dump(mesh_to_dict(mesh), path)


def load(path: str) -> TriMesh:
    try:
        data = jsonio.load(path)
    except json.JSONDecodeError as exc:
        raise MeshError(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or data.get("format") != "trimesh":
        raise MeshError("not a mesh file")
    return mesh_from_dict(data)


def mesh_hash(mesh: TriMesh) -> str:
    """Content hash of the canonical serialized form."""
    text = jsonio.dumps(mesh_to_dict(mesh))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()

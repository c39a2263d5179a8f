"""P1 finite element assembly of the weighted weak form.

For a weight phi and optional potential h this builds, over a triangle
mesh, the sparse matrices

    stiffness  A_ij = integral  grad psi_i . grad psi_j  e^{-phi} dv
    mass       M_ij = integral  psi_i psi_j             e^{-phi} dv
    potential  H_ij = integral  h psi_i psi_j           e^{-phi} dv

for the nodal hat basis psi_i.  Gradients of P1 functions are constant
per triangle and integrate exactly; e^{-phi} and h are sampled by a
3-point interior Gauss rule (exact through degree 2).

The generalized problem (A + H) x = lambda M x is invariant under
phi -> phi + c, so internally everything is assembled against
e^{-(phi - phi_min)}; the constant log_scale = phi_min is stored and
folded back in wherever true-scale quantities (matrices, volumes, inner
products) are exposed.  This keeps the arithmetic well inside the
floating range for strongly varying weights.

Dirichlet vertices are eliminated (no penalty terms): they map to no
equation index and their rows/columns never enter the matrices.
Assembly is sequential over a fixed triangle order, so repeated runs
are bit-identical.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse import coo_matrix

from . import jsonio
from .field import ScalarField
from .mesh import TriMesh

PHI_OVERFLOW = 700.0

# barycentric coordinates and basis values of the degree-2 Gauss rule;
# row q holds the three hat-function values at quadrature point q
GAUSS_B = np.array(
    [
        [2 / 3, 1 / 6, 1 / 6],
        [1 / 6, 2 / 3, 1 / 6],
        [1 / 6, 1 / 6, 2 / 3],
    ]
)

# unordered index pairs of a symmetric 3x3 block
_PAIRS = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
# products B[q,i]*B[q,j] per pair, fixed 3x6 table
_PAIR_B = np.array([[GAUSS_B[q, i] * GAUSS_B[q, j] for (i, j) in _PAIRS]
                    for q in range(3)])


class AssemblyError(ValueError):
    """Raised for invalid assembly inputs."""


class WeightedOperator:
    """Discrete weighted Laplacian with optional potential.

    Public matrices are true scale (the e^{-phi} integrals themselves);
    solvers should call :meth:`scaled_matrices` to work at the shifted
    scale e^{-(phi - phi_min)} instead.
    """

    def __init__(self, mesh, weight, potential_field, problem_kind,
                 scaled_stiffness, scaled_mass, scaled_potential,
                 log_scale, dof_map, scaled_volume, lumped):
        self.mesh = mesh
        self.weight = weight
        self.potential_field = potential_field
        self.problem_kind = problem_kind
        self._K = scaled_stiffness
        self._M = scaled_mass
        self._H = scaled_potential
        self.log_scale = log_scale
        self.dof_map = dof_map
        self._scaled_volume = scaled_volume
        self.lumped = lumped
        self.num_dofs = int(dof_map.max()) + 1

        # smallest raw vertex carrying each dof is its coordinate
        # representative (descending writes, so the last one wins)
        rep = np.full(self.num_dofs, -1, dtype=np.int64)
        live = np.flatnonzero(dof_map >= 0)[::-1]
        rep[dof_map[live]] = live
        self.representative_vertex = rep

    # -- true-scale views ----------------------------------------------------

    @property
    def stiffness(self):
        return self._K * math.exp(-self.log_scale)

    @property
    def mass(self):
        return self._M * math.exp(-self.log_scale)

    @property
    def potential(self):
        if self._H is None:
            return None
        return self._H * math.exp(-self.log_scale)

    @property
    def weighted_volume(self) -> float:
        return self._scaled_volume * math.exp(-self.log_scale)

    def scaled_matrices(self):
        """(stiffness, mass, potential|None, log_scale) at shifted scale."""
        return self._K, self._M, self._H, self.log_scale

    def scaled_operator(self):
        """Left-hand matrix A + H at shifted scale."""
        return self._K if self._H is None else (self._K + self._H).tocsr()

    # -- vectors -------------------------------------------------------------

    def _check_vector(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.num_dofs,):
            raise AssemblyError(
                f"vector has shape {u.shape}, expected ({self.num_dofs},)")
        return u

    def weighted_inner(self, u, v) -> float:
        """Discrete inner product  u^T M v  against e^{-phi} dv."""
        u = self._check_vector(u)
        v = self._check_vector(v)
        return float(u @ (self._M @ v)) * math.exp(-self.log_scale)

    def rayleigh(self, u) -> float:
        """(u^T (A + H) u) / (u^T M u); the scale shift cancels."""
        u = self._check_vector(u)
        den = float(u @ (self._M @ u))
        if den == 0.0:
            raise AssemblyError("rayleigh quotient of the zero vector")
        num = float(u @ (self._K @ u))
        if self._H is not None:
            num += float(u @ (self._H @ u))
        return num / den

    def vertex_values(self, u) -> np.ndarray:
        """Expand a dof vector to all raw vertices (0 on Dirichlet ones)."""
        u = self._check_vector(u)
        out = np.zeros(len(self.dof_map))
        live = self.dof_map >= 0
        out[live] = u[self.dof_map[live]]
        return out

    def interpolate(self, f: ScalarField) -> np.ndarray:
        """Dof vector of vertex values of a field (Dirichlet dofs dropped)."""
        vals = f.evaluate(self.mesh.vertices[self.representative_vertex])
        return vals


def assemble(mesh: TriMesh, phi: ScalarField = None, h: ScalarField = None,
             problem_kind: str = "dirichlet",
             lump_mass: bool = False) -> WeightedOperator:
    """Build the WeightedOperator for a mesh, weight, and potential.

    problem_kind selects boundary handling: "dirichlet" eliminates
    boundary vertices (mesh must have a boundary), "closed" keeps all
    quotient vertices (mesh must be closed).
    """
    if problem_kind not in ("dirichlet", "closed"):
        raise AssemblyError(f"unknown problem_kind {problem_kind!r}")
    if problem_kind == "dirichlet" and mesh.is_closed:
        raise AssemblyError("dirichlet problem requires a mesh with boundary")
    if problem_kind == "closed" and not mesh.is_closed:
        raise AssemblyError("closed problem requires a closed mesh")
    for name, f in (("phi", phi), ("h", h)):
        if f is not None and f.dimension != mesh.dim:
            raise AssemblyError(
                f"{name} has dimension {f.dimension}, mesh is {mesh.dim}D")

    verts = mesh.vertices
    tris = mesh.triangles
    areas = mesh.triangle_areas()
    F = len(tris)

    # quadrature points and weight samples
    qpts = np.einsum("qi,fid->fqd", GAUSS_B, verts[tris])
    if phi is None or (phi.is_constant and phi.constant_value == 0.0):
        log_scale = 0.0
        w = np.ones((F, 3))
    else:
        phi_q = phi.evaluate(qpts.reshape(-1, mesh.dim)).reshape(F, 3)
        if not np.isfinite(phi_q).all():
            raise AssemblyError("phi is not finite at a quadrature point")
        if np.abs(phi_q).max() > PHI_OVERFLOW:
            raise AssemblyError(
                f"|phi| exceeds {PHI_OVERFLOW:g} at a quadrature point; "
                "e^(-phi) would overflow")
        log_scale = float(phi_q.min())
        w = np.exp(-(phi_q - log_scale))
    wq = (areas / 3.0)[:, None] * w  # quadrature weights, (F, 3)
    scaled_volume = float(wq.sum())

    # constant P1 gradients per triangle (3D formula, planar padded)
    P = verts[tris]
    if mesh.dim == 2:
        P = np.concatenate([P, np.zeros((F, 3, 1))], axis=2)
    normal = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    two_area = np.linalg.norm(normal, axis=1)
    nhat = normal / two_area[:, None]
    opposite = np.stack(
        [P[:, 2] - P[:, 1], P[:, 0] - P[:, 2], P[:, 1] - P[:, 0]], axis=1)
    grads = np.cross(nhat[:, None, :], opposite) / two_area[:, None, None]

    # local blocks; the einsum form makes K bitwise symmetric
    k_blocks = np.einsum("fid,fjd->fij", grads, grads) * wq.sum(1)[:, None, None]
    m_pairs = wq @ _PAIR_B  # (F, 6) unique mass entries
    if h is not None:
        h_q = h.evaluate(qpts.reshape(-1, mesh.dim)).reshape(F, 3)
        if not np.isfinite(h_q).all():
            raise AssemblyError("h is not finite at a quadrature point")
        h_pairs = (wq * h_q) @ _PAIR_B
    else:
        h_pairs = None

    dof_map = _build_dof_map(mesh, problem_kind)
    n = int(dof_map.max()) + 1
    if n <= 0:
        raise AssemblyError("no degrees of freedom remain")
    D = dof_map[tris]  # (F, 3), -1 marks eliminated vertices

    K = _scatter_blocks(k_blocks, D, n)
    M = _scatter_pairs(m_pairs, D, n)
    if lump_mass:
        M = _lump(M)
    H = _scatter_pairs(h_pairs, D, n) if h_pairs is not None else None

    return WeightedOperator(
        mesh, phi, h, problem_kind, K, M, H, log_scale, dof_map,
        scaled_volume, lump_mass)


def _build_dof_map(mesh: TriMesh, problem_kind: str) -> np.ndarray:
    canon = mesh.canonical
    V = len(canon)
    eliminated = np.zeros(V, dtype=bool)
    if problem_kind == "dirichlet":
        eliminated[mesh.boundary_vertices] = True
    dof_of_canon = np.full(V, -1, dtype=np.int64)
    ids = np.unique(canon)
    live = ids[~eliminated[ids]]
    dof_of_canon[live] = np.arange(len(live))
    return dof_of_canon[canon]


def _scatter_blocks(blocks, D, n):
    rows = np.repeat(D, 3, axis=1).ravel()  # i index of each block entry
    cols = np.tile(D, (1, 3)).ravel()
    vals = blocks.reshape(-1)
    keep = (rows >= 0) & (cols >= 0)
    mat = coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))
    return mat.tocsr()


def _scatter_pairs(pair_vals, D, n):
    rows, cols, vals = [], [], []
    for p, (i, j) in enumerate(_PAIRS):
        rows.append(D[:, i])
        cols.append(D[:, j])
        vals.append(pair_vals[:, p])
        if i != j:  # mirror with the identical float: exact symmetry
            rows.append(D[:, j])
            cols.append(D[:, i])
            vals.append(pair_vals[:, p])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    keep = (rows >= 0) & (cols >= 0)
    mat = coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))
    return mat.tocsr()


def _lump(M):
    diag = np.asarray(M.sum(axis=1)).ravel()
    return coo_matrix(
        (diag, (np.arange(len(diag)), np.arange(len(diag)))),
        shape=M.shape).tocsr()


def element_matrices(coords, phi: ScalarField = None):
    """True-scale local 3x3 stiffness and mass for one triangle.

    Reference tool for tests and debugging; assembly proper runs
    vectorized over all triangles.
    """
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape not in ((3, 2), (3, 3)):
        raise AssemblyError("coords must be (3, 2) or (3, 3)")
    P = coords
    if P.shape[1] == 2:
        P = np.column_stack([P, np.zeros(3)])
    normal = np.cross(P[1] - P[0], P[2] - P[0])
    two_area = float(np.linalg.norm(normal))
    if two_area <= 0:
        raise AssemblyError("degenerate triangle")
    qpts = GAUSS_B @ coords
    if phi is None:
        w = np.ones(3)
    else:
        phi_q = phi.evaluate(qpts)
        if np.abs(phi_q).max() > PHI_OVERFLOW:
            raise AssemblyError("|phi| too large on this triangle")
        w = np.exp(-phi_q)
    wq = (two_area / 6.0) * w
    nhat = normal / two_area
    grads = np.cross(nhat, np.array([P[2] - P[1], P[0] - P[2], P[1] - P[0]]))
    grads /= two_area
    K = (grads @ grads.T) * wq.sum()
    M = GAUSS_B.T @ (wq[:, None] * GAUSS_B)
    return K, M


def export_matrix(matrix, path: str) -> None:
    """Write a sparse matrix as 'row col value' text lines."""
    coo = matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        for k in order:
            fh.write(f"{coo.row[k]} {coo.col[k]} "
                     f"{jsonio.format_float(float(coo.data[k]))}\n")

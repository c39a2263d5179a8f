"""Smallest eigenpairs of (A + H) x = lambda M x, plus multiplicity
clustering and degenerate-subspace sampling.

The solver is shift-invert Lanczos (ARPACK) with a sparse LU of
A + H - sigma M and a small negative sigma, so the bottom of the
spectrum - including the zero mode of closed problems - converges fast.
Small systems fall back to a dense direct solve.  All randomness comes
from one recorded seed, and ARPACK runs at machine tolerance, so
repeated runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.linalg import cholesky, eigh
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from . import jsonio
from .assembly import AssemblyError, WeightedOperator, assemble
from .field import ScalarField
from .mesh import SubmeshExtraction


class SolveError(RuntimeError):
    """Raised when the eigensolver cannot meet its contract."""


@dataclass
class Spectrum:
    """Eigenpairs sorted ascending, with M-orthonormal eigenvectors."""

    eigenvalues: np.ndarray  # (k,)
    eigenvectors: np.ndarray  # (n, k), true-scale M-orthonormal columns
    residuals: np.ndarray  # (k,) relative residuals
    clusters: list  # partition of range(k) into multiplicity groups
    problem_kind: str
    solver_report: dict = dataclass_field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    def cluster_of(self, index: int) -> list:
        for group in self.clusters:
            if index in group:
                return group
        raise IndexError(f"eigenvalue index {index} out of range")


DENSE_CUTOFF = 120  # below this many dofs a direct dense solve is used


def smallest(op: WeightedOperator, k: int, tol: float = 1e-8,
             seed: int = 0) -> Spectrum:
    """k smallest eigenpairs of the operator's generalized problem."""
    if k < 1:
        raise SolveError("k must be >= 1")
    n = op.num_dofs
    if k > n - 1:
        raise SolveError(f"k={k} needs at least k+1={k + 1} dofs, have {n}")
    if not (0.0 < tol <= 1e-4):
        raise SolveError("tol must lie in (0, 1e-4]")

    K, M, H, log_scale = op.scaled_matrices()
    A = op.scaled_operator()

    if n < max(3 * k + 2, DENSE_CUTOFF):
        vals, X = eigh(A.toarray(), M.toarray())
        vals, X = vals[:k], X[:, :k]
        report = {"method": "dense", "iterations": 0}
    else:
        vals, X, report = _arpack_smallest(A, M, k, seed)

    order = np.argsort(vals, kind="stable")
    vals = np.ascontiguousarray(vals[order])
    X = np.ascontiguousarray(X[:, order])

    residuals = _residuals(A, M, vals, X)
    if residuals.max() > tol:
        raise SolveError(
            "solver did not reach the requested tolerance: best residuals "
            f"{np.array2string(residuals, precision=3)} vs tol {tol:g}")

    rel_tol = default_cluster_tol(residuals)
    clusters = cluster_eigenvalues(vals, rel_tol)
    X = _orthonormalize_in_clusters(X, clusters, M, log_scale)
    X = _canonical_signs(X)

    report.update({
        "tolerance": tol,
        "seed": seed,
        "cluster_rel_tol": rel_tol,
        "num_dofs": n,
        "k": k,
    })
    return Spectrum(vals, X, residuals, clusters, op.problem_kind, report)


def _arpack_smallest(A, M, k, seed):
    diag_ratio = A.diagonal().sum() / M.diagonal().sum()
    scale = abs(diag_ratio) or 1.0
    sigma = -1e-3 * scale
    n = A.shape[0]

    lu = None
    for attempt in range(3):
        try:
            lu = splu((A - sigma * M).tocsc())
            break
        except RuntimeError:
            # singular shifted matrix: back off and retry
            sigma = 4.0 * sigma - 1e-9 * scale
    if lu is None:
        raise SolveError("shifted factorization failed after 3 attempts")

    counter = {"solves": 0}

    def apply_inverse(b):
        counter["solves"] += 1
        return lu.solve(b)

    opinv = LinearOperator((n, n), matvec=apply_inverse, dtype=np.float64)
    v0 = np.random.default_rng(seed).standard_normal(n)
    try:
        vals, X = eigsh(A, k=k, M=M, sigma=sigma, which="LM", v0=v0,
                        tol=0, maxiter=max(2000, 40 * k), OPinv=opinv)
    except ArpackNoConvergence as exc:
        got = len(exc.eigenvalues)
        raise SolveError(
            f"eigensolver converged only {got}/{k} pairs within the "
            "iteration budget") from exc
    report = {
        "method": "shift-invert-lanczos",
        "iterations": counter["solves"],
        "sigma": sigma,
    }
    return vals, X, report


def _residuals(A, M, vals, X):
    norm_a = np.abs(A).sum(axis=0).max()  # 1-norm, scale cancels in ratio
    norm_m = np.abs(M).sum(axis=0).max()
    out = np.empty(len(vals))
    for i, lam in enumerate(vals):
        x = X[:, i]
        r = A @ x - lam * (M @ x)
        out[i] = (np.linalg.norm(r)
                  / ((norm_a + abs(lam) * norm_m) * np.linalg.norm(x)))
    return out


def _orthonormalize_in_clusters(X, clusters, M, log_scale):
    X = X.copy()
    scale = np.exp(-log_scale)
    for group in clusters:
        cols = np.asarray(group)
        Y = X[:, cols]
        G = (Y.T @ (M @ Y)) * scale
        R = cholesky(G)  # upper triangular, G = R^T R
        X[:, cols] = Y @ np.linalg.inv(R)
    return X


def _canonical_signs(X):
    for i in range(X.shape[1]):
        j = int(np.argmax(np.abs(X[:, i])))
        if X[j, i] < 0:
            X[:, i] = -X[:, i]
    return X


def default_cluster_tol(residuals) -> float:
    return max(1e-8, 10.0 * float(np.max(residuals)))


def cluster_eigenvalues(values, rel_tol: float) -> list:
    """Maximal runs of eigenvalues with small consecutive relative gap."""
    values = np.asarray(values)
    clusters = [[0]]
    for i in range(1, len(values)):
        gap = abs(values[i] - values[i - 1]) / max(1.0, abs(values[i - 1]))
        if gap < rel_tol:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return clusters


def recluster(spectrum: Spectrum, rel_tol: float) -> list:
    return cluster_eigenvalues(spectrum.eigenvalues, rel_tol)


def rotated_bases(spectrum: Spectrum, cluster: list, count: int = 5,
                  seed: int = 0) -> list:
    """Random M-orthonormal bases of a degenerate cluster's eigenspace.

    Used by checks that must hold for every eigenfunction, not just the
    solver's arbitrary basis of a multiple eigenvalue.
    """
    X = spectrum.eigenvectors[:, np.asarray(cluster)]
    m = X.shape[1]
    rng = np.random.default_rng(seed)
    bases = []
    for _ in range(count):
        Z = rng.standard_normal((m, m))
        Q, R = np.linalg.qr(Z)
        Q = Q * np.sign(np.diag(R))  # Haar-distributed rotation
        bases.append(X @ Q)
    return bases


def solve_on_submesh(extraction: SubmeshExtraction, phi: ScalarField,
                     k: int = 1, tol: float = 1e-8, seed: int = 0):
    """First Dirichlet eigenpairs on an extracted subdomain.

    Returns (spectrum, operator); the weight is the parent field
    restricted to the submesh coordinates.
    """
    sub = extraction.submesh
    if sub.is_closed:
        raise SolveError("submesh covers a closed surface; no Dirichlet "
                         "boundary to impose")
    try:
        op = assemble(sub, phi, None, "dirichlet")
    except AssemblyError as exc:
        raise SolveError(f"submesh too small to solve on: {exc}") from exc
    if op.num_dofs < k + 1:
        raise SolveError(
            f"submesh under-resolved: {op.num_dofs} interior dofs for k={k}")
    return smallest(op, k, tol=tol, seed=seed), op


# -- file format ----------------------------------------------------------------


def spectrum_to_dict(spec: Spectrum) -> dict:
    return {
        "format": "spectrum",
        "problem_kind": spec.problem_kind,
        "eigenvalues": [float(v) for v in spec.eigenvalues],
        "residuals": [float(r) for r in spec.residuals],
        "clusters": [[int(i) for i in c] for c in spec.clusters],
        "solver_report": spec.solver_report,
    }


def save_spectrum(spec: Spectrum, path: str,
                  vectors_path: str = None) -> None:
    doc = spectrum_to_dict(spec)
    if vectors_path is not None:
        doc["eigenvectors_file"] = vectors_path.rsplit("/", 1)[-1]
        jsonio.dump(
            {
                "format": "eigenvectors",
                "columns": spec.k,
                "vectors": [[float(v) for v in spec.eigenvectors[:, i]]
                            for i in range(spec.k)],
            },
            vectors_path,
        )
    jsonio.dump(doc, path)


def load_spectrum(path: str, vectors_path: str = None) -> Spectrum:
    data = jsonio.load(path)
    if not isinstance(data, dict) or data.get("format") != "spectrum":
        raise SolveError("not a spectrum file")
    vectors = None
    if vectors_path is not None:
        vdata = jsonio.load(vectors_path)
        if vdata.get("format") != "eigenvectors":
            raise SolveError("not an eigenvector file")
        vectors = np.array(vdata["vectors"]).T
    return Spectrum(
        eigenvalues=np.array(data["eigenvalues"]),
        eigenvectors=vectors,
        residuals=np.array(data["residuals"]),
        clusters=[list(c) for c in data["clusters"]],
        problem_kind=data["problem_kind"],
        solver_report=dict(data["solver_report"]),
    )

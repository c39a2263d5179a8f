"""Automated checks of spectral identities and nodal-set bounds.

Each check inspects a solved instance (mesh, weight, problem kind) and
emits records stating an inequality or identity, the measured values,
and a margin.  Failures become failed records, never exceptions, so a
full report can always be assembled.  Skipped and inconclusive cases
(under-resolved domains, low-confidence order fits) are recorded as
such and never counted as failures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import jsonio
from . import field as field_mod
from . import mesh as mesh_mod
from .assembly import AssemblyError, assemble
from .eigensolve import SolveError, Spectrum, rotated_bases, smallest
from .mesh import MeshError, TriMesh, mesh_hash, refine
from .nodal import NodalAnalysis, analyze, detect_singular_points


class VerifyError(ValueError):
    """Raised for malformed check requests (not for failed checks)."""


# Relative tolerance for the nodal-domain eigenvalue identity, as a
# function of mean edge length h.  The clipped polygon tracks the
# interpolant's zero line exactly, but that line sits O(h)-worst-case
# from the true nodal set near crossings, so the tolerance is linear in
# h with a floor.  Calibrated on the unit-square instances (weights
# zero, radial quadratic, Gaussian well; eigenvalue indices 0..4) at
# h = 0.05 and h = 0.025: worst observed error/h was 0.53, so slope 1.0
# leaves a 1.9x allowance.
LEMMA_BASE_TOL = 0.01
LEMMA_SLOPE = 1.0

ORTHO_TOL = 1e-8
SHIFT_RTOL = 1e-12
MIN_INTERIOR_VERTICES = 20
# the extracted patch is refined until at least this many triangles, so
# the domain solve's own discretization error stays below the boundary
# placement error
PATCH_TRIANGLES = 4000

CHECK_ORDER = ("basics", "courant", "lemma", "multiplicity", "order", "shift")


def lemma_tolerance(h: float) -> float:
    """Resolution-aware tolerance for the domain-eigenvalue identity."""
    return max(LEMMA_BASE_TOL, LEMMA_SLOPE * float(h))


def multiplicity_bound(genus: int, i: int) -> int:
    """Upper bound (2g+i+1)(2g+i+2)/2 for the i-th closed eigenvalue."""
    n = 2 * int(genus) + int(i)
    return (n + 1) * (n + 2) // 2


@dataclass
class CheckRecord:
    """One verified statement with its measured evidence.

    status is "pass", "fail", "skip", or "inconclusive"; margin is
    positive slack toward the asserted bound (None when not applicable).
    """

    check: str
    instance: str
    statement: str
    status: str
    measured: dict
    margin: float | None = None

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "instance": self.instance,
            "statement": self.statement,
            "status": self.status,
            "margin": self.margin,
            "measured": self.measured,
        }


@dataclass
class VerificationReport:
    """All check records for a run plus reproducibility provenance."""

    records: list
    provenance: dict
    artifacts: dict = dataclass_field(default_factory=dict, repr=False,
                                      compare=False)

    @property
    def summary(self) -> dict:
        counts = {"pass": 0, "fail": 0, "skip": 0, "inconclusive": 0}
        for rec in self.records:
            counts[rec.status] += 1
        counts["total"] = len(self.records)
        counts["all_passed"] = counts["fail"] == 0
        return counts

    def failures(self) -> list:
        return [rec for rec in self.records if rec.status == "fail"]


def _rec(check, instance, statement, status, measured, margin=None):
    if margin is not None:
        margin = float(margin)
    return CheckRecord(check=check, instance=instance, statement=statement,
                       status=status, measured=measured, margin=margin)


def _verdict(ok: bool) -> str:
    return "pass" if ok else "fail"


# -- individual checks -----------------------------------------------------------


def check_orthogonality_and_basics(op, spectrum: Spectrum, analyses,
                                   ortho_tol: float = ORTHO_TOL,
                                   instance: str = "") -> list:
    """Solver-contract sanity: orthonormality, residuals, ground mode.

    Closed problems additionally require the constant zero mode and the
    stiffness matrix annihilating constants; Dirichlet problems require
    a simple, sign-definite ground state.
    """
    records = []
    X = spectrum.eigenvectors
    G = X.T @ (op.mass @ X)
    dev = float(np.max(np.abs(G - np.eye(spectrum.k))))
    records.append(_rec(
        "basics", instance, f"max |X'MX - I| <= {ortho_tol:g}",
        _verdict(dev <= ortho_tol),
        {"deviation": dev, "tolerance": ortho_tol}, ortho_tol - dev))

    req = float(spectrum.solver_report.get("tolerance", math.nan))
    rmax = float(np.max(spectrum.residuals))
    records.append(_rec(
        "basics", instance, f"max relative residual <= {req:g}",
        _verdict(rmax <= req),
        {"max_residual": rmax, "tolerance": req}, req - rmax))

    if spectrum.problem_kind == "closed":
        u0 = op.vertex_values(X[:, 0])
        mean = float(np.mean(u0))
        spread = float(np.max(np.abs(u0 - mean)))
        rel = spread / abs(mean) if mean != 0.0 else math.inf
        records.append(_rec(
            "basics", instance, f"zero mode is constant to {ortho_tol:g}",
            _verdict(rel <= ortho_tol),
            {"relative_variation": rel, "lambda_0":
             float(spectrum.eigenvalues[0])}, ortho_tol - rel))
        records.append(_rec(
            "basics", instance, "zero eigenvalue is simple",
            _verdict(spectrum.cluster_of(0) == [0]),
            {"cluster_size": len(spectrum.cluster_of(0))}))
        K = op.scaled_matrices()[0]
        ones = np.ones(op.num_dofs)
        resid = float(np.max(np.abs(K @ ones)))
        scale = float(np.max(np.abs(K) @ ones))
        ratio = resid / scale if scale > 0 else 0.0
        records.append(_rec(
            "basics", instance,
            "stiffness annihilates constants to 1e-12 of row scale",
            _verdict(ratio <= 1e-12),
            {"residual_ratio": ratio, "row_scale": scale}, 1e-12 - ratio))
    else:
        lam = spectrum.eigenvalues
        gap = float(lam[1] - lam[0]) if spectrum.k > 1 else math.inf
        records.append(_rec(
            "basics", instance, "ground eigenvalue is simple",
            _verdict(spectrum.cluster_of(0) == [0] and lam[0] > 0),
            {"lambda_1": float(lam[0]), "gap_to_next": gap}))
        count = analyses[0].domain_count
        records.append(_rec(
            "basics", instance, "ground eigenfunction is sign-definite",
            _verdict(count == 1), {"domain_count": count}))
    return records


def check_courant(mesh: TriMesh, op, spectrum: Spectrum, analyses,
                  rotations: int = 5, seed: int = 0,
                  tau_rel: float = None, instance: str = "") -> list:
    """Nodal-domain count bound for every computed eigenfunction.

    The bound for a degenerate eigenvalue uses the largest index in its
    cluster: with 1-based Dirichlet counting the k-th eigenfunction has
    at most k domains, and on a closed surface the i-th (i from 0, zero
    mode included) has at most i+1; both equal max(cluster)+1 on the
    0-based arrays.  For clusters of size > 1 the bound must also hold
    for random rotations within the eigenspace, since the solver basis
    of a multiple eigenvalue is arbitrary.
    """
    kwargs = {} if tau_rel is None else {"tau_rel": tau_rel}
    records = []
    for cluster in spectrum.clusters:
        bound = max(cluster) + 1
        stmt = f"nodal domain count <= {bound}"
        for i in cluster:
            count = analyses[i].domain_count
            records.append(_rec(
                "courant", f"{instance} f[{i}]", stmt,
                _verdict(count <= bound),
                {"domain_count": count, "bound": bound,
                 "eigenvalue": float(spectrum.eigenvalues[i])},
                bound - count))
        if len(cluster) > 1 and rotations > 0:
            span = f"f[{cluster[0]}..{cluster[-1]}]"
            for r, basis in enumerate(rotated_bases(
                    spectrum, cluster, count=rotations, seed=seed)):
                for c in range(basis.shape[1]):
                    u = op.vertex_values(basis[:, c])
                    count = analyze(mesh, u, **kwargs).domain_count
                    records.append(_rec(
                        "courant",
                        f"{instance} {span} rotation {r} column {c}",
                        stmt, _verdict(count <= bound),
                        {"domain_count": count, "bound": bound},
                        bound - count))
    return records


def clipped_domain_mesh(mesh: TriMesh, analysis: NodalAnalysis, u,
                        domain_id: int, snap: float = 0.05) -> TriMesh:
    """Conforming triangulation of one nodal domain.

    Triangles fully inside the domain are kept whole; triangles crossed
    by the zero set are cut along the linear interpolant's zero segment,
    so the result's boundary follows the discrete nodal line exactly
    (plus any original boundary the domain touches).  Crossing points
    are clamped at least `snap` of the way along their edge, which keeps
    every cut piece non-degenerate at a boundary placement cost below
    snap times the edge length.
    """
    if not 0 <= domain_id < analysis.domain_count:
        raise VerifyError(f"domain id {domain_id} out of range "
                          f"(have {analysis.domain_count})")
    if mesh.periodic_map:
        raise VerifyError("domain clipping requires a non-periodic mesh")
    u = np.asarray(u, dtype=float)
    tri = mesh.triangles
    V = mesh.vertices
    lab = analysis.domain_labels
    labt = lab[tri]
    has = (labt == domain_id).any(axis=1)
    other = ((labt != domain_id) & (labt != -1)).any(axis=1)

    coords = []
    index = {}

    def node_v(raw):
        key = ("v", int(raw))
        if key not in index:
            index[key] = len(coords)
            coords.append(V[raw])
        return index[key]

    def node_x(a, b):
        a, b = int(a), int(b)
        key = ("x", a, b) if a < b else ("x", b, a)
        if key not in index:
            t = u[a] / (u[a] - u[b])
            t = min(max(t, snap), 1.0 - snap)
            index[key] = len(coords)
            coords.append(V[a] + t * (V[b] - V[a]))
        return index[key]

    pieces = []
    for tid in np.flatnonzero(has):
        vs = tri[tid]
        if not other[tid]:
            pieces.append([node_v(v) for v in vs])
            continue
        mine = labt[tid] == domain_id
        if mine.sum() == 1:
            # lone domain corner: cut it off along its two edges (an
            # edge toward a zero vertex lies on the nodal set already)
            r = int(np.flatnonzero(mine)[0])
            a, m, n = vs[r], vs[(r + 1) % 3], vs[(r + 2) % 3]
            pm = node_v(m) if lab[m] == -1 else node_x(a, m)
            pn = node_v(n) if lab[n] == -1 else node_x(a, n)
            pieces.append([node_v(a), pm, pn])
        else:
            # lone opposite corner: keep the quad on the domain's side
            r = int(np.flatnonzero(~mine)[0])
            o, p, q = vs[r], vs[(r + 1) % 3], vs[(r + 2) % 3]
            pp, qq = node_v(p), node_v(q)
            xqo = node_x(q, o)
            xop = node_x(p, o)
            pieces.append([pp, qq, xqo])
            pieces.append([pp, xqo, xop])
    return TriMesh(np.asarray(coords, dtype=float),
                   np.asarray(pieces, dtype=np.int64))


def check_nodal_domain_eigenvalue(mesh: TriMesh, phi, spectrum: Spectrum,
                                  index: int, analysis: NodalAnalysis, u,
                                  tol: float = 1e-8, seed: int = 0,
                                  instance: str = "") -> list:
    """Each nodal domain, solved as its own Dirichlet problem, must
    reproduce the parent eigenvalue.

    index is the 0-based position in the spectrum; u gives the vertex
    values the analysis was computed from (they place the clipped
    boundary).  Each clipped domain is refined before solving so the
    comparison is limited by how well the discrete nodal line tracks
    the true one, not by the re-solve's own resolution.  Domains whose
    triangulated interior is too small to resolve are skipped.
    """
    if not 0 <= index < spectrum.k:
        raise VerifyError(f"eigenvalue index {index} out of range")
    lam = float(spectrum.eigenvalues[index])
    allow = lemma_tolerance(mesh.mean_edge_length)
    stmt = f"|lambda_1(D) - lambda| <= {allow:.3g} |lambda|"
    records = []
    if lam <= 0:
        return [_rec("lemma", f"{instance} f[{index}]", stmt, "skip",
                     {"reason": "nonpositive eigenvalue", "lambda": lam})]
    for d in range(analysis.domain_count):
        inst = f"{instance} f[{index}] domain {d}"
        try:
            sub = clipped_domain_mesh(mesh, analysis, u, d)
        except (MeshError, VerifyError) as exc:
            records.append(_rec("lemma", inst, stmt, "skip",
                                {"reason": f"domain not triangulable: {exc}"}))
            continue
        interior = sub.num_vertices - len(sub.boundary_vertices)
        if interior < MIN_INTERIOR_VERTICES:
            records.append(_rec(
                "lemma", inst, stmt, "skip",
                {"reason": "under-resolved",
                 "interior_vertices": int(interior)}))
            continue
        fine = sub
        while fine.num_triangles < PATCH_TRIANGLES:
            fine = refine(fine)
        try:
            sub_spec = smallest(assemble(fine, phi, None, "dirichlet"),
                                1, tol=tol, seed=seed)
        except (AssemblyError, SolveError) as exc:
            records.append(_rec("lemma", inst, stmt, "skip",
                                {"reason": f"submesh solve failed: {exc}"}))
            continue
        lam_d = float(sub_spec.eigenvalues[0])
        rel = abs(lam_d - lam) / lam
        records.append(_rec(
            "lemma", inst, stmt, _verdict(rel <= allow),
            {"lambda": lam, "lambda_domain": lam_d, "rel_error": rel,
             "tolerance": allow, "interior_vertices": int(interior),
             "triangles": int(sub.num_triangles)},
            allow - rel))
    return records


def check_multiplicity_bound(spectrum: Spectrum, genus: int, i_max: int,
                             instance: str = "") -> list:
    """Cluster multiplicities on a closed surface obey the genus bound.

    i indexes distinct eigenvalues in ascending order with the zero
    mode as i = 0, so the i-th cluster's size m_i must satisfy
    m_i <= (2g+i+1)(2g+i+2)/2.  Clusters that reach the end of the
    computed window may be truncated, so their multiplicity cannot be
    certified and they are skipped.
    """
    if spectrum.problem_kind != "closed":
        raise VerifyError("multiplicity bound applies to closed problems")
    if genus is None or genus < 0:
        raise VerifyError("closed surface genus required")
    records = []
    last = spectrum.k - 1
    for i in range(1, int(i_max) + 1):
        bound = multiplicity_bound(genus, i)
        inst = f"{instance} eigenvalue {i}"
        stmt = f"multiplicity <= {bound}"
        if i >= len(spectrum.clusters):
            records.append(_rec(
                "multiplicity", inst, stmt, "skip",
                {"reason": "eigenvalue not computed", "bound": bound}))
            continue
        cluster = spectrum.clusters[i]
        m = len(cluster)
        lam = float(np.mean(spectrum.eigenvalues[np.asarray(cluster)]))
        if max(cluster) == last:
            records.append(_rec(
                "multiplicity", inst, stmt, "skip",
                {"reason": "cluster truncated by computed window",
                 "multiplicity_at_least": m, "bound": bound,
                 "eigenvalue": lam}))
            continue
        records.append(_rec(
            "multiplicity", inst, stmt, _verdict(m <= bound),
            {"multiplicity": m, "bound": bound, "eigenvalue": lam,
             "gap": bound - m},
            bound - m))
    return records


def check_order_bound(spectrum: Spectrum, analyses, genus: int,
                      instance: str = "") -> list:
    """Vanishing orders of closed-surface eigenfunctions obey N <= 2g+i.

    i is the cluster ordinal of the eigenfunction (distinct eigenvalues
    counted from the zero mode at 0).  Only confident order fits are
    asserted; low-confidence fits are recorded as inconclusive.
    """
    if spectrum.problem_kind != "closed":
        raise VerifyError("vanishing-order bound applies to closed problems")
    if genus is None or genus < 0:
        raise VerifyError("closed surface genus required")
    ordinal = {}
    for ci, cluster in enumerate(spectrum.clusters):
        for idx in cluster:
            ordinal[idx] = ci
    records = []
    for idx in range(1, spectrum.k):
        bound = 2 * genus + ordinal[idx]
        stmt = f"vanishing orders <= {bound}"
        points = analyses[idx].singular_points
        if not points:
            records.append(_rec(
                "order", f"{instance} f[{idx}]", stmt, "pass",
                {"singular_points": 0, "bound": bound}))
            continue
        for j, sp in enumerate(points):
            inst = f"{instance} f[{idx}] singular point {j}"
            measured = {
                "location": [float(x) for x in sp.location],
                "residual": None if sp.residual is None
                else float(sp.residual),
                "bound": bound,
            }
            if sp.order is None or not sp.confident:
                measured["reason"] = "low-confidence order fit"
                records.append(_rec("order", inst, stmt, "inconclusive",
                                    measured))
                continue
            measured["order"] = int(sp.order)
            records.append(_rec(
                "order", inst, stmt, _verdict(sp.order <= bound),
                measured, bound - sp.order))
    return records


def _shifted_weight(phi, c: float, dim: int):
    if phi is None:
        return field_mod.constant(float(c), dim)
    return field_mod.parse(f"({phi}) + {float(c)!r}", dim)


def check_shift_and_reduction(mesh: TriMesh, phi, problem_kind: str,
                              k: int, c: float = 5.0, tol: float = 1e-8,
                              seed: int = 0, base_spectrum: Spectrum = None,
                              instance: str = "") -> list:
    """Adding a constant to the weight must not move any eigenvalue,
    and a constant weight must reduce to the unweighted Laplacian.

    Differences are measured relative to the largest base eigenvalue so
    the zero mode of closed problems does not divide by zero.
    """
    records = []
    if base_spectrum is None:
        base_spectrum = smallest(
            assemble(mesh, phi, None, problem_kind), k, tol=tol, seed=seed)
    base = base_spectrum.eigenvalues
    scale = float(np.max(np.abs(base)))
    if scale == 0.0:
        scale = 1.0

    shifted = _shifted_weight(phi, c, mesh.dim)
    spec_c = smallest(assemble(mesh, shifted, None, problem_kind),
                      k, tol=tol, seed=seed)
    diff = float(np.max(np.abs(spec_c.eigenvalues - base))) / scale
    records.append(_rec(
        "shift", instance,
        f"eigenvalues invariant under phi -> phi + {c:g} "
        f"(rel {SHIFT_RTOL:g})",
        _verdict(diff <= SHIFT_RTOL),
        {"max_rel_difference": diff, "shift": float(c)},
        SHIFT_RTOL - diff))

    spec_const = smallest(
        assemble(mesh, field_mod.constant(float(c), mesh.dim), None,
                 problem_kind), k, tol=tol, seed=seed)
    spec_plain = smallest(assemble(mesh, None, None, problem_kind),
                          k, tol=tol, seed=seed)
    pscale = float(np.max(np.abs(spec_plain.eigenvalues)))
    if pscale == 0.0:
        pscale = 1.0
    diff = float(np.max(np.abs(
        spec_const.eigenvalues - spec_plain.eigenvalues))) / pscale
    records.append(_rec(
        "shift", instance,
        f"constant weight reduces to the unweighted Laplacian "
        f"(rel {SHIFT_RTOL:g})",
        _verdict(diff <= SHIFT_RTOL),
        {"max_rel_difference": diff, "constant": float(c)},
        SHIFT_RTOL - diff))
    return records


# -- instance plumbing -----------------------------------------------------------


@dataclass
class Instance:
    """One (mesh, weight, problem) configuration to run checks on."""

    name: str
    mesh: TriMesh
    phi: object = None
    problem_kind: str = "dirichlet"
    k: int = 10
    tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.problem_kind not in ("dirichlet", "closed"):
            raise VerifyError(
                f"unknown problem kind {self.problem_kind!r}")
        if self.problem_kind == "closed" and not self.mesh.is_closed:
            raise VerifyError(
                f"instance {self.name!r}: closed problem on an open mesh")


def canonical_instances(h_planar: float = 0.02, sphere_level: int = 5,
                        torus_n: int = 64, k_planar: int = 10,
                        k_sphere: int = 8, k_torus: int = 18) -> list:
    """The standard battery: square, disk, sphere, and flat torus, each
    under no weight, a radial quadratic, and an off-center Gaussian well.

    torus_n should be divisible by 4 so the lowest nonzero torus
    eigenvalue keeps its full 4-fold degeneracy on the mesh.
    """
    two_pi = 2.0 * math.pi
    shapes = [
        ("square", mesh_mod.rectangle(1.0, 1.0, h_planar),
         "dirichlet", k_planar, (0.5, 0.5)),
        ("disk", mesh_mod.disk(1.0, h_planar),
         "dirichlet", k_planar, (0.0, 0.0)),
        ("sphere", mesh_mod.sphere_at_level(1.0, sphere_level),
         "closed", k_sphere, (0.0, 0.0, 1.0)),
        ("torus", mesh_mod.flat_torus(two_pi, two_pi, two_pi / torus_n),
         "closed", k_torus, (math.pi, math.pi)),
    ]
    instances = []
    for name, msh, kind, k, center in shapes:
        dim = msh.dim
        weights = [
            ("zero", None),
            ("radial", field_mod.radial_quadratic(1.0, dim=dim)),
            ("gauss", field_mod.gaussian_well(2.0, 0.5, center=center)),
        ]
        for wname, phi in weights:
            instances.append(Instance(
                name=f"{name}/{wname}", mesh=msh, phi=phi,
                problem_kind=kind, k=k))
    return instances


def run_verification(instances, checks=None, rotations: int = 5,
                     lemma_k_max: int = 5, mult_i_max: int = 5,
                     shift_c: float = 5.0, tau_rel: float = None,
                     r_fit: float = None, n_max: int = None,
                     keep_artifacts: bool = False) -> VerificationReport:
    """Solve each instance once and run the requested checks on it.

    checks is a subset of CHECK_ORDER (default: all).  Records are
    emitted instance by instance, checks in declared order, so reruns
    of the same configuration produce identical reports.
    """
    if checks is None:
        chosen = CHECK_ORDER
    else:
        bad = set(checks) - set(CHECK_ORDER)
        if bad:
            raise VerifyError(f"unknown checks: {sorted(bad)}")
        chosen = tuple(name for name in CHECK_ORDER if name in set(checks))
    instances = list(instances)
    names = [inst.name for inst in instances]
    if len(set(names)) != len(names):
        raise VerifyError("instance names must be unique")

    records = []
    prov_instances = []
    artifacts = {}
    nodal_kwargs = {} if tau_rel is None else {"tau_rel": tau_rel}
    point_kwargs = {}
    if r_fit is not None:
        point_kwargs["r_fit"] = r_fit
    if n_max is not None:
        point_kwargs["n_max"] = n_max
    for inst in instances:
        op = assemble(inst.mesh, inst.phi, None, inst.problem_kind)
        spectrum = smallest(op, inst.k, tol=inst.tol, seed=inst.seed)
        closed = inst.problem_kind == "closed"
        want_points = "order" in chosen and closed
        analyses = []
        for i in range(spectrum.k):
            u = op.vertex_values(spectrum.eigenvectors[:, i])
            analysis = analyze(inst.mesh, u, function_index=i,
                               **nodal_kwargs)
            if want_points:
                detect_singular_points(inst.mesh, u, analysis,
                                       **point_kwargs)
            analyses.append(analysis)

        for name in chosen:
            if name == "basics":
                records += check_orthogonality_and_basics(
                    op, spectrum, analyses, instance=inst.name)
            elif name == "courant":
                records += check_courant(
                    inst.mesh, op, spectrum, analyses, rotations=rotations,
                    seed=inst.seed, tau_rel=tau_rel, instance=inst.name)
            elif name == "lemma" and not closed:
                for idx in range(min(lemma_k_max, spectrum.k)):
                    u = op.vertex_values(spectrum.eigenvectors[:, idx])
                    records += check_nodal_domain_eigenvalue(
                        inst.mesh, inst.phi, spectrum, idx, analyses[idx],
                        u=u, tol=inst.tol, seed=inst.seed,
                        instance=inst.name)
            elif name == "multiplicity" and closed:
                records += check_multiplicity_bound(
                    spectrum, inst.mesh.genus, mult_i_max,
                    instance=inst.name)
            elif name == "order" and closed:
                records += check_order_bound(
                    spectrum, analyses, inst.mesh.genus, instance=inst.name)
            elif name == "shift":
                records += check_shift_and_reduction(
                    inst.mesh, inst.phi, inst.problem_kind, inst.k,
                    c=shift_c, tol=inst.tol, seed=inst.seed,
                    base_spectrum=spectrum, instance=inst.name)

        prov_instances.append({
            "name": inst.name,
            "mesh_hash": mesh_hash(inst.mesh),
            "num_vertices": inst.mesh.num_vertices,
            "problem_kind": inst.problem_kind,
            "phi": None if inst.phi is None else str(inst.phi),
            "k": inst.k,
            "tol": inst.tol,
            "seed": inst.seed,
        })
        if keep_artifacts:
            artifacts[inst.name] = (op, spectrum, analyses)

    provenance = {
        "checks": list(chosen),
        "rotations": rotations,
        "lemma_k_max": lemma_k_max,
        "mult_i_max": mult_i_max,
        "shift_c": shift_c,
        "tau_rel": tau_rel,
        "r_fit": r_fit,
        "n_max": n_max,
        "lemma_tolerance": f"max({LEMMA_BASE_TOL:g}, {LEMMA_SLOPE:g}*h)",
        "instances": prov_instances,
    }
    report = VerificationReport(records=records, provenance=provenance)
    report.artifacts = artifacts
    return report


# -- report output ---------------------------------------------------------------


def report_to_dict(report: VerificationReport) -> dict:
    return {
        "format": "verification-report",
        "summary": report.summary,
        "provenance": report.provenance,
        "records": [rec.to_dict() for rec in report.records],
    }


def save_report(report: VerificationReport, path: str) -> None:
    jsonio.dump(report_to_dict(report), path)


def format_report(report: VerificationReport) -> str:
    """Fixed-width plain-text table of all records plus a summary line."""
    rows = [("status", "check", "instance", "margin", "statement")]
    for rec in report.records:
        margin = "-" if rec.margin is None else f"{rec.margin:.3g}"
        rows.append((rec.status.upper(), rec.check, rec.instance, margin,
                     rec.statement))
    widths = [max(len(row[c]) for row in rows) for c in range(4)]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(
            [row[c].ljust(widths[c]) for c in range(4)] + [row[4]]).rstrip())
        if i == 0:
            lines.append("-" * len(lines[0]))
    s = report.summary
    lines.append("")
    lines.append(f"{s['total']} checks: {s['pass']} passed, "
                 f"{s['fail']} failed, {s['skip']} skipped, "
                 f"{s['inconclusive']} inconclusive")
    return "\n".join(lines) + "\n"

"""Check records, domain re-solves, bounds, and verification reports."""

import math

import numpy as np
import pytest

from driftlap import field, mesh, verify
from driftlap.assembly import assemble
from driftlap.eigensolve import smallest
from driftlap.nodal import SingularPoint, analyze, detect_singular_points
from driftlap.verify import (Instance, VerifyError, check_courant,
                             check_multiplicity_bound,
                             check_nodal_domain_eigenvalue,
                             check_order_bound,
                             check_orthogonality_and_basics,
                             check_shift_and_reduction, clipped_domain_mesh,
                             lemma_tolerance, multiplicity_bound,
                             run_verification)

PI = math.pi
TWO_PI = 2.0 * math.pi


@pytest.fixture(scope="module")
def square():
    return mesh.rectangle(1.0, 1.0, 0.1)


@pytest.fixture(scope="module")
def square_solution(square):
    op = assemble(square, None, None, "dirichlet")
    spec = smallest(op, k=4, tol=1e-8, seed=0)
    analyses = []
    for i in range(spec.k):
        u = op.vertex_values(spec.eigenvectors[:, i])
        analyses.append(analyze(square, u, function_index=i))
    return op, spec, analyses


@pytest.fixture(scope="module")
def torus():
    return mesh.flat_torus(TWO_PI, TWO_PI, TWO_PI / 12)


@pytest.fixture(scope="module")
def torus_solution(torus):
    op = assemble(torus, None, None, "closed")
    spec = smallest(op, k=8, tol=1e-8, seed=0)
    analyses = []
    for i in range(spec.k):
        u = op.vertex_values(spec.eigenvectors[:, i])
        an = analyze(torus, u, function_index=i)
        detect_singular_points(torus, u, an)
        analyses.append(an)
    return op, spec, analyses


def test_basics_dirichlet(square, square_solution):
    op, spec, analyses = square_solution
    records = check_orthogonality_and_basics(op, spec, analyses,
                                             instance="square")
    assert [r.status for r in records] == ["pass"] * 4
    statements = [r.statement for r in records]
    assert any("sign-definite" in s for s in statements)
    assert all(r.check == "basics" for r in records)
    assert all(r.instance == "square" for r in records)


def test_basics_closed(torus, torus_solution):
    op, spec, analyses = torus_solution
    records = check_orthogonality_and_basics(op, spec, analyses,
                                             instance="torus")
    assert all(r.status == "pass" for r in records)
    by_stmt = {r.statement: r for r in records}
    const = next(r for s, r in by_stmt.items() if "constant" in s
                 and "zero mode" in s)
    assert const.measured["relative_variation"] <= 1e-8
    annih = next(r for s, r in by_stmt.items() if "annihilates" in s)
    assert annih.measured["residual_ratio"] <= 1e-12


def test_courant_dirichlet(square, square_solution):
    op, spec, analyses = square_solution
    records = check_courant(square, op, spec, analyses, rotations=0,
                            instance="square")
    assert len(records) == 4
    # ground state: 1 domain vs bound 1, zero margin
    assert records[0].measured == {"domain_count": 1, "bound": 1,
                                   "eigenvalue": records[0]
                                   .measured["eigenvalue"]}
    assert records[0].margin == 0.0
    assert all(r.status == "pass" for r in records)


def test_courant_rotations(torus, torus_solution):
    op, spec, analyses = torus_solution
    records = check_courant(torus, op, spec, analyses, rotations=2, seed=3,
                            instance="torus")
    rotated = [r for r in records if "rotation" in r.instance]
    # lambda=1 cluster has 4 columns, the first lambda=2 pair 2; the
    # second pair is truncated to a singleton at k=8, so no rotations
    assert len(rotated) == 2 * 4 + 2 * 2
    assert all(r.status == "pass" for r in records)
    quad = [r for r in records if r.instance == "torus f[3]"]
    assert quad[0].measured["bound"] == 5


def test_courant_rotations_deterministic(torus, torus_solution):
    op, spec, analyses = torus_solution
    a = check_courant(torus, op, spec, analyses, rotations=2, seed=3)
    b = check_courant(torus, op, spec, analyses, rotations=2, seed=3)
    assert [r.measured for r in a] == [r.measured for r in b]


def test_clipped_domain_mesh_halves(square):
    # split the square along x = 0.5 by a linear function; each clipped
    # half keeps its full area because the cut follows the zero line
    u = square.vertices[:, 0] - 0.5
    an = analyze(square, u)
    assert an.domain_count == 2
    total = 0.0
    for d in range(2):
        sub = clipped_domain_mesh(square, an, u, d)
        tri = sub.vertices[sub.triangles]
        area = 0.5 * np.abs(
            (tri[:, 1, 0] - tri[:, 0, 0]) * (tri[:, 2, 1] - tri[:, 0, 1])
            - (tri[:, 2, 0] - tri[:, 0, 0]) * (tri[:, 1, 1] - tri[:, 0, 1]))
        total += float(area.sum())
        xs = sub.vertices[:, 0]
        assert xs.min() >= -1e-12 and xs.max() <= 1.0 + 1e-12
    assert abs(total - 1.0) < 1e-12


def test_clipped_domain_mesh_off_grid(square):
    # an off-grid cut: the clip boundary must sit on the interpolated
    # crossing points, not on mesh vertices
    u = square.vertices[:, 0] - 0.47
    an = analyze(square, u)
    left = clipped_domain_mesh(square, an, u, 0)
    border = left.vertices[left.boundary_vertices]
    cut = border[border[:, 0] > 0.45]
    assert len(cut) > 0
    assert np.allclose(cut[:, 0], 0.47, atol=1e-9)


def test_clipped_domain_mesh_errors(square):
    u = square.vertices[:, 0] - 0.5
    an = analyze(square, u)
    with pytest.raises(VerifyError):
        clipped_domain_mesh(square, an, u, 5)
    torus = mesh.flat_torus(TWO_PI, TWO_PI, TWO_PI / 8)
    w = np.sin(torus.vertices[:, 0])
    an2 = analyze(torus, w)
    with pytest.raises(VerifyError):
        clipped_domain_mesh(torus, an2, w, 0)


def test_lemma_tolerance_model():
    assert lemma_tolerance(0.05) == pytest.approx(0.05)
    assert lemma_tolerance(1e-4) == pytest.approx(0.01)


def test_lemma_whole_domain(square, square_solution):
    # k=1: the single nodal domain is the whole square; the refined
    # re-solve lands near the continuum value 2 pi^2, so the mismatch
    # is the parent mesh's own discretization error, O(h^2)
    op, spec, analyses = square_solution
    u = op.vertex_values(spec.eigenvectors[:, 0])
    records = check_nodal_domain_eigenvalue(square, None, spec, 0,
                                            analyses[0], u,
                                            instance="square")
    assert len(records) == 1
    assert records[0].status == "pass"
    assert records[0].measured["rel_error"] < 0.05
    exact = 2.0 * PI ** 2
    lam_d = records[0].measured["lambda_domain"]
    assert abs(lam_d - exact) / exact < abs(spec.eigenvalues[0] - exact) / exact


def test_lemma_half_domains(square, square_solution):
    op, spec, analyses = square_solution
    u = op.vertex_values(spec.eigenvectors[:, 1])
    records = check_nodal_domain_eigenvalue(square, None, spec, 1,
                                            analyses[1], u,
                                            instance="square")
    assert len(records) == 2
    for rec in records:
        assert rec.status == "pass"
        # lambda_1 of the half equals lambda_2 of the square; within
        # the h-proportional allowance at this resolution
        assert rec.measured["rel_error"] <= rec.measured["tolerance"]
        assert rec.margin > 0


def test_lemma_weighted(square):
    phi = field.radial_quadratic(1.0)
    op = assemble(square, phi, None, "dirichlet")
    spec = smallest(op, k=2, tol=1e-8, seed=0)
    u = op.vertex_values(spec.eigenvectors[:, 1])
    an = analyze(square, u, function_index=1)
    records = check_nodal_domain_eigenvalue(square, phi, spec, 1, an, u)
    assert len(records) == an.domain_count == 2
    assert all(r.status == "pass" for r in records)


def test_lemma_under_resolved_skip():
    coarse = mesh.rectangle(1.0, 1.0, 0.25)
    op = assemble(coarse, None, None, "dirichlet")
    spec = smallest(op, k=4, tol=1e-8, seed=0)
    u = op.vertex_values(spec.eigenvectors[:, 3])
    an = analyze(coarse, u, function_index=3)
    records = check_nodal_domain_eigenvalue(coarse, None, spec, 3, an, u)
    skips = [r for r in records if r.status == "skip"]
    assert skips and all(r.measured["reason"] == "under-resolved"
                         for r in skips)
    assert not any(r.status == "fail" for r in records)


def test_lemma_index_out_of_range(square, square_solution):
    op, spec, analyses = square_solution
    u = op.vertex_values(spec.eigenvectors[:, 0])
    with pytest.raises(VerifyError):
        check_nodal_domain_eigenvalue(square, None, spec, 9, analyses[0], u)


def test_multiplicity_bound_formula():
    assert multiplicity_bound(0, 1) == 3
    assert multiplicity_bound(1, 1) == 10
    assert multiplicity_bound(1, 5) == 36


def test_multiplicity_torus(torus_solution):
    _, spec, _ = torus_solution
    records = check_multiplicity_bound(spec, genus=1, i_max=3,
                                       instance="torus")
    assert [r.status for r in records] == ["pass", "pass", "skip"]
    assert records[0].measured["multiplicity"] == 4
    assert records[0].measured["bound"] == 10
    assert records[1].measured["multiplicity"] == 2
    # the last computed cluster may be truncated, so no claim is made
    assert records[2].measured["reason"].startswith("cluster truncated")


def test_multiplicity_requires_closed(square_solution):
    _, spec, _ = square_solution
    with pytest.raises(VerifyError):
        check_multiplicity_bound(spec, genus=0, i_max=2)


def test_multiplicity_uncomputed_skip(torus_solution):
    _, spec, _ = torus_solution
    records = check_multiplicity_bound(spec, genus=1, i_max=9)
    assert records[-1].status == "skip"
    assert records[-1].measured["reason"] == "eigenvalue not computed"


def test_order_bound_torus(torus, torus_solution):
    op, spec, analyses = torus_solution
    records = check_order_bound(spec, analyses, genus=1, instance="torus")
    assert all(r.status in ("pass", "inconclusive") for r in records)
    # indices 1..4 sit in cluster 1: bound 2g+1 = 3; the split lambda=2
    # pairs get ordinals 2 and 3
    first = next(r for r in records if r.instance.startswith("torus f[1]"))
    assert "<= 3" in first.statement


def test_order_bound_crossing(torus, torus_solution):
    # an eigenfunction of the lambda=2 eigenspace with an order-2
    # crossing: substitute its analysis at index 5 (cluster ordinal 2)
    op, spec, analyses = torus_solution
    v = torus.vertices
    w = np.sin(v[:, 0]) * np.sin(v[:, 1])
    an = analyze(torus, w, function_index=5)
    detect_singular_points(torus, w, an)
    assert sum(1 for sp in an.singular_points if sp.confident) == 4
    patched = list(analyses)
    patched[5] = an
    records = check_order_bound(spec, patched, genus=1)
    crossing = [r for r in records if "f[5] singular" in r.instance]
    assert len(crossing) == 4
    for rec in crossing:
        assert rec.status == "pass"
        assert rec.measured["order"] == 2
        assert rec.measured["bound"] == 4


def test_order_bound_inconclusive(torus, torus_solution):
    op, spec, analyses = torus_solution
    patched = list(analyses)
    an = analyze(torus, op.vertex_values(spec.eigenvectors[:, 1]),
                 function_index=1)
    an.singular_points = [SingularPoint(np.zeros(2), None, [], 0.9)]
    patched[1] = an
    records = check_order_bound(spec, patched, genus=1)
    rec = next(r for r in records if "f[1] singular" in r.instance)
    assert rec.status == "inconclusive"
    assert rec.measured["reason"] == "low-confidence order fit"


def test_order_bound_requires_closed(square_solution):
    _, spec, analyses = square_solution
    with pytest.raises(VerifyError):
        check_order_bound(spec, analyses, genus=0)


def test_shift_and_reduction(square):
    phi = field.radial_quadratic(1.0)
    records = check_shift_and_reduction(square, phi, "dirichlet", k=3,
                                        c=7.0, instance="square")
    assert [r.status for r in records] == ["pass", "pass"]
    assert records[0].measured["max_rel_difference"] <= 1e-12
    assert records[1].measured["max_rel_difference"] <= 1e-12


def test_shift_none_weight(torus):
    records = check_shift_and_reduction(torus, None, "closed", k=4, c=-3.0)
    assert all(r.status == "pass" for r in records)


def test_instance_validation(square):
    with pytest.raises(VerifyError):
        Instance("bad", square, None, "robin", k=2)
    with pytest.raises(VerifyError):
        Instance("bad", square, None, "closed", k=2)


def test_run_verification_report(square, torus, tmp_path):
    instances = [Instance("square", square, None, "dirichlet", k=4),
                 Instance("torus", torus, None, "closed", k=8)]
    report = run_verification(instances, rotations=2, lemma_k_max=3,
                              mult_i_max=3)
    summary = report.summary
    assert summary["fail"] == 0 and summary["all_passed"]
    assert summary["total"] == len(report.records)
    # instance-major, declared check order within each instance
    groups = []
    for rec in report.records:
        key = rec.instance.split()[0]
        if not groups or groups[-1] != key:
            groups.append(key)
    assert groups == ["square", "torus"]
    prov = report.provenance["instances"]
    assert [p["name"] for p in prov] == ["square", "torus"]
    assert all(len(p["mesh_hash"]) == 64 for p in prov)

    path = tmp_path / "report.json"
    verify.save_report(report, str(path))
    again = run_verification(instances, rotations=2, lemma_k_max=3,
                             mult_i_max=3)
    path2 = tmp_path / "report2.json"
    verify.save_report(again, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_run_verification_check_filter(square):
    report = run_verification(
        [Instance("square", square, None, "dirichlet", k=2)],
        checks=("courant",))
    assert {r.check for r in report.records} == {"courant"}
    with pytest.raises(VerifyError):
        run_verification([], checks=("nonsense",))


def test_run_verification_unique_names(square):
    pair = [Instance("dup", square, None, "dirichlet", k=2),
            Instance("dup", square, None, "dirichlet", k=2)]
    with pytest.raises(VerifyError):
        run_verification(pair)


def test_run_verification_artifacts(square):
    report = run_verification(
        [Instance("square", square, None, "dirichlet", k=2)],
        checks=("basics",), keep_artifacts=True)
    op, spec, analyses = report.artifacts["square"]
    assert spec.k == 2 and len(analyses) == 2
    assert op.num_dofs == spec.eigenvectors.shape[0]


def test_format_report(square):
    report = run_verification(
        [Instance("square", square, None, "dirichlet", k=2)],
        checks=("basics", "courant"))
    text = verify.format_report(report)
    lines = text.splitlines()
    assert lines[0].startswith("status")
    assert any(line.startswith("PASS") for line in lines)
    assert "0 failed" in lines[-1]


def test_record_to_dict_roundtrip(square):
    report = run_verification(
        [Instance("square", square, None, "dirichlet", k=2)],
        checks=("basics",))
    data = verify.report_to_dict(report)
    assert data["format"] == "verification-report"
    assert data["summary"]["all_passed"] is True
    rec = data["records"][0]
    assert set(rec) == {"check", "instance", "statement", "status",
                        "margin", "measured"}


def test_canonical_instances_shape():
    instances = verify.canonical_instances(h_planar=0.2, sphere_level=1,
                                           torus_n=8, k_planar=3,
                                           k_sphere=4, k_torus=4)
    names = [inst.name for inst in instances]
    assert names == ["square/zero", "square/radial", "square/gauss",
                     "disk/zero", "disk/radial", "disk/gauss",
                     "sphere/zero", "sphere/radial", "sphere/gauss",
                     "torus/zero", "torus/radial", "torus/gauss"]
    sphere = instances[6]
    assert sphere.problem_kind == "closed" and sphere.mesh.genus == 0
    gauss = instances[8]
    assert gauss.phi is not None and gauss.phi.dimension == 3

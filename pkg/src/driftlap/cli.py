"""Command-line front end: meshes, spectra, nodal reports, verification runs.

Subcommands
    mesh    generate a triangulated shape and write it to a JSON file
    solve   assemble the weighted operator and store the lowest eigenpairs
    nodal   analyze one eigenfunction's nodal set (JSON, optional SVG)
    verify  run the check suite described by a TOML or JSON config
    sweep   run verify over a parameter grid and tabulate the results

Exit codes: 0 all checks passed, 1 at least one check failed, 2 bad
usage or config, 3 eigensolver failure.  Outputs are byte-stable for a
fixed config and seed; every output directory gets a manifest recording
the tool version, the effective config, and input file hashes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import math
import os
import sys
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import __version__, jsonio
from . import field as field_mod
from . import mesh as mesh_mod
from .assembly import AssemblyError, assemble
from .eigensolve import SolveError, load_spectrum, save_spectrum, smallest
from .field import FieldError
from .mesh import MeshError
from .nodal import analyze, detect_singular_points, render_svg, save_analysis
from .verify import (CHECK_ORDER, Instance, VerifyError, canonical_instances,
                     format_report, run_verification, save_report)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3

SHAPES = ("square", "disk", "torus", "sphere")

_MESH_KEYS = {"shape", "h", "width", "height", "radius", "level"}
_SUITE_KEYS = {"h_planar", "sphere_level", "torus_n",
               "k_planar", "k_sphere", "k_torus"}
_PROBLEM_KEYS = {"phi", "h", "kind", "k", "tol", "seed"}
_NODAL_KEYS = {"tau_rel", "r_fit", "n_max", "rotations"}
_VERIFY_KEYS = {"checks", "lemma_k_max", "mult_i_max", "shift_c"}
_TOP_KEYS = {"mesh", "suite", "problem", "nodal", "verify", "out"}


class ConfigError(ValueError):
    """Raised for malformed configs; the message names the bad field."""


# -- config ----------------------------------------------------------------------


def load_config(path: str) -> dict:
    """Parse a TOML (by extension) or JSON config file into a dict."""
    if path.endswith((".toml", ".tml")):
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    else:
        try:
            data = jsonio.load(path)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a table")
    return data


def _check_keys(section: dict, allowed: set, where: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}: unknown field")


def _table(data: dict, name: str) -> dict:
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"{name}: must be a table")
    return value


@dataclass
class RunConfig:
    """One fully-specified verification run.

    Either `mesh` (a single shape) or `suite` (parameters for the
    canonical instance family) is set, never both.  Field specs stay in
    their raw config form until a mesh fixes the dimension.
    """

    mesh: dict | None
    suite: dict | None
    phi: object
    h: object
    problem_kind: str
    k: int
    tol: float
    seed: int
    tau_rel: float | None
    r_fit: float | None
    n_max: int | None
    rotations: int
    checks: tuple | None
    lemma_k_max: int
    mult_i_max: int
    shift_c: float
    out: str | None
    echo: dict


def runconfig_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    _check_keys(data, _TOP_KEYS, "config")
    mesh_sec = data.get("mesh")
    suite_sec = data.get("suite")
    if (mesh_sec is None) == (suite_sec is None):
        raise ConfigError("config: exactly one of mesh or suite is required")
    if mesh_sec is not None:
        if not isinstance(mesh_sec, dict):
            raise ConfigError("mesh: must be a table")
        _check_keys(mesh_sec, _MESH_KEYS, "mesh")
        if "shape" not in mesh_sec:
            raise ConfigError("mesh.shape: required")
    else:
        if not isinstance(suite_sec, dict):
            raise ConfigError("suite: must be a table")
        _check_keys(suite_sec, _SUITE_KEYS, "suite")

    problem = _table(data, "problem")
    _check_keys(problem, _PROBLEM_KEYS, "problem")
    kind = problem.get("kind", "dirichlet")
    if kind not in ("dirichlet", "closed"):
        raise ConfigError(f"problem.kind: expected dirichlet or closed, "
                          f"got {kind!r}")

    nodal = _table(data, "nodal")
    _check_keys(nodal, _NODAL_KEYS, "nodal")
    verify_sec = _table(data, "verify")
    _check_keys(verify_sec, _VERIFY_KEYS, "verify")
    checks = verify_sec.get("checks")
    if checks is not None:
        if (not isinstance(checks, (list, tuple))
                or not all(isinstance(c, str) for c in checks)):
            raise ConfigError("verify.checks: must be a list of check names")
        bad = set(checks) - set(CHECK_ORDER)
        if bad:
            raise ConfigError(f"verify.checks: unknown checks {sorted(bad)}")
        checks = tuple(checks)

    out = data.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("out: must be a path string")

    def number(section, key, cast, default):
        value = section.get(key, default)
        if value is None:
            return None
        try:
            return cast(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}") from exc

    return RunConfig(
        mesh=mesh_sec,
        suite=suite_sec,
        phi=problem.get("phi"),
        h=problem.get("h"),
        problem_kind=kind,
        k=number(problem, "k", int, 6),
        tol=number(problem, "tol", float, 1e-8),
        seed=number(problem, "seed", int, 0),
        tau_rel=number(nodal, "tau_rel", float, None),
        r_fit=number(nodal, "r_fit", float, None),
        n_max=number(nodal, "n_max", int, None),
        rotations=number(nodal, "rotations", int, 5),
        checks=checks,
        lemma_k_max=number(verify_sec, "lemma_k_max", int, 5),
        mult_i_max=number(verify_sec, "mult_i_max", int, 5),
        shift_c=number(verify_sec, "shift_c", float, 5.0),
        out=out,
        echo=data,
    )


def build_mesh(shape: str, params: dict):
    """Construct a shape from config parameters, rejecting extras."""
    p = {k: v for k, v in params.items() if v is not None}

    def need_h():
        if "h" not in p:
            raise ConfigError(f"mesh.h: required for shape {shape!r}")
        return float(p.pop("h"))

    if shape == "square":
        width = float(p.pop("width", 1.0))
        height = float(p.pop("height", 1.0))
        built = mesh_mod.rectangle(width, height, need_h())
    elif shape == "disk":
        radius = float(p.pop("radius", 1.0))
        built = mesh_mod.disk(radius, need_h())
    elif shape == "torus":
        width = float(p.pop("width", 2.0 * math.pi))
        height = float(p.pop("height", 2.0 * math.pi))
        built = mesh_mod.flat_torus(width, height, need_h())
    elif shape == "sphere":
        radius = float(p.pop("radius", 1.0))
        if "level" in p:
            built = mesh_mod.sphere_at_level(radius, int(p.pop("level")))
        else:
            built = mesh_mod.sphere(radius, need_h())
    else:
        raise ConfigError(f"mesh.shape: unknown shape {shape!r}; "
                          f"expected one of {', '.join(SHAPES)}")
    if p:
        extra = sorted(p)[0]
        raise ConfigError(f"mesh.{extra}: not a parameter of shape {shape!r}")
    return built


def config_instances(cfg: RunConfig) -> list:
    """Materialize the problem instances a RunConfig describes."""
    if cfg.suite is not None:
        return canonical_instances(**cfg.suite)
    if cfg.h is not None:
        raise ConfigError("problem.h: potential terms are not covered by "
                          "the verification checks; use the solve command")
    built = build_mesh(cfg.mesh["shape"],
                       {k: v for k, v in cfg.mesh.items() if k != "shape"})
    dim = built.vertices.shape[1]
    phi = None if cfg.phi is None else field_mod.from_config(cfg.phi, dim)
    return [Instance(cfg.mesh["shape"], built, phi, cfg.problem_kind,
                     k=cfg.k, tol=cfg.tol, seed=cfg.seed)]


# -- manifests -------------------------------------------------------------------


def _file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir: str, command: str, config: dict,
                   inputs) -> None:
    """Record version, effective config, and input hashes in out_dir."""
    doc = {
        "format": "run-manifest",
        "tool": "driftlap",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {path: _file_sha256(path) for path in sorted(inputs)},
    }
    jsonio.dump(doc, os.path.join(out_dir, "manifest.json"))


# -- commands --------------------------------------------------------------------


def cmd_mesh(args) -> int:
    built = build_mesh(args.shape, {"h": args.h})
    mesh_mod.save(built, args.out)
    print(f"wrote {args.out}: {built.num_vertices} vertices, "
          f"{built.num_triangles} triangles, "
          f"mean edge {built.mean_edge_length:.6g}")
    return EXIT_OK


def cmd_solve(args) -> int:
    built = mesh_mod.load(args.mesh)
    dim = built.vertices.shape[1]
    phi = None if args.phi is None else field_mod.parse(args.phi, dim)
    h = None if args.h is None else field_mod.parse(args.h, dim)
    op = assemble(built, phi, h, args.problem)
    spectrum = smallest(op, args.k, tol=args.tol, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    spec_path = os.path.join(args.out, "spectrum.json")
    save_spectrum(spectrum, spec_path,
                  os.path.join(args.out, "eigenvectors.json"))
    write_manifest(args.out, "solve",
                   {"mesh": args.mesh, "phi": args.phi, "h": args.h,
                    "problem": args.problem, "k": args.k, "tol": args.tol,
                    "seed": args.seed},
                   {args.mesh})
    values = " ".join(jsonio.format_float(v) for v in spectrum.eigenvalues)
    print(f"wrote {spec_path}")
    print(f"eigenvalues: {values}")
    return EXIT_OK


def cmd_nodal(args) -> int:
    built = mesh_mod.load(args.mesh)
    doc = jsonio.load(args.spectrum)
    if not isinstance(doc, dict) or "eigenvectors_file" not in doc:
        raise ConfigError(f"{args.spectrum}: no eigenvectors recorded; "
                          f"run solve first")
    vec_path = os.path.join(os.path.dirname(args.spectrum) or ".",
                            doc["eigenvectors_file"])
    spectrum = load_spectrum(args.spectrum, vec_path)
    if not 0 <= args.index < spectrum.k:
        raise ConfigError(f"--index: {args.index} outside computed range "
                          f"0..{spectrum.k - 1}")
    op = assemble(built, None, None, spectrum.problem_kind)
    if op.num_dofs != spectrum.eigenvectors.shape[0]:
        raise ConfigError(f"{args.spectrum}: eigenvectors have "
                          f"{spectrum.eigenvectors.shape[0]} dofs but the "
                          f"mesh has {op.num_dofs}")
    u = op.vertex_values(spectrum.eigenvectors[:, args.index])
    analysis = analyze(built, u, function_index=args.index)
    detect_singular_points(built, u, analysis)
    os.makedirs(args.out, exist_ok=True)
    save_analysis(analysis, os.path.join(args.out, "nodal.json"))
    if args.svg:
        render_svg(built, analysis, os.path.join(args.out, "nodal.svg"))
    write_manifest(args.out, "nodal",
                   {"mesh": args.mesh, "spectrum": args.spectrum,
                    "index": args.index, "svg": bool(args.svg)},
                   {args.mesh, args.spectrum, vec_path})
    chains = len(analysis.segments)
    print(f"index {args.index}: {analysis.domain_count} nodal domains, "
          f"{chains} zero-set chains, "
          f"{len(analysis.singular_points)} singular points")
    return EXIT_OK


def _run_config_report(cfg: RunConfig, keep_artifacts: bool = False):
    instances = config_instances(cfg)
    return run_verification(
        instances, checks=cfg.checks, rotations=cfg.rotations,
        lemma_k_max=cfg.lemma_k_max, mult_i_max=cfg.mult_i_max,
        shift_c=cfg.shift_c, tau_rel=cfg.tau_rel, r_fit=cfg.r_fit,
        n_max=cfg.n_max, keep_artifacts=keep_artifacts)


def cmd_verify(args) -> int:
    data = load_config(args.config)
    cfg = runconfig_from_dict(data)
    out = args.out or cfg.out
    if out is None:
        raise ConfigError("out: set it in the config or pass --out")
    report = _run_config_report(cfg)
    os.makedirs(out, exist_ok=True)
    save_report(report, os.path.join(out, "report.json"))
    write_manifest(out, "verify", cfg.echo, {args.config})
    print(format_report(report))
    failures = report.failures()
    if failures and not args.allow_fail:
        return EXIT_CHECK_FAILED
    if failures:
        print(f"warning: {len(failures)} failed checks (--allow-fail)",
              file=sys.stderr)
    return EXIT_OK


def _set_path(tree: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = tree
    for part in parts[:-1]:
        nxt = node.setdefault(part, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"grid.{dotted}: {part} is not a table")
        node = nxt
    node[parts[-1]] = value


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return jsonio.format_float(value)
    if isinstance(value, (dict, list)):
        return jsonio.dumps(value)
    return str(value)


def cmd_sweep(args) -> int:
    data = load_config(args.config)
    _check_keys(data, {"base", "grid", "out"}, "config")
    base = data.get("base")
    grid = data.get("grid")
    if not isinstance(base, dict):
        raise ConfigError("base: required table with the run config")
    if not isinstance(grid, dict) or not grid:
        raise ConfigError("grid: required non-empty table of parameter lists")
    out = args.out or data.get("out")
    if out is None:
        raise ConfigError("out: set it in the config or pass --out")
    keys = list(grid)
    for key in keys:
        if not isinstance(grid[key], list) or not grid[key]:
            raise ConfigError(f"grid.{key}: must be a non-empty list")

    combos = list(itertools.product(*(grid[key] for key in keys)))
    configs = []
    for combo in combos:
        point = json.loads(json.dumps(base))
        for key, value in zip(keys, combo):
            _set_path(point, key, value)
        cfg = runconfig_from_dict(point)
        if cfg.suite is not None:
            raise ConfigError("base.suite: sweeps need a single mesh "
                              "per grid point")
        configs.append((combo, point, cfg))

    os.makedirs(out, exist_ok=True)
    width = max(3, len(str(len(combos) - 1)))
    k_max = max(cfg.k for _, _, cfg in configs)
    header = (["point"] + keys
              + [f"lambda_{i}" for i in range(k_max)]
              + [f"domains_{i}" for i in range(k_max)]
              + ["checks_passed", "checks_failed", "pass_rate"])

    rows = []
    total_failed = 0
    for idx, (combo, point, cfg) in enumerate(configs):
        name = f"point-{idx:0{width}d}"
        subdir = os.path.join(out, name)
        os.makedirs(subdir, exist_ok=True)
        report = _run_config_report(cfg, keep_artifacts=True)
        (instance_name,) = report.artifacts
        _, spectrum, analyses = report.artifacts[instance_name]
        save_spectrum(spectrum, os.path.join(subdir, "spectrum.json"))
        save_report(report, os.path.join(subdir, "report.json"))
        write_manifest(subdir, "sweep", point, {args.config})
        summary = report.summary
        passed, failed = summary["pass"], summary["fail"]
        total_failed += failed
        decided = passed + failed
        rate = 1.0 if decided == 0 else passed / decided
        lams = [_csv_cell(float(v)) for v in spectrum.eigenvalues]
        doms = [str(an.domain_count) for an in analyses]
        pad = [""] * (k_max - cfg.k)
        rows.append([name] + [_csv_cell(v) for v in combo]
                    + lams + pad + doms + pad
                    + [str(passed), str(failed), _csv_cell(rate)])
        print(f"{name}: {passed} passed, {failed} failed")

    index_path = os.path.join(out, "index.csv")
    with open(index_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    write_manifest(out, "sweep", data, {args.config})
    print(f"wrote {index_path} ({len(rows)} grid points)")
    if total_failed and not args.allow_fail:
        return EXIT_CHECK_FAILED
    if total_failed:
        print(f"warning: {total_failed} failed checks (--allow-fail)",
              file=sys.stderr)
    return EXIT_OK


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftlap",
        description="Weighted Laplacian spectra and nodal-set analysis "
                    "on triangulated domains and surfaces.")
    parser.add_argument("--version", action="version",
                        version=f"driftlap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate a triangulated shape")
    p.add_argument("--shape", required=True, choices=SHAPES)
    p.add_argument("--h", type=float, required=True,
                   help="target edge length")
    p.add_argument("--out", required=True, help="output mesh file")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("solve", help="compute the lowest eigenpairs")
    p.add_argument("--mesh", required=True, help="mesh file")
    p.add_argument("--phi", default=None, help="weight field expression")
    p.add_argument("--h", default=None, help="potential field expression")
    p.add_argument("--problem", choices=("dirichlet", "closed"),
                   default="dirichlet")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("nodal", help="analyze one eigenfunction's nodal set")
    p.add_argument("--mesh", required=True, help="mesh file")
    p.add_argument("--spectrum", required=True, help="spectrum JSON file")
    p.add_argument("--index", type=int, required=True,
                   help="eigenfunction index, 0-based")
    p.add_argument("--svg", action="store_true",
                   help="also render the nodal set as SVG")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_nodal)

    p = sub.add_parser("verify", help="run the verification check suite")
    p.add_argument("--config", required=True, help="TOML or JSON run config")
    p.add_argument("--out", default=None,
                   help="output directory (overrides config)")
    p.add_argument("--allow-fail", action="store_true",
                   help="exit 0 even when checks fail")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="verify across a parameter grid")
    p.add_argument("--config", required=True,
                   help="config with base table and grid table")
    p.add_argument("--out", default=None,
                   help="output directory (overrides config)")
    p.add_argument("--allow-fail", action="store_true",
                   help="exit 0 even when checks fail")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FieldError, MeshError, AssemblyError, VerifyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

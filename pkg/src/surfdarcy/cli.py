"""Command-line driver for the torus convergence study.

Subcommands:

  run-case     one convergence case (by id or explicit orders/family)
  run-all      all eight benchmark cases
  mesh-report  geometry-approximation diagnostics of one mesh
  dump-system  assembled matrix and right-hand side in Matrix Market format

All outputs are written atomically (temp file + rename) into --out-dir and
are byte-identical for identical configuration and seed.  Exit codes:
0 success, 2 configuration error, 3 solver failure.
"""

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import analysis
from .analysis import (CASES, DEFAULT_JIGGLE_AMPLITUDE, DEFAULT_LEVELS,
                       DEFAULT_SEED, level_seed, run_case,
                       torus_exact_solution)
from .assembly import ProblemData, assemble, dump_matrix_market
from .errors import ConfigError, ConvergenceError, SingularSystemError, SurfDarcyError
from .fespace import build_space, eval_basis
from .geometry import Torus
from .mesh import (build_structured_torus, discrete_normal_and_measure,
                   element_map, jiggle_to_unstructured, mesh_quality_report,
                   visualization_grid, write_vtk_legacy)
from .solver import SolverConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-surfdarcy-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_via_file(path, writer):
    """Atomic variant for writers that need a real path (vtk, mtx)."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-surfdarcy-")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_config_file(path):
    import tomli
    with open(path, "rb") as fh:
        return tomli.load(fh)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="surfdarcy",
        description="Stabilized mixed FEM for Darcy flow on the torus")
    parser.add_argument("--config", help="TOML file with defaults; "
                                         "command-line flags win on conflict")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out-dir", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--levels", default=",".join(map(str, DEFAULT_LEVELS)),
                       help="comma-separated n_major values")
        p.add_argument("--cn", type=float, default=0.0,
                       help="normal penalty c_N")
        p.add_argument("--quad-degree", type=int, default=None)
        p.add_argument("--split", choices=("alternating", "uniform"),
                       default="alternating")
        p.add_argument("--jiggle-amplitude", type=float,
                       default=DEFAULT_JIGGLE_AMPLITUDE)
        p.add_argument("--solver", choices=("gmres", "lu"), default="gmres")
        p.add_argument("--rel-tol", type=float, default=1e-10)
        p.add_argument("--max-iters", type=int, default=10_000)
        p.add_argument("--restart", type=int, default=200)
        p.add_argument("--formats", default="csv,json",
                       help="any of csv,json,vtk,mtx (comma-separated)")
        p.add_argument("--cross-check", action="store_true",
                       help="compare gmres against dense LU on systems "
                            "with at most 20000 unknowns")

    p_case = sub.add_parser("run-case", help="run one convergence case")
    p_case.add_argument("--case", type=int, choices=sorted(CASES))
    p_case.add_argument("--orders", help="k_u,k_p,k_g (alternative to --case)")
    p_case.add_argument("--family", choices=("structured", "unstructured"))
    add_common(p_case)

    p_all = sub.add_parser("run-all", help="run all eight cases")
    add_common(p_all)

    p_mesh = sub.add_parser("mesh-report", help="mesh quality diagnostics")
    p_mesh.add_argument("--n", type=int, required=True, help="n_major")
    p_mesh.add_argument("--kg", type=int, default=1, help="geometry order")
    p_mesh.add_argument("--jiggle", type=float, default=0.0,
                        help="jiggle amplitude (0 = structured)")
    p_mesh.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_mesh.add_argument("--out-dir", default="out")
    p_mesh.add_argument("--formats", default="json")

    p_dump = sub.add_parser("dump-system", help="dump the assembled system")
    p_dump.add_argument("--case", type=int, choices=sorted(CASES), required=True)
    p_dump.add_argument("--level", type=int, required=True, help="n_major")
    add_common(p_dump)
    return parser


def _apply_config_file(args, parser):
    if not args.config:
        return args
    table = _load_config_file(args.config)
    specified = set()
    for token in sys.argv[1:]:
        if token.startswith("--"):
            specified.add(token.split("=", 1)[0][2:].replace("-", "_"))
    for key, value in table.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ConfigError(f"unknown config key {key!r}")
        if attr not in specified:
            setattr(args, attr, value)
    return args


def _parse_levels(text):
    if isinstance(text, (list, tuple)):
        levels = [int(v) for v in text]
    else:
        try:
            levels = [int(tok) for tok in str(text).split(",") if tok.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad levels {text!r}") from exc
    if not levels:
        raise ConfigError("empty level list")
    return tuple(levels)


def _solver_config(args):
    return SolverConfig(method=args.solver, rel_tol=args.rel_tol,
                        max_iters=args.max_iters, restart=args.restart)


def _case_stem(args, case):
    if case is not None:
        return f"case{case}"
    k_u, k_p, k_g = args._orders
    return f"orders{k_u}{k_p}{k_g}-{args.family}"


def _write_record(record, stem, out_dir, formats):
    written = []
    if "csv" in formats:
        path = os.path.join(out_dir, stem + ".csv")
        _atomic_write(path, record.to_csv_text())
        written.append(path)
    if "json" in formats:
        path = os.path.join(out_dir, stem + ".json")
        _atomic_write(path, record.to_json_text())
        written.append(path)
    if "vtk" in formats:
        for arts, row in zip(record.artifacts, record.levels):
            path = os.path.join(out_dir, f"{stem}-n{row.n_major}.vtk")
            _write_solution_vtk(path, arts)
            written.append(path)
    return written


def _write_solution_vtk(path, arts):
    mesh, space_u, space_p = arts.mesh, arts.space_u, arts.space_p
    solution = arts.solution
    points, triangles, sample_cells, sample_refs, parents = visualization_grid(mesh)
    n_u = space_u.n_dofs
    u_vals = np.empty((len(points), 3))
    p_vals = np.empty(len(points))
    for i in range(len(points)):
        c = sample_cells[i]
        vals_u, _ = eval_basis(space_u, c, sample_refs[i][None, :])
        vals_p, _ = eval_basis(space_p, c, sample_refs[i][None, :])
        for comp in range(3):
            u_vals[i, comp] = vals_u[0] @ solution[comp * n_u + space_u.dof_map[c]]
        p_vals[i] = vals_p[0] @ solution[3 * n_u + space_p.dof_map[c]]
    centroid = np.array([[1.0 / 3.0, 1.0 / 3.0]])
    normal_flux = np.empty(len(parents))
    for t, c in enumerate(parents):
        _, jac = element_map(mesh, c, centroid)
        n_h, _ = discrete_normal_and_measure(jac)
        vals_u, _ = eval_basis(space_u, c, centroid)
        u_c = [vals_u[0] @ solution[comp * n_u + space_u.dof_map[c]]
               for comp in range(3)]
        normal_flux[t] = float(n_h[0] @ u_c)
    _atomic_via_file(path, lambda tmp: write_vtk_legacy(
        tmp, points, triangles,
        point_data={"u_h": u_vals, "p_h": p_vals},
        cell_data={"normal_velocity": normal_flux}))


def _run_case_command(args):
    case = args.case
    orders = family = None
    if case is None:
        if not args.orders or not args.family:
            raise ConfigError("run-case needs --case or both --orders and --family")
        try:
            orders = tuple(int(tok) for tok in args.orders.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad orders {args.orders!r}") from exc
        if len(orders) != 3:
            raise ConfigError("orders must be k_u,k_p,k_g")
        family = args.family
        args._orders = orders
    formats = {tok.strip() for tok in args.formats.split(",") if tok.strip()}
    record = run_case(case=case, orders=orders, family=family,
                      levels=_parse_levels(args.levels), c_N=args.cn,
                      seed=args.seed, solver_config=_solver_config(args),
                      quad_degree=args.quad_degree, split=args.split,
                      jiggle_amplitude=args.jiggle_amplitude,
                      cross_check=args.cross_check,
                      keep_artifacts="vtk" in formats)
    written = _write_record(record, _case_stem(args, case), args.out_dir, formats)
    for path in written:
        print(path)
    if record.failed:
        print(f"error: {record.failure_message}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _run_all_command(args):
    formats = {tok.strip() for tok in args.formats.split(",") if tok.strip()}
    status = EXIT_OK
    for case in sorted(CASES):
        record = run_case(case=case, levels=_parse_levels(args.levels),
                          c_N=args.cn, seed=args.seed,
                          solver_config=_solver_config(args),
                          quad_degree=args.quad_degree, split=args.split,
                          jiggle_amplitude=args.jiggle_amplitude,
                          cross_check=args.cross_check,
                          keep_artifacts="vtk" in formats)
        for path in _write_record(record, f"case{case}", args.out_dir, formats):
            print(path)
        if record.failed:
            print(f"error: case {case}: {record.failure_message}", file=sys.stderr)
            status = EXIT_SOLVER
    return status


def _mesh_report_command(args):
    surface = Torus(1.0, 0.5)
    mesh = build_structured_torus(surface, args.n, args.kg)
    if args.jiggle > 0.0:
        mesh = jiggle_to_unstructured(mesh, args.jiggle,
                                      seed=level_seed(args.seed, args.n))
    report = mesh_quality_report(mesh)
    payload = {
        "n_major": args.n, "k_g": args.kg, "jiggle": args.jiggle,
        "seed": args.seed,
        "max_rho": report.max_rho,
        "max_normal_deviation": report.max_normal_deviation,
        "min_diameter": report.min_diameter,
        "max_diameter": report.max_diameter,
        "min_angle_deg": report.min_angle_deg,
        "h": report.h,
        "n_sample_points": report.n_sample_points,
        "n_vertices": mesh.n_vertices, "n_edges": mesh.n_edges,
        "n_cells": mesh.n_cells,
        "euler_characteristic": mesh.euler_characteristic(),
    }
    text = json.dumps(payload, indent=2) + "\n"
    print(text, end="")
    formats = {tok.strip() for tok in args.formats.split(",") if tok.strip()}
    if "json" in formats:
        path = os.path.join(args.out_dir,
                            f"mesh-n{args.n}-kg{args.kg}.json")
        _atomic_write(path, text)
        print(path)
    if "vtk" in formats:
        points, triangles, _, _, _ = visualization_grid(mesh)
        path = os.path.join(args.out_dir, f"mesh-n{args.n}-kg{args.kg}.vtk")
        _atomic_via_file(path, lambda tmp: write_vtk_legacy(tmp, points, triangles))
        print(path)
    return EXIT_OK


def _dump_system_command(args):
    k_u, k_p, k_g, family = CASES[args.case]
    surface = Torus(1.0, 0.5)
    mesh = build_structured_torus(surface, args.level, k_g, split=args.split)
    if family == "unstructured":
        mesh = jiggle_to_unstructured(mesh, args.jiggle_amplitude,
                                      seed=level_seed(args.seed, args.level))
    exact = torus_exact_solution(surface)
    system = assemble(build_space(mesh, k_u), build_space(mesh, k_p),
                      ProblemData(f=exact.f, g=exact.g), c_N=args.cn,
                      quad_degree=args.quad_degree)
    stem = os.path.join(args.out_dir, f"case{args.case}-n{args.level}")
    matrix_path, rhs_path = stem + ".mtx", stem + "-rhs.mtx"

    def write_matrix(tmp):
        with open(tmp, "wb") as fh:
            dump_matrix_market(system, matrix_target=fh)

    def write_rhs(tmp):
        with open(tmp, "wb") as fh:
            dump_matrix_market(system, rhs_target=fh)

    _atomic_via_file(matrix_path, write_matrix)
    _atomic_via_file(rhs_path, write_rhs)
    print(matrix_path)
    print(rhs_path)
    return EXIT_OK


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config_file(args, parser)
        if args.command == "run-case":
            return _run_case_command(args)
        if args.command == "run-all":
            return _run_all_command(args)
        if args.command == "mesh-report":
            return _mesh_report_command(args)
        if args.command == "dump-system":
            return _dump_system_command(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, SingularSystemError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SurfDarcyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

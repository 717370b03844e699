"""Command-line driver.

Subcommands::

    mixfem solve <config.yaml> [--output DIR] [--vtk] [--report]
    mixfem gen-mesh <spec> <out.mesh> [--dimensions LX,LY,LZ] [--patch PX,PY] [--cell hex8|tet4|tet10]
    mixfem sweep-vol <out.csv> [--kappa K] [--report]
    mixfem check-tangents <config.yaml> [--samples N] [--seed S] [--h H] [--tol T] [--csv FILE]
    mixfem legendre <vol-id> <kappa> <p> [--grid]

Exit status is 0 on success, 1 when a solve or check fails and 2 for bad
input.
"""

import argparse
import csv
import logging
import os
import re
import sys

import numpy as np

from .assembly import NewtonSolver, element_average_J, initial_state
from .config import build_run, dump_config, load_config
from .errors import ConfigError, ConvergenceError, MeshFormatError, MixfemError
from .io import ensure_directory, read_probe_csv, write_probe_csv, write_vtk
from .materials import VOLUMETRIC_IDS, VolumetricModel
from .mesh import generate_block_mesh, hex_to_tet, write_mesh
from .problems import nodal_pressure

log = logging.getLogger("mixfem")

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


# --- solve ------------------------------------------------------------------

def _write_step_vtk(setup, solver, res, path):
    pb, d = setup.problem, solver.dofs
    cells = {"mean_J": element_average_J(res, solver.assembler.geom)}
    if d.p_nodes is None:
        cells["pressure"] = res.state.p
    write_vtk(pb.mesh, path,
              point_vectors={"displacement": res.state.u},
              point_scalars={"pressure": nodal_pressure(pb, d, res.state)},
              cell_scalars=cells, title=f"step {res.step} load factor {res.load_factor:.6g}")


def run(config_path, output=None, vtk=None, report=None):
    """Solve the configured problem and write its outputs; returns an exit status.

    Files written to the output directory: ``config.yaml`` (the resolved
    configuration), ``probes.csv``, ``convergence.csv``, optionally
    ``vtk/step_NNN.vtk`` and, on the report path, ``probes.png`` and
    ``convergence.png``.
    """
    try:
        cfg = load_config(config_path)
        if output is not None:
            cfg["output"]["directory"] = output
        if vtk is not None:
            cfg["output"]["vtk"] = bool(vtk)
        if report is not None:
            cfg["output"]["report"] = bool(report)
        setup = build_run(cfg)
    except (ConfigError, MeshFormatError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    out = ensure_directory(cfg["output"]["directory"])
    dump_config(cfg, os.path.join(out, "config.yaml"))
    solver = NewtonSolver(setup.problem, setup.tolerances)
    d = solver.dofs
    rows = []

    def add_rows(step, lam, state):
        p_nodal = nodal_pressure(setup.problem, d, state)
        for name, node in setup.probes:
            rows.append((step, lam, name, *state.u[node], p_nodal[node]))

    add_rows(0, 0.0, initial_state(setup.problem, d))
    if cfg["output"]["vtk"]:
        ensure_directory(os.path.join(out, "vtk"))

    def on_step(res, asm):
        add_rows(res.step, res.load_factor, res.state)
        log.info("step %d (load factor %.4g) converged in %d iterations", res.step, res.load_factor,
                 res.iterations)
        if cfg["output"]["vtk"]:
            _write_step_vtk(setup, solver, res, os.path.join(out, "vtk", f"step_{res.step:03d}.vtk"))

    status = EXIT_OK
    conv_log = None
    try:
        _, conv_log = solver.run(setup.program, callback=on_step)
    except ConvergenceError as exc:
        log.error("%s", exc)
        conv_log = exc.log
        status = EXIT_FAILED
    except MixfemError as exc:
        log.error("%s", exc)
        status = EXIT_FAILED
    write_probe_csv(os.path.join(out, "probes.csv"), rows)
    if conv_log is not None:
        conv_log.write_csv(os.path.join(out, "convergence.csv"))
    if cfg["output"]["report"]:
        from .plotting import plot_convergence, plot_probe_history
        if rows:
            plot_probe_history(read_probe_csv(os.path.join(out, "probes.csv")),
                               os.path.join(out, "probes.png"), title=str(setup.problem.kind))
        if conv_log is not None:
            plot_convergence(conv_log, os.path.join(out, "convergence.png"), title=str(setup.problem.kind))
    return status


# --- gen-mesh ---------------------------------------------------------------

_DIVISIONS = re.compile(r"^\s*(\d+)\s*[x,]\s*(\d+)\s*[x,]\s*(\d+)\s*$")


def _triple(text, n=3):
    vals = [float(v) for v in re.split(r"[x,]", text)]
    if len(vals) != n:
        raise ConfigError(f"expected {n} comma-separated values, got {text!r}")
    return tuple(vals)


def gen_mesh(spec, out, dimensions=None, patch=None, cell="hex8"):
    """Write a structured block mesh.  ``spec`` is ``NXxNYxNZ`` (or
    ``NX,NY,NZ``), or a run configuration whose mesh section is used."""
    m = _DIVISIONS.match(spec)
    if m:
        div = tuple(int(v) for v in m.groups())
        mesh = generate_block_mesh(*div, dimensions=dimensions or (1.0, 1.0, 1.0), patch=patch)
        if cell == "tet10":
            mesh = hex_to_tet(mesh, quadratic=True)
        elif cell == "tet4":
            mesh = hex_to_tet(mesh, quadratic=False)
        elif cell != "hex8":
            raise ConfigError(f"unknown cell type {cell!r}")
    elif os.path.isfile(spec):
        from .config import build_mesh
        from .elements import mixed_element
        cfg = load_config(spec)
        mesh = build_mesh(cfg, mixed_element(cfg["element"], cfg["basis"]))
    else:
        raise ConfigError(f"mesh spec {spec!r} is neither NXxNYxNZ nor a configuration file")
    write_mesh(mesh, out)
    return mesh


# --- sweep-vol --------------------------------------------------------------

def sweep_vol(out, kappa=1.0, samples=200, report=False):
    from .verification import sweep_properties, volumetric_sweep, write_sweep_csv
    near = np.round(np.linspace(0.95, 1.05, 21), 12)
    J, table = volumetric_sweep(kappa=kappa, J_range=(0.05, 5.0), samples=samples,
                                include=tuple(near) + (1.0, 5.0))
    write_sweep_csv(out, J, table)
    if report:
        from .plotting import plot_sweep
        plot_sweep(J, {i: v / kappa for i, v in table.items()}, os.path.splitext(out)[0] + ".png")
    return sweep_properties(J, table, kappa=kappa)


# --- check-tangents ---------------------------------------------------------

def check_tangents(config_path, samples=20, seed=0, h=1e-6, tol=1e-5, csv_path=None):
    """FD tangent check on random states of the configuration's first element."""
    from .formulations import element_geometry
    from .verification import fd_tangent_check, random_element_state
    cfg = load_config(config_path)
    setup = build_run(cfg)
    pb = setup.problem
    mesh = pb.mesh
    geom = element_geometry(pb.element, mesh.nodes[mesh.cells[:1]])
    rng = np.random.default_rng(seed)
    jbar_max = np.e if (pb.material.vol is not None and pb.material.vol.id == 8) else None
    worst = {}
    records = []
    for k in range(samples):
        state = random_element_state(geom, pb.material, rng, kind=pb.kind, jbar_max=jbar_max)
        errs = fd_tangent_check(pb.kind, geom, pb.material, *state, h=h)
        for block, e in errs.items():
            worst[block] = max(worst.get(block, 0.0), e)
            records.append((k, block, e))
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sample", "block", "relative_error"])
            for k, block, e in records:
                w.writerow([k, block, f"{e:.6e}"])
    return worst, all(e <= tol for e in worst.values())


# --- legendre ---------------------------------------------------------------

def legendre(vol_id, kappa, p, grid=False):
    from .verification import legendre_transform
    return legendre_transform(VolumetricModel(int(vol_id), float(kappa)), float(p),
                              method="grid_newton" if grid else "auto")


# --- argument parsing -------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="mixfem", description="Mixed finite elements for finite-strain hyperelasticity.")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run a configured problem")
    s.add_argument("config")
    s.add_argument("--output", help="output directory (overrides output.directory)")
    s.add_argument("--vtk", action="store_true", default=None, help="write per-step VTK files")
    s.add_argument("--report", action="store_true", default=None, help="render PNG figures")

    g = sub.add_parser("gen-mesh", help="write a structured block mesh")
    g.add_argument("spec", help="NXxNYxNZ or a configuration file")
    g.add_argument("out")
    g.add_argument("--dimensions", default="1,1,1")
    g.add_argument("--patch", default=None, help="PX,PY extent of the 'patch' face set on zmax")
    g.add_argument("--cell", default="hex8", choices=("hex8", "tet4", "tet10"))

    w = sub.add_parser("sweep-vol", help="tabulate p(J) for the volumetric energies")
    w.add_argument("out")
    w.add_argument("--kappa", type=float, default=1.0)
    w.add_argument("--samples", type=int, default=200)
    w.add_argument("--report", action="store_true", help="also render <out>.png")

    c = sub.add_parser("check-tangents", help="finite-difference tangent check")
    c.add_argument("config")
    c.add_argument("--samples", type=int, default=20)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--h", type=float, default=1e-6)
    c.add_argument("--tol", type=float, default=1e-5)
    c.add_argument("--csv", default=None)

    lg = sub.add_parser("legendre", help="complementary volumetric potential at one pressure")
    lg.add_argument("vol_id", type=int, choices=VOLUMETRIC_IDS)
    lg.add_argument("kappa", type=float)
    lg.add_argument("p", type=float)
    lg.add_argument("--grid", action="store_true", help="force the grid scan with Newton polishing")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "solve":
        if args.verbose == 0:
            log.setLevel(logging.INFO)
        return run(args.config, output=args.output, vtk=args.vtk, report=args.report)
    try:
        if args.command == "gen-mesh":
            patch = None if args.patch is None else tuple(float(v) for v in args.patch.split(","))
            mesh = gen_mesh(args.spec, args.out, dimensions=_triple(args.dimensions), patch=patch, cell=args.cell)
            print(f"{args.out}: {mesh.n_nodes} nodes, {mesh.n_cells} {mesh.cell_type} cells, "
                  f"sets {', '.join(mesh.set_names)}")
            return EXIT_OK
        if args.command == "sweep-vol":
            props = sweep_vol(args.out, kappa=args.kappa, samples=args.samples, report=args.report)
            print(f"max |p(1)| = {props['max_abs_p_at_1']:.3e}")
            print(f"ordering V1 > ... > V8 at J = 5: {props['ordering_at_5']}")
            print(f"near-unity spread / kappa = {props['near_unity_spread']:.4e}")
            return EXIT_OK
        if args.command == "check-tangents":
            worst, ok = check_tangents(args.config, args.samples, args.seed, args.h, args.tol, args.csv)
            for block, e in worst.items():
                print(f"{block}: {e:.3e}")
            print("PASS" if ok else f"FAIL (tolerance {args.tol:g})")
            return EXIT_OK if ok else EXIT_FAILED
        if args.command == "legendre":
            r = legendre(args.vol_id, args.kappa, args.p, grid=args.grid)
            print(f"method {r.method}")
            print(f"J_star {r.J_star:.15g}")
            print(f"Gamma {r.Gamma:.15g}")
            if r.multiple_roots:
                print("stationary points " + " ".join(f"{x:.12g}" for x in r.stationary_points))
            return EXIT_OK
    except MixfemError as exc:
        log.error("%s", exc)
        return EXIT_INPUT if isinstance(exc, (ConfigError, MeshFormatError)) else EXIT_FAILED
    return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

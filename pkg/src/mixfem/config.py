"""Run configuration: YAML parsing, defaults, validation and problem setup.

A configuration is a nested mapping.  ``benchmark: bar`` or
``benchmark: block`` pre-fills mesh, material, boundary conditions, load
program and probes; every explicit key overrides the preset.  The resolved
mapping (all defaults filled) is what :func:`dump_config` writes, and
loading that echo again gives the same run.
"""

import copy
import os
from dataclasses import dataclass

import numpy as np
import yaml

from .assembly import COMPONENTS, DirichletBC, LoadProgram, NeumannBC, Problem, Tolerances
from .elements import mixed_element
from .errors import ConfigError, MixfemError
from .materials import Material
from .mesh import read_mesh
from .problems import BAR_DEFAULTS, BLOCK_DEFAULTS, structured_mesh

DEFAULTS = {
    "benchmark": None,
    "mesh": {"file": None, "divisions": [1, 1, 1], "dimensions": [1.0, 1.0, 1.0], "patch": None},
    "element": "Q1/P0",
    "basis": "lagrange",
    "formulation": "proposed_consistent",
    "material": {"deviatoric": "neo_hookean", "E": 100.0, "nu": 0.3, "Im": None, "volumetric": 3},
    "dirichlet": [],
    "neumann": [],
    "body_force": None,
    "load": {"steps": 1, "factors": None},
    "solver": {"tol_abs": 1e-8, "tol_rel": 1e-10, "max_iter": 20, "condense": None, "history": None},
    "probes": [],
    "output": {"directory": "results", "vtk": False, "report": False},
}


def _bar_preset():
    d = BAR_DEFAULTS
    lx, ly, lz = d["dimensions"]
    return {
        "mesh": {"divisions": list(d["divisions"]), "dimensions": list(d["dimensions"])},
        "material": {"deviatoric": d["deviatoric"], "E": d["E"], "Im": d["Im"], "volumetric": d["volumetric"]},
        "dirichlet": [
            {"set": "xmin", "component": "x", "value": 0.0},
            {"set": "ymin", "component": "y", "value": 0.0},
            {"set": "zmin", "component": "z", "value": 0.0},
            {"set": "zmax", "component": "z", "value": d["stretch"]},
        ],
        "load": {"steps": d["n_steps"]},
        "probes": [{"name": "corner", "point": [lx, ly, lz]}],
    }


def _block_preset():
    d = BLOCK_DEFAULTS
    n = d["n"]
    return {
        "mesh": {"divisions": [n, n, n], "dimensions": list(d["dimensions"]), "patch": list(d["patch"])},
        "material": {"deviatoric": d["deviatoric"], "E": d["E"], "Im": None, "volumetric": d["volumetric"]},
        "dirichlet": [
            {"set": "xmin", "component": "x", "value": 0.0},
            {"set": "ymin", "component": "y", "value": 0.0},
            {"set": "zmin", "component": "z", "value": 0.0},
            {"set": "zmax", "component": "x", "value": 0.0},
            {"set": "zmax", "component": "y", "value": 0.0},
        ],
        "neumann": [{"set": "patch", "traction": [0.0, 0.0, -d["pressure"] * d["load_ratio"]]}],
        "load": {"steps": d["n_steps"]},
        "probes": [{"name": "A", "point": [0.0, 0.0, d["dimensions"][2]]}],
    }


PRESETS = {"bar": _bar_preset, "block": _block_preset}


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where!r} must be a mapping")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve_config(raw, base_dir="."):
    """Fill defaults (and a benchmark preset) into the mapping ``raw``."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("the configuration must be a mapping")
    bench = raw.get("benchmark")
    cfg = copy.deepcopy(DEFAULTS)
    if bench is not None:
        if bench not in PRESETS:
            raise ConfigError(f"unknown benchmark {bench!r}; choose from {sorted(PRESETS)}")
        cfg = _merge(cfg, PRESETS[bench]())
    cfg = _merge(cfg, raw)
    if cfg["mesh"]["file"] is not None:
        cfg["mesh"]["file"] = os.path.normpath(os.path.join(base_dir, cfg["mesh"]["file"]))
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    m = cfg["material"]
    nu = m["nu"]
    if not isinstance(nu, (int, float)) or not 0.0 < nu <= 0.5:
        raise ConfigError(f"material.nu must lie in (0, 0.5], got {nu!r}")
    if m["deviatoric"] == "gent" and m["Im"] is None:
        raise ConfigError("material.Im is required for the Gent model")
    for i, bc in enumerate(cfg["dirichlet"]):
        missing = {"set", "component", "value"} - set(bc)
        if missing:
            raise ConfigError(f"dirichlet[{i}] is missing {sorted(missing)}")
        if bc["component"] not in COMPONENTS:
            raise ConfigError(f"dirichlet[{i}].component must be x, y or z, got {bc['component']!r}")
    for i, bc in enumerate(cfg["neumann"]):
        if {"set", "traction"} - set(bc) or len(bc["traction"]) != 3:
            raise ConfigError(f"neumann[{i}] needs 'set' and a 3-component 'traction'")
    for i, pr in enumerate(cfg["probes"]):
        if "point" not in pr or len(pr["point"]) != 3:
            raise ConfigError(f"probes[{i}] needs a 3-component 'point'")
    if int(cfg["load"]["steps"]) < 1:
        raise ConfigError("load.steps must be >= 1")
    if cfg["mesh"]["file"] is None and len(cfg["mesh"]["divisions"]) != 3:
        raise ConfigError("mesh.divisions needs three counts")


def load_config(path):
    """Read and resolve a YAML configuration file."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ConfigError(f"{where}: invalid YAML ({getattr(exc, 'problem', exc)})") from exc
    try:
        return resolve_config(raw, base_dir=os.path.dirname(os.path.abspath(path)))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dump_config(cfg, path):
    with open(path, "w") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=False, default_flow_style=None)


# --- building the run -------------------------------------------------------

@dataclass
class RunSetup:
    problem: Problem
    program: LoadProgram
    tolerances: Tolerances
    probes: list  # (name, node index)


def build_material(m):
    return Material.from_parameters(
        deviatoric=m["deviatoric"], E=float(m["E"]), nu=float(m["nu"]),
        Im=None if m["Im"] is None else float(m["Im"]), volumetric=int(m["volumetric"]),
    )


def build_mesh(cfg, element):
    ms = cfg["mesh"]
    if ms["file"] is not None:
        return read_mesh(ms["file"])
    patch = None if ms["patch"] is None else tuple(float(v) for v in ms["patch"])
    return structured_mesh(element, [int(v) for v in ms["divisions"]],
                           tuple(float(v) for v in ms["dimensions"]), patch=patch)


def build_run(cfg):
    """Problem, load program, tolerances and probe nodes of a resolved config."""
    element = mixed_element(cfg["element"], cfg["basis"])
    mesh = build_mesh(cfg, element)
    material = build_material(cfg["material"])
    dirichlet = [DirichletBC(bc["set"], COMPONENTS[bc["component"]], float(bc["value"]))
                 for bc in cfg["dirichlet"]]
    neumann = [NeumannBC(bc["set"], tuple(float(v) for v in bc["traction"])) for bc in cfg["neumann"]]
    body = cfg["body_force"]
    s = cfg["solver"]
    try:
        problem = Problem(
            mesh=mesh, element=element, kind=cfg["formulation"], material=material,
            dirichlet=dirichlet, neumann=neumann,
            body_force=None if body is None else tuple(float(v) for v in body),
            condense=s["condense"], history=s["history"],
        )
        probes = [(pr.get("name", f"probe{i}"), mesh.find_node(pr["point"], tol=float(pr.get("tol", 1e-9))))
                  for i, pr in enumerate(cfg["probes"])]
    except MixfemError as exc:
        raise ConfigError(str(exc)) from exc
    factors = cfg["load"]["factors"]
    program = LoadProgram(int(cfg["load"]["steps"]), None if factors is None else np.asarray(factors, float))
    tol = Tolerances(float(s["tol_abs"]), float(s["tol_rel"]), int(s["max_iter"]))
    return RunSetup(problem, program, tol, probes)

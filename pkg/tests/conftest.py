import numpy as np
import pytest

from mixfem.elements import mixed_element
from mixfem.formulations import element_geometry
from mixfem.materials import Material
from mixfem.mesh import generate_block_mesh, hex_to_tet

UNIT_HEX = np.array(
    [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], dtype=float
)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def hex_geom():
    """One distorted Q1/P0 element."""
    X = UNIT_HEX.copy()
    X[6] += [0.15, -0.1, 0.2]
    X[1] += [0.05, 0.0, -0.05]
    return element_geometry(mixed_element("Q1/P0"), X)


@pytest.fixture
def tet_geom():
    """One P2/P1 element cut from the unit cube."""
    m = hex_to_tet(generate_block_mesh(1, 1, 1), quadratic=True)
    return element_geometry(mixed_element("P2/P1"), m.nodes[m.cells[0]])


@pytest.fixture
def nh_material():
    return Material.from_parameters("neo_hookean", E=100.0, nu=0.3, volumetric=3)


@pytest.fixture
def gent_material():
    return Material.from_parameters("gent", E=100.0, nu=0.3, Im=30.0, volumetric=1)


def make_material(dev="neo_hookean", vol=3, nu=0.3, E=100.0):
    return Material.from_parameters(dev, E=E, nu=nu, Im=30.0 if dev == "gent" else None, volumetric=vol)


# --- acceptance report ----------------------------------------------------------

ACCEPTANCE = {}  # criterion number -> list of (part, ok, detail, seconds)


def record(criterion, part, ok, detail="", seconds=0.0):
    """Store one checked part of an acceptance criterion for the summary."""
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(ok), detail, seconds))
    print(f"criterion {criterion} [{part}] {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[c]
        ok = all(p[1] for p in parts)
        secs = sum(p[3] for p in parts)
        failed = [f"{p[0]}: {p[2]}" for p in parts if not p[1]]
        line = f"criterion {c:2d}: {'PASS' if ok else 'FAIL'} ({len(parts)} parts, {secs:.1f} s)"
        if failed:
            line += "; failing " + "; ".join(failed)
        tr.write_line(line)

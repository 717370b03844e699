from pathlib import Path

import numpy as np
import pytest

from mixfem.errors import ConfigError, DomainError, MeshFormatError
from mixfem.mesh import boundary_faces, generate_block_mesh, hex_to_tet, read_mesh, write_mesh

DATA = Path(__file__).parent / "data"
SIDES = {"xmin", "xmax", "ymin", "ymax", "zmin", "zmax"}


def test_unit_cube():
    m = generate_block_mesh(1, 1, 1)
    assert (m.n_nodes, m.n_cells, m.cell_type) == (8, 1, "hex8")
    assert set(m.face_sets) == SIDES
    assert all(len(f) == 1 for _, f in m.face_sets.values())


@pytest.mark.parametrize("dims", [(1.0, 1.0, 1.0), (5.0, 5.0, 5.0), (0.3, 2.0, 1.7)])
def test_block_counts_and_volume(dims):
    m = generate_block_mesh(2, 2, 2, dims)
    assert (m.n_nodes, m.n_cells) == (27, 8)
    assert m.volume() == pytest.approx(np.prod(dims), rel=1e-12)
    assert np.all(m.reference_jacobians() > 0)


def test_side_sets_lie_on_their_planes():
    m = generate_block_mesh(3, 2, 4, (3.0, 2.0, 4.0))
    for name, (axis, value) in {"xmax": (0, 3.0), "ymin": (1, 0.0), "zmax": (2, 4.0)}.items():
        np.testing.assert_allclose(m.nodes[m.set_nodes(name), axis], value)
    assert len(m.face_sets["zmax"][1]) == 6
    assert len(boundary_faces(m)) == 2 * (3 * 2 + 3 * 4 + 2 * 4)


def test_patch_set():
    m = generate_block_mesh(4, 4, 2, patch=(0.5, 0.5))
    faces = m.face_sets["patch"][1]
    assert len(faces) == 4
    assert np.all(m.nodes[faces][..., :2] <= 0.5 + 1e-12)


def test_unknown_set_is_a_config_error():
    m = generate_block_mesh(1, 1, 1)
    with pytest.raises(ConfigError, match="available"):
        m.set_nodes("top")


def test_find_node():
    m = generate_block_mesh(2, 2, 2, (5.0, 5.0, 5.0))
    i = m.find_node((5.0, 5.0, 5.0))
    np.testing.assert_array_equal(m.nodes[i], 5.0)
    with pytest.raises(DomainError):
        m.find_node((1.0, 1.0, 1.0))


@pytest.mark.parametrize("quadratic", [False, True])
def test_hex_to_tet(quadratic):
    hexes = generate_block_mesh(2, 2, 3, (1.0, 2.0, 3.0))
    m = hex_to_tet(hexes, quadratic=quadratic)
    assert m.cell_type == ("tet10" if quadratic else "tet4")
    assert m.n_cells == 6 * hexes.n_cells
    assert m.volume() == pytest.approx(6.0, rel=1e-12)
    assert np.all(m.reference_jacobians() > 0)
    # each quad face becomes two triangles
    for name in SIDES:
        assert len(m.face_sets[name][1]) == 2 * len(hexes.face_sets[name][1])
    if quadratic:
        n_edges = len(np.unique(np.sort(m.cells[:, 4:]), axis=None))
        assert m.n_nodes == hexes.n_nodes + n_edges
        mids = m.cells[:, 4]
        np.testing.assert_allclose(m.nodes[mids], 0.5 * (m.nodes[m.cells[:, 0]] + m.nodes[m.cells[:, 1]]))


def test_single_tet_fixture():
    m = read_mesh(DATA / "single_tet.mesh")
    assert (m.n_nodes, m.n_cells, m.cell_type) == (4, 1, "tet4")
    assert m.face_sets["base"][0] == "tri3"
    assert m.volume() == pytest.approx(1.0 / 6.0, rel=1e-14)


@pytest.mark.parametrize("build", [
    lambda: generate_block_mesh(2, 3, 2, (1.0 / 3.0, np.pi, 0.1), patch=(0.1, 1.0)),
    lambda: hex_to_tet(generate_block_mesh(1, 1, 2, (0.7, 1.1, 1.3))),
])
def test_round_trip_is_exact(build, tmp_path):
    m = build()
    path = tmp_path / "m.mesh"
    write_mesh(m, path)
    r = read_mesh(path)
    assert r.nodes.tobytes() == m.nodes.tobytes()
    np.testing.assert_array_equal(r.cells, m.cells)
    assert r.set_names == m.set_names
    for name in m.face_sets:
        assert r.face_sets[name][0] == m.face_sets[name][0]
        np.testing.assert_array_equal(r.face_sets[name][1], m.face_sets[name][1])
    for name in m.node_sets:
        np.testing.assert_array_equal(r.node_sets[name], m.node_sets[name])
    write_mesh(r, tmp_path / "again.mesh")
    assert (tmp_path / "again.mesh").read_bytes() == path.read_bytes()


def _write(tmp_path, text):
    p = tmp_path / "bad.mesh"
    p.write_text(text)
    return p


BASE_NODES = "NODES 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n"


@pytest.mark.parametrize("text,line,pattern", [
    (BASE_NODES + "CELLS 1\ntet4 0 1 2 7\n", 7, "out of range"),
    (BASE_NODES + "CELLS 1\ntet4 0 2 1 3\n", 7, "inverted"),
    (BASE_NODES + "CELLS 1\nwedge6 0 1 2 3 0 1\n", 7, "unknown cell type"),
    (BASE_NODES + "CELLS 1\ntet4 0 1 2\n", 7, "needs 4"),
    ("NODES 2\n0 0 0\n1 zero 0\n", 3, "bad coordinate"),
    (BASE_NODES + "CELLS 2\ntet4 0 1 2 3\n", 7, "end of file"),
    (BASE_NODES + "CELLS 1\ntet4 0 1 2 3\nSETS 1\nSET s nodes 2\n0 9\n", 10, "out of range"),
    (BASE_NODES + "CELLS 1\ntet4 0 1 2 3\nSETS 2\nSET s nodes 1\n0\nSET s nodes 1\n1\n", 11, "duplicate"),
])
def test_parse_errors_name_the_line(tmp_path, text, line, pattern):
    p = _write(tmp_path, text)
    with pytest.raises(MeshFormatError, match=pattern) as ei:
        read_mesh(p)
    assert ei.value.line == line
    assert f":{line}:" in str(ei.value)

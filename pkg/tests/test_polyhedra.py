import math

import numpy as np
import pytest

from conemetric.errors import InvalidMeshError
from conemetric.polyhedra import (
    PolyhedralSurface,
    angle_defects,
    corner_angles,
    discrete_gauss_bonnet,
    format_mesh,
    load_mesh,
    parse_mesh,
    regular_tetrahedron,
    square_torus,
    subdivide_edge,
    unit_cube,
    vertex_angles,
)


def test_tetrahedron_angles():
    m = regular_tetrahedron()
    np.testing.assert_allclose(corner_angles(m), math.pi / 3, rtol=1e-15)
    np.testing.assert_allclose(vertex_angles(m), math.pi, rtol=1e-15)
    r = discrete_gauss_bonnet(m)
    assert r.defect_sum == pytest.approx(4 * math.pi, abs=1e-12)


def test_cube_defects_are_quarter_turns():
    m = unit_cube()
    assert len(m.vertices) == 8 and len(m.triangles) == 12
    theta = vertex_angles(m)
    np.testing.assert_allclose(2 * math.pi - theta, math.pi / 2, atol=1e-14)
    assert discrete_gauss_bonnet(m).residual < 1e-12


def test_square_torus_single_vertex():
    m = square_torus()
    assert m.euler_characteristic == 0 and m.surface().genus == 1
    assert vertex_angles(m)[0] == pytest.approx(2 * math.pi, abs=1e-14)
    assert discrete_gauss_bonnet(m).defect_sum == pytest.approx(0.0, abs=1e-12)


def test_angle_defects_divisor():
    d = angle_defects(regular_tetrahedron())
    assert d.surface.genus == 0
    np.testing.assert_allclose([float(b) for b in d.orders], -0.5, atol=1e-15)


def test_subdivision_keeps_defects():
    m = regular_tetrahedron()
    before = 2 * math.pi - vertex_angles(m)
    for e in range(m.n_edges):
        s = subdivide_edge(m, e)
        after = 2 * math.pi - vertex_angles(s)
        np.testing.assert_allclose(after[:4], before, atol=1e-13)
        assert after[4] == pytest.approx(0.0, abs=1e-13)
        assert discrete_gauss_bonnet(s).residual < 1e-12


def test_subdivide_torus_diagonal():
    s = subdivide_edge(square_torus(), 2)
    assert s.euler_characteristic == 0
    np.testing.assert_allclose(vertex_angles(s), 2 * math.pi, atol=1e-13)


def test_format_round_trip(tmp_path):
    for m in (regular_tetrahedron(), unit_cube(), square_torus()):
        p = tmp_path / "m.off"
        p.write_text(format_mesh(m))
        assert load_mesh(p) == m


def test_shipped_meshes(data_dir):
    expected = {"tetrahedron": 4 * math.pi, "cube": 4 * math.pi, "square_torus": 0.0}
    for name, total in expected.items():
        r = discrete_gauss_bonnet(load_mesh(data_dir / f"{name}.off"))
        assert abs(r.defect_sum - total) < 1e-12


def test_triangle_inequality_violation():
    with pytest.raises(InvalidMeshError):
        PolyhedralSurface.from_simplicial(
            ["a", "b", "c", "d"], [(0, 1, 2), (0, 3, 1), (1, 3, 2), (2, 3, 0)],
            {frozenset(p): (3.0 if p == (0, 1) else 1.0)
             for p in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]})


@pytest.mark.parametrize("text", [
    "",
    "OFF\n1 2 3\n",
    "OFFL\n1 2 3\no\n0 0 0 0 1 2\n",
    "OFFL\n1 2 3\no\n0 0 0 0 1\n0 0 0 2 0 1\n1\n1\n1.4142135623730951\n",
    "OFFL\n1 2 3\no\n0 0 0 0 1 2\n0 0 0 2 0 1\n1\nx\n1.4\n",
])
def test_malformed_mesh_text(text):
    with pytest.raises(InvalidMeshError):
        parse_mesh(text)


def test_open_surface_rejected():
    # a single triangle has boundary edges
    with pytest.raises(InvalidMeshError):
        PolyhedralSurface.from_simplicial(["a", "b", "c"], [(0, 1, 2)],
                                          {frozenset(p): 1.0 for p in [(0, 1), (1, 2), (0, 2)]})

"""Mesh builders, the .node/.ele loader, adjacency and geometry caches."""

import numpy as np
import pytest

from iqrfv.geometry import CellKind
from iqrfv.mesh import (
    MeshError,
    build_cuboid_mesh,
    build_interval_mesh,
    build_rect_mesh,
    build_tri_mesh,
    load_tri_mesh,
)


def test_interval_mesh_basic():
    m = build_interval_mesh(4, (0.0, 1.0))
    assert m.ncells == 4
    np.testing.assert_allclose(m.volume[:4], 0.25)
    np.testing.assert_allclose(m.J0[:4, 0, 0], 0.25**2 / 12.0)


def test_interval_mesh_too_small():
    with pytest.raises(MeshError):
        build_interval_mesh(1)


def test_interval_moore_neighbors_periodic():
    m = build_interval_mesh(8)
    assert set(m.moore_count.tolist()) == {2}


def test_rect_mesh_moore_patch_size():
    m = build_rect_mesh(8, 8)
    assert set(m.moore_count.tolist()) == {8}


def test_rect_cell_second_moments():
    m = build_rect_mesh(4, 4, domain=((0, 0), (1, 1)))
    np.testing.assert_allclose(m.J0[0], np.diag([0.25**2, 0.25**2]) / 12.0)


def test_rect_edge_gauss_points():
    m = build_rect_mesh(4, 4, domain=((0, 0), (1, 1)))
    # locate the face of cell 0 along y = 0 between x = 0 and 0.25
    for j in range(m.J):
        fid = m.cell_face[0, j]
        if abs(m.f_normal[fid, 1] + 1.0) < 1e-12:
            pts = np.sort(m.f_qpts[fid][:, 0])
            expected = np.sort([0.125 - 0.125 / np.sqrt(3), 0.125 + 0.125 / np.sqrt(3)])
            np.testing.assert_allclose(pts, expected, atol=1e-14)
            np.testing.assert_allclose(m.f_qpts[fid][:, 1], 0.0, atol=1e-14)
            np.testing.assert_allclose(m.f_qw, [0.5, 0.5])
            return
    raise AssertionError("bottom face not found")


def test_degenerate_domain_rejected():
    with pytest.raises(MeshError):
        build_rect_mesh(4, 4, domain=((0, 0), (0, 1)))


def test_tri_mesh_interior_moore_is_12():
    m = build_tri_mesh(6, 6)
    assert set(m.moore_count.tolist()) == {12}


def test_tri_mesh_counts_and_volume():
    m = build_tri_mesh(4, 5, domain=((0, 0), (2, 1)))
    assert m.ncells == 2 * 4 * 5
    assert m.volume[: m.ncells].sum() == pytest.approx(2.0, abs=1e-12)


def test_cuboid_mesh_basic():
    m = build_cuboid_mesh(3, 3, 3)
    assert set(m.moore_count.tolist()) == {26}
    l = 1.0 / 3.0
    np.testing.assert_allclose(m.J0[0], np.diag([l * l] * 3) / 12.0, atol=1e-15)
    assert m.volume[: m.ncells].sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("build", [
    lambda: build_interval_mesh(6),
    lambda: build_rect_mesh(4, 5),
    lambda: build_tri_mesh(4, 4, diagonal="ne"),
    lambda: build_tri_mesh(4, 4, diagonal="nw"),
    lambda: build_cuboid_mesh(3, 4, 3),
    lambda: build_rect_mesh(4, 4, periodic=False),
])
def test_moore_symmetry(build):
    m = build()
    sets = [set(m.moore_idx[c, : m.moore_count[c]].tolist()) for c in range(m.ncells)]
    for c in range(m.ncells):
        for i in sets[c]:
            if i < m.ncells:
                assert c in sets[i]


def test_mesh_volume_matches_domain():
    assert build_rect_mesh(7, 3, domain=((0, 0), (3, 2))).volume[:21].sum() == pytest.approx(6.0, abs=1e-12)
    assert build_cuboid_mesh(3, 3, 4, domain=((0, 0, 0), (1, 2, 1))).volume[:36].sum() == pytest.approx(2.0, abs=1e-12)


def test_periodic_moore_displacements_are_minimal_images():
    m = build_rect_mesh(4, 4)
    r = m.moore_r[: m.ncells]
    assert np.abs(r).max() <= 0.25 * np.sqrt(2) + 1e-12


def test_collocation_cluster_sizes():
    assert len(build_interval_mesh(4).collocation_cluster(0).points) == 3
    assert len(build_rect_mesh(4, 4).collocation_cluster(0).points) == 9
    assert len(build_tri_mesh(4, 4).collocation_cluster(0).points) == 7
    assert len(build_cuboid_mesh(3, 3, 3).collocation_cluster(0).points) == 25


def test_cluster_starts_with_centroid():
    m = build_tri_mesh(4, 4)
    np.testing.assert_allclose(m.collocation_cluster(2).points[0], m.centroid[2])


def test_ghost_cells_mirror_geometry():
    m = build_rect_mesh(4, 4, periodic=False)
    assert m.nghost == 16
    # ghost of the bottom face of cell 0 sits at the mirrored centroid
    for j in range(m.J):
        g = m.cell_nbr[0, j]
        if g >= m.ncells:
            gc = m.centroid[g]
            assert (abs(gc[0] - m.centroid[0][0]) < 1e-14) or (abs(gc[1] - m.centroid[0][1]) < 1e-14)
            assert np.any(gc < 0) or np.any(gc > 1)
    tags = set(m.ghost_tag)
    assert tags == {"x_lo", "x_hi", "y_lo", "y_hi"}


# ---------------------------------------------------------------------------
# .node/.ele loader


TWO_TRI_NODE = """4 2 0 0
1 0.0 0.0
2 1.0 0.0
3 1.0 1.0
4 0.0 1.0
"""

TWO_TRI_ELE = """2 3 0
1 1 2 3
2 1 3 4
"""


def test_load_two_triangle_square():
    m = load_tri_mesh(TWO_TRI_NODE, TWO_TRI_ELE)
    assert m.ncells == 2
    interior = [(o, n) for o, n in zip(m.f_owner, m.f_nbr) if n < m.ncells]
    assert len(interior) == 1
    assert m.volume[:2].sum() == pytest.approx(1.0, abs=1e-14)
    assert m.nghost == 4


def test_load_zero_based_indexing():
    node = "3 2 0 0\n0 0 0\n1 1 0\n2 0 1\n"
    ele = "1 3 0\n0 0 1 2\n"
    m = load_tri_mesh(node, ele)
    assert m.ncells == 1


def test_load_dangling_node_index():
    ele = "2 3 0\n1 1 2 9\n2 1 3 4\n"
    with pytest.raises(MeshError, match="dangling"):
        load_tri_mesh(TWO_TRI_NODE, ele)


def test_load_inverted_element():
    ele = "2 3 0\n1 1 3 2\n2 1 3 4\n"
    with pytest.raises(MeshError, match="[Ii]nverted"):
        load_tri_mesh(TWO_TRI_NODE, ele)


def _sixteen_triangle_square():
    # 2x2 grid of squares, each split into 4 triangles through its center
    nodes = []
    for j in range(3):
        for i in range(3):
            nodes.append((i * 0.5, j * 0.5))
    centers = []
    for j in range(2):
        for i in range(2):
            centers.append((0.25 + 0.5 * i, 0.25 + 0.5 * j))
    all_nodes = nodes + centers
    tris = []

    def nid(i, j):
        return j * 3 + i

    for j in range(2):
        for i in range(2):
            c = 9 + j * 2 + i
            sw, se = nid(i, j), nid(i + 1, j)
            ne, nw = nid(i + 1, j + 1), nid(i, j + 1)
            tris += [(sw, se, c), (se, ne, c), (ne, nw, c), (nw, sw, c)]
    node_text = f"{len(all_nodes)} 2 0 0\n" + "\n".join(
        f"{k + 1} {x} {y}" for k, (x, y) in enumerate(all_nodes))
    ele_text = f"{len(tris)} 3 0\n" + "\n".join(
        f"{k + 1} {a + 1} {b + 1} {c + 1}" for k, (a, b, c) in enumerate(tris))
    return node_text, ele_text


def test_load_sixteen_triangle_mesh_volume():
    node_text, ele_text = _sixteen_triangle_square()
    m = load_tri_mesh(node_text, ele_text)
    assert m.ncells == 16
    assert m.volume[:16].sum() == pytest.approx(1.0, abs=1e-12)


def test_load_periodic_matches_builder():
    ref = build_tri_mesh(4, 4, diagonal="nw", periodic=True)
    node_text = f"{len(ref.nodes)} 2 0 0\n" + "\n".join(
        f"{k} {float(p[0])!r} {float(p[1])!r}" for k, p in enumerate(ref.nodes))
    ele_text = f"{ref.ncells} 3 0\n" + "\n".join(
        f"{k} {a} {b} {c}" for k, (a, b, c) in enumerate(ref.conn))
    m = load_tri_mesh(node_text, ele_text, periodic=True)
    assert m.nghost == 0
    assert set(m.moore_count.tolist()) == {12}
    np.testing.assert_allclose(np.sort(m.moore_idx[0]), np.sort(ref.moore_idx[0]))


def test_mesh_summary_mentions_key_facts():
    m = build_tri_mesh(4, 4)
    s = m.summary()
    assert "triangle" in s and "cells: 32" in s and "1/12" in s


def test_cell_averages_of_polynomial_are_exact():
    m = build_tri_mesh(5, 5)
    f = lambda p: 2.0 + 3.0 * p[:, 0] - p[:, 1] + p[:, 0] * p[:, 1]
    avg = m.cell_averages(f, rule="error")
    # oracle via centroid+second moments: average of affine + bilinear part
    cx = m.centroid[: m.ncells]
    exact = 2.0 + 3.0 * cx[:, 0] - cx[:, 1] + cx[:, 0] * cx[:, 1] + m.J0[: m.ncells, 0, 1]
    np.testing.assert_allclose(avg, exact, atol=1e-13)

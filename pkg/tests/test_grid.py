import numpy as np
import pytest

from asyncfv.grid import (ExplicitConcentration, FieldSpec, PointSource,
                          SineLine, apply_initial_condition, build_cartesian,
                          export_cells_csv, export_faces_csv,
                          fracture_random_walk, read_cell_set, write_cell_set)


def test_smallest_interior_face_grid():
    g = build_cartesian((2, 1, 1), (2.0, 1.0, 1.0))
    assert g.num_cells == 2
    assert g.num_faces == 1
    assert np.all(g.cell_volumes == 1.0)
    assert g.face_area[0] == 1.0
    assert g.face_dx[0] == 1.0
    f = g.face(0)
    assert (f.cell_lo, f.cell_hi) == (0, 1)


def test_face_count_formula_2d():
    g = build_cartesian((100, 100, 1), (10.0, 10.0, 10.0))
    assert g.num_cells == 10000
    assert g.num_faces == 99 * 100 + 100 * 99  # 19800


def test_paper_3d_grid_size():
    g = build_cartesian((40, 40, 32), (10.0, 10.0, 10.0))
    assert g.num_cells == 51200
    expected_faces = 39 * 40 * 32 + 40 * 39 * 32 + 40 * 40 * 31
    assert g.num_faces == expected_faces


def test_invalid_dimensions_rejected():
    with pytest.raises(ValueError):
        build_cartesian((0, 5, 1), (1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        build_cartesian((5, 5, 1), (1.0, -1.0, 1.0))


def test_volumes_sum_to_domain_volume():
    g = build_cartesian((7, 5, 3), (3.0, 2.0, 1.5))
    assert abs(g.cell_volumes.sum() - 3.0 * 2.0 * 1.5) <= 1e-12 * 9.0


def test_adjacency_symmetric_and_complete():
    g = build_cartesian((4, 3, 2), (4.0, 3.0, 2.0))
    appearances = np.zeros(g.num_faces, dtype=int)
    for j in range(g.num_cells):
        for k in g.cell_faces(j):
            assert j in (g.face_lo[k], g.face_hi[k])
            appearances[k] += 1
    assert np.all(appearances == 2)


def test_associated_faces_are_union_and_contain_self():
    g = build_cartesian((4, 4, 1), (4.0, 4.0, 1.0))
    for k in range(g.num_faces):
        lo, hi = g.face_lo[k], g.face_hi[k]
        expected = np.union1d(g.cell_faces(lo), g.cell_faces(hi))
        assert np.array_equal(g.associated_faces(k), expected)
        assert k in g.associated_faces(k)


def test_harmonic_mean_bounds_and_zero_rule():
    rng = np.random.default_rng(3)
    d = rng.uniform(0.01, 5.0, 24)
    g = build_cartesian((24, 1, 1), (24.0, 1.0, 1.0), FieldSpec(diffusivity=d))
    for k in range(g.num_faces):
        d1, d2 = d[g.face_lo[k]], d[g.face_hi[k]]
        assert min(d1, d2) - 1e-15 <= g.face_dbar[k] <= max(d1, d2) + 1e-15
    d[5] = 0.0
    g0 = build_cartesian((24, 1, 1), (24.0, 1.0, 1.0), FieldSpec(diffusivity=d))
    for k in range(g0.num_faces):
        if 5 in (g0.face_lo[k], g0.face_hi[k]):
            assert g0.face_dbar[k] == 0.0


def test_negative_diffusivity_rejected():
    with pytest.raises(ValueError):
        build_cartesian((2, 1, 1), (1.0, 1.0, 1.0), FieldSpec(diffusivity=-1.0))


def test_velocity_projected_per_axis():
    g = build_cartesian((2, 2, 2), (2.0, 2.0, 2.0),
                        FieldSpec(velocity=(1.0, -2.0, 3.0)))
    for k in range(g.num_faces):
        lo, hi = g.face_lo[k], g.face_hi[k]
        direction = g.cell_centroids[hi] - g.cell_centroids[lo]
        axis = int(np.argmax(np.abs(direction)))
        assert g.face_vnormal[k] == (1.0, -2.0, 3.0)[axis]


def test_nearest_cell_hits_exact_centroid():
    g = build_cartesian((100, 100, 1), (10.0, 10.0, 10.0))
    j = g.nearest_cell((4.95, 9.95))
    assert g.cell_coords(j) == (49, 99, 0)


def test_nearest_cell_outside_domain_errors():
    g = build_cartesian((4, 4, 1), (4.0, 4.0, 1.0))
    with pytest.raises(ValueError):
        g.nearest_cell((5.0, 1.0))


def test_walk_pure_plus_y_is_a_column():
    g = build_cartesian((3, 3, 1), (3.0, 3.0, 1.0))
    path = fracture_random_walk(g, seed=0, bias={"+y": 1.0}, start=(1, 0))
    coords = [g.cell_coords(j)[:2] for j in path]
    assert coords == [(1, 0), (1, 1), (1, 2)]


def test_walk_deterministic_for_seed():
    g = build_cartesian((30, 30, 1), (10.0, 10.0, 1.0))
    a = fracture_random_walk(g, seed=42)
    b = fracture_random_walk(g, seed=42)
    assert a == b
    c = fracture_random_walk(g, seed=43)
    assert a != c  # overwhelmingly likely for a 30x30 walk


def test_walk_bisects_domain():
    g = build_cartesian((100, 100, 1), (10.0, 10.0, 10.0))
    path = fracture_random_walk(g, seed=42,
                                bias={"+y": 0.5, "+x": 0.25, "-x": 0.25})
    ys = {g.cell_coords(j)[1] for j in path}
    assert 0 in ys and 99 in ys


def test_walk_is_face_connected():
    g = build_cartesian((40, 40, 1), (10.0, 10.0, 1.0))
    path = fracture_random_walk(g, seed=7)
    for a, b in zip(path, path[1:]):
        ax, ay, _ = g.cell_coords(a)
        bx, by, _ = g.cell_coords(b)
        assert abs(ax - bx) + abs(ay - by) == 1


def test_walk_rejects_bad_inputs():
    g3d = build_cartesian((3, 3, 2), (1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        fracture_random_walk(g3d, seed=0)
    g = build_cartesian((3, 3, 1), (1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        fracture_random_walk(g, seed=0, bias={"+y": 0.4, "+x": 0.4})
    with pytest.raises(RuntimeError):
        # never moves toward +y, so the boundary is unreachable
        fracture_random_walk(g, seed=0, bias={"+x": 0.5, "-x": 0.5},
                             max_steps=50)


def test_point_source_mass_is_concentration_times_volume():
    g = build_cartesian((10, 10, 1), (1.0, 1.0, 1.0))  # V_j = 0.01
    m = apply_initial_condition(g, PointSource((0.55, 0.55)))
    j = g.nearest_cell((0.55, 0.55))
    assert m[j] == pytest.approx(0.01)
    assert np.count_nonzero(m) == 1


def test_zero_spec_gives_zero_vector():
    g = build_cartesian((5, 5, 1), (1.0, 1.0, 1.0))
    assert np.all(apply_initial_condition(g, None) == 0.0)


def test_sinusoidal_line_values():
    g = build_cartesian((40, 4, 1), (10.0, 4.0, 1.0))
    m = apply_initial_condition(g, SineLine())
    c = m / g.cell_volumes
    line = [g.cell_index(ix, 0, 0) for ix in range(40)]
    assert np.all(c[line] >= 0.0) and np.all(c[line] <= 1.0)
    off_line = np.setdiff1d(np.arange(g.num_cells), line)
    assert np.all(m[off_line] == 0.0)
    # the generating formula passes through 0.5 at x = 0
    x = g.cell_centroids[line, 0]
    assert np.allclose(c[line], 0.5 * (1.0 + np.sin(2 * np.pi * x / 10.0)))


def test_explicit_concentration_and_errors():
    g = build_cartesian((3, 1, 1), (3.0, 1.0, 1.0))
    m = apply_initial_condition(g, ExplicitConcentration(np.array([1.0, 2.0, 3.0])))
    assert np.allclose(m, np.array([1.0, 2.0, 3.0]) * g.cell_volumes)
    with pytest.raises(ValueError):
        apply_initial_condition(g, ExplicitConcentration(np.array([1.0])))
    with pytest.raises(ValueError):
        apply_initial_condition(g, PointSource((99.0, 0.5)))


def test_geometry_exports_roundtrip(tmp_path):
    g = build_cartesian((3, 2, 1), (3.0, 2.0, 1.0),
                        FieldSpec(diffusivity=2.0, velocity=(1.0, 0.0, 0.0)))
    cells = tmp_path / "cells.csv"
    faces = tmp_path / "faces.csv"
    export_cells_csv(g, cells, comment="test")
    export_faces_csv(g, faces)
    rows = cells.read_text().splitlines()
    assert rows[0] == "# test"
    assert rows[1] == "cell_id,x,y,z,volume,D"
    assert len(rows) == 2 + g.num_cells
    first = rows[2].split(",")
    assert float(first[4]) == g.cell_volumes[0]
    frows = faces.read_text().splitlines()
    assert len(frows) == 1 + g.num_faces
    k0 = frows[1].split(",")
    assert int(k0[1]) == g.face_lo[0] and int(k0[2]) == g.face_hi[0]


def test_cell_set_roundtrip(tmp_path):
    path = tmp_path / "cells.txt"
    write_cell_set([5, 3, 11], path)
    assert read_cell_set(path) == [5, 3, 11]

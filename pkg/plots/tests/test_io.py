import numpy as np
import pytest

from alsfem_plots.io import (cumulative_time, mesh_sizes, read_convergence,
                             read_mesh_dump)

DATA = __import__("pathlib").Path(__file__).parent / "data"


def _write_csv(path, header, rows):
    path.write_text("\n".join([",".join(header)]
                              + [",".join(r) for r in rows]) + "\n")


def test_read_convergence_basic(tmp_path):
    path = tmp_path / "conv.csv"
    _write_csv(path,
               ["level", "case", "ndof", "eta_nat", "err_grad",
                "t_solve", "t_estimate", "t_mark", "t_refine"],
               [["0", "A", "33", "1.0e0", "", "0.5", "0.25", "0.1", "0.1"],
                ["1", "B", "120", "5.0e-1", "2.5e-1",
                 "0.6", "0.3", "0.1", "0.1"]])
    data = read_convergence(path)
    assert data["case"] == ["A", "B"]
    assert np.array_equal(data["ndof"], [33.0, 120.0])
    assert np.isnan(data["err_grad"][0])
    assert data["err_grad"][1] == 0.25
    np.testing.assert_allclose(cumulative_time(data), [0.95, 2.05])


def test_cumulative_time_repeat_stats(tmp_path):
    path = tmp_path / "conv.csv"
    header = ["level", "ndof"]
    for phase in ("t_solve", "t_estimate", "t_mark", "t_refine"):
        header += [f"{phase}_mean", f"{phase}_min", f"{phase}_max"]
    _write_csv(path, header,
               [["0", "33"] + ["2.0", "1.0", "3.0"] * 4,
                ["1", "120"] + ["4.0", "2.0", "6.0"] * 4])
    data = read_convergence(path)
    np.testing.assert_allclose(cumulative_time(data, "mean"), [8.0, 24.0])
    np.testing.assert_allclose(cumulative_time(data, "min"), [4.0, 12.0])
    np.testing.assert_allclose(cumulative_time(data, "max"), [12.0, 36.0])


def test_read_convergence_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ValueError):
        read_convergence(path)


def test_read_mesh_dump_roundtrip(tmp_path):
    path = tmp_path / "mesh.txt"
    path.write_text("v 0 0\nv 1 0\nv 1 1\nv 0 1\nt 0 1 2\nt 0 2 3\n")
    verts, tris = read_mesh_dump(path)
    assert verts.shape == (4, 2)
    assert tris.shape == (2, 3)
    np.testing.assert_allclose(mesh_sizes(verts, tris),
                               [np.sqrt(0.5), np.sqrt(0.5)])


def test_read_mesh_dump_rejects_garbage(tmp_path):
    path = tmp_path / "mesh.txt"
    path.write_text("v 0 0\nx 1 2 3\n")
    with pytest.raises(ValueError):
        read_mesh_dump(path)
    path.write_text("v 0 0\nv 1 0\nt 0 1 5\n")
    with pytest.raises(ValueError):
        read_mesh_dump(path)


def test_fixture_dumps_parse():
    verts, tris = read_mesh_dump(DATA / "mesh_lshape_initial.txt")
    assert len(verts) == 8 and len(tris) == 6
    # initial mesh: all triangles congruent
    assert np.ptp(mesh_sizes(verts, tris)) <= 1e-14
    verts, tris = read_mesh_dump(DATA / "mesh_lshape_adaptive.txt")
    assert len(tris) > 100

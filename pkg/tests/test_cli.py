import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from collot.cli import TRACE_HEADER, main
from collot.diagnostics import verify_monotone
from collot.ingest import GrayImage, SyntheticSpec, load_csv, sample_synthetic, save_csv, save_pgm


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    return code


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_gen_shape_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["gen", "--family", "ring", "--np", 1000, "--seed", 7, "--out", a]) == 0
    assert run(["gen", "--family", "ring", "--np", 1000, "--seed", 7, "--out", b]) == 0
    m = load_csv(a)
    assert (m.num_points, m.n) == (1000, 2)
    assert a.read_bytes() == b.read_bytes()


def test_gen_unknown_family(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "collot.cli", "gen", "--family", "spiral", "--np", "5",
                           "--out", str(tmp_path / "x.csv")], capture_output=True, text=True)
    assert proc.returncode != 0
    assert "spiral" in proc.stderr


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == 2


def _gen(tmp_path, family, N, seed, name=None):
    path = tmp_path / (name or f"{family}{seed}.csv")
    save_csv(path, sample_synthetic(SyntheticSpec(family, N, seed=seed)).data)
    return path


def test_solve_identical_inputs(tmp_path):
    x = _gen(tmp_path, "normal", 200, 0)
    report, trace = tmp_path / "r.json", tmp_path / "t.csv"
    assert run(["solve", x, x, "--out-report", report, "--out-trace", trace, "--init", "random-shuffle"]) == 0
    rep = read_json(report)
    assert rep["converged"] is True
    assert rep["mean_cost"] <= rep["initial_mean_cost"]
    for key in ("schema_version", "method", "seed", "np", "k", "n", "p", "mean_cost", "converged", "sweeps",
                "wall_ms", "alpha_hat", "r_squared"):
        assert key in rep
    with open(trace) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == TRACE_HEADER
    assert len(rows) == rep["sweeps"] + 2
    assert verify_monotone([float(r[1]) for r in rows[1:]])


def test_solve_seed_determinism(tmp_path):
    a, b = _gen(tmp_path, "normal", 300, 1), _gen(tmp_path, "banana", 300, 2)
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        assert run(["solve", a, b, "--seed", 42, "--init", "random-shuffle", "--out-report", out]) == 0
        rep = read_json(out)
        rep.pop("wall_ms")
        outs.append(rep)
    assert outs[0] == outs[1]


def test_solve_isa_method(tmp_path):
    a, b = _gen(tmp_path, "normal", 40, 1), _gen(tmp_path, "ring", 40, 2)
    out = tmp_path / "r.json"
    assert run(["solve", a, b, "--method", "isa", "--out-report", out]) == 0
    rep = read_json(out)
    assert rep["method"] == "isa" and rep["converged"]


def test_solve_five_marginals_pairs(tmp_path):
    files = [_gen(tmp_path, fam, 2000, i) for i, fam in enumerate(["normal", "swiss_roll", "banana", "funnel",
                                                                    "ring"])]
    pairs, trace = tmp_path / "pairs.csv", tmp_path / "t.csv"
    assert run(["solve", *files, "--out-report", tmp_path / "r.json", "--out-trace", trace,
                "--out-pairs", pairs]) == 0
    m = load_csv(pairs)
    assert (m.num_points, m.n) == (2000, 10)
    # every block of two columns is a permutation of the corresponding input
    for i, f in enumerate(files):
        block = m.data[:, 2 * i:2 * i + 2]
        ref = load_csv(f).data
        np.testing.assert_array_equal(np.sort(block, axis=0), np.sort(ref, axis=0))
    with open(trace) as fh:
        costs = [float(r["mean_cost"]) for r in csv.DictReader(fh)]
    assert verify_monotone(costs)


def test_solve_mismatched_inputs_data_error(tmp_path, capsys):
    a, b = _gen(tmp_path, "normal", 30, 1), _gen(tmp_path, "normal", 31, 2)
    assert run(["solve", a, b, "--out-report", tmp_path / "r.json"]) == 3
    assert "unequal" in capsys.readouterr().err


def test_compare_identical(tmp_path):
    x = _gen(tmp_path, "normal", 64, 3)
    out = tmp_path / "c.json"
    assert run(["compare", x, x, "--out-report", out, "--init", "random-shuffle"]) == 0
    rep = read_json(out)
    methods = rep["methods"]
    assert methods["hungarian"]["mean_cost"] == 0.0
    assert methods["collision"]["error_kind"] == "absolute"
    assert methods["collision"]["rel_error"] == pytest.approx(methods["collision"]["mean_cost"])
    assert {"isa", "sinkhorn_lam1", "sinkhorn_lam0.5"} <= set(methods)


def test_compare_lower_bound(tmp_path):
    a, b = _gen(tmp_path, "normal", 128, 1), _gen(tmp_path, "normal", 128, 2)
    out = tmp_path / "c.json"
    assert run(["compare", a, b, "--methods", "collision,hungarian", "--out-report", out]) == 0
    m = read_json(out)["methods"]
    assert m["collision"]["mean_cost"] >= m["hungarian"]["mean_cost"] - 1e-12
    assert m["collision"]["error_kind"] == "relative"


def test_compare_size_guard(tmp_path):
    a = _gen(tmp_path, "uniform", 4097, 1)
    assert run(["compare", a, a, "--methods", "hungarian", "--out-report", tmp_path / "c.json"]) == 4


def _blob(w, h, cx, cy, s=0.12):
    yy, xx = np.mgrid[0:h, 0:w]
    img = np.exp(-(((xx + 0.5) / w - cx) ** 2 + ((yy + 0.5) / h - cy) ** 2) / (2 * s * s))
    return GrayImage(w, h, img / img.max())


def _write_images(folder, centers, w=24, h=24):
    folder.mkdir()
    for i, (cx, cy) in enumerate(centers):
        save_pgm(folder / f"img{i:02d}.pgm", _blob(w, h, cx, cy))
    return folder


def _read_matrix(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_pairwise_identical_images(tmp_path):
    folder = _write_images(tmp_path / "imgs", [(0.4, 0.5), (0.4, 0.5)])
    mat, nb = tmp_path / "m.csv", tmp_path / "nb.json"
    assert run(["pairwise", folder, "--np", 300, "--mode", "pairwise2", "--out-matrix", mat,
                "--out-neighbors", nb]) == 0
    names, D = _read_matrix(mat)
    assert names == ["img00", "img01"]
    assert D[0, 1] == 0.0 and D[1, 0] == 0.0
    assert read_json(nb)["from_mmot"] is False


@pytest.mark.parametrize("mode", ["mmot", "pairwise2"])
def test_pairwise_matrix_structure(tmp_path, mode):
    folder = _write_images(tmp_path / "imgs", [(0.3, 0.3), (0.7, 0.4), (0.5, 0.8), (0.2, 0.6)])
    mat, nb, rep = tmp_path / "m.csv", tmp_path / "nb.json", tmp_path / "r.json"
    assert run(["pairwise", folder, "--np", 200, "--mode", mode, "--out-matrix", mat, "--out-neighbors", nb,
                "--out-report", rep]) == 0
    _, D = _read_matrix(mat)
    np.testing.assert_array_equal(D, D.T)
    np.testing.assert_array_equal(np.diag(D), 0.0)
    assert np.all(D[~np.eye(4, dtype=bool)] > 0)
    neighbors = read_json(nb)
    assert neighbors["from_mmot"] is (mode == "mmot")
    first = neighbors["neighbors"]["img00"]
    assert [e["distance"] for e in first] == sorted(e["distance"] for e in first)
    assert read_json(rep)["k"] == 4


def test_pairwise_grid_mode(tmp_path):
    folder = _write_images(tmp_path / "imgs", [(0.3, 0.3), (0.6, 0.6)], w=8, h=8)
    mat, nb = tmp_path / "m.csv", tmp_path / "nb.json"
    assert run(["pairwise", folder, "--image-mode", "grid", "--out-matrix", mat, "--out-neighbors", nb]) == 0
    _, D = _read_matrix(mat)
    assert D.shape == (2, 2)


def test_pairwise_needs_two_images(tmp_path):
    folder = _write_images(tmp_path / "imgs", [(0.5, 0.5)])
    assert run(["pairwise", folder, "--out-matrix", tmp_path / "m.csv", "--out-neighbors",
                tmp_path / "n.json"]) == 3


def test_pairwise_mmot_close_to_pairwise2(tmp_path):
    rng = np.random.default_rng(0)
    folder = _write_images(tmp_path / "imgs", rng.uniform(0.3, 0.7, (8, 2)))
    mats = {}
    for mode in ("mmot", "pairwise2"):
        mat = tmp_path / f"{mode}.csv"
        assert run(["pairwise", folder, "--np", 400, "--mode", mode, "--tolerance", 1e-5, "--max-sweeps", 3000,
                    "--out-matrix", mat, "--out-neighbors", tmp_path / f"{mode}.json"]) == 0
        mats[mode] = _read_matrix(mat)[1]
    off = ~np.eye(8, dtype=bool)
    rel = np.abs(mats["mmot"][off] - mats["pairwise2"][off]) / mats["pairwise2"][off]
    assert rel.mean() <= 0.15


def test_bench_empty_scenario(capsys):
    assert main(["bench"]) == 2
    assert "usage" in capsys.readouterr().err


def test_bench_report(tmp_path):
    out = tmp_path / "b.json"
    assert run(["bench", "--sizes", 500, 1000, "--sweeps", 3, "--repeats", 2, "--memory-np", 5000,
                "--memory-sweeps", 2, "--out-report", out]) == 0
    rep = read_json(out)
    assert [row["np"] for row in rep["scaling"]] == [500, 1000]
    assert len(rep["ratios"]) == 1
    assert 0 < rep["memory"]["peak_bytes"] <= 64 * 5000


def test_outputs_round_trip_through_ingest(tmp_path):
    a, b = _gen(tmp_path, "funnel", 100, 1), _gen(tmp_path, "ring", 100, 2)
    pairs = tmp_path / "p.csv"
    assert run(["solve", a, b, "--out-report", tmp_path / "r.json", "--out-pairs", pairs]) == 0
    data = load_csv(pairs).data
    np.testing.assert_array_equal(np.sort(data[:, :2], axis=0), np.sort(load_csv(a).data, axis=0))

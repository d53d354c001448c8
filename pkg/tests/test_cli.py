"""End-to-end command-line workflow on a miniature experiment."""

import csv
import json
import math

import numpy as np
import pytest

from romscat import build_grid, mass_matrix
from romscat.cli import main
from romscat.config import (config_from_dict, relative_l2_error,
                            synthesize_data, vertical_slice)
from romscat.data_pipeline import blocks_from_dict
from romscat.serialization import load_json

TINY = {
    "nx": 9, "ny": 9, "m": 2,
    "k_offset": 1.0, "k_spacing": 1.5, "n_k": 2,
    "phantom": "bump",
    "epsilon_noise": 2.5e-2, "seed": 3,
    "kind": "FWI", "n_iter": 2,
    "basis_grid": 2, "basis_width": 0.5,
}


def write_config(tmp_path, name="config.json", **extra):
    doc = dict(TINY, out_dir=str(tmp_path / "out"))
    doc.update(extra)
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path, doc


def test_synthesize_invert_report_round_trip(tmp_path, capsys):
    cfg, doc = write_config(tmp_path)
    assert main(["synthesize", "--config", str(cfg)]) == 0
    printed = capsys.readouterr().out.splitlines()
    out = tmp_path / "out"
    assert str(out / "data_noisy.json") in printed

    # files parse back to exactly the in-memory blocks
    noiseless, noisy, truth = synthesize_data(config_from_dict(doc))
    back = blocks_from_dict(load_json(out / "data_noiseless.json"))
    for j in range(2):
        assert np.array_equal(back.d[j], noiseless.d[j])
        assert np.array_equal(back.dk_d[j], noiseless.dk_d[j])
    back_noisy = blocks_from_dict(load_json(out / "data_noisy.json"))
    assert np.array_equal(back_noisy.d[0], noisy.d[0])
    assert back_noisy.noise["realized"]["d"] == pytest.approx(2.5e-2,
                                                              rel=1e-12)

    assert main(["invert", "--config", str(cfg),
                 "--data", str(out / "data_noisy.json")]) == 0
    est = load_json(out / "estimate_FWI.json")
    assert est["format"] == "romscat-estimate-v1"
    assert len(est["y"]) == 4
    assert len(est["values"]) == 81
    log_lines = [json.loads(s) for s in
                 (out / "iterations_FWI.jsonl").read_text().splitlines()]
    assert [ln["iter"] for ln in log_lines] == [1, 2]
    objs = [ln["objective"] for ln in log_lines]
    assert objs[1] <= objs[0] * (1 + 1e-12)

    assert main(["report", "--truth", str(out / "truth.json"),
                 "--estimate", str(out / "estimate_FWI.json")]) == 0
    report = load_json(out / "report.json")
    assert report["slices"] == [0.35, 0.55, 0.75]
    assert report["errors"][0]["kind"] == "FWI"
    assert math.isfinite(report["errors"][0]["rel_l2_error"])
    for x1 in ("0.35", "0.55", "0.75"):
        assert (out / f"slice_x1_{x1}.csv").exists()


def test_noisy_output_deterministic_in_seed(tmp_path):
    cfg, _ = write_config(tmp_path)
    main(["synthesize", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["synthesize", "--config", str(cfg), "--out", str(tmp_path / "b")])
    main(["synthesize", "--config", str(cfg), "--out", str(tmp_path / "c"),
          "--seed", "4"])
    read = lambda d: (tmp_path / d / "data_noisy.json").read_bytes()
    assert read("a") == read("b")
    assert read("a") != read("c")


def test_noiseless_files_ignore_seed(tmp_path):
    cfg, _ = write_config(tmp_path)
    main(["synthesize", "--config", str(cfg), "--noise", "0",
          "--seed", "1", "--out", str(tmp_path / "a")])
    main(["synthesize", "--config", str(cfg), "--noise", "0",
          "--seed", "2", "--out", str(tmp_path / "b")])
    for name in ("data_noiseless.json", "data_noisy.json", "truth.json"):
        assert ((tmp_path / "a" / name).read_bytes()
                == (tmp_path / "b" / name).read_bytes())


def test_errors_exit_one_with_message(tmp_path, capsys):
    cfg, _ = write_config(tmp_path)
    assert main(["synthesize", "--config", str(tmp_path / "nope.json")]) == 1
    assert capsys.readouterr().err.startswith("error:")

    # a truth file is not a data file
    main(["synthesize", "--config", str(cfg)])
    capsys.readouterr()
    out = tmp_path / "out"
    assert main(["invert", "--config", str(cfg),
                 "--data", str(out / "truth.json")]) == 1
    assert capsys.readouterr().err.startswith("error:")

    # grid mismatch between truth and estimate
    cfg11, _ = write_config(tmp_path, name="config11.json", nx=11, ny=11,
                            out_dir=str(tmp_path / "big"))
    main(["synthesize", "--config", str(cfg11), "--out",
          str(tmp_path / "big")])
    main(["invert", "--config", str(cfg11),
          "--data", str(tmp_path / "big" / "data_noisy.json"),
          "--out", str(tmp_path / "big")])
    capsys.readouterr()
    assert main(["report", "--truth", str(out / "truth.json"),
                 "--estimate",
                 str(tmp_path / "big" / "estimate_FWI.json")]) == 1
    assert "error:" in capsys.readouterr().err

    with pytest.raises(SystemExit):
        main(["invert", "--config", str(cfg), "--data", "x", "--kind", "Q"])


def test_report_error_matches_shuffled_quadrature(tmp_path, capsys):
    cfg, _ = write_config(tmp_path)
    main(["synthesize", "--config", str(cfg)])
    out = tmp_path / "out"
    truth = load_json(out / "truth.json")
    rng = np.random.default_rng(8)
    q_true = np.asarray(truth["values"])
    q_est = q_true + 0.3 * rng.standard_normal(q_true.size)
    est_doc = {"format": "romscat-estimate-v1", "kind": "S",
               "nx": 9, "ny": 9, "basis_grid": 2, "basis_width": 0.5,
               "gamma": 0.2, "n_iter": 0, "alpha_max": 3.0,
               "objective": 0.0, "y": [0.0] * 4,
               "values": [float(v) for v in q_est]}
    est_path = out / "estimate_S.json"
    est_path.write_text(json.dumps(est_doc))
    capsys.readouterr()
    assert main(["report", "--truth", str(out / "truth.json"),
                 "--estimate", str(est_path)]) == 0
    got = load_json(out / "report.json")["errors"][0]["rel_l2_error"]

    # independent quadrature: same bilinear forms accumulated entry by
    # entry with compensated summation in a shuffled order
    grid = build_grid(9, 9)
    M = mass_matrix(grid).tocoo()
    order = rng.permutation(M.nnz)
    diff = q_est - q_true

    def form(v):
        return math.fsum(M.data[k] * v[M.row[k]] * v[M.col[k]]
                         for k in order)

    oracle = math.sqrt(form(diff) / form(q_true))
    assert got == pytest.approx(oracle, rel=1e-12)


def test_report_zero_error_for_exact_estimate(tmp_path, capsys):
    cfg, _ = write_config(tmp_path)
    main(["synthesize", "--config", str(cfg)])
    out = tmp_path / "out"
    truth = load_json(out / "truth.json")
    est_doc = {"format": "romscat-estimate-v1", "kind": "T",
               "nx": 9, "ny": 9, "basis_grid": 2, "basis_width": 0.5,
               "gamma": 0.2, "n_iter": 0, "alpha_max": 3.0,
               "objective": 0.0, "y": [0.0] * 4,
               "values": truth["values"]}
    est_path = out / "estimate_T.json"
    est_path.write_text(json.dumps(est_doc))
    capsys.readouterr()
    assert main(["report", "--truth", str(out / "truth.json"),
                 "--estimate", str(est_path),
                 "--slices", "0.5"]) == 0
    report = load_json(out / "report.json")
    assert report["errors"][0]["rel_l2_error"] == 0.0

    with open(out / "slice_x1_0.5.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["x2", "q_true", "q_est_T"]
    body = np.array([[float(v) for v in row] for row in rows[1:]])
    assert np.array_equal(body[:, 1], body[:, 2])
    assert np.allclose(body[:, 0], np.linspace(0, 1, 9), atol=1e-15)
    # x1 = 0.5 is a node column on this grid: values are nodal q_true
    grid = build_grid(9, 9)
    q_true = np.asarray(truth["values"]).reshape(9, 9)
    assert np.array_equal(body[:, 1], q_true[:, 4])

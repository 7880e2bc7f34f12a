import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from stcodes import cli, formats
from stcodes.decoders import InvertedIndex


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ")
    header = json.loads(lines[0][2:])
    rows = list(csv.DictReader(lines[1:]))
    return header, rows


@pytest.fixture
def pipeline(tmp_path, capsys):
    f = tmp_path / "f.stcf"
    assert run(capsys, "sample", "--m", 300, "--n", 40, "--seed", 1, "--out", f)[0] == 0
    codes, w, idx = tmp_path / "c.stcc", tmp_path / "w.stcw", tmp_path / "c.stci"
    assert run(capsys, "encode", "--features", f, "--l", 128, "--lambda-x", 1.0, "--projection", "sparse",
               "--s", 4, "--projection-out", w, "--out", codes)[0] == 0
    assert run(capsys, "index", "--codes", codes, "--out", idx)[0] == 0
    return dict(features=f, codes=codes, projection=w, index=idx, dir=tmp_path)


def test_gain_default_grid(tmp_path, capsys):
    out = tmp_path / "gain.csv"
    code, _, _ = run(capsys, "gain", "--snr-db", 0, "--lb", 256, "--out", out)
    assert code == 0
    header, rows = read_csv(out)
    assert len(rows) == 61
    assert header["command"] == "gain" and header["l_b"] == 256
    assert list(rows[0]) == ["snr_db", "lambda_x", "lambda_y_star", "alpha", "gamma", "h_x_bits", "mi_bits",
                             "gain", "l_t_matched", "scaled_mi_ternary", "scaled_mi_binary"]


def test_gain_zero_threshold_row_equals_binary(tmp_path, capsys):
    out = tmp_path / "g.csv"
    assert run(capsys, "gain", "--snr-db", 0, "--lambda-x", 0, "--lambda-y", 0, "--out", out)[0] == 0
    (row,) = read_csv(out)[1]
    assert float(row["scaled_mi_ternary"]) == pytest.approx(float(row["scaled_mi_binary"]), abs=1e-9)


@pytest.mark.parametrize("grid", [["2", "1", "5"], ["-1", "1", "5"], ["0", "1", "0"], ["1", "1", "4"]])
def test_gain_bad_grid_exit_2(tmp_path, capsys, grid):
    code, _, err = run(capsys, "gain", "--lambda-x-grid", *grid, "--out", tmp_path / "g.csv")
    assert code == 2 and "grid" in err


def test_identify_trials_one(tmp_path, capsys):
    out = tmp_path / "i.csv"
    code, _, _ = run(capsys, "identify", "--m", 50, "--n", 20, "--lb", 32, "--snr-db", 0, "--trials", 1,
                     "--lambda-x", 1.0, "--out", out)
    assert code == 0
    _, rows = read_csv(out)
    assert {r["scheme"] for r in rows} == {"binary", "ternary"}
    assert all(float(r["ci_halfwidth"]) == pytest.approx(0.98, abs=1e-12) for r in rows)
    assert all(r["decode_wall_time_s"] == "" for r in rows)


def test_identify_noiseless(tmp_path, capsys):
    out = tmp_path / "i.csv"
    # short sparse codes can tie with items whose support covers the query's few nonzeros
    assert run(capsys, "identify", "--m", 200, "--n", 100, "--lb", 256, "--sigma-p", 0, "--trials", 100,
               "--out", out)[0] == 0
    _, rows = read_csv(out)
    assert len(rows) == 4
    assert all(float(r["p_correct"]) == 1.0 for r in rows)


def test_identify_timing_flag(tmp_path, capsys):
    out = tmp_path / "i.csv"
    assert run(capsys, "identify", "--m", 50, "--n", 20, "--lb", 32, "--trials", 3, "--snr-db", 0,
               "--lambda-x", 1.0, "--timing", "--out", out)[0] == 0
    assert all(float(r["decode_wall_time_s"]) >= 0 for r in read_csv(out)[1])


def test_identify_capacity_exit_3(tmp_path, capsys):
    code, _, err = run(capsys, "identify", "--memory-cap-mb", 0.01, "--out", tmp_path / "i.csv")
    assert code == 3 and "total" in err


def test_identify_sparse_needs_s(tmp_path, capsys):
    assert run(capsys, "identify", "--projection", "sparse", "--out", tmp_path / "i.csv")[0] == 2


def test_query_round_trip_noiseless(pipeline, capsys):
    q = pipeline["dir"] / "q.stcf"
    assert run(capsys, "perturb", "--features", pipeline["features"], "--row", 17, "--out", q)[0] == 0
    for decoder in ("sublinear", "ml"):
        code, out, _ = run(capsys, "query", "--codes", pipeline["codes"], "--index", pipeline["index"],
                           "--projection", pipeline["projection"], "--query", q, "--decoder", decoder, "--k", 3)
        assert code == 0
        lines = [json.loads(s) for s in out.splitlines()]
        assert [d["rank"] for d in lines] == [1, 2, 3]
        assert lines[0]["id"] == 17
        assert lines[0]["score"] >= lines[1]["score"] >= lines[2]["score"]


def test_query_noisy_and_text_vector(pipeline, capsys):
    q = pipeline["dir"] / "q.stcf"
    assert run(capsys, "perturb", "--features", pipeline["features"], "--row", 5, "--sigma-p", 0.3,
               "--seed", 2, "--out", q)[0] == 0
    txt = pipeline["dir"] / "q.txt"
    np.savetxt(txt, formats.load_features(q).values[0])
    code, out, _ = run(capsys, "query", "--codes", pipeline["codes"], "--index", pipeline["index"],
                       "--projection", pipeline["projection"], "--query", txt, "--sigma-p", 0.3)
    assert code == 0 and json.loads(out)["id"] == 5


def test_query_corrupted_magic_exit_4(pipeline, capsys):
    bad = pipeline["dir"] / "bad.stci"
    bad.write_bytes(b"JUNK" + pipeline["index"].read_bytes()[4:])
    code, _, err = run(capsys, "query", "--codes", pipeline["codes"], "--index", bad,
                       "--projection", pipeline["projection"], "--query", pipeline["features"])
    assert code == 4 and "magic" in err


def test_index_corrupted_codes_exit_4(pipeline, capsys):
    bad = pipeline["dir"] / "bad.stcc"
    bad.write_bytes(b"STCF" + pipeline["codes"].read_bytes()[4:])
    assert run(capsys, "index", "--codes", bad, "--out", pipeline["dir"] / "x.stci")[0] == 4


def test_query_empty_index_exit_5(pipeline, capsys):
    empty = pipeline["dir"] / "empty.stci"
    z = np.zeros(129, dtype=np.int64)
    formats.save_index(empty, InvertedIndex(0, 128, z, z[:0], z, z[:0]))
    code, _, err = run(capsys, "query", "--codes", pipeline["codes"], "--index", empty,
                       "--projection", pipeline["projection"], "--query", pipeline["features"])
    assert code == 5 and "empty" in err


def test_query_dimension_mismatch_exit_5(pipeline, capsys):
    txt = pipeline["dir"] / "short.txt"
    np.savetxt(txt, np.zeros(39))
    code, _, _ = run(capsys, "query", "--codes", pipeline["codes"], "--index", pipeline["index"],
                     "--projection", pipeline["projection"], "--query", txt)
    assert code == 5


def test_encode_projection_mismatch_exit_5(pipeline, capsys):
    f2 = pipeline["dir"] / "f2.stcf"
    assert run(capsys, "sample", "--m", 5, "--n", 41, "--out", f2)[0] == 0
    code, _, _ = run(capsys, "encode", "--features", f2, "--projection-in", pipeline["projection"],
                     "--out", pipeline["dir"] / "c2.stcc")
    assert code == 5


def test_missing_input_exit_1(tmp_path, capsys):
    assert run(capsys, "index", "--codes", tmp_path / "nope.stcc")[0] == 1


def test_binary_pipeline(tmp_path, capsys):
    f, c, w = tmp_path / "f.stcf", tmp_path / "c.stcc", tmp_path / "w.stcw"
    run(capsys, "sample", "--m", 100, "--n", 30, "--out", f)
    assert run(capsys, "encode", "--features", f, "--kind", "binary", "--l", 64, "--projection-out", w,
               "--out", c)[0] == 0
    code, out, _ = run(capsys, "query", "--codes", c, "--projection", w, "--query", f, "--row", 42)
    assert code == 0 and json.loads(out)["id"] == 42
    assert run(capsys, "index", "--codes", c, "--out", tmp_path / "x.stci")[0] == 5


def test_show_config_and_config_json(tmp_path, capsys):
    code, out, _ = run(capsys, "gain", "--show-config", "--config-json", '{"lb": 128, "n": 77}')
    assert code == 0
    cfg = json.loads(out)
    assert cfg["l_b"] == 128 and cfg["n"] == 77
    # explicit flags win over the JSON
    cfg = json.loads(run(capsys, "gain", "--show-config", "--lb", 64, "--config-json", '{"lb": 128}')[1])
    assert cfg["l_b"] == 64
    path = tmp_path / "c.json"
    path.write_text('{"trials": 9}')
    assert json.loads(run(capsys, "identify", "--show-config", "--config-json", path)[1])["trials"] == 9
    assert run(capsys, "gain", "--config-json", '{"bogus": 1}')[0] == 2


def test_config_echoed_in_csv_header(tmp_path, capsys):
    out = tmp_path / "g.csv"
    run(capsys, "gain", "--snr-db", 5, "--lambda-x-grid", 0, 1, 3, "--config-json", '{"lb": 100}', "--out", out)
    header, rows = read_csv(out)
    assert header["l_b"] == 100 and header["snr_db_list"] == [5.0]
    assert len(rows) == 3


def test_threads_flag(tmp_path, capsys):
    assert run(capsys, "gain", "--threads", 1, "--lambda-x-grid", 0, 1, 2, "--out", tmp_path / "g.csv")[0] == 0


@pytest.mark.parametrize("cmd", ["gain", "identify", "sample", "perturb", "encode", "index", "query"])
def test_help_lists_defaults(cmd):
    res = subprocess.run([sys.executable, "-m", "stcodes", cmd, "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "--seed" in res.stdout and "default" in res.stdout


def test_usage_error_exit_2():
    res = subprocess.run([sys.executable, "-m", "stcodes", "gain", "--lb", "notanumber"], capture_output=True)
    assert res.returncode == 2

import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from vectokens.cli import main
from vectokens.core import DenseVector
from vectokens.encoder import encode
from vectokens.index import InvertedIndex
from vectokens.vecfile import read_tvec_rows, write_text


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["gen", "--dims", "16", "--docs", "300", "--clusters", "6",
                 "--seed", "4", "--out", str(d / "vecs.tvec")]) == 0
    assert main(["index", str(d / "vecs.tvec"), "--out", str(d / "one.tvix")]) == 0
    assert main(["index", str(d / "vecs.tvec"), "--shards", "4", "--out", str(d / "four.tvix")]) == 0
    return d


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_gen_is_deterministic_and_unit_norm(tmp_path, capsys):
    for name in ("a", "b"):
        code, out, _ = run(capsys, "gen", "--dims", 40, "--docs", 500, "--clusters", 7,
                           "--seed", 11, "--out", tmp_path / f"{name}.tvec")
        assert code == 0 and "500 x 40" in out
    assert (tmp_path / "a.tvec").read_bytes() == (tmp_path / "b.tvec").read_bytes()
    rows = read_tvec_rows(tmp_path / "a.tvec")
    assert rows.shape == (500, 40)
    np.testing.assert_allclose(np.linalg.norm(rows, axis=1), 1.0, atol=1e-6)


def test_gen_degenerate_limit(tmp_path, capsys):
    run(capsys, "gen", "--dims", 8, "--docs", 20, "--clusters", 1, "--sigma", 1e-6,
        "--out", tmp_path / "d.tvec")
    rows = read_tvec_rows(tmp_path / "d.tvec").astype(np.float64)
    assert (rows @ rows.T).min() > 0.9999


def test_gen_rejects_bad_sigma(tmp_path, capsys):
    code, _, err = run(capsys, "gen", "--sigma", 0, "--out", tmp_path / "x.tvec")
    assert code == 1 and "sigma" in err


def test_index_three_doc_vocabulary(tmp_path, capsys):
    rows = np.array([[0.12, -0.13, 0.065], [0.5, 0.5, 0.1], [-0.3, 0.2, 0.9]])
    write_text(tmp_path / "three.txt", rows)
    code, out, _ = run(capsys, "index", tmp_path / "three.txt", "--encoding", "P2",
                       "--out", tmp_path / "three.tvix", "--json")
    stats = json.loads(out)
    assert code == 0 and stats["docs"] == 3 and stats["vocabulary"] <= 9


def test_index_empty_file(tmp_path, capsys):
    (tmp_path / "empty.txt").write_text("")
    code, _, err = run(capsys, "index", tmp_path / "empty.txt", "--out", tmp_path / "e.tvix")
    assert code == 2 and "no vectors" in err


def test_index_ragged_rows_name_the_line(tmp_path, capsys):
    (tmp_path / "bad.txt").write_text("0.1 0.2 0.3\n0.4 0.5\n")
    code, _, err = run(capsys, "index", tmp_path / "bad.txt", "--out", tmp_path / "b.tvix")
    assert code == 2 and "line 2" in err


def test_index_bad_encoding_is_usage_error(workdir, capsys):
    code, _, err = run(capsys, "index", workdir / "vecs.tvec", "--encoding", "Q9",
                       "--shards", 0, "--out", workdir / "bad.tvix")
    assert code == 1
    assert "Q9" in err and "--shards" in err  # one aggregated message


def test_shard_count_does_not_change_answers(workdir, capsys):
    for doc in (0, 77, 299):
        outs = []
        for snap in ("one.tvix", "four.tvix"):
            code, out, _ = run(capsys, "search", workdir / snap, "--doc", doc, "--page", 40, "--json")
            assert code == 0
            outs.append([(h["doc"], h["sim"]) for h in json.loads(out)["hits"]])
        assert outs[0] == outs[1]


def test_search_by_doc_returns_itself_first(workdir, capsys):
    for doc in (3, 150):
        code, out, _ = run(capsys, "search", workdir / "one.tvix", "--doc", doc)
        first = out.splitlines()[0].split()
        assert code == 0 and first[2] == str(doc) and first[4] == "1.000000"


def test_search_exclude_self(workdir, capsys):
    code, out, _ = run(capsys, "search", workdir / "one.tvix", "--doc", 3, "--exclude-self", "--json")
    assert 3 not in [h["doc"] for h in json.loads(out)["hits"]]


def test_search_trim_everything(workdir, capsys):
    code, out, _ = run(capsys, "search", workdir / "one.tvix", "--doc", 5, "--trim", 1.0)
    assert code == 0 and out.strip() == "0 results (empty query after filtering)"


def test_search_page_bound(workdir, capsys):
    code, out, _ = run(capsys, "search", workdir / "one.tvix", "--doc", 9, "--k", 10, "--page", 320, "--json")
    res = json.loads(out)
    ix = InvertedIndex.load_snapshot(workdir / "one.tvix")
    tokens = encode(DenseVector(9, ix.vectors_of([9])[0]), ix.encoding).tokens
    matching = set().union(*(ix.postings(t).doc_ids for t in tokens))
    assert len(res["hits"]) <= 10
    assert res["candidates"] == min(320, len(matching))


def test_search_vector_literal(workdir, capsys):
    ix = InvertedIndex.load_snapshot(workdir / "one.tvix")
    literal = ",".join(repr(float(x)) for x in ix.vectors_of([12])[0] * 3.0)
    code, out, _ = run(capsys, "search", workdir / "one.tvix", f"--vector={literal}", "--k", 1, "--json")
    assert code == 0 and json.loads(out)["hits"][0]["doc"] == 12


@pytest.mark.parametrize("argv, code", [
    (["--vector", "1 2"], 1),
    (["--vector", "a b"], 1),
    (["--doc", "100000"], 1),
    (["--doc", "1", "--k", "20", "--page", "5"], 1),
])
def test_search_usage_errors(workdir, capsys, argv, code):
    assert run(capsys, "search", workdir / "one.tvix", *argv)[0] == code


def test_search_bad_snapshot(tmp_path, capsys):
    (tmp_path / "junk.tvix").write_bytes(b"not a snapshot at all")
    code, _, err = run(capsys, "search", tmp_path / "junk.tvix", "--doc", 1)
    assert code == 2 and "snapshot" in err


def test_eval_preset_covers_full_grid(workdir, capsys):
    code, out, _ = run(capsys, "eval", workdir / "one.tvix", "--preset", "paper-quality",
                       "--queries", 4)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 90
    combos = {(float(r["trim"]), r["best"], r["page"]) for r in rows}
    assert combos == {(t, b, p) for t in (0.0, 0.05, 0.1)
                      for b in ("all", "320", "90", "40", "17", "6")
                      for p in ("20", "80", "320", "640", "all")}


def test_eval_custom_grid_to_file(workdir, capsys):
    out_path = workdir / "q.jsonl"
    code, out, _ = run(capsys, "eval", workdir / "four.tvix", "--trim", "0,0.1", "--best", "all,6",
                       "--page", "20,all", "--queries", 10, "--json", "--out", out_path)
    recs = [json.loads(line) for line in out_path.read_text().splitlines()]
    assert code == 0 and len(recs) == 8 and "wrote 8 rows" in out
    # docs sharing no token with a query are out of reach even at page=all,
    # so the unfiltered full-page cell is the best row, not necessarily 1.0
    oracle = [r for r in recs if r["trim"] == 0 and r["best"] == "all" and r["page"] == "all"]
    assert oracle[0]["avg_precision"] == max(r["avg_precision"] for r in recs)


def test_eval_is_deterministic(workdir, capsys):
    argv = ["eval", workdir / "one.tvix", "--page", "20,80", "--queries", 20, "--seed", 3]
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_bench_preset_parallelism(workdir, capsys):
    code, out, _ = run(capsys, "bench", workdir / "one.tvix", "--preset", "paper-speed", "--batch", 8)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 27
    assert {int(r["parallelism"]) for r in rows} == {1, 4, 16}
    assert all(int(r["errors"]) == 0 for r in rows)


def test_bench_with_fanout(workdir, capsys):
    code, out, _ = run(capsys, "bench", workdir / "four.tvix", "--batch", 8, "--fanout", 2,
                       "--trim", 0, "--page", 20, "--json")
    rec = json.loads(out)
    assert code == 0 and rec["vec_size_avg"] == 16.0


@pytest.mark.parametrize("cmd, extra", [
    ("eval", ["--trim", ""]),
    ("bench", ["--parallel", ","]),
])
def test_empty_grid(workdir, capsys, cmd, extra):
    code, _, err = run(capsys, cmd, workdir / "one.tvix", *extra)
    assert code == 1 and "empty grid" in err


@pytest.mark.parametrize("argv", [
    ["eval", "SNAP", "--trim", "x"],
    ["eval", "SNAP", "--trim", "2.0"],
    ["eval", "SNAP", "--page", "5"],
    ["eval", "SNAP", "--queries", "100000"],
    ["bench", "SNAP", "--parallel", "0"],
    ["bench", "SNAP", "--batch", "0"],
])
def test_grid_usage_errors(workdir, capsys, argv):
    argv = [str(workdir / "one.tvix") if a == "SNAP" else a for a in argv]
    assert run(capsys, *argv)[0] == 1


def test_argparse_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["search"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_snapshot_info(workdir, capsys):
    code, out, _ = run(capsys, "snapshot-info", workdir / "four.tvix", "--json")
    info = json.loads(out)
    assert code == 0 and info["shards"] == 4 and info["dim"] == 16 and info["docs"] == 300
    code, out, _ = run(capsys, "snapshot-info", workdir / "four.tvix")
    assert "encoding" in out


def test_missing_file_exit_two(tmp_path, capsys):
    assert run(capsys, "snapshot-info", tmp_path / "nope.tvix")[0] == 2


def test_module_entry_point(workdir):
    proc = subprocess.run([sys.executable, "-m", "vectokens", "search", str(workdir / "one.tvix"),
                           "--doc", "1", "--k", "3"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "3 results" in proc.stdout

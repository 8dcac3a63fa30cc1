import json
import subprocess
import sys
from pathlib import Path

from rws.cli import main
from rws.fixtures import make_planted_fixture

DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_end_to_end(tmp_path, capsys):
    fx = make_planted_fixture(tmp_path, n_questions=4, n_docs=60, seed=2)
    store = tmp_path / "store"
    code, out, _ = run(capsys, "corpus", "ingest", "--input", fx.corpus_path, "--store", store)
    assert code == 0 and json.loads(out)["documents"] == 60
    code, out, _ = run(capsys, "index", "build", "--store", store)
    assert code == 0 and json.loads(out)["documents"] == 60

    q = fx.questions[0]
    code, out, _ = run(capsys, "index", "query", "--store", store, "--question", q.question, "--k1", 5)
    rows = [line.split("\t") for line in out.splitlines()]
    assert code == 0 and 1 <= len(rows) <= 5
    assert [r[0] for r in rows] == [str(i) for i in range(1, len(rows) + 1)]

    ini = tmp_path / "run.ini"
    ini.write_text("[rws]\nk1 = 100\nk2 = 10\n", encoding="utf-8")
    output = tmp_path / "out.tsv"
    code, out, _ = run(capsys, "run", "--config", ini, "--store", store, "--pairs", fx.pairs_path,
                       "--output", output, "--parallelism", 2)
    assert code == 0
    assert json.loads(out)["stats"]["num_q"] == 4
    assert len(output.read_text(encoding="utf-8").splitlines()) == 40
    manifest = json.loads(Path(str(output) + ".manifest.json").read_text())
    assert manifest["config"]["k2"] == 10


def test_run_config_error_exit_code(tmp_path, capsys):
    code, _, err = run(capsys, "run", "--k1", 10, "--k2", 20)
    assert code == 2
    assert "k2 exceeds k1" in err


def test_run_missing_index(tmp_path, capsys):
    fx = make_planted_fixture(tmp_path, n_questions=2, n_docs=20, seed=1)
    run(capsys, "corpus", "ingest", "--input", fx.corpus_path, "--store", tmp_path / "s")
    code, _, err = run(capsys, "run", "--store", tmp_path / "s", "--pairs", fx.pairs_path, "--output", tmp_path / "o.tsv")
    assert code == 1 and "no usable index" in err


def test_ingest_error_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"text": "ok"}\n{not json\n', encoding="utf-8")
    code, _, err = run(capsys, "corpus", "ingest", "--input", bad, "--store", tmp_path / "s")
    assert code == 1 and "bad.jsonl:2" in err


def test_dataset_commands(tmp_path, capsys):
    conv = tmp_path / "wikiqa.tsv"
    code, out, _ = run(capsys, "dataset", "convert", "--from", "wikiqa", DATA / "wikiqa_sample.tsv", conv)
    assert code == 0 and json.loads(out) == {"num_q": 8, "num_a": 18, "num_pos": 6, "num_neg": 12}

    code, out, _ = run(capsys, "dataset", "stats", conv)
    stats = json.loads(out)
    assert (stats["all"]["num_q"], stats["without_all_minus"]["num_q"], stats["clean_only"]["num_q"]) == (8, 5, 3)

    clean = tmp_path / "clean.tsv"
    code, out, _ = run(capsys, "dataset", "filter", "--mode", "clean_only", conv, clean)
    assert code == 0 and json.loads(out)["num_a"] == 9


def test_metrics_grade(tmp_path, capsys):
    gold = tmp_path / "gold.tsv"
    gold.write_text("q1\tQ\ta\t0\nq1\tQ\tb\t1\nq2\tR\tx\t1\n", encoding="utf-8")
    scores = tmp_path / "scores.tsv"
    scores.write_text("q1\ta\t0.9\nq1\tb\t0.4\nq2\tx\t0.1\n", encoding="utf-8")
    code, out, _ = run(capsys, "metrics", "grade", "--gold", gold, "--scores", scores)
    report = json.loads(out)
    assert code == 0
    assert (report["p_at_1"], report["map"], report["mrr"]) == (0.5, 0.75, 0.75)

    scores.write_text("q1\ta\tnope\n", encoding="utf-8")
    code, _, err = run(capsys, "metrics", "grade", "--gold", gold, "--scores", scores)
    assert code == 1 and "scores.tsv:1" in err


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "rws.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for group in ("corpus", "index", "run", "dataset", "metrics"):
        assert group in proc.stdout

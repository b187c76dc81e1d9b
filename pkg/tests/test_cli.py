import csv
import io
import json

import pytest

from predcode.cli import FIGURES, build_parser, main
from predcode.corpus import write_dataset
from predcode.sweep import ParameterGrid, ResultTable, format_grid, manifest_path

GRID = ParameterGrid(stemming=("no",), ngram_orders=(1, 2), value_types=("binary", "ntf"),
                     token_counts=(100,), sampling_percentages=(50, 100), algorithms=("svm", "lr"))


@pytest.fixture(scope="module")
def dataset(tmp_path_factory, small_planted):
    path = tmp_path_factory.mktemp("data") / "planted.jsonl"
    write_dataset(small_planted, path)
    return path


@pytest.fixture(scope="module")
def results(tmp_path_factory, dataset):
    d = tmp_path_factory.mktemp("sweep")
    grid = d / "grid.txt"
    grid.write_text(format_grid(GRID))
    out = d / "res.csv"
    assert main(["sweep", str(dataset), "--grid", str(grid), "--out", str(out), "--workers", "1"]) == 0
    return out


def test_help_shows_defaults(capsys):
    with pytest.raises(SystemExit):
        main(["run", "--help"])
    text = " ".join(capsys.readouterr().out.split())
    for flag in ("--stemming", "--ngrams", "--value-type", "--tokens", "--sampling", "--algorithm",
                 "--seed", "--c", "--tol", "--max-iter"):
        assert flag in text
    assert "default: 10000" in text


def test_stats(dataset, capsys, small_planted):
    assert main(["stats", str(dataset)]) == 0
    out = capsys.readouterr().out
    assert f"Total:                      {len(small_planted)}" in out
    assert main(["stats", str(dataset), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["total"] == len(small_planted)


def test_run_prints_every_target(dataset, capsys, tmp_path):
    out = tmp_path / "one.csv"
    assert main(["run", str(dataset), "--tokens", "200", "--algorithm", "svm", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    for pct in (30, 40, 50, 60, 70, 80, 90):
        assert f"{pct}% " in text
    assert len(ResultTable.read_csv(out)) == 1
    assert json.loads(manifest_path(out).read_text())["config"]["algorithm"] == "svm"


def test_run_json(dataset, capsys):
    assert main(["run", str(dataset), "--json", "--recall-targets", "0.5,0.9"]) == 0
    row = json.loads(capsys.readouterr().out)
    assert set(row) >= {"percent_reviewed_at_50", "precision_at_90", "avg_percent_reviewed"}


def test_run_failure_exit_code(dataset, capsys):
    assert main(["run", str(dataset), "--sampling", "0.01"]) == 1
    assert "experiment failed" in capsys.readouterr().err


@pytest.mark.parametrize("argv, fragment", [
    (["run", "DATA", "--ngrams", "0"], "argument --ngrams"),
    (["run", "DATA", "--sampling", "150"], "argument --sampling"),
    (["run", "DATA", "--value-type", "weird"], "argument --value-type"),
    (["run", "DATA", "--algorithm", "tree"], "argument --algorithm"),
])
def test_bad_arguments_name_the_parameter(argv, fragment, capsys, dataset):
    argv = [str(dataset) if a == "DATA" else a for a in argv]
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2
    assert fragment in capsys.readouterr().err


def test_missing_dataset_exit_code(tmp_path, capsys):
    assert main(["stats", str(tmp_path / "nope.jsonl")]) == 2
    assert "error" in capsys.readouterr().err


def test_malformed_dataset_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a", "text": "x", "label": "relevant", "split": "training"}\n'
                   '{"id": "b", "text": "y", "label": "maybe", "split": "training"}\n')
    assert main(["stats", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_sweep_workers_identical(dataset, results, tmp_path):
    grid = tmp_path / "grid.txt"
    grid.write_text(format_grid(GRID))
    out = tmp_path / "res4.csv"
    assert main(["sweep", str(dataset), "--grid", str(grid), "--out", str(out), "--workers", "4"]) == 0
    assert out.read_bytes() == results.read_bytes()


def test_sweep_exit_code_with_failed_rows(tmp_path, capsys):
    data = tmp_path / "tiny.csv"
    data.write_text('id,text,label,split\n1,"a b",relevant,training\n2,"c d",not_relevant,training\n'
                    '3,"a",relevant,validation\n4,"c",not_relevant,validation\n')
    grid = tmp_path / "grid.txt"
    grid.write_text("stemming = no\nngrams = 1\nvalue_types = binary\ntokens = 5\n"
                    "sampling = 25, 100\nalgorithms = lr\n")
    out = tmp_path / "r.csv"
    assert main(["sweep", str(data), "--grid", str(grid), "--out", str(out)]) == 1
    assert "(1 failed)" in capsys.readouterr().out


def test_report(results, capsys):
    assert main(["report", str(results), "--by", "value_type"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0][:2] == ["value_type", "n_rows"]
    assert [r[0] for r in rows[1:]] == ["binary", "normalized_term_frequency"]
    assert all(r[1] == "8" for r in rows[1:])


def test_report_rejects_unknown_dimension(results, capsys):
    with pytest.raises(SystemExit):
        main(["report", str(results), "--by", "colour"])


def test_extremes_with_manifest(results, tmp_path, capsys):
    out = tmp_path / "ext.csv"
    assert main(["extremes", str(results), "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["parameter", "strongest", "weakest"]
    assert len(rows) == 9
    manifest = json.loads(manifest_path(out).read_text())
    assert manifest["command"] == "extremes"
    assert manifest["source"]["file"] == results.name


@pytest.mark.parametrize("figure", sorted(FIGURES))
def test_plot_data(results, capsys, figure):
    assert main(["plot-data", str(results), "--figure", str(figure)]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["figure", "series", "recall", "percent_reviewed", "precision"]
    assert {r[0] for r in rows[1:]} == {str(figure)}


def test_synth_and_grid(tmp_path, capsys):
    out = tmp_path / "p.jsonl"
    assert main(["synth", "planted", "--docs", "100", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 100
    assert main(["grid"]) == 0
    assert "tokens = 1000, 3000" in capsys.readouterr().out


def test_parser_lists_subcommands():
    text = build_parser().format_help()
    for cmd in ("stats", "run", "sweep", "report", "extremes", "plot-data"):
        assert cmd in text

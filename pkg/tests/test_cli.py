import csv

import pytest
import yaml

from tlmor.cli import build_parser, main
from tlmor.constants import CSV_COLUMNS, Method
from tlmor.models import load_model


@pytest.fixture()
def rod_dir(tmp_path):
    directory = tmp_path / "rod"
    assert main(["generate", "--generator", "heat_rod", "--n", "20", "--out", str(directory)]) == 0
    return directory


def test_parser_commands():
    args = build_parser().parse_args(["compare", "--generator", "random", "--n", "8", "--order", "2", "--t2", "1"])
    assert args.command == "compare"
    assert args.order == 2
    assert args.t2 == 1.0


def test_generate(rod_dir):
    sys = load_model(paths=str(rod_dir))
    assert (sys.n, sys.m, sys.p) == (20, 1, 1)


@pytest.mark.parametrize(
    "argv",
    [
        pytest.param([], id="no-command"),
        pytest.param(["reduce", "--bogus"], id="unknown-flag"),
        pytest.param(["generate", "--out", "unused"], id="generate-without-generator"),
        pytest.param(["generate", "--generator", "heat_rod", "--n", "2", "--out", "unused"], id="too-small-rod"),
        pytest.param(["compare", "--generator", "random", "--n", "6", "--order", "0"], id="zero-order"),
        pytest.param(
            ["compare", "--generator", "random", "--n", "6", "--order", "2", "--methods", "POD"], id="unknown-method"
        ),
        pytest.param(
            ["compare", "--generator", "random", "--n", "6", "--order", "2", "--t1", "2", "--t2", "1"],
            id="bad-interval",
        ),
    ],
)
def test_input_errors(argv):
    assert main(argv) == 1


def test_missing_model(tmp_path):
    argv = ["reduce", "--model", str(tmp_path / "nowhere"), "--order", "2", "--t2", "1", "--out", str(tmp_path)]
    assert main(argv) == 1


class TestReduce:
    def test_tlpork(self, rod_dir, tmp_path):
        out = tmp_path / "rom"
        argv = ["reduce", "--model", str(rod_dir), "--method", "TLPORK", "--order", "2", "--t2", "0.5"]
        assert main(argv + ["--points", "1,2", "--out", str(out)]) == 0
        summary = yaml.safe_load((out / "summary.yaml").read_text())
        assert summary["method"] == Method.TLPORK
        assert summary["n"] == 20
        assert summary["r"] == 2
        assert summary["stable"] is True
        assert summary["h2t_error"] >= 0
        assert load_model(paths=str(out)).n == 2

    def test_numerical_failure(self, rod_dir, tmp_path):
        # TLPORK needs a finite interval
        argv = ["reduce", "--model", str(rod_dir), "--method", "TLPORK", "--order", "2", "--points", "1,2"]
        assert main(argv + ["--out", str(tmp_path / "rom")]) == 2

    def test_one_method_only(self, rod_dir, tmp_path):
        argv = ["reduce", "--model", str(rod_dir), "--method", "BT,TLBT", "--order", "2", "--out", str(tmp_path)]
        assert main(argv) == 1


def test_compare(rod_dir, tmp_path):
    out = tmp_path / "table.csv"
    steps = tmp_path / "steps.csv"
    argv = ["compare", "--model", str(rod_dir), "--methods", "BT,TLPORK", "--order", "2", "--t2", "0.5"]
    assert main(argv + ["--points", "mirror-modal", "--out", str(out), "--steps-out", str(steps)]) == 0
    with open(out, newline="") as stream:
        rows = list(csv.reader(stream))

    assert tuple(rows[0]) == CSV_COLUMNS
    assert [row[0] for row in rows[1:]] == [Method.BT, Method.TLPORK]
    assert steps.exists()


def test_compare_from_config(tmp_path):
    config = tmp_path / "experiment.yaml"
    config.write_text(
        yaml.safe_dump({
            "model": {"generator": "random", "params": {"n": 8, "m": 1, "p": 1}},
            "methods": ["BT"],
            "order": 2,
            "interval": {"t1": 0.0, "t2": 1.0},
        })
    )
    out = tmp_path / "table.csv"
    assert main(["compare", "--config", str(config), "--order", "3", "--out", str(out)]) == 0
    with open(out, newline="") as stream:
        rows = list(csv.DictReader(stream))

    assert rows[0]["method"] == Method.BT
    assert rows[0]["r"] == "3"
    assert rows[0]["t2"] == "1"


def test_simulate(rod_dir, tmp_path):
    out = tmp_path / "steps.csv"
    argv = ["simulate", "--model", str(rod_dir), "--methods", "BT", "--order", "2", "--t2", "0.5", "--out", str(out)]
    assert main(argv) == 0
    with open(out, newline="") as stream:
        rows = list(csv.DictReader(stream))

    assert {row["method"] for row in rows} == {Method.BT}
    assert all(float(row["abs_error"]) >= 0 for row in rows)


def test_verify(rod_dir, tmp_path):
    out = tmp_path / "verify.yaml"
    argv = ["verify", "--model", str(rod_dir), "--methods", "TLPORK,O-TLPORK", "--order", "2", "--t2", "0.5"]
    assert main(argv + ["--points", "mirror-modal", "--out", str(out)]) == 0
    document = yaml.safe_load(out.read_text())
    assert list(document) == [Method.TLPORK, Method.OTLPORK]
    for method in document:
        assert abs(document[method]["relative_energy_defect"]) <= 1e-8

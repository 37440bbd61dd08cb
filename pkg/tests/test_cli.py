import csv
import json

import pytest

from surgery_lab.cli import build_parser, main
from surgery_lab.config import ConfigError, load_config

SMALL = {"cones": {"n_sequences": 400, "seq_length": 10, "shards": 4, "sweep_q": [-1, 0, 1], "q_values": [1, 2]}}


def _write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_parser_has_every_subcommand():
    parser = build_parser()
    for argv in (["frames", "check"], ["cones", "sweep"], ["farey", "run"], ["entropy", "report"]):
        args = parser.parse_args(argv + ["--workers", "2"])
        assert (args.group, args.action, args.workers) == (*argv, 2)


def test_frames_check_writes_outputs(tmp_path, capsys):
    assert main(["frames", "check", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "frames-check.summary.json").read_text())
    assert summary["pass"] is True
    assert json.loads(capsys.readouterr().out) == summary
    assert (tmp_path / "frames-check.json").exists()


def test_sweep_csv_and_determinism(tmp_path):
    cfg = _write(tmp_path, SMALL)
    outs = []
    for workers in (1, 2):
        out = tmp_path / f"w{workers}"
        code = main(["cones", "sweep", "--config", str(cfg), "--out", str(out), "--format", "csv", "--seed", "3", "--workers", str(workers)])
        assert code == 0
        outs.append((out / "cones-sweep.csv").read_bytes())
    assert outs[0] == outs[1]
    rows = list(csv.DictReader((tmp_path / "w1" / "cones-sweep.csv").open()))
    assert list(rows[0]) == ["q", "epsilon", "t_min", "n_sequences", "min_margin", "verdict"]
    verdict = {(r["q"], r["epsilon"]): r["verdict"] for r in rows}
    assert verdict[("-1", "0.05")] == "flip" and verdict[("-1", "0.5")] == "silent"
    assert verdict[("1", "0.05")] == "certified"


def test_seed_changes_sequences(tmp_path):
    cfg = _write(tmp_path, SMALL)
    margins = []
    for seed in ("1", "2"):
        main(["cones", "certify", "--config", str(cfg), "--out", str(tmp_path / seed), "--seed", seed])
        margins.append(json.loads((tmp_path / seed / "cones-certify.summary.json").read_text())["metrics"]["min_margin"])
    assert margins[0] != margins[1]


@pytest.mark.parametrize(
    "data, field",
    [
        ({"surgery": {"epsilon": 0.5}}, "surgery.epsilon"),
        ({"cones": {"shards": 7}}, "cones.shards"),
        ({"cones": {"q_values": [-1]}}, "cones.q_values"),
        ({"census": {"bogus": 1}}, "census.bogus"),
        ({"surgery": {"q": "one"}}, "surgery.q"),
    ],
)
def test_config_errors_name_the_field(tmp_path, capsys, data, field):
    assert main(["surgery", "validate", "--config", str(_write(tmp_path, data)), "--out", str(tmp_path)]) == 2
    assert field in capsys.readouterr().err
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        load_config(_write(tmp_path, data, "again.json"))


def test_bad_json_and_workers(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["frames", "check", "--config", str(bad)]) == 2
    assert main(["frames", "check", "--workers", "0", "--out", str(tmp_path)]) == 2


def test_census_and_farey_csv_schemas(tmp_path):
    cfg = _write(tmp_path, {"census": {"max_letters": 8, "farey_T": 600.0, "farey_T_min": 50.0}})
    assert main(["census", "disjoint", "--config", str(cfg), "--out", str(tmp_path), "--format", "csv"]) in (0, 1)
    rows = list(csv.DictReader((tmp_path / "census-disjoint.csv").open()))
    assert list(rows[0]) == ["bucket_T", "count", "filter"]
    assert (rows[0]["count"], rows[1]["count"]) == ("4", "8")
    main(["farey", "run", "--config", str(cfg), "--out", str(tmp_path), "--format", "csv"])
    rows = list(csv.DictReader((tmp_path / "farey-run.csv").open()))
    assert list(rows[0]) == ["p", "q_w", "w", "period"]
    periods = [float(r["period"]) for r in rows]
    assert periods == sorted(periods) and periods[-1] <= 600.0

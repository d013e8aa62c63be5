import json
import xml.etree.ElementTree as ET

import pytest

from dyadlab.cli import main
from dyadlab.config import parse_config
from dyadlab.runner import (
    DISCRETE_COLUMNS,
    ReportError,
    RunError,
    read_cell_csv,
    report_command,
    resolve_output_dir,
    run_command,
)

SMOKE = {"grid": {"models": ["rational"], "opponents": ["tft"], "games": ["stag_hunt"],
                  "dyads_per_cell": 2, "rounds": 100}}
SMALL = {"grid": {"models": ["original", "rational"], "opponents": ["nice", "tft"],
                  "games": ["prisoners_dilemma", "battle_of_exes"], "dyads_per_cell": 3, "rounds": 60}}


def cell_bytes(run_dir):
    return {p.name: p.read_bytes() for p in sorted((run_dir / "cells").glob("*.csv"))}


def test_smoke_run_layout(tmp_path):
    run_dir = run_command(parse_config(SMOKE), tmp_path / "run")
    cells = list((run_dir / "cells").glob("*.csv"))
    assert [c.name for c in cells] == ["rational__vs__tft__stag_hunt.csv"]
    lines = cells[0].read_text().splitlines()
    assert lines[0] == ",".join(DISCRETE_COLUMNS)
    assert len(lines) == 1 + 200
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["artifact_version"] == "0.1.0"
    assert len(manifest["cells"][0]["seeds"]) == 2
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["cells"][0]["prediction_error"] is not None
    assert (run_dir / "metrics" / "surprisal.csv").exists()
    assert not list(tmp_path.glob(".*partial"))


def test_csv_round_trip(tmp_path):
    from dyadlab.engine import DyadConfig, run_dyad
    from dyadlab.games import STAG_HUNT
    from dyadlab.runner import dyad_seed

    run_dir = run_command(parse_config(SMOKE), tmp_path / "run")
    parsed = read_cell_csv(run_dir / "cells" / "rational__vs__tft__stag_hunt.csv")
    direct = [run_dyad(DyadConfig(STAG_HUNT, "rational", "tft", 100,
                                  dyad_seed(0, "rational", "tft", "stag_hunt", d))) for d in range(2)]
    assert parsed == direct


def test_rerun_and_jobs_are_byte_identical(tmp_path):
    config = parse_config(SMALL)
    one = run_command(config, tmp_path / "one")
    two = run_command(config, tmp_path / "two", jobs=2)
    again = run_command(parse_config(json.loads((one / "manifest.json").read_text())), tmp_path / "again")
    assert cell_bytes(one) == cell_bytes(two) == cell_bytes(again)
    assert len(cell_bytes(one)) == 8
    assert (one / "summary.json").read_bytes() == (two / "summary.json").read_bytes()


def test_seed_changes_content_not_shape(tmp_path):
    a = run_command(parse_config(SMOKE), tmp_path / "a")
    b = run_command(parse_config(SMOKE).with_overrides(seed=5), tmp_path / "b")
    ca, cb = cell_bytes(a), cell_bytes(b)
    assert ca.keys() == cb.keys() and ca != cb
    assert [len(v.splitlines()) for v in ca.values()] == [len(v.splitlines()) for v in cb.values()]


def test_refuses_non_empty_output(tmp_path):
    out = tmp_path / "run"
    out.mkdir()
    (out / "keep.txt").write_text("x")
    with pytest.raises(RunError, match="not empty"):
        run_command(parse_config(SMOKE), out)
    assert (out / "keep.txt").exists()
    run_command(parse_config(SMOKE), out, overwrite=True)
    assert not (out / "keep.txt").exists()


def test_failed_run_leaves_nothing(tmp_path, monkeypatch):
    import dyadlab.runner as runner

    calls = []

    def boom(task):
        calls.append(task)
        if len(calls) == 3:
            raise RuntimeError("disk on fire")
        return real(task)

    real = runner.run_cell_task
    monkeypatch.setattr(runner, "run_cell_task", boom)
    with pytest.raises(RuntimeError, match="disk on fire"):
        run_command(parse_config(SMALL), tmp_path / "run")
    assert list(tmp_path.iterdir()) == []


def test_output_dir_precedence(monkeypatch):
    config = parse_config({"output_dir": "from_config"})
    monkeypatch.setenv("DYADLAB_OUT", "from_env")
    assert str(resolve_output_dir("from_cli", config)) == "from_cli"
    assert str(resolve_output_dir(None, config)) == "from_config"
    assert str(resolve_output_dir(None, parse_config({}))) == "from_env"
    monkeypatch.delenv("DYADLAB_OUT")
    assert str(resolve_output_dir(None, parse_config({}))) == "dyadlab_runs/latest"


def test_report_files_and_determinism(tmp_path):
    run_dir = run_command(parse_config(SMALL), tmp_path / "run")
    first = report_command(run_dir, tmp_path / "rep1")
    second = report_command(run_dir, tmp_path / "rep2")
    files = sorted(p.relative_to(first).as_posix() for p in first.rglob("*") if p.is_file())
    assert "summary.json" in files
    for opponent in ("nice", "tft"):
        for kind in ("efficacy", "surprisal", "prediction_accuracy"):
            assert f"plots/{opponent}_{kind}.svg" in files
    for name in files:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
    # the run and the report agree on the metrics
    assert json.loads((run_dir / "summary.json").read_text()) == json.loads((first / "summary.json").read_text())


def test_efficacy_svg_has_one_bar_per_model_and_game(tmp_path):
    run_dir = run_command(parse_config(SMALL), tmp_path / "run")
    rep = report_command(run_dir)
    root = ET.parse(rep / "plots" / "nice_efficacy.svg").getroot()
    ns = "{http://www.w3.org/2000/svg}"
    patches = [g for g in root.iter(f"{ns}g") if g.get("id", "").startswith("patch_")]
    # figure + axes background plus 2 models x 2 games bars plus legend frame and swatches
    assert len(patches) >= 2 + 4
    text = ET.tostring(root, encoding="unicode")
    assert "Efficacy vs nice" in text and "Battle of the Exes" in text


def test_report_lists_bad_cells(tmp_path):
    run_dir = run_command(parse_config(SMALL), tmp_path / "run")
    (run_dir / "cells" / "rational__vs__tft__battle_of_exes.csv").unlink()
    broken = run_dir / "cells" / "original__vs__nice__prisoners_dilemma.csv"
    broken.write_text(broken.read_text()[:500])
    with pytest.raises(ReportError) as info:
        report_command(run_dir)
    assert sorted(info.value.cells) == ["original__vs__nice__prisoners_dilemma",
                                        "rational__vs__tft__battle_of_exes"]


def test_report_on_empty_dir(tmp_path):
    with pytest.raises(ReportError, match="manifest"):
        report_command(tmp_path)


def test_continuous_run_with_trajectories(tmp_path):
    data = {"mode": "continuous", "arena": {}, "emit_trajectories": True,
            "grid": {"models": ["rational"], "opponents": ["tft"], "games": ["battle_of_exes"],
                     "dyads_per_cell": 1, "rounds": 3}}
    run_dir = run_command(parse_config(data), tmp_path / "run")
    header = (run_dir / "cells" / "rational__vs__tft__battle_of_exes.csv").read_text().splitlines()[0]
    assert "switches_a" in header and "timeout" in header
    traj = (run_dir / "trajectories" / "rational__vs__tft__battle_of_exes.csv").read_text().splitlines()
    assert traj[0] == "dyad,round,step,seat,x,y,theta,action"
    summary = json.loads((run_dir / "summary.json").read_text())["cells"][0]
    assert summary["timeouts"] == 0
    assert report_command(run_dir).exists()


def test_cli_round_trip(tmp_path, capsys):
    cfg = tmp_path / "smoke.json"
    cfg.write_text(json.dumps(SMOKE))
    assert main(["validate", str(cfg)]) == 0
    assert json.loads(capsys.readouterr().out)["grid"]["rounds"] == 100
    out = tmp_path / "run"
    assert main(["run", str(cfg), "--out", str(out), "--jobs", "2", "--seed", "3", "-q"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["grid"]["base_seed"] == 3
    assert main(["report", str(out)]) == 0
    assert (out / "report" / "plots" / "tft_surprisal.svg").exists()


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"grid": {"models": ["rationale"], "rounds": 0}}))
    assert main(["validate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "grid.models.0" in err and "grid.rounds" in err
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    assert main(["report", str(tmp_path)]) == 1

import csv
import json

import numpy as np
import pytest

from s2fgl.cli import main
from s2fgl.config import ConfigError, load_config, overrides_from_argv
from s2fgl.experiments import sis_curve, spectral_heatmap

FAST = ["--dataset", "sbm-200", "--num_clients", "3", "--rounds", "2", "--hidden", "8", "--k_sim", "5", "--k_eig", "2"]


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# schema: s2fgl-")
    return list(csv.DictReader(lines[1:]))


def test_config_precedence(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("# comment\nrounds = 7\nlr = 0.1\n")
    cfg = load_config(f, {"lr": "0.3"})
    assert (cfg.rounds, cfg.lr, cfg.hidden) == (7, 0.3, 64)


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(None, {"nonsense": "1"})
    with pytest.raises(ConfigError):
        load_config(None, {"rounds": "abc"})
    with pytest.raises(ConfigError):
        load_config(None, {"method": "fedsgd"})
    with pytest.raises(ConfigError):
        load_config(None, {"split": "0.5,0.5,0.5"})
    with pytest.raises(ConfigError):
        overrides_from_argv(["--rounds"])


def test_resolved_config_round_trips(tmp_path):
    cfg = load_config(None, {"seeds": "0,1,2", "lambda1": "2.5"})
    f = tmp_path / "r.cfg"
    f.write_text(cfg.to_text())
    assert load_config(f) == cfg


def test_validate_config_exit_codes(tmp_path, capsys):
    assert main(["validate-config", "--rounds", "3"]) == 0
    assert "rounds = 3" in capsys.readouterr().out
    assert main(["validate-config", "--rounds", "x"]) == 2
    assert main(["validate-config", str(tmp_path / "missing.cfg")]) == 2


def test_runtime_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setenv("S2FGL_OUTPUT_ROOT", str(tmp_path))
    assert main(["sis-curve", "--dataset", str(tmp_path / "nope.txt")]) == 1


def test_run_writes_artifacts(tmp_path, monkeypatch):
    monkeypatch.setenv("S2FGL_OUTPUT_ROOT", str(tmp_path))
    assert main(["run", *FAST, "--output_dir", "out", "--seeds", "0,1"]) == 0
    out = tmp_path / "out"
    assert not (out / "INCOMPLETE").exists()
    rows = read_csv(out / "metrics.csv")
    assert len(rows) == 1 and rows[0]["seeds"] == "0;1"
    log = [json.loads(x) for x in (out / "rounds.jsonl").read_text().splitlines()]
    assert len(log) == 4 and {"ce", "fkd", "fgma", "sis", "wall_time"} <= set(log[0])
    assert (out / "config.resolved").exists()


def test_sis_curve_single_count_is_whole_graph():
    from s2fgl.graph import stratified_split
    from s2fgl.ppr import ppr, sis
    from s2fgl.datasets import PRESETS

    cfg = load_config(None, {"dataset": "sbm-200"})
    (row,) = sis_curve(cfg, [1])
    g = PRESETS["sbm-200"](0)
    whole = sis(ppr(g), stratified_split(g, cfg.split, seed=0).train)
    assert row[0] == 1 and row[1] == pytest.approx(whole)
    assert row[2] == pytest.approx(whole / g.n)


def test_sis_curve_cli(tmp_path, monkeypatch):
    monkeypatch.setenv("S2FGL_OUTPUT_ROOT", str(tmp_path))
    assert main(["sis-curve", "--dataset", "sbm-200", "--client_counts", "1,4"]) == 0
    rows = read_csv(tmp_path / "runs" / "sis_curve.csv")
    assert [r["clients"] for r in rows] == ["1", "4"]


def test_spectral_heatmap_properties(tmp_path, monkeypatch):
    cfg = load_config(None, {"dataset": "sbm-hetero", "num_clients": "4"})
    hists, heat = spectral_heatmap(cfg)
    assert hists.shape == (4, 20)
    np.testing.assert_array_equal(np.diag(heat), 0.0)
    assert (heat >= 0).all() and heat.max() > 0.01
    monkeypatch.setenv("S2FGL_OUTPUT_ROOT", str(tmp_path))
    assert main(["spectral-heatmap", "--dataset", "sbm-hetero", "--num_clients", "4"]) == 0
    assert len(read_csv(tmp_path / "runs" / "spectral_heatmap.csv")) == 4
    assert main(["spectral-heatmap", "--num_clients", "1"]) == 1


def test_ablation_and_sensitivity_cli(tmp_path, monkeypatch):
    monkeypatch.setenv("S2FGL_OUTPUT_ROOT", str(tmp_path))
    assert main(["ablation", *FAST]) == 0
    rows = read_csv(tmp_path / "runs" / "ablation.csv")
    assert [r["variant"] for r in rows] == ["neither", "nlir-only", "fgma-only", "both"]
    assert main(["sensitivity", *FAST, "--nlir_scales", "1", "--fgma_scales", "0.5,1"]) == 0
    rows = read_csv(tmp_path / "runs" / "sensitivity.csv")
    assert [(r["factor"], float(r["scale"])) for r in rows] == [("nlir", 1.0), ("fgma", 0.5), ("fgma", 1.0)]


def test_metrics_byte_identical_on_rerun(tmp_path, monkeypatch):
    monkeypatch.setenv("S2FGL_OUTPUT_ROOT", str(tmp_path))
    texts = []
    for name in ("a", "b"):
        assert main(["run", *FAST, "--output_dir", name]) == 0
        lines = (tmp_path / name / "metrics.csv").read_text().splitlines()
        texts.append([line.rsplit(",", 1)[0] for line in lines])
    assert texts[0] == texts[1]

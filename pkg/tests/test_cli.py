import yaml

from residual_lab import maps
from residual_lab.cli import main


def test_map_validate(tmp_path, capsys):
    assert main(["map", "validate", "doubling"]) == 0
    assert "passed: true" in capsys.readouterr().out
    doc = maps.map_to_dict(maps.doubling_1d())
    doc["pieces"][1]["lo"] = ["3/5"]
    (tmp_path / "bad.yaml").write_text(yaml.safe_dump(doc))
    assert main(["map", "validate", str(tmp_path / "bad.yaml")]) == 1
    (tmp_path / "junk.yaml").write_text("schema: maps/v1\n")
    assert main(["map", "validate", str(tmp_path / "junk.yaml")]) == 2
    assert main(["map", "validate", "no-such"]) == 2


def test_exact(capsys):
    assert main(["exact", "--map", "shifted_doubling"]) == 0
    out = yaml.safe_load(capsys.readouterr().out)
    assert out["theoretical_asyvar"] == 0.5
    assert [c["cube"] for c in out["jump_law"]] == [-1, 0, 1]
    assert main(["exact", "--map", "doubling_2d", "-v", "1,0"]) == 0
    assert yaml.safe_load(capsys.readouterr().out)["theoretical_asyvar"] == 0.25
    assert main(["exact", "--map", "doubling", "-v", "1,0"]) == 2


def test_mixing_and_gk(capsys):
    assert main(["mixing", "--map", "doubling", "--epsilon", "0.05", "--resolution", "256"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "# t_mix: 3" and lines[1] == "k,tv" and len(lines) == 6
    assert main(["mixing", "--map", "doubling", "--epsilon", "0.05", "--resolution", "8"]) == 2
    assert main(["gk", "--map", "doubling", "--nmax", "3", "--grid", "1024"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "k,cov,partial_sum" and len(lines) == 5


def test_simulate(tmp_path, capsys):
    cfg = tmp_path / "s.yaml"
    cfg.write_text("schema: sim/v1\nmap: doubling\nepsilon: 0.01\nn_steps: 20\nn_paths: 2000\n"
                   "record_decomposition: true\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == 0
    rows = (tmp_path / "o.csv").read_text().splitlines()
    assert rows[0].startswith("n,count,mean_vX,var_vX,mean_vS") and len(rows) == 22
    cfg.write_text("schema: sim/v1\nmap: doubling\nepsilon: 3\nn_steps: 20\nn_paths: 20\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == 2


def _exp(tmp_path, **kw):
    doc = {"schema": "exp/v1", "maps": ["doubling"], "epsilons": [0.1, 0.05], "n_steps": 200,
           "n_paths": 4000, **kw}
    p = tmp_path / "e.yaml"
    p.write_text(yaml.safe_dump(doc))
    return str(p)


def test_sweep_and_init_study(tmp_path, capsys):
    assert main(["sweep", "--config", _exp(tmp_path), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "sweep.csv").exists()
    assert main(["init-study", "--config", _exp(tmp_path, initials=["uniform", "point(0)"]),
                 "--out", str(tmp_path / "i.csv")]) == 0
    assert "uniform" in (tmp_path / "i.csv").read_text()
    assert main(["sweep", "--config", _exp(tmp_path, epsilons=[0.01, 0.1])]) == 2


def test_verify_exit_codes(tmp_path, capsys):
    path = _exp(tmp_path)
    assert main(["verify", "--config", path, "--only", "map_validation",
                 "green_kubo_plateau"]) == 0
    out = capsys.readouterr().out
    assert "green_kubo_plateau" in out and "stationarity" not in out
    doc = maps.map_to_dict(maps.doubling_1d())
    doc["pieces"][0]["hi"] = ["2/5"]
    (tmp_path / "bad.yaml").write_text(yaml.safe_dump(doc))
    assert main(["verify", "--config", _exp(tmp_path, maps=["bad.yaml"])]) == 1

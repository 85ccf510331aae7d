import json
import subprocess
import sys

import numpy as np
import pytest

from schwarz_pinn.cli import main
from schwarz_pinn.config import (
    SEED_ENV,
    ConfigError,
    build_run_config,
    build_sweep_grid,
    load_document,
    parse_override,
)
from schwarz_pinn.fom import read_solution_csv

FOM_RUN = {"schema_version": 1, "pe": 10, "n_d": 2, "p_o": 0.2, "solvers": ["fom"]}


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return path


@pytest.mark.parametrize("text, expected", [
    ("pe=1e6", ("pe", 1e6)),
    ("solvers=[pinn,fom]", ("solvers", ["pinn", "fom"])),
    ('solvers=["pinn","fom"]', ("solvers", ["pinn", "fom"])),
    ("solvers='[pinn,fom]'", ("solvers", ["pinn", "fom"])),
    ("dbc_mode=MDBC", ("dbc_mode", "MDBC")),
    ("use_data_loss=True", ("use_data_loss", True)),
    ("n_d=3", ("n_d", 3)),
])
def test_parse_override(text, expected):
    assert parse_override(text) == expected


def test_parse_override_rejects():
    with pytest.raises(ConfigError):
        parse_override("pe")
    with pytest.raises(ConfigError):
        parse_override("=3")


def test_build_run_config_defaults_and_types():
    cfg = build_run_config(None, env={})
    assert cfg.pe == 10.0 and cfg.n_d == 2 and cfg.max_iters == 100 and cfg.seed == 0
    cfg = build_run_config(FOM_RUN, ["pe=100", "n_d=3.0"], env={})
    assert cfg.pe == 100.0 and cfg.n_d == 3 and isinstance(cfg.n_d, int)


@pytest.mark.parametrize("doc, field", [
    ({"n_d": 0}, "n_d"),
    ({"n_d": 2.5}, "n_d"),
    ({"bogus": 1}, "bogus"),
    ({"use_data_loss": "yes"}, "use_data_loss"),
    ({"p_o": 1.2}, "p_o"),
])
def test_build_run_config_errors_name_field(doc, field):
    with pytest.raises(ConfigError) as info:
        build_run_config({"schema_version": 1, **doc}, env={})
    assert info.value.field == field
    assert str(info.value).startswith(field)


def test_seed_from_environment():
    assert build_run_config(None, env={SEED_ENV: "7"}).seed == 7
    assert build_run_config({"schema_version": 1, "seed": 3}, env={SEED_ENV: "7"}).seed == 3
    with pytest.raises(ConfigError):
        build_run_config(None, env={SEED_ENV: "x"})
    grid = build_sweep_grid({"schema_version": 1, "n_d": [2], "p_o": [0.2]}, env={SEED_ENV: "4"})
    assert grid.seeds == [4, 5, 6]


def test_load_document(tmp_path):
    assert load_document(write_json(tmp_path / "a.json", FOM_RUN))["pe"] == 10
    with pytest.raises(ConfigError, match="schema_version"):
        load_document(write_json(tmp_path / "b.json", {"pe": 10}))
    with pytest.raises(ConfigError, match="schema_version"):
        load_document(write_json(tmp_path / "c.json", {"schema_version": 2}))
    (tmp_path / "d.json").write_text("{")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_document(tmp_path / "d.json")
    with pytest.raises(ConfigError, match="not found"):
        load_document(tmp_path / "missing.json")


def test_sweep_grid_rejects_unknown_keys():
    with pytest.raises(ConfigError) as info:
        build_sweep_grid({"schema_version": 1, "n_cells": [3]}, env={})
    assert info.value.field == "n_cells"
    with pytest.raises(ConfigError) as info:
        build_sweep_grid({"schema_version": 1, "base": {"epochs": 3}}, env={})
    assert info.value.field == "epochs"


def test_cli_solve_fom_fom(tmp_path, capsys):
    cfg = write_json(tmp_path / "run.json", FOM_RUN)
    out = tmp_path / "out"
    code = main(["solve", str(cfg), "--out", str(out), "--quiet", "--run-id", "r"])
    assert code == 0
    status = json.loads(capsys.readouterr().out)
    assert status["status"] == "Converged"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "Converged" and summary["config"]["solvers"] == ["fom"]
    for name in ("trace.csv", "timing.csv", "profile_r.csv", f"snap_r_{status['iterations']}.csv"):
        assert (out / name).exists(), name


def test_cli_solve_bad_field(tmp_path, capsys):
    cfg = write_json(tmp_path / "run.json", {**FOM_RUN, "n_d": 0})
    assert main(["solve", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == 1
    assert "n_d" in capsys.readouterr().err


def test_cli_set_is_echoed(tmp_path):
    out = tmp_path / "o"
    code = main(["solve", "--out", str(out), "--quiet", "--set", "pe=1e6",
                 "--set", "solvers='[pinn,fom]'", "--set", "max_iters=1",
                 "--set", "epochs_per_iter=2", "--set", "n_collocation=32",
                 "--set", "layer_sizes=[1,3,1]"])
    assert code == 2
    cfg = json.loads((out / "summary.json").read_text())["config"]
    assert cfg["pe"] == 1e6 and cfg["solvers"] == ["pinn", "fom"]


def test_cli_fom(tmp_path, capsys):
    out = tmp_path / "u.csv"
    assert main(["fom", "--pe", "10", "--n-cells", "64", "--out", str(out)]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("l2_rel_error ") and float(line.split()[1]) < 1e-3
    x, u = read_solution_csv(out)
    assert x.size == 65 and u[0] == 0.0 and u[-1] == 0.0
    assert np.all(np.diff(x) > 0)


def test_cli_fom_requires_out():
    with pytest.raises(SystemExit) as info:
        main(["fom", "--pe", "10"])
    assert info.value.code == 1


def test_cli_fom_rejects_bad_values(tmp_path):
    assert main(["fom", "--pe", "-1", "--out", str(tmp_path / "u.csv")]) == 1
    assert main(["fom", "--n-cells", "1", "--out", str(tmp_path / "u.csv")]) == 1


def test_cli_sweep_and_reports(tmp_path, capsys):
    grid = write_json(tmp_path / "grid.json", {
        "schema_version": 1, "n_d": [2], "p_o": [0.2, 0.35], "dbc_modes": ["WDBC"],
        "data": [False], "pe": [10], "seeds": [0], "base": {"solvers": ["fom"]},
    })
    out = tmp_path / "s"
    assert main(["sweep", str(grid), "--out", str(out), "--quiet"]) == 0
    assert main(["sweep", str(grid), "--out", str(out), "--quiet"]) == 1
    assert main(["sweep", str(grid), "--out", str(out), "--quiet", "--force"]) == 0
    capsys.readouterr()
    assert main(["report", "pareto", "--sweep-dir", str(out)]) == 0
    assert "1 rows" in capsys.readouterr().out
    rid = "pe10_nd2_po0.2_WDBC_nodata_s0"
    assert main(["report", "profile", "--sweep-dir", str(out), "--run-id", rid]) == 0
    assert (out / f"profile_{rid}.csv").exists()
    assert main(["report", "profile", "--sweep-dir", str(out), "--run-id", "nope"]) == 1
    assert main(["report", "pareto", "--sweep-dir", str(tmp_path / "empty")]) == 1


def test_cli_unknown_command():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1


def test_module_entry_point(tmp_path):
    out = tmp_path / "u.csv"
    proc = subprocess.run([sys.executable, "-m", "schwarz_pinn", "fom", "--n-cells", "16",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()

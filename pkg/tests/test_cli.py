import json

import pytest

from levelcg.cli import main
from levelcg.config import RunConfig, load_config
from levelcg.errors import ConfigError

TINY = """\
[sde]
epsilons = [0.5]
n = 50
dt = 1e-3
t_final = 0.05
snapshot_dt = 0.01
seed = 7

[tables]
points_per_edge = 48

[fp]
cells_per_edge = 96

[duality]
family_size = 4
n = 40
"""


@pytest.fixture()
def tiny_config(tmp_path):
    p = tmp_path / "tiny.toml"
    p.write_text(TINY)
    return str(p)


def test_default_config_valid():
    cfg = load_config(None)
    cfg.validate()
    assert cfg.sde.epsilons == (0.5, 0.2, 0.1, 0.05)
    assert json.loads(cfg.to_json())["potential"]["coefficients"] == \
        [0.25, 0.0, -0.5, 0.0, 0.25]


def test_config_rejects_unknown_section(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[nonsense]\nx = 1\n")
    with pytest.raises(ConfigError, match="nonsense"):
        load_config(str(p))


def test_config_rejects_unknown_key(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[sde]\nepzilon = 0.5\n")
    with pytest.raises(ConfigError, match="epzilon"):
        load_config(str(p))


def test_config_error_names_field(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[sde]\nepsilons = [0.5, -0.1]\n")
    with pytest.raises(ConfigError, match="sde.epsilons"):
        load_config(str(p))


def test_config_snapshot_grid(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[sde]\ndt = 1e-3\nsnapshot_dt = 0.0015\n")
    with pytest.raises(ConfigError, match="snapshot_dt"):
        load_config(str(p))


def test_cli_bad_config_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("[sde]\nepsilons = [-1.0]\n")
    rc = main(["simulate", "--config", str(p), "--out", str(tmp_path)])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_cli_simulate_outputs(tmp_path, tiny_config, capsys):
    out = tmp_path / "out"
    assert main(["simulate", "--config", tiny_config, "--out", str(out)]) == 0
    traj = (out / "trajectory.csv").read_text().splitlines()
    assert traj[0].startswith("# schema: levelcg-v1/trajectory.csv")
    assert traj[1].startswith("# config: ")
    assert traj[2] == "t,q,p"
    assert len(traj) == 3 + 51  # header + t=0..0.05 at dt=1e-3
    proj = (out / "projection.csv").read_text().splitlines()
    assert proj[2] == "t,q,p,h,edge"
    assert len(proj) == len(traj)


def test_cli_coefficients_outputs(tmp_path, tiny_config):
    out = tmp_path / "out"
    assert main(["coefficients", "--config", tiny_config, "--out", str(out)]) == 0
    rows = (out / "coefficients.csv").read_text().splitlines()
    assert rows[2] == "edge_id,h,S,T,p2_avg"
    assert len(rows) == 3 + 3 * 48
    gluing = json.loads((out / "gluing.json").read_text())
    assert gluing["schema"] == "levelcg-v1/gluing.json"
    assert abs(sum(gluing["p"].values()) - 1.0) < 1e-12
    graph = json.loads((out / "graph.json").read_text())
    assert {e["id"] for e in graph["edges"]} == \
        {"left_well", "right_well", "above_saddle"}


def test_cli_rerun_byte_identical(tmp_path, tiny_config):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["simulate", "--config", tiny_config, "--out", str(out)]) == 0
    assert (out1 / "trajectory.csv").read_bytes() == \
        (out2 / "trajectory.csv").read_bytes()


def test_cli_seed_override_changes_output(tmp_path, tiny_config):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", tiny_config, "--out", str(out1)]) == 0
    assert main(["simulate", "--config", tiny_config, "--out", str(out2),
                 "--seed", "99"]) == 0
    assert (out1 / "trajectory.csv").read_bytes() != \
        (out2 / "trajectory.csv").read_bytes()


def test_cli_converge_thread_invariant(tmp_path, tiny_config):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["converge", "--config", tiny_config, "--out", str(out1),
                 "--threads", "1"]) == 0
    assert main(["converge", "--config", tiny_config, "--out", str(out2),
                 "--threads", "4"]) == 0
    assert (out1 / "converge.json").read_bytes() == \
        (out2 / "converge.json").read_bytes()
    doc = json.loads((out1 / "converge.json").read_text())
    row = doc["rows"][0]
    assert set(row) == {"epsilon", "sup_w1", "terminal_w1",
                        "left_mass", "right_mass"}


def test_cli_threads_env_fallback(tmp_path, tiny_config, monkeypatch):
    monkeypatch.setenv("LEVELCG_THREADS", "2")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["converge", "--config", tiny_config, "--out", str(out1)]) == 0
    monkeypatch.delenv("LEVELCG_THREADS")
    assert main(["converge", "--config", tiny_config, "--out", str(out2)]) == 0
    assert (out1 / "converge.json").read_bytes() == \
        (out2 / "converge.json").read_bytes()


def test_cli_duality_output(tmp_path, tiny_config):
    out = tmp_path / "out"
    assert main(["duality", "--config", tiny_config, "--out", str(out)]) == 0
    doc = json.loads((out / "duality.json").read_text())
    assert doc["schema"] == "levelcg-v1/duality.json"
    per = doc["per_epsilon"][0]
    assert per["epsilon"] == 0.5
    assert len(per["rows"]) == 4
    assert "sup_j_hat_zero" in doc


def test_run_config_to_json_round_trip():
    cfg = RunConfig()
    doc = json.loads(cfg.to_json())
    assert doc["fp"]["cells_per_edge"] == 512
    assert doc["graph_mc"]["dt_h"] == 2.5e-6

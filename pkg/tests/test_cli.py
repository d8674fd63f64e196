import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from conav.cli import main
from conav.config import load_config, shipped_configs
from conav.errors import ConfigError
from conav.output import read_trajectory_csv, trajectory_csv
from conav.scenarios import build


def _run(tmp_path, *args, sub="out"):
    out = tmp_path / sub
    return main([*args, "--out", str(out)]), out


def _kv(text, key):
    m = re.search(rf"^{key} = (\S+)", text, re.M)
    return m.group(1)


def test_solve_empty(tmp_path):
    code, out = _run(tmp_path, "solve", "--config", "empty")
    assert code == 0
    rep = (out / "report.txt").read_text()
    assert float(_kv(rep, "spl")) == pytest.approx(1.0)
    assert (out / "trajectories.csv").exists() and (out / "scene.svg").exists()


def test_solve_warehouse_no_collisions(tmp_path):
    code, out = _run(tmp_path, "solve", "--config", "warehouse")
    assert code == 0
    rep = (out / "report.txt").read_text()
    assert float(_kv(rep, "num_coll")) == 0.0
    assert _kv(rep, "passed") == "True"


@pytest.mark.parametrize(
    "args",
    [
        ["solve", "--config", "no_such_config"],
        ["solve", "--config", "toy", "--set", "bilevel.step_size=fast"],
        ["solve", "--config", "toy", "--set", "params.not_a_param=1"],
        ["solve", "--config", "toy", "--set", "nonsense=1"],
        ["solve", "--config", "toy", "--set", "theta0=[1.0, 2.0]"],
        ["frobnicate", "--config", "toy"],
    ],
)
def test_bad_configs_exit_1(tmp_path, args):
    code, _ = _run(tmp_path, *args)
    assert code == 1


def test_malformed_yaml_exit_1(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario: toy\nbilevel: [1, 2\n")
    assert _run(tmp_path, "solve", "--config", str(bad))[0] == 1
    bad.write_text("scenario: toy\nsolver:\n  max_iters: 3\n")
    with pytest.raises(ConfigError, match="solver.max_iters"):
        load_config(str(bad))


def test_nonconvergence_exit_2(tmp_path):
    code, out = _run(tmp_path, "solve", "--config", "warehouse_mini", "--set", "solver.max_iter=2")
    assert code == 2
    assert "status = max_iter" in (out / "report.txt").read_text()


def test_every_shipped_config_loads():
    for name in shipped_configs():
        cfg = load_config(name)
        cfg.build().audit()


def test_seed_changes_layout():
    a = load_config("warehouse", seed=1).build()
    b = load_config("warehouse", seed=2).build()
    assert not np.array_equal(a.theta0, b.theta0)


def test_cooptimize_two_obstacle_improves(tmp_path):
    code, out = _run(tmp_path, "cooptimize", "--config", "two_obstacle", "--set", "bilevel.max_iter=5")
    assert code == 0
    rep = (out / "report.txt").read_text()
    assert float(_kv(rep, "F_final")) > float(_kv(rep, "F_initial"))
    for f in ("trace.txt", "theta.txt", "before.svg", "after.svg", "trajectories.csv", "trajectories_initial.csv"):
        assert (out / f).exists()


def test_cooptimize_zero_budget_keeps_theta(tmp_path):
    code, out = _run(tmp_path, "cooptimize", "--config", "toy", "--set", "bilevel.max_iter=0", "--set", "theta0=[0.25]")
    assert code == 0
    theta = np.loadtxt(out / "theta.txt")
    assert float(theta) == 0.25


def test_cooptimize_byte_identical(tmp_path):
    args = ["cooptimize", "--config", "toy", "--set", "bilevel.max_iter=3", "--seed", "5"]
    assert _run(tmp_path, *args, sub="a")[0] == 0
    assert _run(tmp_path, *args, sub="b")[0] == 0
    for f in ("trace.txt", "trajectories.csv", "theta.txt", "after.svg"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_solve_byte_identical(tmp_path):
    for sub in ("a", "b"):
        assert _run(tmp_path, "solve", "--config", "warehouse_mini", "--seed", "3", sub=sub)[0] == 0
    assert (tmp_path / "a" / "trajectories.csv").read_bytes() == (tmp_path / "b" / "trajectories.csv").read_bytes()


@pytest.mark.slow
def test_cooptimize_stochastic_trace(tmp_path):
    code, out = _run(
        tmp_path, "cooptimize", "--config", "warehouse_stochastic",
        "--set", "bilevel.max_iter=1", "--set", "bilevel.batch_size=4", "--set", "heldout=[]",
        "--set", "emit.svg=false", "--set", "emit.csv=false",
    )
    assert code == 0
    trace = (out / "trace.txt").read_text().splitlines()
    assert trace[0] == "kappa, F, grad_norm, step, status"
    rows = [r.split(", ") for r in trace[1:] if r and r[0].isdigit()]
    assert rows[0][4] == "initial" and len(rows) == 2
    assert "batch_size = 4" in (out / "report.txt").read_text()


def test_validate_toy_passes(tmp_path):
    code, out = _run(tmp_path, "validate", "--config", "toy")
    assert code == 0
    text = (out / "validate.txt").read_text()
    assert "FAIL" not in text and "PASS ift_sensitivity_fd" in text


def test_validate_tampered_fails(tmp_path):
    code, out = _run(tmp_path, "validate", "--config", "toy", "--set", "validate.tamper=true")
    assert code == 3
    text = (out / "validate.txt").read_text()
    assert "FAIL upper_gradient_fd" in text and "FAIL ift_sensitivity_fd" in text


def test_validate_warehouse_mini(tmp_path):
    code, out = _run(tmp_path, "validate", "--config", "warehouse_mini")
    assert code == 0, (out / "validate.txt").read_text()


# ---------------------------------------------------------------- formats


@pytest.mark.parametrize("model", ["double_integrator", "unicycle"])
def test_csv_round_trip(tmp_path, rng, model):
    from conav.dynamics import get_model

    m = get_model(model)
    X = rng.normal(size=(3, 6, m.nx)) * 10.0
    U = rng.normal(size=(3, 5, m.nu))
    path = tmp_path / "t.csv"
    path.write_text(trajectory_csv(m, X, U, 0.5))
    cols, P, extra, U2 = read_trajectory_csv(path)
    assert cols[:5] == ["agent", "t", "time_s", "x", "y"] and cols[-m.nu :] == list(m.control_labels)
    np.testing.assert_allclose(P, m.position(X), rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(U2, U, rtol=1e-8, atol=1e-12)
    assert extra.shape == (3, 6, len(cols) - 5 - m.nu)


def test_csv_format(tmp_path):
    from conav.dynamics import get_model

    m = get_model("double_integrator")
    text = trajectory_csv(m, np.full((1, 2, 4), 1 / 3), np.zeros((1, 1, 2)), 0.5)
    lines = text.splitlines()
    assert lines[0] == "agent,t,time_s,x,y,vx,vy,ux,uy"
    assert lines[1] == "0,0,0,0.333333333,0.333333333,0.333333333,0.333333333,0,0"
    assert lines[2].endswith(",,")


def test_svg_is_valid(tmp_path):
    code, out = _run(tmp_path, "solve", "--config", "two_obstacle")
    assert code == 0
    root = ET.parse(out / "scene.svg").getroot()
    assert root.tag.endswith("svg")
    sc = build("two_obstacle")
    x0, x1, y0, y1 = sc.workspace
    vb = [float(v) for v in root.get("viewBox").split()]
    assert vb == pytest.approx([0, 0, x1 - x0 + 1.0, y1 - y0 + 1.0])
    tags = [el.tag.split("}")[1] for el in root]
    assert tags.count("polyline") == sc.n_agents
    assert tags.count("polygon") == sc.n_agents  # goal stars
    assert tags.count("circle") == sc.n_obstacles + sc.n_agents

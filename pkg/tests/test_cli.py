import json
import math

import numpy as np
import pytest
import yaml

from posconsensus.cli import cmd_check, cmd_reference_example, cmd_run, cmd_synthesize, main
from posconsensus.output import read_trace_csv
from posconsensus.scenario_file import (
    ScenarioFileError,
    ScenarioValidationError,
    emit_scenario,
    loads_scenario,
    parse_scenario,
    reference_example_text,
)
from posconsensus.sim import convergence_from_errors

from conftest import A0, AGENTS, C0, G1, G2, K1, K3


def example_dict():
    return yaml.safe_load(reference_example_text())


def write(tmp_path, data, name="s.yaml"):
    p = tmp_path / name
    p.write_text(data if isinstance(data, str) else yaml.safe_dump(data), encoding="utf-8")
    return p


def test_bundled_example_matches_reference_data(example):
    assert np.array_equal(example.leader.A0, A0) and np.array_equal(example.leader.C0, C0)
    for a, (A, B, C), g, k1, k3 in zip(example.agents, AGENTS, example.gains.agents, K1, K3):
        assert np.array_equal(a.A, A) and np.array_equal(a.B, B) and np.array_equal(a.C, C)
        assert np.array_equal(g.K1, k1) and np.array_equal(g.K3, k3)
        assert g.provenance == {"K1": "user", "K3": "user", "K2": "synthesized"}
    assert example.schedule.family == (G1, G2)
    assert example.schedule.block == 20 and example.mu == 0.3


def test_parse_error_reports_line_and_field():
    text = reference_example_text().replace("B: [[1], [1]]", "B: [[1], [oops]]")
    with pytest.raises(ScenarioFileError) as exc:
        loads_scenario(text)
    assert exc.value.field == "agents.1.B"
    assert exc.value.line == 13
    assert "line 13" in str(exc.value)


def test_unknown_key_rejected():
    data = example_dict()
    data["agents"][0]["D"] = [[0]]
    with pytest.raises(ScenarioFileError, match="D"):
        loads_scenario(yaml.safe_dump(data))
    data = example_dict()
    data["extra"] = 1
    with pytest.raises(ScenarioFileError, match="extra"):
        loads_scenario(yaml.safe_dump(data))


def test_weighted_edges_rejected():
    data = example_dict()
    data["graphs"][0]["edges"] = [[0, 2, 0.5]]
    with pytest.raises(ScenarioFileError):
        loads_scenario(yaml.safe_dump(data))


def test_invalid_yaml_reports_line():
    with pytest.raises(ScenarioFileError, match="line"):
        loads_scenario("leader: {A0: [[1]]\nagents: [")


def test_negative_input_matrix_is_a_validation_error():
    data = example_dict()
    data["agents"][1]["B"] = [[1], [-1]]
    with pytest.raises(ScenarioValidationError, match=r"positivity\[2\].*B has negative"):
        loads_scenario(yaml.safe_dump(data))


def test_mu_above_bound_is_a_validation_error():
    data = example_dict()
    data["mu"] = 0.4
    with pytest.raises(ScenarioValidationError, match=r"observer_gain_bound.*0\.3333333333"):
        loads_scenario(yaml.safe_dump(data))


def test_auto_mu():
    data = example_dict()
    data["mu"] = "auto"
    assert loads_scenario(yaml.safe_dump(data)).mu == pytest.approx(0.3, abs=1e-12)


def test_seed_override_changes_initial_state():
    a = loads_scenario(reference_example_text())
    b = loads_scenario(reference_example_text(), seed=7)
    assert not np.array_equal(a.x0, b.x0)
    assert all(np.all((v >= 0) & (v <= 10)) for v in [b.x0, *b.x_init])


def test_round_trip(example):
    assert loads_scenario(emit_scenario(example)) == example
    again = loads_scenario(emit_scenario(example), validate=False, synthesize=False)
    assert again == example


def test_round_trip_with_observer_start_and_list_schedule(example):
    import dataclasses
    from posconsensus.graph import GraphSchedule
    s = dataclasses.replace(example, mode="output", horizon=7, w_init=[np.full(2, 0.1)] * 3,
                            eta_init=[np.zeros(2)] * 3,
                            schedule=GraphSchedule(family=(G1, G2), kind="list", order=(2, 1, 2)))
    assert loads_scenario(emit_scenario(s), validate=False) == s


def test_check_passes_on_example(tmp_path, capsys):
    assert cmd_check(write(tmp_path, reference_example_text())) == 0
    out = capsys.readouterr().out
    assert "RESULT: PASS" in out


def test_check_detects_unstable_leader(tmp_path):
    data = example_dict()
    data["leader"]["A0"] = (1.01 * np.array(data["leader"]["A0"])).tolist()
    assert main(["check", str(write(tmp_path, data))]) == 2


def test_check_detects_missing_leader_link(tmp_path, capsys):
    data = example_dict()
    data["graphs"][1]["edges"] = []
    assert main(["check", str(write(tmp_path, data))]) == 2
    assert "connectivity[2]" in capsys.readouterr().out


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "run"
    assert main(["run", str(write(tmp_path, reference_example_text())), "--out", str(out)]) == 0
    for name in ("trace.csv", "summary.json", "plot_observer.csv", "plot_outputs.csv", "plot_states.csv"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["positivity"]["pass"] and summary["convergence"]["pass"]
    gc = summary["graph_constants"]
    assert gc["delta"] == 3 and abs(gc["mu_max"] - 1 / 3) < 1e-12
    assert max(summary["regulator_residuals"]) < 1e-10


def test_run_output_mode_has_eta_columns(tmp_path):
    out = tmp_path / "run"
    path = write(tmp_path, reference_example_text())
    assert cmd_run(path, out, mode="output", horizon=30) == 0
    rows = read_trace_csv(out / "trace.csv")
    follower = [r for r in rows if r["agent"] != "leader"]
    assert follower[0]["eta_1"] == "0.0" and follower[-1]["eta_1"] != ""


def test_run_horizon_zero(tmp_path):
    out = tmp_path / "run"
    assert cmd_run(write(tmp_path, reference_example_text()), out, horizon=0) == 0
    rows = read_trace_csv(out / "trace.csv")
    assert {r["k"] for r in rows} == {"0"}
    assert len(rows) == 4
    assert all(r["u_1"] == "" for r in rows)


def test_run_assumption_failure_exit_code(tmp_path):
    data = example_dict()
    data["mu"] = 0.5
    path = write(tmp_path, data)
    assert main(["run", str(path), "--out", str(tmp_path / "r")]) == 2


def test_run_invariant_violation_exit_code(tmp_path):
    data = example_dict()
    data.update(mu=0.5, mode="observer", horizon=40,
                initial={"x0": [0.0, 0.0], "x": [[0, 0]] * 3, "w": [[0, 0], [5.0, 5.0], [0, 0]]})
    out = tmp_path / "r"
    assert main(["run", str(write(tmp_path, data)), "--out", str(out), "--override-assumptions"]) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["outside_hypotheses"] and not summary["positivity"]["pass"]


def _floats(rows, prefix):
    cols = [c for c in rows[0] if c.startswith(prefix)]
    return np.array([[float(r[c]) if r[c] != "" else math.nan for c in cols] for r in rows])


@pytest.mark.parametrize("mode", ["state", "output", "observer"])
def test_summary_recomputable_from_trace(tmp_path, mode):
    out = tmp_path / mode
    assert cmd_run(write(tmp_path, reference_example_text()), out, mode=mode, horizon=250) == 0
    summary = json.loads((out / "summary.json").read_text())
    rows = read_trace_csv(out / "trace.csv")
    H = summary["horizon"]
    leader = [r for r in rows if r["agent"] == "leader"]
    follower = [r for r in rows if r["agent"] != "leader"]
    N = summary["n_followers"]
    assert len(leader) == H + 1 and len(follower) == N * (H + 1)

    states = np.concatenate([_floats(follower, "x_"), _floats(follower, "w_")], axis=1)
    assert np.nanmin(states) == summary["positivity"]["min_state_entry"]
    assert int(np.sum(states < -1e-12)) == summary["positivity"]["violation_count"]

    x0 = _floats(leader, "x_")
    w = _floats(follower, "w_").reshape(H + 1, N, -1)
    e = _floats(follower, "e_").reshape(H + 1, N, -1)
    y = _floats(follower, "y_").reshape(H + 1, N, -1)
    y0 = _floats(leader, "y_")
    assert np.array_equal(e, y - y0[:, None, :])

    obs = convergence_from_errors(np.abs(x0[:, None, :] - w).max(axis=(1, 2)), summary["convergence"]["threshold"])
    assert obs.first_step == summary["observer_convergence"]["first_step"]
    assert obs.tail_error == summary["observer_convergence"]["tail_error"]
    errs = np.abs(x0[:, None, :] - w).max(axis=(1, 2)) if mode == "observer" else np.abs(e).max(axis=(1, 2))
    conv = convergence_from_errors(errs, summary["convergence"]["threshold"])
    assert conv.first_step == summary["convergence"]["first_step"]
    assert conv.tail_error == summary["convergence"]["tail_error"]
    if mode == "output":
        eta = _floats(follower, "eta_")
        assert summary["positivity"]["eta_min"] == np.nanmin(eta)


def test_synthesize_fills_stripped_gains(tmp_path):
    data = example_dict()
    for a in data["agents"]:
        a.pop("K1")
        a.pop("K3")
    src, dst = write(tmp_path, data), tmp_path / "full.yaml"
    assert cmd_synthesize(src, dst) == 0
    filled = yaml.safe_load(dst.read_text())
    assert all({"K1", "K2", "K3"} <= set(a) for a in filled["agents"])
    assert cmd_check(dst) == 0
    assert cmd_check(dst, mode="output") == 0


def test_synthesize_keeps_complete_gains(tmp_path):
    src, dst = write(tmp_path, reference_example_text()), tmp_path / "full.yaml"
    assert cmd_synthesize(src, dst) == 0
    before = parse_scenario(src)
    after = parse_scenario(dst)
    assert after.gains == before.gains


def test_synthesize_reports_unstabilizable_agent(tmp_path, capsys):
    data = example_dict()
    # no actuation on the unstable mode
    data["agents"][1].update(A=[[1.2, 0], [0.3, 0.7]], B=[[0], [1]])
    data["agents"][1].pop("K1")
    assert cmd_synthesize(write(tmp_path, data), tmp_path / "out.yaml") == 2
    assert "agent 2" in capsys.readouterr().out
    assert not (tmp_path / "out.yaml").exists()


def test_bundled_example_command(tmp_path, capsys):
    assert cmd_reference_example(tmp_path) == 0
    for mode in ("observer", "state", "output"):
        summary = json.loads((tmp_path / mode / "summary.json").read_text())
        assert summary["mode"] == mode
        assert summary["positivity"]["pass"] and summary["convergence"]["pass"]
    assert main(["paper-example", "--out", str(tmp_path / "again")]) == 0

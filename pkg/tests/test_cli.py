import copy
import json
import math
import os

import pytest

from fracboussinesq.cli import main
from fracboussinesq.config import parse_config
from fracboussinesq.snapshots import save_field
from fracboussinesq.solver import Constants, SolverConfig, small_data

SOLVER = {"n": 3, "alpha": 1.0, "T": 1.0, "N": 8, "L": 2 * math.pi, "M": 16,
          "picard_tol": 1e-10, "picard_max_iters": 40, "mode": "FiniteHorizon"}
GIVEN = {"source": "given", "k1": 1.5, "k2": 0.008, "k3": 0.009}
BASE = {"solver": SOLVER, "data": {"fraction": 0.5, "seed": 3}, "constants": GIVEN,
        "scaling": {"lambda": 2}, "uniqueness": {}}
CALC = {"calculus": {"resolutions": [16], "seed_count": 2, "audits": [
    {"inequality": "Product", "s": -0.5, "s1": 0.5, "s2": 0.5},
    {"inequality": "Interpolation", "s_lo": 0.0, "s_mid": 0.5, "s_hi": 1.0},
]}}


def invoke(tmp_path, doc, command="solve", name="out", extra=()):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(doc))
    out = tmp_path / name
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def load(out, name):
    return json.loads((out / name).read_text())


def test_solve_small_data(tmp_path):
    code, out = invoke(tmp_path, BASE)
    assert code == 0
    rep = load(out, "report.json")
    assert rep["fixed_point"]["converged"]
    assert rep["etd"]["within_10x_tolerance"]
    assert rep["pressure"]["max_momentum_residual"] < rep["pressure"]["limit"]
    lines = (out / "norms.csv").read_text().splitlines()
    assert lines[0].startswith("t,u_sup_index")
    assert len(lines) == 1 + SOLVER["M"] + 1
    man = load(out, "manifest.json")
    assert man["exit_code"] == 0
    assert set(man["artifacts"]) == {"config.json", "report.json", "norms.csv"}
    assert man["data_seed"] == 3


def test_reruns_are_byte_identical(tmp_path):
    doc = dict(BASE, constants={"seed_count": 2, "N": 8, "M": 16}, solve={"save_state": True})
    assert invoke(tmp_path, doc, name="a")[0] == 0
    assert invoke(tmp_path, doc, name="b")[0] == 0
    a, b = tmp_path / "a", tmp_path / "b"
    names = sorted(os.listdir(a))
    assert names == sorted(os.listdir(b))
    assert "u_final.npz" in names
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_output_config_round_trips(tmp_path):
    code, out = invoke(tmp_path, BASE)
    written = load(out, "config.json")
    assert parse_config(written) == written == parse_config(BASE)


def test_inadmissible_alpha_exits_2(tmp_path, capsys):
    doc = copy.deepcopy(BASE)
    doc["solver"]["alpha"] = 2.0
    code, _ = invoke(tmp_path, doc)
    assert code == 2
    assert "(2+n)/4" in capsys.readouterr().err


def test_bad_product_exponents_exit_2(tmp_path, capsys):
    doc = copy.deepcopy(CALC)
    doc["calculus"]["audits"][0]["s2"] = 0.75
    code, out = invoke(tmp_path, doc, "calculus-audit")
    assert code == 2
    assert "s1 + s2 = s + n/2" in capsys.readouterr().err
    assert not (out / "audit_summary.json").exists()


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d["solver"].pop("picard_tol"), "solver.picard_tol"),
    (lambda d: d["data"].update(seed="x"), "data.seed"),
    (lambda d: d.update(extra={}), "extra"),
    (lambda d: d.pop("constants"), "constants"),
])
def test_malformed_config_exits_1(tmp_path, capsys, mutate, field):
    doc = copy.deepcopy(BASE)
    mutate(doc)
    code, _ = invoke(tmp_path, doc)
    assert code == 1
    assert f"config error: {field}:" in capsys.readouterr().err


def test_unparseable_config_exits_1(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "invalid JSON" in capsys.readouterr().err


def test_bad_seed_list_exits_1(tmp_path):
    assert invoke(tmp_path, BASE, extra=["--seeds", "1,x"])[0] == 1
    assert invoke(tmp_path, BASE, extra=["--seeds", ","])[0] == 1


def test_large_data_exits_3_with_report(tmp_path):
    doc = copy.deepcopy(BASE)
    doc["data"]["fraction"] = 1e5
    code, out = invoke(tmp_path, doc)
    assert code == 3
    rep = load(out, "report.json")
    assert rep["fixed_point"]["status"] in ("diverged", "max_iters")
    assert (out / "norms.csv").read_text() == (
        "t,u_sup_index,u_l2_index,u_rate_index,theta_sup_index,theta_l2_index,theta_rate_index,momentum_residual\n")
    assert load(out, "manifest.json")["exit_code"] == 3


def test_empty_audit_list_gives_header_only_csv(tmp_path):
    code, out = invoke(tmp_path, {"calculus": {"audits": []}}, "calculus-audit")
    assert code == 0
    assert (out / "audit_samples.csv").read_text() == "inequality_id,seed,N,band,exponents,lhs,rhs,ratio\n"
    assert load(out, "audit_summary.json") == {"audits": []}


def test_calculus_audit_with_seed_override(tmp_path):
    code, out = invoke(tmp_path, CALC, "calculus-audit", extra=["--seeds", "5,6,7"])
    assert code == 0
    summary = load(out, "audit_summary.json")["audits"]
    assert [a["inequality_id"] for a in summary] == ["Product", "Interpolation"]
    assert all(a["sample_count"] == 9 for a in summary)
    assert summary[1]["max_ratio"] <= 1 + 1e-12
    assert load(out, "manifest.json")["corpus_seeds"] == [5, 6, 7]


def test_semigroup_audit(tmp_path):
    doc = {"semigroup": {"N": 16, "seed_count": 1, "M": 16, "t_count": 50, "T_values": [1.0]}}
    code, out = invoke(tmp_path, doc, "semigroup-audit")
    assert code == 0
    s = load(out, "semigroup_summary.json")
    assert s["free_functional"]["single_mode_ratio"] == pytest.approx(1 + math.sqrt(2), rel=1e-12)
    assert s["characterization"]["ratio_prefactor_half"] == pytest.approx(0.25, rel=1e-12)
    for row in s["smoothing"]:
        assert row["max_measured"] <= row["bound"] + 1e-12
    assert {"smoothing.csv", "max_regularity.csv", "free_functional.csv"} <= set(os.listdir(out))


def test_constants_command(tmp_path):
    doc = dict(BASE, constants={"seed_count": 3, "kinds": ["steady"]})
    code, out = invoke(tmp_path, doc, "constants", extra=["--threads", "1"])
    assert code == 0
    k = load(out, "constants.json")
    assert k["budget"] == pytest.approx(1 / (96 * (k["k2"] + k["k3"])))
    assert len((out / "constants_samples.csv").read_text().splitlines()) == 1 + 3


def test_scaling_check_command(tmp_path):
    code, out = invoke(tmp_path, BASE, "scaling-check")
    assert code == 0
    s = load(out, "scaling.json")["scaling"]
    assert s["u0_critical"][1] == pytest.approx(s["u0_critical"][0], rel=1e-10)
    assert s["residual_ratio"] <= 2


def test_uniqueness_probe_command(tmp_path):
    code, out = invoke(tmp_path, BASE, "uniqueness-probe")
    assert code == 0
    u = load(out, "uniqueness.json")["uniqueness"]
    assert u["window_found"] and u["within_budget"]
    assert len((out / "uniqueness.csv").read_text().splitlines()) == SOLVER["M"]


def test_snapshot_data(tmp_path):
    cfg = SolverConfig(**SOLVER)
    u0, th0 = small_data(cfg, Constants(GIVEN["k1"], GIVEN["k2"], GIVEN["k3"]), 0.5, seed=9)
    save_field(tmp_path / "u0.npz", u0)
    save_field(tmp_path / "th0.npz", th0)
    doc = dict(BASE, data={"kind": "snapshot", "u0": "u0.npz", "theta0": "th0.npz"})
    code, out = invoke(tmp_path, doc)
    assert code == 0
    assert load(out, "report.json")["fixed_point"]["converged"]


def test_snapshot_grid_mismatch_exits_2(tmp_path):
    cfg = SolverConfig(**dict(SOLVER, N=10))
    u0, th0 = small_data(cfg, Constants(1.0, 0.01, 0.01), 0.5)
    save_field(tmp_path / "u0.npz", u0)
    save_field(tmp_path / "th0.npz", th0)
    doc = dict(BASE, data={"kind": "snapshot", "u0": "u0.npz", "theta0": "th0.npz"})
    assert invoke(tmp_path, doc)[0] == 2


def test_unwritable_output_exits_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(BASE))
    assert main(["solve", "--config", str(cfg), "--out", str(blocker / "sub")]) == 4

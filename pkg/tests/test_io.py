import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracboussinesq.config import parse_config
from fracboussinesq.errors import ConfigError
from fracboussinesq.reports import dumps, format_float, write_csv, write_json
from fracboussinesq.semigroup import free_solution, time_grid
from fracboussinesq.snapshots import load_field, load_trajectory, save_field, save_trajectory
from fracboussinesq.spectral import HdotNorm, SpectrumSpec, make_grid, random_field, random_solenoidal

SOLVER = {"n": 3, "alpha": 1.0, "T": 1.0, "N": 8, "L": 2 * math.pi, "M": 16,
          "picard_tol": 1e-10, "picard_max_iters": 40, "mode": "FiniteHorizon"}


# --------------------------------------------------------------------------
# float formatting and JSON
# --------------------------------------------------------------------------

@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips(x):
    assert float(format_float(x)) == x


def test_format_float_uses_17_significant_digits():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(1.0) == "1.0"
    assert format_float(-0.0) == "0.0"
    assert format_float(1e300) == "1.0000000000000001e+300"


def test_non_finite_floats_become_null():
    text = dumps({"a": math.nan, "b": math.inf, "c": [1.5, -math.inf]})
    assert json.loads(text) == {"a": None, "b": None, "c": [1.5, None]}


def test_dumps_sorts_keys_and_converts_numpy():
    text = dumps({"b": np.float64(2.0), "a": np.int64(3), "c": np.array([1.0, 2.0]), "d": (True, None)})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert json.loads(text) == {"a": 3, "b": 2.0, "c": [1.0, 2.0], "d": [True, None]}


def test_dumps_rejects_unknown_objects():
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_write_json_is_byte_identical(tmp_path):
    obj = {"z": [0.1, 2.0 / 3.0], "a": {"y": 1, "x": math.pi}}
    write_json(tmp_path / "a.json", obj)
    write_json(tmp_path / "b.json", dict(reversed(list(obj.items()))))
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_empty_csv_is_header_only(tmp_path):
    write_csv(tmp_path / "e.csv", ["t", "value"], [])
    assert (tmp_path / "e.csv").read_text() == "t,value\n"


def test_csv_cells(tmp_path):
    write_csv(tmp_path / "r.csv", ["a", "b", "c", "d"], [(1, 0.25, True, "x,y"), (np.int32(2), math.nan, None, "z")])
    assert (tmp_path / "r.csv").read_text() == 'a,b,c,d\n1,0.25,true,"x,y"\n2,nan,,z\n'


def test_write_reports_path_on_failure(tmp_path):
    with pytest.raises(OSError, match="missing"):
        write_json(tmp_path / "missing" / "x.json", {})


# --------------------------------------------------------------------------
# config
# --------------------------------------------------------------------------

def _round_trip(doc):
    parsed = parse_config(doc)
    assert parse_config(json.loads(dumps(parsed))) == parsed
    return parsed


def test_config_round_trip_fills_defaults():
    parsed = _round_trip({"solver": SOLVER, "data": {}, "constants": {"source": "given", "k1": 1, "k2": 0.01, "k3": 0.02}})
    assert parsed["data"]["fraction"] == 0.5
    assert parsed["constants"]["k1"] == 1.0
    assert set(parsed) == {"solver", "data", "constants"}


@settings(max_examples=50, deadline=None)
@given(
    alpha=st.floats(0.51, 1.24),
    T=st.floats(1e-3, 1e3),
    fraction=st.floats(0.0, 10.0),
    seed=st.integers(0, 2 ** 32),
    ratios=st.lists(st.floats(0.0, 5.0), max_size=4),
)
def test_config_round_trip_property(alpha, T, fraction, seed, ratios):
    doc = {"solver": dict(SOLVER, alpha=alpha, T=T), "data": {"fraction": fraction, "seed": seed},
           "semigroup": {"gamma_ratios": ratios}, "uniqueness": {"c_interp": None}}
    _round_trip(doc)


def test_config_audits_round_trip():
    doc = {"calculus": {"audits": [{"inequality": "UF1", "alpha": 1, "eps": 0},
                                   {"inequality": "Product", "s": 0, "s1": 0.75, "s2": 0.75, "n": 3}]}}
    parsed = _round_trip(doc)
    assert parsed["calculus"]["audits"][0] == {"inequality": "UF1", "alpha": 1.0, "eps": 0.0, "n": None,
                                               "resolutions": None}


@pytest.mark.parametrize("doc, field", [
    ([], "<document>"),
    ({"bogus": {}}, "bogus"),
    ({"solver": dict(SOLVER, extra=1)}, "solver.extra"),
    ({"solver": {k: v for k, v in SOLVER.items() if k != "T"}}, "solver.T"),
    ({"solver": dict(SOLVER, N=8.0)}, "solver.N"),
    ({"solver": dict(SOLVER, alpha=True)}, "solver.alpha"),
    ({"data": {"seed": 1.5}}, "data.seed"),
    ({"data": {"band": [1.0]}}, "data.band"),
    ({"data": {"kind": "file"}}, "data.kind"),
    ({"data": {"kind": "snapshot", "u0": "u.npz"}}, "data.theta0"),
    ({"constants": {"source": "given", "k1": 1.0, "k2": 1.0}}, "constants.k3"),
    ({"constants": {"bands": [[1, 2], [1, "x"]]}}, "constants.bands[1][1]"),
    ({"calculus": {}}, "calculus.audits"),
    ({"calculus": {"audits": [{"s": 0.5}]}}, "calculus.audits[0].inequality"),
    ({"calculus": {"audits": [{"inequality": "KPV", "s": 0.5}]}}, "calculus.audits[0].s1"),
    ({"semigroup": {"t_min": 0.0}}, "semigroup.t_min"),
    ({"semigroup": {"seed_count": 0}}, "semigroup.seed_count"),
])
def test_malformed_config_names_the_field(doc, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert exc.value.field == field


# --------------------------------------------------------------------------
# snapshots
# --------------------------------------------------------------------------

@pytest.fixture
def grid():
    return make_grid(3, 8)


def _spec(grid):
    return SpectrumSpec(1.0, 2.0, HdotNorm(0.0), 1.0)


def test_scalar_snapshot_round_trip(tmp_path, grid):
    f = random_field(grid, _spec(grid), (4, 0))
    save_field(tmp_path / "f.npz", f)
    g = load_field(tmp_path / "f.npz")
    assert g.grid == grid
    assert np.array_equal(g.coeffs, f.coeffs)
    assert g.real


def test_vector_snapshot_round_trip(tmp_path, grid):
    u = random_solenoidal(grid, _spec(grid), (4, 1))
    save_field(tmp_path / "u.npz", u)
    v = load_field(tmp_path / "u.npz")
    assert np.array_equal(v.coeffs, u.coeffs)
    assert v.solenoidal


def test_snapshot_header_and_bytes_are_stable(tmp_path, grid):
    f = random_field(grid, _spec(grid), (4, 0))
    save_field(tmp_path / "a.npz", f)
    save_field(tmp_path / "b.npz", f)
    assert (tmp_path / "a.npz").read_bytes() == (tmp_path / "b.npz").read_bytes()
    with np.load(tmp_path / "a.npz") as z:
        header = json.loads(str(z["header"]))
        assert z["coeffs"].shape == (1, 8, 8, 8)
        assert z["coeffs"].dtype == np.complex128
    assert header == {"format": "fracboussinesq-field", "version": 1, "n": 3, "N": 8, "L": 2 * math.pi,
                      "real_flag": True, "component_count": 1, "vector": False, "solenoidal": False}


def test_snapshot_rejects_inconsistent_shape(tmp_path, grid):
    f = random_field(grid, _spec(grid), (4, 0))
    save_field(tmp_path / "a.npz", f)
    with np.load(tmp_path / "a.npz") as z:
        header = json.loads(str(z["header"]))
    header["N"] = 16
    np.savez(tmp_path / "bad.npz", header=np.array(json.dumps(header)), coeffs=f.coeffs[None])
    with pytest.raises(ValueError, match="does not match"):
        load_field(tmp_path / "bad.npz")


def test_trajectory_dump_round_trip(tmp_path, grid):
    a = random_field(grid, _spec(grid), (4, 0))
    traj = free_solution(a, 1.0, time_grid(0.5, 4)).with_indices((0.0, 1.0, -1.0))
    save_trajectory(tmp_path / "traj", traj)
    back = load_trajectory(tmp_path / "traj")
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.coeffs, traj.coeffs)
    assert np.array_equal(back.rate, traj.rate)
    assert back.indices == traj.indices
    assert sorted(p.name for p in (tmp_path / "traj").iterdir())[-1] == "trajectory.json"

import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import sphdvr
from sphdvr.cli import main
from sphdvr.config import ConfigError, RunConfig, from_dict, loads


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


GRID_N2 = """
[grid]
N = 2
[map]
kind = "linear"
r_max = 10.0
"""

HYDROGEN = """
[grid]
N = 200
[map]
kind = "rational"
r_max = 200.0
L = 20.0
[tise]
l = [0]
count = 3
write_states = true
"""

TDSE_SMALL = """
[grid]
N = 60
[map]
r_max = 60.0
L = 6.0
[basis]
l_max = 3
m_restriction = 0
[field]
A0 = {A0}
omega = 0.3
duration = 10.0
[propagation]
dt = 0.05
n_steps = 100
rtol = {rtol}
snapshot_stride = {snap}
[output]
formats = ["csv", "snapshots"]
"""


# ---------------------------------------------------------------- grid

def test_grid_n2(tmp_path, capsys):
    cfg = write(tmp_path, GRID_N2)
    assert main(["grid", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    rows = read_csv(tmp_path / "a" / "grid.csv")
    assert len(rows) == 3
    assert [float(r["x_i"]) for r in rows] == [-1.0, 0.0, 1.0]
    np.testing.assert_allclose([float(r["w_i"]) for r in rows], [1 / 3, 4 / 3, 1 / 3], rtol=1e-16)
    assert [float(r["r(x_i)"]) for r in rows] == [0.0, 5.0, 10.0]
    assert "N=2" in capsys.readouterr().out
    assert main(["grid", "--config", cfg, "--out", str(tmp_path / "b"), "--quiet"]) == 0
    assert capsys.readouterr().out == ""
    a = (tmp_path / "a" / "grid.csv").read_bytes()
    assert a == (tmp_path / "b" / "grid.csv").read_bytes()


def test_csv_round_trip_precision(tmp_path):
    cfg = write(tmp_path, "[grid]\nN = 17\n")
    main(["grid", "--config", cfg, "--out", str(tmp_path), "--quiet"])
    rows = read_csv(tmp_path / "grid.csv")
    w = np.array([float(r["w_i"]) for r in rows])
    np.testing.assert_array_equal(w, sphdvr.build_grid(17).weights)


# ---------------------------------------------------------------- tise

def test_tise_hydrogen(tmp_path):
    out = tmp_path / "o"
    assert main(["tise", "--config", write(tmp_path, HYDROGEN), "--out", str(out), "--quiet"]) == 0
    rows = read_csv(out / "eigenvalues.csv")
    assert [(r["l"], r["n"]) for r in rows] == [("0", "1"), ("0", "2"), ("0", "3")]
    assert abs(float(rows[0]["energy"]) + 0.5) <= 1e-8
    side = json.loads((out / "states.json").read_text())
    assert side["N"] == 200 and side["L"] == 20.0 and side["map"] == "rational" and side["count"] == 3
    psi = np.fromfile(out / "states.f64", dtype="<f8").reshape(3, 199)
    r = np.array(side["r_nodes"])
    sel = r < 10
    np.testing.assert_allclose(psi[0, sel], 2 * r[sel] * np.exp(-r[sel]), rtol=1e-5)


def test_tise_zero_potential_positive(tmp_path):
    text = '[grid]\nN = 40\n[map]\nr_max = 30.0\n[potential]\nkind = "zero"\n[tise]\ncount = 6\n'
    out = tmp_path / "z"
    assert main(["tise", "--config", write(tmp_path, text), "--out", str(out), "--quiet"]) == 0
    assert all(float(r["energy"]) > 0 for r in read_csv(out / "eigenvalues.csv"))


def test_tise_count_too_large(tmp_path, capsys):
    text = "[grid]\nN = 10\n[tise]\ncount = 10\n"
    out = tmp_path / "never"
    assert main(["tise", "--config", write(tmp_path, text), "--out", str(out)]) == 1
    assert not out.exists()
    assert "count" in capsys.readouterr().err


# ---------------------------------------------------------------- tdse

def run_tdse(tmp_path, name, A0=0.0, rtol=1e-12, snap=0, extra=()):
    cfg = write(tmp_path, TDSE_SMALL.format(A0=A0, rtol=rtol, snap=snap), f"{name}.toml")
    out = tmp_path / name
    code = main(["tdse", "--config", cfg, "--out", str(out), "--quiet", *extra])
    return code, out


def test_tdse_zero_field_and_determinism(tmp_path):
    code, out = run_tdse(tmp_path, "a")
    assert code == 0
    rows = read_csv(out / "observables.csv")
    assert list(rows[0]) == ["step", "t", "A_t", "norm", "re_overlap", "im_overlap",
                             "solver_iters", "residual"]
    assert len(rows) == 101
    assert max(abs(float(r["norm"]) - 1) for r in rows) <= 1e-10
    code, out2 = run_tdse(tmp_path, "b")
    assert (out / "observables.csv").read_bytes() == (out2 / "observables.csv").read_bytes()


def test_tdse_tolerance_drift(tmp_path):
    drift = {}
    for rtol in (1e-3, 1e-12):
        code, out = run_tdse(tmp_path, f"r{rtol}", A0=0.05, rtol=rtol)
        assert code == 0
        rows = read_csv(out / "observables.csv")
        drift[rtol] = max(abs(float(r["norm"]) - 1) for r in rows)
        assert all(float(r["residual"]) >= 0 and int(r["solver_iters"]) >= 0 for r in rows)
    assert drift[1e-3] > drift[1e-12]


def test_tdse_snapshots_and_manifest(tmp_path):
    code, out = run_tdse(tmp_path, "s", A0=0.05, snap=50)
    assert code == 0
    meta = json.loads((out / "snapshot_0000050.json").read_text())
    assert meta["step"] == 50 and meta["N"] == 60 and meta["l_max"] == 3 and meta["dt"] == 0.05
    state = np.fromfile(out / "snapshot_0000050.c128", dtype="<c16").reshape(4, 59)
    c = sphdvr.tise.scaled_norm_factor(sphdvr.build_grid(60))
    assert c * np.sum(np.abs(state) ** 2) == pytest.approx(1, abs=1e-10)
    man = json.loads((out / "MANIFEST.json").read_text())
    assert man["version"] == sphdvr.__version__ and man["status"] == "ok"
    # the manifest config reproduces the run
    assert from_dict(man["config"]) == loads(TDSE_SMALL.format(A0=0.05, rtol=1e-12, snap=50))


def test_tdse_failure_exit_codes(tmp_path):
    text = TDSE_SMALL.format(A0=0.05, rtol=1e-12, snap=0).replace(
        "snapshot_stride = 0", "snapshot_stride = 0\nmax_iter = 1\nuse_preconditioner = false")
    cfg = write(tmp_path, text, "fail.toml")
    out = tmp_path / "fail"
    assert main(["tdse", "--config", cfg, "--out", str(out), "--quiet"]) == 2
    man = json.loads((out / "MANIFEST.json").read_text())
    assert man["status"] == "failed" and man["failed_step"] == 1
    assert len(read_csv(out / "observables.csv")) == 1  # initial record retained
    out = tmp_path / "be"
    assert main(["tdse", "--config", cfg, "--out", str(out), "--quiet", "--best-effort"]) == 2
    man = json.loads((out / "MANIFEST.json").read_text())
    assert man["status"] == "best-effort" and man["best_effort_steps"][0] == 1
    assert len(read_csv(out / "observables.csv")) == 101


# ---------------------------------------------------------------- config / usage

@pytest.mark.parametrize("text", [
    "[grid]\nN = 1\n",
    "[grid]\nNN = 10\n",
    "[gird]\nN = 10\n",
    "[map]\nr_max = -3.0\n",
    "[map]\nkind = \"linear\"\nL = 2.0\n",
    "[potential]\nkind = \"softcore\"\n",
    "[propagation]\ndt = nan\n",
    "[propagation]\nrtol = 0.0\n",
    "[basis]\nl_max = 2\nm_restriction = 0\n[field]\npolarization = \"x\"\n",
    "[initial]\nl = 2\n",
    "[output]\nformats = [\"png\"]\n",
    "not toml at all [",
])
def test_bad_config_exit_1(tmp_path, text, capsys):
    assert main(["grid", "--config", write(tmp_path, text), "--out", str(tmp_path / "x")]) == 1
    assert "error" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    assert main([]) == 1
    assert main(["grid"]) == 1
    assert main(["grid", "--config", str(tmp_path / "missing.toml")]) == 1


def test_defaults_round_trip():
    cfg = RunConfig().validate()
    assert loads(cfg.dumps()) == cfg
    assert cfg.n_steps == int(np.ceil(cfg.field.duration / cfg.propagation.dt - 1e-9))


@settings(max_examples=40, deadline=None)
@given(
    N=st.integers(2, 500),
    kind=st.sampled_from(["rational", "linear"]),
    r_max=st.floats(1.0, 1e3),
    L=st.none() | st.floats(0.1, 50.0),
    l_max=st.integers(0, 12),
    pol=st.sampled_from(["x", "y", "z"]),
    pot=st.sampled_from(["coulomb", "softcore", "zero"]),
    dt=st.floats(1e-4, 1.0),
    n_steps=st.none() | st.integers(0, 10_000),
    formats=st.lists(st.sampled_from(["csv", "states", "snapshots"]), unique=True),
)
def test_config_round_trip(N, kind, r_max, L, l_max, pol, pot, dt, n_steps, formats):
    data = {
        "grid": {"N": N},
        "map": {"kind": kind, "r_max": r_max, **({"L": L} if L and kind == "rational" else {})},
        "basis": {"l_max": l_max},
        "field": {"polarization": pol, "A0": 0.01},
        "potential": {"kind": pot, **({"a": 1.5} if pot == "softcore" else {})},
        "propagation": {"dt": dt, **({} if n_steps is None else {"n_steps": n_steps})},
        "output": {"formats": formats},
    }
    cfg = from_dict(data)
    again = loads(cfg.dumps())
    assert again == cfg
    assert loads(again.dumps()).to_dict() == cfg.to_dict()


def test_config_error_is_value_error():
    with pytest.raises(ConfigError):
        from_dict({"grid": 3})

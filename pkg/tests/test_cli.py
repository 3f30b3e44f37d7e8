import json
import subprocess
import sys

import pytest
from hypothesis import given, strategies as st

from horolift import cli
from horolift._io import read_csv


def run(*argv):
    return cli.main(list(argv))


def test_expsum_example(tmp_path):
    out = tmp_path / "u.csv"
    assert run("expsum", "--kind", "U", "--c", "15", "--h", "1", "--k", "1", "--l", "1",
               "-o", str(out)) == 0
    text = out.read_text()
    assert text.startswith("# config: ")
    row = read_csv(open(out))[0]
    assert complex(float(row["re"]), float(row["im"])) == pytest.approx(
        complex(-1.5826760640014597, -0.33640818240159354), abs=1e-12)


def test_parse_equidist_example():
    cfg = cli.parse_args(["equidist", "--lift", "quadratic", "--psi", "annulus:1.0,2.0",
                          "--y", "geom:1e-4,1e-1,20", "--seed", "7"])
    assert cfg.command == "equidist" and cfg.seed == 7
    assert cfg.params["y"] == "geom:1e-4,1e-1,20"


@pytest.mark.parametrize("argv", [
    ["expsum", "--c", "-3"],
    ["expsum"],
    ["expsum", "--c", "5", "--bogus", "1"],
    ["equidist", "--y", "geom:0.1,0.01,5"],
    ["equidist", "--psi", "annulus:2,1"],
    ["coeffs", "--y", "1.5"],
    ["mu-ref", "--samples", "10"],
    ["nonsense"],
    [],
])
def test_usage_errors_exit_2(argv, capsys):
    assert run(*argv) == 2


def test_module_entry_point_exit_code():
    proc = subprocess.run([sys.executable, "-m", "horolift", "expsum", "--c", "-3"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "--c" in proc.stderr


@pytest.mark.filterwarnings("ignore:decay_fit")
def test_computational_failure_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("y,abs_err\n0.1,0\n0.01,0\n")
    assert run("fit", "--input", str(bad)) == 1
    assert run("fit", "--input", str(tmp_path / "missing.csv")) == 1


def test_verify_bounds_empty_range(tmp_path):
    out = tmp_path / "empty.csv"
    assert run("verify-bounds", "--c-range", "5:4", "-o", str(out)) == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "c,u,v,h,k,l,n,re,im,abs,bound,ratio" and len(lines) == 2


def test_fit_two_points(tmp_path, capsys):
    src = tmp_path / "pts.csv"
    src.write_text("y,err\n0.01,0.01\n0.1,0.1\n")
    out = tmp_path / "fit.json"
    assert run("fit", "--input", str(src), "-o", str(out)) == 0
    summary = json.loads(out.read_text())
    assert summary["slope"] == pytest.approx(1.0) and summary["config"]["command"] == "fit"


def test_config_file_and_override(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# defaults\nkind = S\nc = 12\nk=-2\nl=1\n")
    cfg = cli.parse_args(["expsum", "--config", str(conf), "--c", "7"])
    assert cfg.params["kind"] == "S" and cfg.params["c"] == 7 and cfg.params["k"] == -2
    conf.write_text("unknown_key = 1\n")
    assert run("expsum", "--config", str(conf), "--c", "5") == 2
    conf.write_text("just a line\n")
    assert run("expsum", "--config", str(conf), "--c", "5") == 2


def test_lift_check_json(tmp_path):
    out = tmp_path / "lift.json"
    assert run("lift-check", "--lift", "quadratic", "-o", str(out)) == 0
    rep = json.loads(out.read_text())
    assert rep["d_nice"]["passed"] and rep["rational_linearity"]["verdict"] == "nonlinear"
    assert rep["d_nice"]["C"] == pytest.approx(2**0.5)


def test_coeffs_tables(tmp_path):
    out = tmp_path / "b.csv"
    assert run("coeffs", "--l-range", "0:2", "--c", "2", "--y", "0.05", "-o", str(out)) == 0
    rows = read_csv(open(out))
    assert [r["l"] for r in rows] == ["0", "1", "2"]
    out = tmp_path / "a.csv"
    assert run("coeffs", "--kind", "a", "--k-range=-2:2", "-o", str(out)) == 0
    assert len(read_csv(open(out))) == 5


def test_equidist_outputs_and_determinism(tmp_path):
    args = ["equidist", "--psi", "annulus:1,2", "--y", "geom:0.02,0.2,3", "--mc-samples",
            "2000", "--seed", "3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(*args, "-o", str(a)) == 0
    assert run(*args, "--workers", "2", "-o", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.csv.json").read_bytes() == (tmp_path / "b.csv.json").read_bytes()
    rows = read_csv(open(a))
    assert len(rows) == 3 and list(rows[0]) == ["y", "nu", "mu_ref", "abs_err"]
    summary = json.loads((tmp_path / "a.csv.json").read_text())
    assert {"slope", "intercept", "rsquared", "config"} <= set(summary)
    assert summary["config"]["psi"] == "annulus:1,2"


def test_mu_ref_deterministic(tmp_path):
    outs = []
    for name in ("m1.json", "m2.json"):
        assert run("mu-ref", "--samples", "3000", "--seed", "9", "-o", str(tmp_path / name)) == 0
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]


ints = st.integers(-50, 50)
floats = st.floats(1e-6, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def run_configs(draw):
    command = draw(st.sampled_from(["expsum", "verify-bounds", "coeffs", "equidist", "mu-ref"]))
    argv = [command]
    if command == "expsum":
        argv += ["--kind", draw(st.sampled_from(["S", "U", "T"])), "--c", str(draw(st.integers(1, 10**6))),
                 f"--h={draw(ints)}", "--n", str(draw(st.integers(0, 9))),
                 "--lift", draw(st.sampled_from(["quadratic", "zero", "power:3", "linear:0.5,1"])),
                 "--eps", repr(draw(floats))]
    elif command == "verify-bounds":
        a = draw(st.integers(1, 100))
        argv += ["--c-range", f"{a}:{a + draw(st.integers(-2, 100))}", f"--k-range={draw(ints)}"]
    elif command == "coeffs":
        argv += ["--kind", draw(st.sampled_from(["a", "b"])), "--y", repr(draw(st.floats(1e-6, 0.99))),
                 f"--theta={draw(st.floats(-3, 3))!r}"]
    elif command == "equidist":
        argv += ["--psi", draw(st.sampled_from(["annulus:1,2", "disc:1", "lattice-annulus:0.25,0.5"])),
                 "--tol", repr(draw(floats)), "--mc-samples", str(draw(st.integers(0, 10**6)))]
    else:
        argv += ["--samples", str(draw(st.integers(1000, 10**7)))]
    argv += [f"--seed={draw(ints)}", "--workers", str(draw(st.integers(1, 8)))]
    if draw(st.booleans()):
        argv += ["--output", "out.csv"]
    return cli.parse_args(argv)


@given(run_configs())
def test_render_round_trip(cfg):
    assert cli.parse_args(cli.render(cfg)) == cfg


def test_equidist_pilot_config(tmp_path):
    out = tmp_path / "run.csv"
    assert run("equidist", "--lift", "quadratic", "--psi", "annulus:0.05,0.2",
               "--y", "geom:1e-4,1e-1,20", "--seed", "7", "-o", str(out)) == 0
    rows = read_csv(open(out))
    assert len(rows) == 20 and float(rows[0]["y"]) == pytest.approx(1e-4)
    summary = json.loads((tmp_path / "run.csv.json").read_text())
    assert summary["rsquared"] >= 0.8 and summary["config"]["seed"] == 7

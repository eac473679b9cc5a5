import json

import numpy as np
import pytest

from conftest import DEMO, GOLDEN, run_cli
from varbw import __version__
from varbw import io as vio

P1 = DEMO / "profile_n1.json"
P2 = DEMO / "profile_n2.json"
SMALL = ("--window", "20", "--dx", "0.025")


def _table(path):
    return vio.read_table(path, [("x", "re", "im"), ("x", "value"), ("x", "f"), ("x", "y", "k"),
                                 ("dx", "trials", "recovered", "median_ratio")])[1]


def test_help_and_version():
    r = run_cli("--help")
    assert r.returncode == 0
    for cmd in ("synth", "kernel", "project", "signret", "selftest"):
        assert cmd in r.stdout
    r = run_cli("--version")
    assert r.returncode == 0 and __version__ in r.stdout


def test_profile_validate(tmp_path):
    r = run_cli("profile", "validate", "--profile", P2)
    assert r.returncode == 0
    summary = json.loads(r.stdout)
    assert summary["n_jumps"] == 2
    assert np.allclose(summary["band_limits"], 2 / np.sqrt([2, 0.5, 1]))


@pytest.mark.parametrize("body", [
    '{"breakpoints": [0.0], "values": [1.0, -4.0]}',
    '{"breakpoints": [1.0, 0.0], "values": [1, 2, 3]}',
    '{"breakpoints": [0.0], "values": [1.0]}',
    "not json",
])
def test_profile_validate_rejects_bad_input(tmp_path, body):
    p = tmp_path / "p.json"
    p.write_text(body)
    r = run_cli("profile", "validate", "--profile", p)
    assert r.returncode == 2
    assert "error" in r.stderr.lower()


def test_missing_profile_file_exit_2(tmp_path):
    r = run_cli("profile", "validate", "--profile", tmp_path / "none.json")
    assert r.returncode == 2


@pytest.mark.parametrize("real, golden", [(False, "synth_n1.csv"), (True, "synth_n1_real.csv")])
def test_synth_matches_golden(tmp_path, real, golden):
    args = ["synth", "--profile", P1, "--density", DEMO / "density_n1.csv", *SMALL, "--out", tmp_path]
    r = run_cli(*args, *(["--real"] if real else []))
    assert r.returncode == 0, r.stderr
    got, want = _table(tmp_path / "synth.csv"), _table(GOLDEN / golden)
    assert got.shape == want.shape
    scale = np.max(np.abs(want[:, 1:]))
    assert np.max(np.abs(got - want)) <= 1e-9 * scale
    side = json.loads((tmp_path / "synth.json").read_text())
    assert side["points"] == len(want) and side["real"] is real


def test_synth_zero_density_gives_zero(tmp_path):
    d = tmp_path / "zero.csv"
    d.write_text("zeta,re_gminus,im_gminus,re_gplus,im_gplus\n0.5,0,0,0,0\n1.0,0,0,0,0\n")
    r = run_cli("synth", "--profile", P1, "--density", d, "--grid=-3:3:13", "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    assert np.all(_table(tmp_path / "synth.csv")[:, 1:] == 0)


def test_synth_malformed_density_exit_2(tmp_path):
    d = tmp_path / "bad.csv"
    d.write_text("zeta,re_gminus,im_gminus,re_gplus,im_gplus\n0.5,0,0,0,0\n1.0,0,x,0,0\n")
    r = run_cli("synth", "--profile", P1, "--density", d, "--out", tmp_path)
    assert r.returncode == 2
    assert "bad.csv:3" in r.stderr


def test_kernel_generic_n1_agrees_with_closed_form(tmp_path):
    r = run_cli("kernel", "--profile", P1, "--x-grid=-4:4:9", "--y-grid=-3:3:7", "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    side = json.loads((tmp_path / "kernel.json").read_text())
    assert side["shape"] == [9, 7]
    assert side["max_rel_diff_generic_vs_closed_form"] <= 1e-6
    assert len(_table(tmp_path / "kernel.csv")) == 63


def test_kernel_toy_and_generic_files_agree(tmp_path):
    outs = []
    for mode in ("toy", "generic"):
        d = tmp_path / mode
        assert run_cli("kernel", "--profile", P1, "--mode", mode, "--x-grid=-2:2:5", "--out", d).returncode == 0
        outs.append(_table(d / "kernel.csv"))
    assert np.allclose(outs[0], outs[1], atol=1e-6)


def test_kernel_no_jump_is_sinc(tmp_path):
    p = tmp_path / "p0.json"
    p.write_text('{"breakpoints": [], "values": [2.0]}')
    assert run_cli("kernel", "--profile", p, "--x-grid=-3:3:7", "--out", tmp_path).returncode == 0
    side = json.loads((tmp_path / "kernel.json").read_text())
    assert side["closed_form"] == "sinc"
    assert side["max_rel_diff_generic_vs_closed_form"] <= 1e-8


def test_kernel_toy_needs_single_jump(tmp_path):
    r = run_cli("kernel", "--profile", P2, "--mode", "toy", "--out", tmp_path)
    assert r.returncode == 2
    assert "one jump" in r.stderr


@pytest.mark.parametrize("k", [1, 2])
def test_signret_matches_golden_up_to_sign(tmp_path, k):
    r = run_cli("signret", "--profile", DEMO / f"profile_n{k}.json",
                "--magnitude", DEMO / f"magnitude_n{k}.csv", "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    got, want = _table(tmp_path / "signret.csv"), _table(GOLDEN / f"signret_n{k}.csv")
    assert np.array_equal(got[:, 0], want[:, 0])
    err = min(np.max(np.abs(got[:, 1] - s * want[:, 1])) for s in (1, -1))
    assert err <= 1e-9 * np.max(np.abs(want[:, 1]))
    diag = json.loads((tmp_path / "signret.json").read_text())
    assert diag["winner_ratio"] >= 10
    assert len(diag["pattern"]) == k + 1


def test_signret_zero_magnitude_flags(tmp_path):
    m = tmp_path / "m.csv"
    x = np.linspace(-5, 5, 41)
    vio.write_table(m, ("x", "m"), [x, np.zeros_like(x)])
    r = run_cli("signret", "--profile", P1, "--magnitude", m, "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    diag = json.loads((tmp_path / "signret.json").read_text())
    assert "ZeroFunction" in diag["flags"]
    assert np.all(_table(tmp_path / "signret.csv")[:, 1] == 0)


def test_signret_negative_magnitude_exit_2(tmp_path):
    m = tmp_path / "m.csv"
    m.write_text("x,m\n-1,0.5\n0,-0.1\n1,0.5\n")
    r = run_cli("signret", "--profile", P1, "--magnitude", m, "--out", tmp_path)
    assert r.returncode == 2


def test_project_member_is_fixed(tmp_path):
    f = tmp_path / "f.csv"
    x = np.linspace(-30, 30, 1201)
    vio.write_table(f, ("x", "value"), [x, np.sinc(x / np.pi) ** 2])
    r = run_cli("project", "--input", f, "--c", "2.5", "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    side = json.loads((tmp_path / "project.json").read_text())
    assert side["space"] == "classical"
    assert side["relative_defect"] < 1e-2


def test_project_onto_variable_space(tmp_path):
    f = tmp_path / "f.csv"
    x = np.linspace(-3, 3, 61)
    vio.write_table(f, ("x", "value"), [x, np.exp(-x ** 2)])
    r = run_cli("project", "--input", f, "--profile", P1, "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    side = json.loads((tmp_path / "project.json").read_text())
    assert side["projection_norm"] <= side["input_norm"] * (1 + 1e-6)


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"profile": str(P1), "lambda": 9.0}))
    r = run_cli("profile", "validate", "--config", cfg)
    assert json.loads(r.stdout)["lambda"] == 9.0
    r = run_cli("profile", "validate", "--config", cfg, "--lambda", "4")
    assert json.loads(r.stdout)["lambda"] == 4.0


def test_selftest_subset():
    r = run_cli("selftest", "--only", "K1,K2")
    assert r.returncode == 0, r.stdout + r.stderr
    lines = r.stdout.strip().splitlines()
    assert lines[0].startswith("PASS K1") and lines[1].startswith("PASS K2")
    assert lines[-1] == "2/2 criteria passed"


def test_selftest_unknown_criterion_exit_2():
    assert run_cli("selftest", "--only", "Z9").returncode == 2


def test_sampling_sweep_requires_seed(tmp_path):
    r = run_cli("experiment", "sampling-sweep", "--out", tmp_path)
    assert r.returncode == 2
    assert "seed" in r.stderr


def test_sampling_sweep_small(tmp_path):
    r = run_cli("experiment", "sampling-sweep", "--seed", "5", "--spacings", "0.05", "--trials", "1",
                "--jumps", "1", "--window", "12", "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    rows = _table(tmp_path / "sampling_sweep.csv")
    assert rows.shape == (1, 4) and rows[0, 1] == 1


def test_reruns_are_byte_identical(tmp_path):
    for d in ("a", "b"):
        r = run_cli("signret", "--profile", P2, "--magnitude", DEMO / "magnitude_n2.csv", "--out", tmp_path / d)
        assert r.returncode == 0, r.stderr
    for name in ("signret.csv", "signret.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

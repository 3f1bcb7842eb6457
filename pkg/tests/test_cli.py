import hashlib
import json
import math
import subprocess
import sys

import pytest

from wblab.cli import build_parser, dumps, main
from wblab.kernels import kernel_to_config


def call(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def kernel_file(tmp_path, pl_kernel):
    p = tmp_path / "kernel.ini"
    p.write_text(kernel_to_config(pl_kernel))
    return p


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


# -- energy ---------------------------------------------------------------------------

def test_energy_unit_interval(capsys, tmp_path):
    f = write(tmp_path, "unit.json", [[0, 1]])
    code, out, _ = call(capsys, "energy", "--toy-w", 0.5, "--density", f)
    assert code == 0
    assert json.loads(out)["value"] == -1


def test_energy_forbidden(capsys, tmp_path):
    f = write(tmp_path, "bad.json", [[0, 1], [1.5, 2.5]])
    code, out, _ = call(capsys, "energy", "--toy-w", 0.75, "--density", f)
    assert code == 2
    res = json.loads(out)
    assert res["value"] == "+inf" and res["forbidden_pairs"]


def test_energy_missing_file(capsys, tmp_path):
    code, _, err = call(capsys, "energy", "--toy-w", 0.5, "--density", tmp_path / "nope.json")
    assert code == 1 and "not found" in err


def test_energy_needs_kernel(capsys, tmp_path):
    f = write(tmp_path, "unit.json", [[0, 1]])
    assert call(capsys, "energy", "--density", f)[0] == 1


def test_energy_with_kernel_file(capsys, tmp_path, kernel_file):
    f = write(tmp_path, "ball.json", [[-0.5, 0.5]])
    code, out, _ = call(capsys, "energy", "--kernel", kernel_file, "--density", f)
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(1 / 6 - 1, abs=1e-12)


# -- droplets ---------------------------------------------------------------------------

def test_droplets_m4(capsys):
    code, out, _ = call(capsys, "droplets", "--m", 4)
    res = json.loads(out)
    assert code == 0 and res["k"] == 3
    assert res["masses"] == pytest.approx([4 / 3] * 3, abs=1e-9)


def test_droplets_bad_mass(capsys):
    assert call(capsys, "droplets", "--m", 0)[0] == 1
    assert call(capsys, "droplets", "--m", 1, "--p", 0.5)[0] == 1


def test_droplets_sweep(capsys, tmp_path):
    out_dir = tmp_path / "o"
    code, _, _ = call(capsys, "droplets", "--sweep", 0.1, 100, "--count", 200, "--log", "--out", out_dir)
    assert code == 0
    rows = (out_dir / "trace.csv").read_text().strip().splitlines()
    assert rows[0] == "m,k,total_energy,energy_per_mass"
    last = float(rows[-1].split(",")[3])
    lim = -2 * math.sqrt(2) / 3
    assert abs(last - lim) <= 0.01 * abs(lim)
    assert (out_dir / "plot.svg").read_text().startswith("<svg")
    assert json.loads((out_dir / "result.json").read_text())["sweep"]["count"] == 200


# -- toy ------------------------------------------------------------------------------

def test_toy_narrow(capsys):
    code, out, _ = call(capsys, "toy", "--m", 3, "--w", 0.5)
    res = json.loads(out)
    assert code == 0 and res["value"] == -3 and res["regime"] == "narrow"
    assert len(res["witness_intervals"]) == 3 and res["conjecture_flag"] is False


def test_toy_unsupported(capsys):
    assert call(capsys, "toy", "--m", 2.5, "--w", 0.5)[0] == 1
    code, out, _ = call(capsys, "toy", "--m", 2.5, "--w", 0.5, "--allow-conjecture")
    assert code == 0 and json.loads(out)["conjecture_flag"] is True


def test_toy_brute_force(capsys, tmp_path):
    code, out, _ = call(capsys, "toy", "--m", 1, "--w", 1.5, "--brute-force", "--length", 6, "--h", 0.5,
                        "--out", tmp_path)
    res = json.loads(out)
    assert code == 0 and res["brute_force"]["energy"] == -1 and res["brute_force"]["mode"] == "exhaustive"
    assert (tmp_path / "density.txt").exists()


# -- anneal -------------------------------------------------------------------------------

def test_anneal_deterministic(capsys, tmp_path, kernel_file):
    digests = []
    for run in ("a", "b"):
        d = tmp_path / run
        code, _, _ = call(capsys, "anneal", "--kernel", kernel_file, "--m", 1.5, "--h", 0.1, "--epochs", 30,
                          "--seed", 42, "--out", d)
        assert code == 0
        digests.append([hashlib.sha256((d / f).read_bytes()).hexdigest()
                        for f in ("density.txt", "trace.csv", "result.json")])
    assert digests[0] == digests[1]
    res = json.loads((tmp_path / "a" / "result.json").read_text())
    assert res["seed"] == 42 and res["schedule"]["epochs"] == 30
    assert (tmp_path / "a" / "trace.csv").read_text().startswith("epoch,T,best_energy,current_energy")


def test_anneal_infeasible(capsys):
    code, _, err = call(capsys, "anneal", "--toy-w", 1.0, "--m", 2.0, "--h", 0.25, "--box", 2.5,
                        "--epochs", 1)
    assert code == 3 and "infeasible" in err


def test_anneal_bad_mass(capsys, kernel_file):
    assert call(capsys, "anneal", "--kernel", kernel_file, "--m", 1.03, "--h", 0.05)[0] == 1


# -- diagnose -----------------------------------------------------------------------------

def test_diagnose_ball(capsys, tmp_path, kernel_file):
    f = write(tmp_path, "ball.json", [{"center": [0.0], "radius": 0.3}])
    code, out, _ = call(capsys, "diagnose", "--kernel", kernel_file, "--density", f, "--h", 0.02)
    res = json.loads(out)
    assert code == 0
    assert res["separation"]["offending_pairs"] == [] and res["separation"]["count"] == 0
    assert res["el"]["lambda_negative"] is True


def test_diagnose_infinite(capsys, tmp_path):
    f = write(tmp_path, "bad.json", [[0, 1], [1.5, 2.5]])
    assert call(capsys, "diagnose", "--toy-w", 0.75, "--density", f)[0] == 2


# -- sweep ------------------------------------------------------------------------------------

def test_sweep_toy(capsys):
    code, out, _ = call(capsys, "sweep", "--kind", "toy", "--lo", 1, "--hi", 2, "--count", 2, "--w", 1.5,
                        "--length", 8)
    rows = out.strip().splitlines()
    assert code == 0 and rows[0] == "m,w,theory,brute_force,gap"
    assert [float(r.split(",")[2]) for r in rows[1:]] == [-1.0, -2.0]


def test_sweep_droplets(capsys):
    code, out, _ = call(capsys, "sweep", "--lo", 1, "--hi", 4, "--count", 4)
    rows = out.strip().splitlines()
    assert code == 0 and [r.split(",")[1] for r in rows[1:]] == ["1", "2", "2", "3"]


# -- plumbing ------------------------------------------------------------------------------

def test_help_lists_flags_with_units():
    parser = build_parser()
    subs = parser._subparsers._group_actions[0].choices
    for name, sp in subs.items():
        text = sp.format_help()
        for act in sp._actions:
            for flag in act.option_strings:
                assert flag in text, (name, flag)


def test_help_via_module():
    out = subprocess.run([sys.executable, "-m", "wblab", "anneal", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for flag in ("--kernel", "--m", "--h", "--seed", "--epochs", "--out", "--workers"):
        assert flag in out.stdout
    assert "(length)" in out.stdout


def test_usage_error_exit(capsys):
    assert call(capsys, "energy")[0] == 1
    assert call(capsys, "nonsense")[0] == 1


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[wblab]\nm = 4\nlog = yes\n")
    code, out, _ = call(capsys, "droplets", "--config", cfg)
    assert code == 0 and json.loads(out)["k"] == 3
    code, out, _ = call(capsys, "droplets", "--config", cfg, "--m", 1)
    assert json.loads(out)["k"] == 1  # flags override
    cfg.write_text("[wblab]\nbogus = 1\n")
    assert call(capsys, "droplets", "--config", cfg)[0] == 1
    assert call(capsys, "droplets", "--config", tmp_path / "missing.ini")[0] == 1


def test_toy_config_satisfies_required(capsys, tmp_path):
    cfg = tmp_path / "toy.ini"
    cfg.write_text("[wblab]\nm = 2\nw = 0.5\n")
    code, out, _ = call(capsys, "toy", "--config", cfg)
    assert code == 0 and json.loads(out)["value"] == -2


def test_workers_env(capsys, tmp_path, monkeypatch):
    f = write(tmp_path, "unit.json", [[0, 1]])
    monkeypatch.setenv("WBLAB_WORKERS", "3")
    code, out, _ = call(capsys, "toy", "--m", 2, "--w", 1.5, "--brute-force", "--length", 8)
    assert code == 0 and json.loads(out)["brute_force"]["energy"] == pytest.approx(-2.5)
    monkeypatch.setenv("WBLAB_WORKERS", "two")
    assert call(capsys, "energy", "--toy-w", 0.5, "--density", f)[0] == 1


def test_dumps_precision():
    text = dumps({"x": 0.1, "y": math.inf, "n": [1, 2.5]})
    assert '"x": 0.10000000000000001' in text
    assert '"y": "+inf"' in text
    assert float(json.loads(text)["x"]) == 0.1

import csv
import json
import math
import textwrap

import pytest

from pirkit import cli


def _cfg(tmp_path, body, name="c.toml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(body) + f'\n[output]\ndir = "{tmp_path / "out"}"\n')
    return str(path)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


HARMONIC = """
seed = 3
[potential]
name = "harmonic"
params = {{ omega = 1.0 }}
[observable]
name = "{obs}"
[run]
representation = "{rep}"
beta = 2.0
N = 64
n_samples = {n}
"""


def test_exact_harmonic(tmp_path, capsys):
    assert cli.main(["exact", _cfg(tmp_path, HARMONIC.format(obs="q2", rep="exact", n=1000))]) == 0
    rec = json.loads((tmp_path / "out" / "exact.json").read_text())
    assert rec["value"] == pytest.approx(1 / math.tanh(1.0) / 2, abs=1e-6)
    assert rec["config_hash"]
    assert "0.65651" in capsys.readouterr().out


def test_exact_one(tmp_path):
    assert cli.main(["exact", _cfg(tmp_path, HARMONIC.format(obs="one", rep="exact", n=1000))]) == 0
    assert json.loads((tmp_path / "out" / "exact.json").read_text())["value"] == pytest.approx(1.0, abs=1e-14)


def test_exact_nonconverged_exit(tmp_path):
    body = HARMONIC.format(obs="q2", rep="exact", n=1000) + "[oracle]\nn_grid = 32\n"
    assert cli.main(["exact", _cfg(tmp_path, body)]) == cli.EXIT_NUMERIC


def test_unknown_key(tmp_path, capsys):
    body = HARMONIC.format(obs="q2", rep="exact", n=1000).replace("beta = 2.0", "beta = 2.0\nbetta = 2.0")
    assert cli.main(["exact", _cfg(tmp_path, body)]) == 2
    assert "run.betta" in capsys.readouterr().err


@pytest.mark.parametrize(
    "edit",
    [
        ("beta = 2.0", "beta = -2.0"),
        ("beta = 2.0", 'beta = "two"'),
        ('representation = "cl"', 'representation = "magic"'),
        ("seed = 3", "seed = 3\ncolour = 1"),
        ('name = "harmonic"', 'name = "morse"'),
        ("omega = 1.0", "omeg = 1.0"),
        ("n_samples = 1000", "n_samples = 10"),
    ],
)
def test_config_errors(tmp_path, edit):
    body = HARMONIC.format(obs="q2", rep="cl", n=1000).replace(*edit)
    assert cli.main(["estimate", _cfg(tmp_path, body)]) == 2


def test_malformed_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("seed = = 3\n")
    assert cli.main(["estimate", str(p)]) == 2
    assert cli.main(["estimate", str(tmp_path / "missing.toml")]) == 2


def test_estimate_deterministic_and_accurate(tmp_path):
    path = _cfg(tmp_path, HARMONIC.format(obs="q2", rep="cl", n=100_000))
    assert cli.main(["estimate", path]) == 0
    first = _rows(tmp_path / "out" / "estimate.csv")
    assert cli.main(["estimate", path]) == 0
    second = _rows(tmp_path / "out" / "estimate.csv")
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time"} for r in rows]
    assert strip(first) == strip(second)
    row = first[0]
    assert tuple(row) == cli.ESTIMATE_COLUMNS
    assert row["seed"] == "3" and row["representation"] == "cl(N=64)" and row["N"] == "64"
    exact = 1 / math.tanh(1.0) / 2
    assert abs(float(row["estimate"]) - exact) < 3 * float(row["std_error"])


def test_seed_and_output_override(tmp_path):
    path = _cfg(tmp_path, HARMONIC.format(obs="tanh2", rep="cl", n=2000))
    other = tmp_path / "elsewhere"
    assert cli.main(["estimate", path, "--seed", "9", "--output", str(other)]) == 0
    row = _rows(other / "estimate.csv")[0]
    assert row["seed"] == "9"
    assert cli.main(["estimate", path]) == 0
    base = _rows(tmp_path / "out" / "estimate.csv")[0]
    assert base["estimate"] != row["estimate"] and base["config_hash"] != row["config_hash"]


def test_threads_env_has_no_effect(tmp_path, monkeypatch):
    path = _cfg(tmp_path, HARMONIC.format(obs="tanh2", rep="cl", n=9000))
    assert cli.main(["estimate", path]) == 0
    a = _rows(tmp_path / "out" / "estimate.csv")[0]
    monkeypatch.setenv("PIRKIT_THREADS", "3")
    assert cli.main(["estimate", path]) == 0
    b = _rows(tmp_path / "out" / "estimate.csv")[0]
    assert a["estimate"] == b["estimate"] and a["config_hash"] == b["config_hash"]
    monkeypatch.setenv("PIRKIT_THREADS", "zero")
    assert cli.main(["estimate", path]) == 2


def test_ess_warning_row(tmp_path):
    body = """
    [potential]
    name = "harmonic"
    params = { omega = 4.0 }
    a = 0.3
    M1 = 16.0
    [observable]
    name = "tanh2"
    [run]
    representation = "cl"
    beta = 4.0
    N = 16
    n_samples = 2000
    """
    assert cli.main(["run", _cfg(tmp_path, body)]) == 0
    assert _rows(tmp_path / "out" / "estimate.csv")[0]["ess_warning"] == "1"


def test_std_and_disc_estimates(tmp_path):
    body = HARMONIC.format(obs="tanh2", rep="std", n=4000) + "D = 8\n"
    assert cli.main(["estimate", _cfg(tmp_path, body)]) == 0
    row = _rows(tmp_path / "out" / "estimate.csv")[0]
    assert row["representation"] == "std(D=8)" and row["acceptance"]
    body = HARMONIC.format(obs="tanh2", rep="cl-disc", n=4000) + "D = 8\n"
    assert cli.main(["estimate", _cfg(tmp_path, body)]) == 0
    assert _rows(tmp_path / "out" / "estimate.csv")[0]["representation"] == "cl(N=64,D=8)"


def test_sampler_error_exit(tmp_path):
    body = """
    [potential]
    name = "quartic"
    [observable]
    name = "tanh"
    [run]
    representation = "std"
    beta = 1.0
    D = 8
    n_samples = 4000
    n_chains = 1
    step_h = 5.0
    metropolis = false
    """
    assert cli.main(["run", _cfg(tmp_path, body)]) == 3


SWEEP = """
seed = 1
[potential]
name = "soft_bumped"
params = { omega = 1.0, c = 0.2, k = 2.0 }
a = 1.0
[observable]
name = "tanh2"
[run]
representation = "sweep"
beta = 1.0
n_samples = {n}
[sweep]
mode = "cl"
N_values = {Ns}
"""


def test_sweep_passes(tmp_path):
    assert cli.main(["sweep", _cfg(tmp_path, SWEEP.replace("{n}", "20000").replace("{Ns}", "[2, 4, 8, 16]"))]) == 0
    rows = _rows(tmp_path / "out" / "sweep.csv")
    assert len(rows) == 4 and all(r["verdict"] == "pass" for r in rows)
    summary = json.loads((tmp_path / "out" / "sweep.json").read_text())
    assert summary["config_hash"] == rows[0]["config_hash"]


def test_sweep_debug_scale_fails(tmp_path):
    body = SWEEP.replace("{n}", "300000").replace("{Ns}", "[2]") + "[debug]\nbound_scale = 1e-9\n"
    assert cli.main(["run", _cfg(tmp_path, body)]) == 4


def test_sweep_empty_list(tmp_path):
    assert cli.main(["sweep", _cfg(tmp_path, SWEEP.replace("{n}", "2000").replace("{Ns}", "[]"))]) == 2


def test_covariance_command(tmp_path):
    body = """
    [potential]
    name = "harmonic"
    a = 1.0
    [observable]
    name = "one"
    [run]
    representation = "covariance"
    beta = 2.0
    """
    assert cli.main(["run", _cfg(tmp_path, body)]) == 0
    rows = _rows(tmp_path / "out" / "covariance.csv")
    assert len(rows) == 19
    assert max(float(r["max_abs_diff"]) for r in rows) < 1e-8


def test_holder_command(tmp_path):
    body = """
    [potential]
    name = "harmonic"
    a = 1.0
    [observable]
    name = "one"
    [run]
    representation = "holder"
    beta = 1.0
    [holder]
    N = 512
    n_samples = 5000
    deltas = [0.2, 0.1, 0.05, 0.025, 0.0]
    """
    assert cli.main(["holder", _cfg(tmp_path, body)]) == 0
    rows = _rows(tmp_path / "out" / "holder.csv")
    assert rows[-1]["msd"] == "0.0" and all(r["within_bound"] == "1" for r in rows)
    body = body.replace("0.2, 0.1", "0.1, 0.2")
    assert cli.main(["holder", _cfg(tmp_path, body)]) == 2


def test_config_hash_ignores_output_and_threads():
    a = {"seed": 1, "run": {"beta": 1.0}, "output": {"dir": "x"}, "threads": 2}
    b = {"seed": 1, "run": {"beta": 1.0}, "output": {"dir": "y"}}
    assert cli.config_hash(a) == cli.config_hash(b)
    assert cli.config_hash(a) != cli.config_hash({"seed": 2, "run": {"beta": 1.0}})


def test_shipped_configs_validate():
    import pathlib

    configs = sorted((pathlib.Path(__file__).parent.parent / "configs").glob("*.toml"))
    assert configs
    for path in configs:
        cfg = cli.load_config(str(path))
        assert cfg["run"]["representation"] in cli.REPRESENTATIONS

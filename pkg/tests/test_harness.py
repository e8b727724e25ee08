import json
import math
import subprocess
import sys

import numpy as np
import pytest

from bicomm.cli import main
from bicomm.config import ConfigError, emit_config, load_config, parse_config
from bicomm.harness import report_json, run_experiment, write_report
from bicomm.lattice import Cube
from bicomm.symbols import parse_symbol_id, symbol_library

U = Cube((0.0,), 1.0)

DIAG = """
seed = 7
A = 16.0

[kernel]
variant = "riesz"

[lattice]
d = 1
N = 512
h = 0.015625

[exponents]
p = 2.0
q = 2.0
r = 1.0

[symbol]
id = "step"
[symbol.params]
at = 0.0
width = 0.5

[sampler]
levels = [-3]
symbol_levels = [-5, 0]
max_triples = 4
draws = 1
ascent = 1
region = { corner = [-1.0], side = 2.0 }
"""


def test_symbols_examples():
    h = 1 / 16
    assert np.all(symbol_library("constant(5)", box=U, h=h).samples == 5.0)
    step = symbol_library("step", box=U, h=h)
    assert np.array_equal(step.samples, (step.centers().reshape(-1) < 0.5).astype(float))
    p = symbol_library("power(0.25)", box=U, h=h)
    assert np.array_equal(p.samples, p.centers().reshape(-1) ** 0.25)
    assert parse_symbol_id("random_dyadic_bmo(3)") == ("random_dyadic_bmo", {"seed": 3})
    with pytest.raises(ValueError, match="unknown symbol id"):
        parse_symbol_id("holder_random")
    r1 = symbol_library("random_dyadic_bmo(3)", box=U, h=h)
    r2 = symbol_library("random_dyadic_bmo(3)", box=U, h=h)
    assert np.array_equal(r1.samples, r2.samples) and r1.sup_norm() <= 6
    lt = symbol_library("log_truncated", {"L": 3.0}, box=Cube((-1.0,), 2.0), h=h)
    assert lt.samples.min() >= -3.0


def test_config_roundtrip():
    cfg = parse_config(DIAG)
    assert cfg.regime.name == "diagonal" and cfg.box == Cube((-4.0,), 8.0)
    assert parse_config(emit_config(cfg)) == cfg
    sup = cfg.replace(r=1.0, p=4.0, q=4.0, s=2.0, ledger_domain=((0.0,), 1.0), ledger_max_depth=3)
    assert parse_config(emit_config(sup)) == sup
    inf = cfg.replace(eval_cap=math.inf, A="auto")
    assert parse_config(emit_config(inf)) == inf


@pytest.mark.parametrize("patch, msg", [
    (("p = 2.0", "p = -2.0"), "exponents"),
    (("r = 1.0", "r = 1.0\ns = 3.0"), "s is only meaningful"),
    (("A = 16.0", "A = 2.0"), "at least 3"),
    (("A = 16.0", "A = \"big\""), "auto"),
    (('id = "step"', 'id = "wavy"'), "unknown symbol id"),
    (("seed = 7", "seed = -1"), "unsigned 64-bit"),
    (("seed = 7", "seed = 7\nbogus = 1"), "unknown keys"),
    (("h = 0.015625", "h = 0.015625\nside = 9.0"), "differs from the box side"),
    (("[exponents]", "[exponentz]"), "exponent"),
])
def test_config_validation(patch, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(DIAG.replace(*patch))


def test_config_superdiag_s_mismatch():
    text = DIAG.replace("p = 2.0", "p = 4.0").replace("q = 2.0", "q = 4.0").replace("r = 1.0", "r = 1.0\ns = 3.0")
    with pytest.raises(ConfigError, match="inconsistent"):
        parse_config(text)
    with pytest.raises(ConfigError, match="malformed"):
        parse_config("p = ")


def strip_time(rep):
    rep = dict(rep)
    rep.pop("timestamp")
    return report_json(rep)


def test_diagonal_step_report_and_determinism():
    cfg = parse_config(DIAG)
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert strip_time(a) == strip_time(b)
    est = a["estimates"]["dilation_0"]
    assert est["symbol"]["value"] > 0 and est["weak_offsupport"]["value"] > 0
    row = next(r for r in a["ratios"] if r["ratio_name"] == "bmo/weak_offsupport")
    assert not row["degenerate"] and row["ratio"] == pytest.approx(
        est["symbol"]["value"] / est["weak_offsupport"]["value"])
    for r in a["ratios"]:
        assert "witness" in r["numerator"] and "value" in r["denominator"]
    assert a["runtime"]["kernel_evaluations"] <= a["runtime"]["estimated_evaluations"]


def test_diagonal_constant_degenerate():
    cfg = parse_config(DIAG.replace('id = "step"', 'id = "constant(2)"'))
    rep = run_experiment(cfg)
    est = rep["estimates"]["dilation_0"]
    assert est["symbol"]["value"] == 0 and est["offsupport"]["value"] == 0
    assert est["weak_offsupport"]["value"] == 0
    assert all(r["degenerate"] and r["ratio"] is None for r in rep["ratios"])


def write_cfg(tmp_path, text=DIAG):
    p = tmp_path / "cfg.toml"
    p.write_text(text)
    return p


@pytest.mark.parametrize("cmd", ["probe-kernel", "bootstrap", "awf", "norms", "experiment"])
def test_cli_subcommands(tmp_path, cmd):
    text = DIAG
    if cmd == "awf":  # the triple around Q1 must fit in the box
        text = DIAG.replace("corner = [-1.0], side = 2.0", "corner = [0.0], side = 0.25")
    p = write_cfg(tmp_path, text)
    out = tmp_path / f"{cmd}.json"
    assert main([cmd, "--config", str(p), "--seed", "11", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["config"]["seed"] == 11
    if cmd == "experiment":
        assert out.with_suffix(".csv").exists()


def test_cli_exit_codes(tmp_path, capsys):
    bad = write_cfg(tmp_path, DIAG.replace("A = 16.0", "A = 1.0"))
    assert main(["experiment", "--config", str(bad)]) == 2
    assert main(["experiment", "--config", str(tmp_path / "missing.toml")]) == 2
    capped = write_cfg(tmp_path, DIAG.replace("A = 16.0", "A = 16.0\neval_cap = 1000.0"))
    assert main(["experiment", "--config", str(capped)]) == 3
    assert main(["experiment", "--config", str(write_cfg(tmp_path)), "--seed", "-4"]) == 2
    assert main(["nonsense"]) == 2


def test_cli_stdout_and_module(tmp_path):
    p = write_cfg(tmp_path)
    res = subprocess.run([sys.executable, "-m", "bicomm", "bootstrap", "--config", str(p)],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["triple"]


def test_write_report(tmp_path):
    cfg = parse_config(DIAG)
    rep = run_experiment(cfg)
    write_report(rep, tmp_path / "r" / "rep.json")
    assert json.loads((tmp_path / "r" / "rep.json").read_text())["regime"] == "diagonal"
    lines = (tmp_path / "r" / "rep.csv").read_text().splitlines()
    assert lines[0].startswith("dilation,ratio_name") and len(lines) == 1 + len(rep["ratios"])
    assert load_config(write_cfg(tmp_path)) == cfg

import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jostkit import cli
from jostkit.config import dump_config, load_config, parse_config
from jostkit.errors import ParseError, ValidationError
from jostkit.output import fmt, to_csv, to_json, write_atomic

SHELL_CONFIG = """{
  "hbar": 1.0,
  "mass": 0.5,
  "geometry": "radial",
  "boundaries": [1.0, 2.0],
  "heights": [0.0, 10.0, 0.0],
  "region": {"re_min": 0.05, "re_max": 6.0, "im_min": -1.5, "im_max": -1e-8},
  "quad": {"abs_tol": 1e-12, "rel_tol": 1e-10, "max_subdiv": 2000},
  "testfn": [{"p": 1, "c": 0.5, "sigma": 0.085}]
}
"""


def _run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def _write(tmp_path, text, name="cfg.json"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# -- configuration ---------------------------------------------------------------------

def test_defaults_when_empty():
    cfg = parse_config("")
    assert cfg.potential.boundaries == (1.0, 2.0)
    assert cfg.potential.heights == (0.0, 10.0, 0.0)
    assert (cfg.consts.hbar, cfg.consts.mass) == (1.0, 0.5)
    assert len(cfg.test_functions) == 2


def test_full_config_parses():
    cfg = parse_config(SHELL_CONFIG)
    assert cfg.search_region.im_max == -1e-8
    assert cfg.numerics.max_subdivisions == 2000
    assert [tf.p for tf in cfg.test_functions] == [1]


def test_config_round_trip_is_lossless():
    cfg = parse_config(SHELL_CONFIG)
    again = parse_config(dump_config(cfg))
    assert again.to_dict() == cfg.to_dict()
    assert dump_config(again) == dump_config(cfg)


@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(0.5, 80.0))
@settings(max_examples=30, deadline=None)
def test_round_trip_keeps_every_bit(hbar, mass, v0):
    text = json.dumps({"hbar": hbar, "mass": mass, "heights": [0.0, v0, 0.0]})
    cfg = parse_config(text)
    back = parse_config(dump_config(cfg))
    assert (back.consts.hbar, back.consts.mass, back.potential.heights[1]) == (hbar, mass, v0)


def test_unknown_key_reports_line():
    text = '{\n  "hbar": 1.0,\n  "bogus": 3\n}\n'
    with pytest.raises(ParseError) as exc:
        parse_config(text)
    assert exc.value.key == "bogus" and exc.value.line == 3


@pytest.mark.parametrize("text", [
    '{"hbar": "one"}',
    '{"region": {"re_min": 0.05, "re_max": 6.0, "im_min": -1.5, "im_max": -1e-8, "x": 1}}',
    '{"testfn": [{"p": 1, "c": 0.5}]}',
    '{"hbar": 1.0,',
    '[1, 2]',
    '{"output": {"format": "xml"}}',
])
def test_malformed_configs(text):
    with pytest.raises(ParseError):
        parse_config(text)


def test_invalid_values_are_validation_errors():
    with pytest.raises(ValidationError):
        parse_config('{"boundaries": [2.0, 1.0]}')
    with pytest.raises(ValidationError):
        parse_config('{"hbar": -1.0}')


def test_load_missing_file(tmp_path):
    with pytest.raises(ValidationError):
        load_config(str(tmp_path / "nope.json"))
    assert load_config(None).to_dict() == parse_config("").to_dict()


# -- output formatting -------------------------------------------------------------------

def test_float_format():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(-0.0) == "0"
    assert fmt(float("nan")) == "NaN"
    assert fmt(float("-inf")) == "-Infinity"
    assert float(fmt(1 / 3)) == 1 / 3


def test_json_and_csv_shapes():
    text = to_json({"b": 1, "a": [1.5, 2j]})
    assert text.endswith("}\n") and text.index('"b"') < text.index('"a"')
    assert json.loads(text)["a"][1] == {"re": 0.0, "im": 2.0}
    assert to_csv(["x", "n"], [[0.5, 3]]) == "x,n\n0.5,3\n"


def test_atomic_write_replaces_whole_file(tmp_path):
    p = tmp_path / "out.txt"
    p.write_text("old content that is longer")
    write_atomic(str(p), "new\n")
    assert p.read_text() == "new\n"
    assert [f.name for f in tmp_path.iterdir()] == ["out.txt"]


# -- subcommands ------------------------------------------------------------------------

def test_smatrix_is_unitary(capsys):
    code, out, _ = _run(["smatrix", "--n", "50"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 50
    assert max(abs(float(r["abs_S"]) - 1.0) for r in rows) < 1e-12
    assert out.endswith("\n") and "\r" not in out


def test_poles_default(capsys):
    code, out, _ = _run(["poles"], capsys)
    assert code == 0
    data = json.loads(out)
    ks = [complex(p["k_re"], p["k_im"]) for p in data]
    assert abs(ks[0] - (2.3190998502052734 - 0.009303105480965134j)) < 1e-12


def test_poles_of_zero_height_barrier(tmp_path, capsys):
    cfg = _write(tmp_path, '{"heights": [0.0, 0.0, 0.0]}')
    code, out, _ = _run(["--config", cfg, "poles"], capsys)
    assert code == 0 and json.loads(out) == []


def test_gamow_and_eigfun_outputs(capsys):
    code, out, _ = _run(["gamow", "--n", "1", "--points", "11"], capsys)
    assert code == 0 and len(out.strip().splitlines()) == 12
    code, out, _ = _run(["eigfun", "--e", "4.0", "--norm", "E", "--points", "11"], capsys)
    assert code == 0 and len(out.strip().splitlines()) == 12


def test_barrier_subcommands(tmp_path, capsys):
    cfg = _write(tmp_path, json.dumps({
        "geometry": "line", "boundaries": [0.0, 1.0], "heights": [0.0, 5.0, 0.0],
        "testfn": [{"p": 0, "c": 0.5, "sigma": 0.085}, {"p": 1, "c": 0.5, "sigma": 0.085, "origin": 0.5}]}))
    code, out, _ = _run(["--config", cfg, "barrier1d", "coeffs", "--n", "20"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 20
    code, out, _ = _run(["--config", cfg, "barrier1d", "complete"], capsys)
    assert code == 0
    assert all(p["abs_defect"] < 1e-6 for p in json.loads(out)["pairs"])


def test_expand_report(capsys):
    code, out, _ = _run(["expand", "--t", "1.0"], capsys)
    assert code == 0
    rep = json.loads(out)
    direct = complex(rep["direct"]["re"], rep["direct"]["im"])
    assert rep["defect"] < 1e-3 * abs(direct)


@pytest.mark.parametrize("argv,code", [
    (["expand", "--t", "0"], 2),
    (["expand", "--t", "1", "--angle", "-1.5707963267948966"], 2),
    (["gamow", "--n", "42"], 2),
    (["eigfun", "--e", "-1"], 2),
])
def test_error_exit_codes(argv, code, capsys):
    got, _, err = _run(argv, capsys)
    assert got == code
    assert "error" in json.loads(err)


def test_radial_subcommand_on_line_config(tmp_path, capsys):
    cfg = _write(tmp_path, '{"geometry": "line", "boundaries": [0.0, 1.0], "heights": [0.0, 5.0, 0.0]}')
    code, _, err = _run(["--config", cfg, "poles"], capsys)
    assert code == 2 and "radial" in err


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, '{\n  "hbar": 1.0,\n  "bogus": 3\n}\n')
    code, _, err = _run(["--config", cfg, "poles"], capsys)
    rec = json.loads(err)
    assert code == 2 and rec["line"] == 3 and rec["key"] == "bogus"


def test_test_function_outside_domain(tmp_path, capsys):
    cfg = _write(tmp_path, '{"testfn": [{"p": 1, "c": 0.5, "sigma": 0.12}]}')
    code, _, err = _run(["--config", cfg, "expand", "--t", "1"], capsys)
    assert code == 2 and json.loads(err)["radius"] == 1.0


def test_output_file_is_byte_identical_across_runs(tmp_path, capsys):
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    assert _run(["--out", a, "smatrix", "--n", "40"], capsys)[0] == 0
    assert _run(["--out", b, "smatrix", "--n", "40"], capsys)[0] == 0
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()


def test_json_output_format_from_config(tmp_path, capsys):
    out = tmp_path / "s.json"
    cfg = _write(tmp_path, json.dumps({"output": {"path": str(out), "format": "json"}}))
    assert _run(["--config", cfg, "smatrix", "--n", "5"], capsys)[0] == 0
    data = json.loads(out.read_text())
    assert list(data) == ["E", "re_S", "im_S", "abs_S", "delta"] and len(data["E"]) == 5


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "p.json"
    proc = subprocess.run([sys.executable, "-m", "jostkit", "--out", str(out), "poles"],
                          capture_output=True, text=True, env={**os.environ, "PYTHONHASHSEED": "0"})
    assert proc.returncode == 0, proc.stderr
    assert len(json.loads(out.read_text())) == 3


def test_decay_summary_on_stderr(capsys):
    code, out, err = _run(["decay", "--tmax", "400", "--steps", "100"], capsys)
    assert code == 0
    summary = json.loads(err)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 101
    gamma = 2 * 0.04314966105470021
    assert abs(summary["fitted_gamma"] - gamma) < 0.05 * gamma
    assert np.isclose(float(rows[0]["abs_survival"]), 1.0, atol=1e-6)

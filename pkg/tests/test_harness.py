import math
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from p2slab import cli
from p2slab.harness import (ConfigError, default_config, fit_power_law, fit_power_law_xy, load_config,
                            parse_config, read_results, rows_to_csv, run_experiment, write_results)
from p2slab.harness.fit import FitError
from p2slab.harness.io import format_value, parse_value
from p2slab.harness.runner import columns_for

DATA = Path(__file__).parent / "data"


# -- config -----------------------------------------------------------------

def test_defaults_for_every_kind():
    for kind in ("validate", "trotter-sweep", "floquet-sweep", "sw-sweep", "bounds", "ft-overhead"):
        cfg = default_config(kind)
        assert cfg.kind == kind and cfg["seed"] == 0


@pytest.mark.parametrize("text, fragment", [
    ("kind = trotter-sweep\nbogus = 1\n", "line 2: unknown key 'bogus'"),
    ("kind = trotter-sweep\nT = 4\nT = 8\n", "line 3: duplicate key 'T'"),
    ("kind = trotter-sweep\nT = four\n", "line 2: key 'T'"),
    ("kind = trotter-sweep\nuptau = 0.1\n", "line 2: key 'uptau' is not used"),
    ("kind = trotter-sweep\np_order = 3\n", "p_order"),
    ("kind = nonsense\n", "unknown kind"),
    ("N = 4\n", "missing required key 'kind'"),
    ("kind = validate\nN = 7\n", "N"),
    ("kind = trotter-sweep\njust words\n", "line 2: expected 'key = value'"),
])
def test_config_errors_are_specific(text, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "cfg")
    assert fragment in str(exc.value)


def test_config_comments_and_lists():
    cfg = parse_config("# sweep\nkind = trotter-sweep  # inline\nT = 2, 4,8\nnoise = 0, 1e-3\n")
    assert cfg["T"] == [2, 4, 8] and cfg["noise"] == [0.0, 1e-3]


def test_config_kind_mismatch(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("kind = bounds\n")
    with pytest.raises(ConfigError, match="subcommand"):
        load_config(f, kind="validate")
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.cfg")


def test_thread_precedence(monkeypatch):
    cfg = parse_config("kind = bounds\nthreads = 3\n")
    monkeypatch.setenv("P2S_THREADS", "5")
    assert cfg.resolved_threads(7) == 7
    assert cfg.resolved_threads() == 3
    assert default_config("bounds").resolved_threads() == 5
    monkeypatch.delenv("P2S_THREADS")
    assert default_config("bounds").resolved_threads() == 1
    monkeypatch.setenv("P2S_THREADS", "x")
    with pytest.raises(ConfigError):
        default_config("bounds").resolved_threads()


# -- io ---------------------------------------------------------------------

@given(st.one_of(st.integers(-10 ** 6, 10 ** 6), st.booleans(), st.text(alphabet="abc-_", min_size=1)))
def test_format_parse_round_trip(v):
    assert parse_value(format_value(v)) == v


@given(st.floats(allow_nan=False, allow_infinity=False, min_value=-1e300, max_value=1e300))
def test_float_format_precision(x):
    assert math.isclose(float(format_value(x)), x, rel_tol=1e-11)


def test_write_read_round_trip(tmp_path):
    rows = [{"a": 1, "b": 0.5, "c": "x"}, {"a": 2, "b": 1e-9, "c": "y"}]
    path = tmp_path / "r.csv"
    write_results(rows, ("a", "b", "c"), path)
    header, back = read_results(path)
    assert header == ["a", "b", "c"] and back == rows
    assert path.read_bytes().count(b"\r") == 0


# -- fit --------------------------------------------------------------------

def test_fit_recovers_power_law():
    xs = [1.0, 2.0, 4.0, 8.0, 16.0]
    res = fit_power_law_xy(xs, [3 * x ** 2 for x in xs])
    assert res.slope == pytest.approx(2.0) and math.exp(res.intercept) == pytest.approx(3.0)
    assert res.r_squared == pytest.approx(1.0)


def test_fit_rejects_bad_data():
    with pytest.raises(FitError):
        fit_power_law_xy([1, 2, 3], [1, 2, 3])
    with pytest.raises(FitError):
        fit_power_law_xy([1, 2, 3, 4], [1, 0, 3, 4])
    with pytest.raises(FitError):
        fit_power_law_xy([2, 2, 2, 2], [1, 2, 3, 4])
    with pytest.raises(FitError):
        fit_power_law([{"x": 1.0}], "x", "y")


# -- runner -----------------------------------------------------------------

def test_rows_are_consistent_and_sorted():
    cfg = default_config("trotter-sweep")
    cfg.values.update(N=[10, 6], T=[4, 2], p_order=[2], noise=[1e-3, 0.0])
    rows = run_experiment(cfg, threads=3)
    keys = [(r["noise"], r["N"], r["T"]) for r in rows]
    assert keys == sorted(keys)
    for r in rows:
        assert r["abs_error"] == abs(r["observable_sim"] - r["observable_target"])
        assert set(r) >= set(columns_for(cfg)) - {"experiment"}


def test_timing_column_only_on_request():
    cfg = parse_config("kind = bounds\nrecord_timing = true\n")
    assert "wall_time_ms" in columns_for(cfg)
    assert "wall_time_ms" not in columns_for(default_config("bounds"))


def test_golden_validate_csv():
    cfg = load_config(DATA / "validate_small.cfg")
    header, golden = read_results(DATA / "validate_small.csv")
    rows = run_experiment(cfg, threads=1)
    assert list(header) == list(columns_for(cfg)) and len(rows) == len(golden)
    for r, g in zip(rows, golden):
        assert (r["N"], r["check"], r["tolerance"]) == (g["N"], g["check"], g["tolerance"])
        assert r["observable_sim"] == pytest.approx(g["observable_sim"], abs=1e-10)
        assert r["observable_target"] == pytest.approx(g["observable_target"], abs=1e-10)
        assert r["abs_error"] <= r["tolerance"]


# -- cli --------------------------------------------------------------------

def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["--help"]) == 0
    assert cli.main([]) == 1
    assert cli.main(["launch"]) == 1
    assert cli.main(["bounds", "--config", str(tmp_path / "nope.cfg")]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("kind = bounds\nd = x\n")
    assert cli.main(["bounds", "--config", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err
    assert cli.main(["bounds", "--threads", "0"]) == 1
    assert cli.main(["fit", "--input", str(tmp_path / "none.csv"), "--x", "a", "--y", "b"]) == 2


def test_cli_sweep_and_fit(tmp_path, capsys):
    cfg = tmp_path / "t.cfg"
    cfg.write_text("kind = trotter-sweep\nN = 8\nT = 2, 4, 8, 16\np_order = 2\n")
    out = tmp_path / "t.csv"
    assert cli.main(["trotter-sweep", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    fit_out = tmp_path / "f.csv"
    assert cli.main(["fit", "--input", str(out), "--x", "T", "--y", "abs_error", "--where", "p=2",
                     "--out", str(fit_out)]) == 0
    _, rows = read_results(fit_out)
    assert rows[0]["slope"] == pytest.approx(-2.0, abs=0.25)
    assert cli.main(["fit", "--input", str(out), "--x", "T", "--y", "abs_error", "--where", "p2"]) == 1


def test_cli_stdout_matches_library(capsys):
    assert cli.main(["ft-overhead", "--quiet"]) == 0
    cfg = default_config("ft-overhead")
    assert capsys.readouterr().out == rows_to_csv(run_experiment(cfg), columns_for(cfg))

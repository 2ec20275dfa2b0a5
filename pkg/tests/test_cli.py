import json
import math

import numpy as np
import pytest

from hybridlink import cli
from hybridlink.errors import ScenarioError, ScenarioParseError


def parse_csv(text):
    lines = text.splitlines()
    meta = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    header = body[0].split(",")
    rows = [ln.split(",") for ln in body[1:]]
    return meta, header, rows


def numeric(rows):
    return np.array([[float(v) for v in r] for r in rows])


def test_point_reference_value():
    table = cli.run("point")
    _, header, rows = parse_csv(table.to_csv())
    val = float(rows[0][header.index("effective_logneg")])
    assert f"{val:.1e}" == "1.3e-04"


def test_point_overrides():
    table = cli.run("point", overrides={"L": 250.0, "alpha": 0.5, "eta_d": 0.95})
    _, header, rows = parse_csv(table.to_csv())
    r = float(rows[0][header.index("r")])
    assert 0.5e-9 <= r <= 2e-9


def test_distance_sweep_is_monotone_per_column():
    _, header, rows = parse_csv(cli.run("fig4").to_csv())
    assert header == ["L_km", "effective_logneg[alpha=0.5]", "effective_logneg[alpha=0.6]", "effective_logneg[alpha=0.8]"]
    data = numeric(rows)
    assert np.all(np.diff(data[:, 1:], axis=0) < 0)


def test_figure_aliases():
    assert cli.run("fig3").to_csv() == cli.run("alpha-sweep").to_csv()
    assert cli.run("fig3").command == "alpha-sweep"


def test_fig2_columns():
    _, header, rows = parse_csv(cli.run("fig2", overrides={"alpha_grid": [0.0, 1.0, 11]}).to_csv())
    assert header[0] == "alpha" and header[1] == "E_N[R=0]"
    data = numeric(rows)
    assert data.shape == (11, 6)
    assert np.all(data[0, 1:] == 0.0)


def test_fig5_reports_optimum():
    table = cli.run("fig5", overrides={"alpha_grid": [0.3, 0.7, 9], "r_targets": [1e-8]})
    meta, header, rows = parse_csv(table.to_csv())
    note = [m for m in meta if "alpha_star" in m]
    assert len(note) == 1
    a_star = float(note[0].split("alpha_star=")[1].split()[0])
    assert 0.45 <= a_star <= 0.55
    assert header == ["alpha", "L_max_km[r=1e-08]"]


def test_fig5_marks_unreachable_targets():
    table = cli.run("fig5", overrides={"alpha_grid": [0.05, 0.05, 1], "r_targets": [0.4]})
    _, _, rows = parse_csv(table.to_csv())
    assert rows[0][1] == "nan"


def test_fig6_columns_and_ordering():
    _, header, rows = parse_csv(cli.run("fig6").to_csv())
    assert header == ["L_km", "r[eta_d=0.97]", "r[eta_d=0.95]", "r[eta_d=0.9]"]
    data = numeric(rows)
    assert np.all(data[:, 1] >= data[:, 2]) and np.all(data[:, 2] >= data[:, 3])


def test_fidelity_table():
    _, header, rows = parse_csv(cli.run("fidelity").to_csv())
    data = numeric(rows)
    assert header[0] == "T"
    assert np.all(data[:, 1:] >= 0.98)
    assert np.all(data[-1, 1:] == 1.0)


def test_csv_provenance_and_format():
    text = cli.run("point").to_csv()
    meta, _, rows = parse_csv(text)
    assert meta[0].startswith("# hybridlink ")
    assert meta[1] == "# command: point"
    for key in cli.SCHEMAS["point"]:
        assert any(m.startswith(f"# param {key} = ") for m in meta)
    for v in rows[0]:
        mant = v.split("e")[0].lstrip("-")
        assert len(mant.replace(".", "")) == 9


def test_determinism():
    assert cli.run("fig6").to_csv() == cli.run("fig6").to_csv()


def test_thread_count_does_not_change_output(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "1")
    one = cli.run("fig2", overrides={"alpha_grid": [0.0, 2.0, 41]}).to_csv()
    monkeypatch.setenv(cli.THREADS_ENV, "4")
    four = cli.run("fig2", overrides={"alpha_grid": [0.0, 2.0, 41]}).to_csv()
    assert one == four


def test_thread_env_validation(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "zero")
    with pytest.raises(ScenarioError):
        cli.thread_count()
    monkeypatch.setenv(cli.THREADS_ENV, "0")
    with pytest.raises(ScenarioError):
        cli.thread_count()
    monkeypatch.delenv(cli.THREADS_ENV)
    assert cli.thread_count() is None


def test_fmt():
    assert cli.fmt(3) == "3"
    assert cli.fmt(True) == "1"
    assert cli.fmt(float("nan")) == "nan"
    assert cli.fmt(0.1) == "1.00000000e-01"
    assert cli.fmt(-math.pi) == "-3.14159265e+00"


# -- scenarios -----------------------------------------------------------------------

def test_parse_error_has_line_and_column():
    with pytest.raises(ScenarioParseError) as info:
        cli.load_scenario_text('{"version": 1,\n  "alpha": }', "s.json")
    assert "s.json:2:12" in str(info.value)


def test_version_required():
    with pytest.raises(ScenarioError):
        cli.load_scenario_text('{"alpha": 0.5}')
    with pytest.raises(ScenarioError):
        cli.load_scenario_text('{"version": 2}')
    with pytest.raises(ScenarioError):
        cli.load_scenario_text("[1, 2]")


def test_unknown_field_rejected():
    with pytest.raises(ScenarioError, match="alpah"):
        cli.resolve_scenario("point", {"alpah": 0.5})


def test_bad_values_name_the_field():
    with pytest.raises(ScenarioError, match="'alpha'"):
        cli.resolve_scenario("point", overrides={"alpha": "big"})
    with pytest.raises(ScenarioError, match="'L_grid'"):
        cli.resolve_scenario("fig6", overrides={"L_grid": [0, 100]})
    with pytest.raises(ScenarioError, match="'cv_dim'"):
        cli.resolve_scenario("oracle-check", overrides={"cv_dim": 2.5})


def test_overrides_win_over_scenario():
    sc = cli.resolve_scenario("point", {"alpha": 0.3, "L": 20.0}, {"alpha": 0.7})
    assert sc["alpha"] == 0.7 and sc["L"] == 20.0


def test_grid_values():
    assert np.allclose(cli.grid_values([0.0, 1.0, 5]), [0, 0.25, 0.5, 0.75, 1.0])


# -- entry point ---------------------------------------------------------------------

def test_main_writes_csv(tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert cli.main(["point", "--out", str(out)]) == 0
    assert out.read_text().startswith("# hybridlink")
    assert capsys.readouterr().out == ""


def test_main_reads_scenario(tmp_path, capsys):
    sc = tmp_path / "s.json"
    sc.write_text(json.dumps({"version": 1, "alpha": 0.5, "L": 250.0, "eta_d": 0.95}))
    assert cli.main(["point", "--scenario", str(sc), "--param", "L=100"]) == 0
    _, header, rows = parse_csv(capsys.readouterr().out)
    assert float(rows[0][header.index("L_km")]) == 100.0


def test_main_out_of_range(capsys):
    assert cli.main(["point", "--param", "eta_h=1.5"]) == 2
    err = capsys.readouterr().err
    assert "error [out-of-range]" in err or "error [domain]" in err
    assert "eta_h" in err


def test_main_parse_error(tmp_path, capsys):
    sc = tmp_path / "bad.json"
    sc.write_text('{"version": 1,\n "alpha": 0.5,,}')
    assert cli.main(["point", "--scenario", str(sc)]) == 2
    err = capsys.readouterr().err
    assert "error [parse]" in err and "bad.json:2:" in err


def test_main_unknown_field(capsys):
    assert cli.main(["fidelity", "--param", "T=0.5"]) == 2
    assert "error [scenario]" in capsys.readouterr().err


def test_main_missing_file(tmp_path, capsys):
    assert cli.main(["point", "--scenario", str(tmp_path / "none.json")]) == 2
    assert "error [scenario]" in capsys.readouterr().err


def test_oracle_check_small_scenario(capsys):
    code = cli.main([
        "oracle-check",
        "--param", "swap_alphas=[0.5]",
        "--param", "swap_T=[0.1]",
        "--param", "swap_eta_o=[0.8]",
        "--param", "swap_eta_h=[0.55]",
        "--param", "lossy_alphas=[0.5]",
        "--param", "lossy_R=[0.5]",
        "--param", "fidelity_T=[0.5]",
        "--param", "fidelity_n_bar=[0.01]",
    ])
    assert code == 0
    _, header, rows = parse_csv(capsys.readouterr().out)
    assert [r[header.index("pass")] for r in rows] == ["1"] * 4


def test_oracle_check_failure_exit_code(capsys):
    code = cli.main([
        "oracle-check",
        "--param", "swap_alphas=[0.5]",
        "--param", "swap_T=[0.1]",
        "--param", "swap_eta_o=[0.8]",
        "--param", "swap_eta_h=[0.55]",
        "--param", "lossy_alphas=[0.5]",
        "--param", "lossy_R=[0.5]",
        "--param", "fidelity_T=[0.5]",
        "--param", "fidelity_n_bar=[0.05]",
    ])
    assert code == 3
    assert f"error [{cli.ORACLE_FAILURE}]" in capsys.readouterr().err

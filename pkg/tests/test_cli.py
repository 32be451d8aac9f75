import csv
import json

import pytest

from siscale import cli


def write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return path


def run(tmp_path, sub, cfg, *extra, out="out"):
    path = write(tmp_path, cfg)
    return cli.main([sub, "--config", str(path), "--out", str(tmp_path / out), *extra])


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


GAUSS = {"var_x": 1.0, "increments": [0.3, 0.4, 0.5], "D": [0.1, 0.1, 0.1]}
SIM = {
    "dsbs": {"p": 0.25, "q": 0.2},
    "aux": {"erasure": {"a1": 0.05, "keep1": 0.1, "a2": 0.05, "keep2": 0.1}},
    "n": [40, 60],
    "trials": 4,
}


def test_gaussian_outputs(tmp_path, capsys):
    assert run(tmp_path, "gaussian", GAUSS, "--deterministic") == 0
    rows = read_csv(tmp_path / "out" / "gaussian_stages.csv")
    assert [r["decoder"] for r in rows] == ["1", "2", "3"]
    assert all(r["perfectly_scalable"] == "true" for r in rows)
    assert float(rows[-1]["cumulative"]) == pytest.approx(float(rows[-1]["prefix_hb"]), abs=1e-9)
    grid = read_csv(tmp_path / "out" / "cover_grid.csv")
    assert len(grid) == 9 and set(grid[0]) == {"rank_i", "level_j", "rate"}
    assert "R_HB=" in capsys.readouterr().out


def test_deterministic_flag_gives_identical_bytes(tmp_path):
    assert run(tmp_path, "gaussian", GAUSS, "--deterministic", out="a") == 0
    assert run(tmp_path, "gaussian", GAUSS, "--deterministic", out="b") == 0
    for name in ("gaussian_stages.csv", "cover_grid.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_timestamp_without_deterministic(tmp_path):
    assert run(tmp_path, "gaussian", GAUSS) == 0
    assert (tmp_path / "out" / "gaussian_stages.csv").read_text().startswith("# generated ")


def test_dsbs_closed_form_rows(tmp_path):
    cfg = {"p": 0.25, "D1": [0.05], "D2": [0.2, 0.3], "optimize": False}
    assert run(tmp_path, "dsbs", cfg, "--deterministic") == 0
    rows = read_csv(tmp_path / "out" / "dsbs.csv")
    assert rows[0]["region"] == "I-D"
    assert float(rows[0]["R_HB"]) == pytest.approx(0.6280831658031686, abs=1e-9)


def test_rateloss_grid(tmp_path):
    cfg = {"grid": {"var_x": [1.0], "n1": [1.0, 2.0], "D1": [0.1], "D2": [0.3]}}
    assert run(tmp_path, "rateloss", cfg, "--deterministic") == 0
    rows = read_csv(tmp_path / "out" / "rateloss.csv")
    assert len(rows) == 2
    assert rows[0]["within_budget"] == "true"
    assert float(rows[0]["gap_r1"]) == pytest.approx(0.131517202917, abs=1e-9)


def test_region_subset(tmp_path):
    cfg = {"dsbs": {"p": 0.25, "q": 0.2}, "D1": 0.1, "D2": 0.2, "bounds": ["outer_cap"], "grid_size": 3, "cards": {"w1": 3, "w2": 3}}
    assert run(tmp_path, "region", cfg, "--deterministic", "--restarts", "1") == 0
    text = (tmp_path / "out" / "region_outer_cap.csv").read_text()
    assert text.splitlines()[0] == "r1,r_sum,bound_tag"


def test_simulate_outputs_and_reproducibility(tmp_path):
    assert run(tmp_path, "simulate", SIM, "--deterministic", out="a") == 0
    assert run(tmp_path, "simulate", SIM, "--deterministic", out="b") == 0
    a = (tmp_path / "a" / "simulate_summary.json").read_bytes()
    assert a == (tmp_path / "b" / "simulate_summary.json").read_bytes()
    summ = json.loads(a)
    assert [s["spec"]["n"] for s in summ] == [40, 60]
    trend = read_csv(tmp_path / "a" / "simulate_trend.csv")
    assert set(trend[0]) >= {"n", "label", "error_frequency", "E0", "E11"}


def test_simulate_margin_violation_warns_but_succeeds(tmp_path, capsys):
    cfg = dict(SIM, n=30, rates={"r_w1": 0.01})
    assert run(tmp_path, "simulate", cfg, "--deterministic") == 0
    assert "rate conditions violated" in capsys.readouterr().err


def test_plot_flag_writes_png(tmp_path):
    assert run(tmp_path, "gaussian", GAUSS, "--plot") == 0
    assert (tmp_path / "out" / "cover_grid.png").stat().st_size > 0


def error_of(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_parse_error_reports_position(tmp_path, capsys):
    assert run(tmp_path, "gaussian", '{"var_x": 1,\n  oops}') == 2
    err = error_of(capsys)
    assert err["error"] == "parse_error" and err["line"] == 2


def test_missing_field(tmp_path, capsys):
    assert run(tmp_path, "gaussian", {"var_x": 1.0, "D": [0.1]}) == 2
    err = error_of(capsys)
    assert err["error"] == "config_error" and err["field"] == "increments"


def test_invalid_instance(tmp_path, capsys):
    assert run(tmp_path, "gaussian", {"var_x": -1.0, "increments": [1.0], "D": [0.1]}) == 2
    assert error_of(capsys)["error"] == "invalid_instance"


def test_infeasible_distortion(tmp_path, capsys):
    cfg = {
        "source": {"px_y1": [[0.25, 0.25], [0.25, 0.25]], "py2_given_y1": [[1.0], [1.0]], "d1": [[0.2, 1.0], [1.0, 0.2]]},
        "D1": 0.1,
        "D2": 0.4,
        "bounds": ["outer_cap"],
    }
    assert run(tmp_path, "region", cfg) == 2
    err = error_of(capsys)
    assert err["error"] == "infeasible" and err["constraint"] == "D1"


def test_bad_seed(tmp_path, capsys):
    assert run(tmp_path, "gaussian", GAUSS, "--seed", "-1") == 2
    assert error_of(capsys)["field"] == "seed"

"""End-to-end tests of the command line."""

import pytest
from click.testing import CliRunner

from uwradio_loc import config as cfgmod
from uwradio_loc import csvio
from uwradio_loc.channel_model import DEFAULT_MODEL, GainSample
from uwradio_loc.main import EXIT_DATA, cli
from uwradio_loc.network import Position, reference_scenario
from uwradio_loc.srls import SrlsInput


@pytest.fixture
def runner():
    return CliRunner()


def _data_lines(path):
    return [line for line in path.read_text().splitlines() if line and not line.startswith("#")]


def _values(output: str) -> dict:
    values = {}
    for line in output.splitlines():
        if " = " in line:
            key, value = line.split(" = ", 1)
            values[key.strip()] = value.strip()
    return values


def test_fit_channel_noiseless(runner, tmp_path):
    path = tmp_path / "samples.csv"
    csvio.write_gain_samples([GainSample(d, -54.85 - 8.5 * d) for d in (0.5, 1.0, 2.0, 3.5)], path)
    result = runner.invoke(cli, ["fit-channel", str(path)])
    assert result.exit_code == 0, result.output
    values = _values(result.output)
    assert float(values["slope_a_db_per_m"]) == pytest.approx(-8.5, abs=1e-9)
    assert float(values["intercept_b_db"]) == pytest.approx(-54.85, abs=1e-9)
    assert "Fitted 4 sample(s)" in result.output


def test_fit_channel_malformed_row(runner, tmp_path):
    path = tmp_path / "samples.csv"
    path.write_text("# calibration\ndistance_m,gain_db\n1.0,-60.0\n2.0,abc\n")
    result = runner.invoke(cli, ["fit-channel", str(path)])
    assert result.exit_code == EXIT_DATA
    assert ":4:" in result.output


def test_fit_channel_defaults(runner, tmp_path):
    out = tmp_path / "model.yaml"
    result = runner.invoke(cli, ["fit-channel", "--defaults", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert _values(result.output)["noise_var_db2"] == "1.15"
    assert cfgmod.load_channel_model(out) == DEFAULT_MODEL


def test_fit_channel_needs_input(runner):
    result = runner.invoke(cli, ["fit-channel"])
    assert result.exit_code == 2


def test_selfloc_defaults(runner, tmp_path):
    result = runner.invoke(cli, ["selfloc", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    summary = _data_lines(tmp_path / "summary.csv")
    assert summary[0] == "iteration,mae_m,objective"
    assert len(summary) == 1 + 51
    assert len(_data_lines(tmp_path / "trace.csv")) == 1 + 51 * 27
    assert "after 50 iteration(s)" in result.output


def test_selfloc_records_overrides(runner, tmp_path):
    result = runner.invoke(cli, ["selfloc", "--out", str(tmp_path), "--loss", "0.05", "--max-iters", "5"])
    assert result.exit_code == 0, result.output
    text = (tmp_path / "summary.csv").read_text()
    assert "# selfloc.packet_loss_prob = 0.05\n" in text
    assert "# selfloc.max_iters = 5\n" in text
    assert "# scenario = reference\n" in text


def test_selfloc_is_reproducible(runner, tmp_path):
    args = ["selfloc", "--seed", "42", "--max-iters", "5", "--loss", "0.1"]
    first, second = tmp_path / "a", tmp_path / "b"
    assert runner.invoke(cli, args + ["--out", str(first)]).exit_code == 0
    assert runner.invoke(cli, args + ["--out", str(second)]).exit_code == 0
    for name in ("trace.csv", "summary.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_selfloc_bad_scenario(runner, tmp_path):
    path = tmp_path / "bad.csv"
    (tmp_path / "bad.yaml").write_text("comm_radius_m: 10\nsense_radius_m: 8\n")
    path.write_text("id,x_m,y_m,is_anchor\n0,0,0,1\n0,5,0,0\n")
    result = runner.invoke(cli, ["selfloc", "--scenario", str(path), "--out", str(tmp_path)])
    assert result.exit_code == EXIT_DATA
    assert "duplicate" in result.output


def test_selfloc_invalid_loss(runner, tmp_path):
    result = runner.invoke(cli, ["selfloc", "--loss", "1.5", "--out", str(tmp_path)])
    assert result.exit_code == EXIT_DATA


def test_loss_sweep(runner, tmp_path):
    result = runner.invoke(
        cli,
        ["loss-sweep", "--levels", "0,0.2", "--n-seeds", "2", "--max-iters", "3", "--out", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    rows = _data_lines(tmp_path / "selfloc_curves.csv")
    assert rows[0] == "loss_prob,iteration,mae_m"
    assert len(rows) == 1 + 2 * 4
    assert rows[1].startswith("0.0,0,")
    assert rows[-1].startswith("0.2,3,")


def test_loss_sweep_bad_levels(runner, tmp_path):
    result = runner.invoke(cli, ["loss-sweep", "--levels", "0,x", "--out", str(tmp_path)])
    assert result.exit_code == EXIT_DATA


def test_track_noiseless(runner, tmp_path):
    out = tmp_path / "tracking.csv"
    result = runner.invoke(cli, ["track", "--sigma-d", "0", "--out", str(out)])
    assert result.exit_code == 0, result.output
    mae_line = next(line for line in result.output.splitlines() if line.startswith("MAE:"))
    assert float(mae_line.split()[1]) <= 1e-6
    assert "Flagged samples: 0 of 171" in result.output
    rows = _data_lines(out)
    assert rows[0] == "sample,true_x,true_y,est_x,est_y,n_inrange,flagged"
    assert len(rows) == 1 + 171


def test_track_out_of_range(runner, tmp_path):
    trajectory = tmp_path / "far.csv"
    csvio.write_trajectory([Position(100.0, 100.0), Position(101.0, 100.0)], trajectory)
    out = tmp_path / "tracking.csv"
    result = runner.invoke(cli, ["track", "--trajectory", str(trajectory), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "MAE: n/a" in result.output
    assert "Flagged samples: 2 of 2" in result.output
    assert all(row.endswith(",,,0,1") for row in _data_lines(out)[1:])


def test_track_several_seeds(runner, tmp_path):
    trajectory = tmp_path / "short.csv"
    csvio.write_trajectory([Position(2.5, 2.5), Position(3.0, 2.5), Position(3.5, 2.5)], trajectory)
    result = runner.invoke(
        cli,
        ["track", "--trajectory", str(trajectory), "--n-seeds", "3", "--out", str(tmp_path / "t.csv")],
    )
    assert result.exit_code == 0, result.output
    assert "Mean MAE over 3 seeds:" in result.output


def test_gen_scenario_reference(runner, tmp_path):
    out = tmp_path / "grid.csv"
    result = runner.invoke(cli, ["gen-scenario", "--out", str(out)])
    assert result.exit_code == 0, result.output
    rows = _data_lines(out)
    assert len(rows) == 1 + 27
    assert sum(row.endswith(",1") for row in rows[1:]) == 4
    assert csvio.read_scenario(out) == reference_scenario()


def test_gen_scenario_bad_anchor(runner, tmp_path):
    result = runner.invoke(cli, ["gen-scenario", "--anchors", "0,99", "--out", str(tmp_path / "grid.csv")])
    assert result.exit_code == EXIT_DATA


def test_solve(runner, tmp_path):
    path = tmp_path / "instance.csv"
    target = (3.0, 4.0)
    anchors = (Position(0.0, 0.0), Position(10.0, 0.0), Position(0.0, 10.0), Position(10.0, 10.0))
    ranges = tuple(((a.x - target[0]) ** 2 + (a.y - target[1]) ** 2) ** 0.5 for a in anchors)
    csvio.write_instance(SrlsInput(anchors, ranges), path)
    result = runner.invoke(cli, ["solve", str(path)])
    assert result.exit_code == 0, result.output
    lines = result.output.strip().splitlines()
    assert lines[-2] == "x_est_m,y_est_m,lambda_star,phi_residual"
    x, y, _, _ = (float(v) for v in lines[-1].split(","))
    assert (x, y) == pytest.approx(target, abs=1e-6)


def test_solve_collinear_anchors(runner, tmp_path):
    path = tmp_path / "instance.csv"
    path.write_text("x_m,y_m,range_m\n0,0,1\n1,0,1\n2,0,1.5\n")
    result = runner.invoke(cli, ["solve", str(path)])
    assert result.exit_code == 4


def test_unknown_flag(runner):
    result = runner.invoke(cli, ["selfloc", "--no-such-flag"])
    assert result.exit_code == 2


def test_config_with_unknown_key(runner, tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("selfloc:\n  max_iter: 3\n")
    result = runner.invoke(cli, ["--config", str(path), "solve", "whatever.csv"])
    assert result.exit_code == EXIT_DATA
    assert "unknown keys" in result.output


def test_config_file_feeds_commands(runner, tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("seed: 3\nselfloc:\n  max_iters: 2\n")
    out = tmp_path / "out"
    result = runner.invoke(cli, ["--config", str(path), "selfloc", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert len(_data_lines(out / "summary.csv")) == 1 + 3
    assert "# seed = 3\n" in (out / "summary.csv").read_text()

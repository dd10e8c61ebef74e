"""Tests for configuration loading and the file formats."""

import numpy as np
import pytest

from uwradio_loc import config as cfgmod
from uwradio_loc import csvio, selfloc
from uwradio_loc.channel_model import DEFAULT_MODEL, ChannelModel, GainSample
from uwradio_loc.errors import DataFormatError
from uwradio_loc.network import Position, Rect, reference_scenario
from uwradio_loc.selfloc import SelfLocConfig
from uwradio_loc.sim import LossCurves, TrackingRun, generate_measurements
from uwradio_loc.srls import SrlsInput


def _data_lines(path):
    return [line for line in path.read_text().splitlines() if line and not line.startswith("#")]


# --- configuration ---


def test_defaults_resolve_to_dataclass_defaults():
    config = cfgmod.resolve_config(None)
    assert config == cfgmod.DEFAULTS
    assert config is not cfgmod.DEFAULTS
    assert cfgmod.selfloc_config(config) == SelfLocConfig()
    assert cfgmod.channel_model(config) == DEFAULT_MODEL


def test_partial_override_merges():
    config = cfgmod.resolve_config({"seed": 9, "selfloc": {"packet_loss_prob": 0.2}})
    cfg = cfgmod.selfloc_config(config)
    assert cfg.packet_loss_prob == 0.2
    assert cfg.max_iters == 50
    assert cfg.seed == 9
    assert cfgmod.selfloc_config(config, seed=3).seed == 3


def test_unknown_keys_rejected():
    with pytest.raises(DataFormatError, match="unknown config section"):
        cfgmod.resolve_config({"selfloc_typo": {}})
    with pytest.raises(DataFormatError, match="unknown keys"):
        cfgmod.resolve_config({"selfloc": {"max_iter": 3}})
    with pytest.raises(DataFormatError):
        cfgmod.resolve_config({"selfloc": 3})


def test_env_expansion(monkeypatch):
    monkeypatch.setenv("UWRADIO_RANGING", "power")
    assert cfgmod.expand_env_vars("${UWRADIO_RANGING}") == "power"
    assert cfgmod.expand_env_vars("${UWRADIO_UNSET_VAR}") == "${UWRADIO_UNSET_VAR}"
    assert cfgmod.expand_config({"a": ["${UWRADIO_RANGING}", 1]}) == {"a": ["power", 1]}


def test_load_config(tmp_path, monkeypatch):
    monkeypatch.setenv("UWRADIO_MODE", "power")
    path = tmp_path / "config.yaml"
    path.write_text("seed: 4\nmeasurements:\n  ranging: ${UWRADIO_MODE}\n")
    config = cfgmod.resolve_config(cfgmod.load_config(path))
    assert config["seed"] == 4
    assert cfgmod.ranging(config).name == "power"

    path.write_text("- just\n- a list\n")
    with pytest.raises(DataFormatError):
        cfgmod.load_config(path)
    with pytest.raises(FileNotFoundError):
        cfgmod.load_config(tmp_path / "missing.yaml")


def test_find_config(tmp_path):
    assert cfgmod.find_config(tmp_path) in (None, cfgmod.USER_CONFIG_DIR / cfgmod.CONFIG_FILENAME)
    (tmp_path / "config.yaml").write_text("seed: 1\n")
    assert cfgmod.find_config(tmp_path) == tmp_path / "config.yaml"


def test_parse_init_box():
    assert cfgmod.parse_init_box(None) is None
    assert cfgmod.parse_init_box("auto") is None
    assert cfgmod.parse_init_box("0,10,-5,5") == Rect(0.0, 10.0, -5.0, 5.0)
    assert cfgmod.parse_init_box([0, 10, -5, 5]) == Rect(0.0, 10.0, -5.0, 5.0)
    with pytest.raises(DataFormatError):
        cfgmod.parse_init_box("0,10")


def test_flatten():
    flat = cfgmod.flatten(cfgmod.resolve_config(None))
    assert flat["seed"] == 0
    assert flat["selfloc.max_iters"] == 50
    assert flat["channel.noise_var_db2"] == 1.15


def test_channel_model_file_is_bit_identical(tmp_path):
    path = tmp_path / "model.yaml"
    cfgmod.save_channel_model(DEFAULT_MODEL, path)
    assert cfgmod.load_channel_model(path) == DEFAULT_MODEL
    first = path.read_bytes()
    cfgmod.save_channel_model(cfgmod.load_channel_model(path), path)
    assert path.read_bytes() == first

    odd = ChannelModel(-8.123456789012345, -54.000000000000014, 1.0000000000000002)
    cfgmod.save_channel_model(odd, path)
    assert cfgmod.load_channel_model(path) == odd


def test_channel_model_file_errors(tmp_path):
    path = tmp_path / "model.yaml"
    path.write_text("slope_a_db_per_m: -8.5\n")
    with pytest.raises(DataFormatError, match="missing keys"):
        cfgmod.load_channel_model(path)
    path.write_text("slope_a_db_per_m: x\nintercept_b_db: 1\nnoise_var_db2: 1\n")
    with pytest.raises(DataFormatError):
        cfgmod.load_channel_model(path)


# --- CSV formats ---


def test_gain_samples_round_trip(tmp_path):
    path = tmp_path / "samples.csv"
    samples = [GainSample(0.5, -59.1), GainSample(1.25, -65.7)]
    csvio.write_gain_samples(samples, path)
    assert csvio.read_gain_samples(path) == samples


def test_malformed_row_reports_line(tmp_path):
    path = tmp_path / "samples.csv"
    path.write_text("# calibration\ndistance_m,gain_db\n1.0,-60.0\n2.0,abc\n")
    with pytest.raises(DataFormatError, match=":4:") as err:
        csvio.read_gain_samples(path)
    assert err.value.line == 4

    path.write_text("distance_m,gain_db\n1.0,-60.0,7\n")
    with pytest.raises(DataFormatError, match=":2:"):
        csvio.read_gain_samples(path)

    path.write_text("distance,gain\n1.0,-60.0\n")
    with pytest.raises(DataFormatError, match="expected header"):
        csvio.read_gain_samples(path)

    path.write_text("distance_m,gain_db\n0.0,-60.0\n")
    with pytest.raises(DataFormatError, match=":2:"):
        csvio.read_gain_samples(path)

    with pytest.raises(FileNotFoundError):
        csvio.read_gain_samples(tmp_path / "missing.csv")


def test_bundled_scenario_is_reference(bundled_scenario_path):
    assert csvio.read_scenario(bundled_scenario_path) == reference_scenario()


def test_scenario_round_trip(tmp_path):
    path = tmp_path / "grid.csv"
    scenario = reference_scenario()
    csvio.write_scenario(scenario, path)
    assert (tmp_path / "grid.yaml").exists()
    assert csvio.read_scenario(path) == scenario
    assert csvio.read_scenario(path, radii=(7.0, 6.0)).comm_radius == 7.0


def test_scenario_errors(tmp_path):
    path = tmp_path / "bad.csv"
    (tmp_path / "bad.yaml").write_text("comm_radius_m: 10\nsense_radius_m: 8\n")
    path.write_text("id,x_m,y_m,is_anchor\n0,0,0,1\n2,5,0,0\n")
    with pytest.raises(DataFormatError, match="node ids"):
        csvio.read_scenario(path)
    path.write_text("id,x_m,y_m,is_anchor\n0,0,0,1\n0,5,0,0\n")
    with pytest.raises(DataFormatError, match="duplicate"):
        csvio.read_scenario(path)
    path.write_text("id,x_m,y_m,is_anchor\n0,0,0,maybe\n")
    with pytest.raises(DataFormatError, match="boolean"):
        csvio.read_scenario(path)
    path.write_text("id,x_m,y_m,is_anchor\n0,0,0,1\n")
    (tmp_path / "bad.yaml").unlink()
    with pytest.raises(FileNotFoundError):
        csvio.read_scenario(path)


def test_instance_round_trip(tmp_path):
    path = tmp_path / "instance.csv"
    inp = SrlsInput((Position(0, 0), Position(10, 0), Position(0, 10)), (5.0, 8.06, 6.7))
    csvio.write_instance(inp, path)
    assert csvio.read_instance(path) == inp


def test_trajectory_round_trip(tmp_path):
    path = tmp_path / "traj.csv"
    points = [Position(0.0, 2.5), Position(0.5, 2.5)]
    csvio.write_trajectory(points, path)
    assert csvio.read_trajectory(path) == points


def test_trace_and_summary(tmp_path):
    scenario = reference_scenario()
    trace = selfloc.run(scenario, generate_measurements(scenario, 0.63, 0), SelfLocConfig(max_iters=3))
    params = {"selfloc.packet_loss_prob": 0.05}
    csvio.write_trace(trace, tmp_path / "trace.csv", params)
    csvio.write_summary(trace, tmp_path / "summary.csv", params)

    text = (tmp_path / "summary.csv").read_text()
    assert text.startswith("# uwradio-loc 0.1.0 ")
    assert "# selfloc.packet_loss_prob = 0.05\n" in text
    summary = _data_lines(tmp_path / "summary.csv")
    assert summary[0] == "iteration,mae_m,objective"
    assert len(summary) == 1 + 4
    assert float(summary[-1].split(",")[1]) == trace.final_mae

    rows = _data_lines(tmp_path / "trace.csv")
    assert rows[0] == "iteration,node_id,x_est_m,y_est_m"
    assert len(rows) == 1 + 4 * 27
    k, i, x, y = rows[-1].split(",")
    assert (int(k), int(i)) == (3, 26)
    assert (float(x), float(y)) == tuple(trace.estimates[3, 26])


def test_tracking_csv_leaves_flagged_estimates_empty(tmp_path):
    run = TrackingRun(
        samples=(Position(0, 0), Position(1, 0)),
        estimates=(Position(0.1, 0.0), None),
        n_inrange=(4, 1),
        flagged=(False, True),
        mae=0.1,
    )
    path = tmp_path / "tracking.csv"
    csvio.write_tracking(run, path)
    rows = _data_lines(path)
    assert rows[0] == "sample,true_x,true_y,est_x,est_y,n_inrange,flagged"
    assert rows[1] == "0,0.0,0.0,0.1,0.0,4,0"
    assert rows[2] == "1,1.0,0.0,,,1,1"


def test_curves_csv(tmp_path):
    curves = LossCurves((0.0, 0.1), {0.0: np.array([[3.0, 1.0], [5.0, 2.0]]), 0.1: np.array([[3.0, 2.0], [5.0, 3.0]])})
    path = tmp_path / "selfloc_curves.csv"
    csvio.write_curves(curves, path)
    rows = _data_lines(path)
    assert rows == ["loss_prob,iteration,mae_m", "0.0,0,4.0", "0.0,1,1.5", "0.1,0,4.0", "0.1,1,2.5"]

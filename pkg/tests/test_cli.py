import math
import re

import pandas as pd
import pytest
import xarray as xr
from click.testing import CliRunner

from rc_sccc.cli import cli
from rc_sccc.exit_bank import save_bank


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "config.toml"
    path.write_text(
        "[code]\nK = 200\n\n"
        "[exit]\nn_samples = 600\nia_points = 5\nframe_length = 200\n\n"
        "[bound]\nw_max = 4\nh_max = 20\nl_max = 20\n"
    )
    return path


def test_rate_from_dimensions(runner):
    result = runner.invoke(cli, ["rate", "--d1", "20", "--d2", "20"])
    assert result.exit_code == 0
    assert "R=5/6" in result.output
    assert "L=240" in result.output


def test_rate_from_permeabilities(runner):
    result = runner.invoke(cli, ["rate", "--rho1", "1/5", "--rho2", "1/15"])
    assert result.exit_code == 0
    assert "D=[200, 20, 20]" in result.output


def test_infeasible_rate_exits_with_2(runner):
    result = runner.invoke(cli, ["rate", "--rate", "1/2", "--d2", "50"])
    assert result.exit_code == 2


@pytest.mark.parametrize("rate, mode, d2", [("1/2", "compromise", 150), ("2/3", "compromise", 75), ("1/2", "ef", 200), ("2/3", "ef", 100)])
def test_strategy(runner, tmp_path, rate, mode, d2):
    result = runner.invoke(cli, ["strategy", "--config-file", str(tmp_path / "none.toml"), "--rate", rate, "--mode", mode])
    assert result.exit_code == 0
    assert f"d2={d2} " in result.output


def test_strategy_all_rates(runner, tmp_path):
    output = tmp_path / "strategy.csv"
    result = runner.invoke(cli, ["strategy", "--config-file", str(tmp_path / "none.toml"), "--all-rates", "--output", str(output)])
    assert result.exit_code == 0
    frame = pd.read_csv(output)
    assert list(frame.columns) == ["L", "rate", "mode", "d2", "rho2"]
    assert len(frame) == 401
    assert frame.loc[frame["L"] == 400, "d2"].item() == 150
    assert frame.loc[frame["L"] == 600, "rho2"].item() == 1.0


def test_capacity(runner):
    result = runner.invoke(cli, ["capacity", "--rate", "1/2", "--ebn0", "1.0"])
    assert result.exit_code == 0
    limit = float(re.search(r"BPSK limit (-?[\d.]+) dB", result.output).group(1))
    gap = float(re.search(r"Gap at 1.00 dB: (-?[\d.]+) dB", result.output).group(1))
    assert limit == pytest.approx(0.19, abs=0.02)
    assert gap == pytest.approx(1.0 - limit, abs=2e-3)


def test_bound_writes_csv_and_manifest(runner, tmp_path, small_config):
    output = tmp_path / "bound.csv"
    result = runner.invoke(
        cli,
        ["bound", "--config-file", str(small_config), "--d1", "100", "--d2", "100",
         "--ebn0-start", "2", "--ebn0-stop", "4", "--ebn0-step", "1", "--output", str(output),
         "--enumerators-dir", str(tmp_path / "wef")],
    )
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(output)
    assert list(frame.columns) == ["eb_n0_db", "pb_bound"]
    assert frame["eb_n0_db"].tolist() == [2.0, 3.0, 4.0]
    assert output.with_suffix(".json").exists()
    assert pd.read_csv(tmp_path / "wef" / "lower_wef.csv").columns.tolist() == ["l", "h2", "mult"]


def test_threshold_from_banks(runner, tmp_path, synthetic_banks):
    upper, lower = synthetic_banks
    save_bank(upper, tmp_path / "upper.zarr")
    save_bank(lower, tmp_path / "lower.zarr")
    output = tmp_path / "threshold.csv"
    result = runner.invoke(
        cli,
        ["threshold", "--config-file", str(tmp_path / "none.toml"), "--d1", "100", "--d2", "100",
         "--upper-bank", str(tmp_path / "upper.zarr"), "--lower-bank", str(tmp_path / "lower.zarr"),
         "--output", str(output)],
    )
    assert result.exit_code == 0, result.output
    assert "gap" in result.output
    row = pd.read_csv(output).iloc[0]
    assert list(row.index) == ["rate", "d2", "eb_n0_db_min", "target_pb", "iters"]
    assert row["eb_n0_db_min"] == pytest.approx(10.0 * math.log10(2.0), abs=0.06)


def test_bank_without_partner_is_rejected(runner, tmp_path, synthetic_banks):
    upper, _ = synthetic_banks
    save_bank(upper, tmp_path / "upper.zarr")
    result = runner.invoke(
        cli,
        ["threshold", "--config-file", str(tmp_path / "none.toml"), "--d1", "100", "--d2", "100",
         "--upper-bank", str(tmp_path / "upper.zarr")],
    )
    assert result.exit_code == 2


def test_exit_bank_command(runner, tmp_path, small_config):
    result = runner.invoke(
        cli,
        ["exit-bank", "--config-file", str(small_config), "--component", "lower", "--es-start", "0",
         "--es-stop", "1", "--es-step", "1", "--d-step", "100", "--seed", "1", "--output-dir", str(tmp_path / "banks")],
    )
    assert result.exit_code == 0, result.output
    ds = xr.open_zarr(tmp_path / "banks" / "lower.zarr")
    assert ds["d"].values.tolist() == [0, 100, 200, 300]
    assert ds["es_n0_db"].values.tolist() == [0.0, 1.0]
    assert (tmp_path / "banks" / "metadata.json").exists()


def test_simulate_uncoded_run_dir(runner, tmp_path, small_config):
    result = runner.invoke(
        cli,
        ["simulate", "--config-file", str(small_config), "--uncoded", "--ebn0-start", "2", "--ebn0-stop", "2",
         "--min-bit-errors", "10", "--seed", "3", "--output-dir", str(tmp_path / "runs")],
    )
    assert result.exit_code == 0, result.output
    (run_dir,) = (tmp_path / "runs").iterdir()
    assert run_dir.name.startswith("run_")
    frame = pd.read_csv(run_dir / "ber.csv")
    assert frame.columns.tolist() == ["eb_n0_db", "ber", "fer", "bits", "frames", "bit_errors", "frame_errors"]
    assert frame["bit_errors"].item() >= 10
    assert (run_dir / "metadata.json").exists()

import json

import pandas as pd
import pytest

from scripts.describe_sweep import describe_sweep, main
from smallcell.commands import SWEEP_COLUMNS


def _write_sweep(tmp_path, rows):
    path = tmp_path / "sweep.csv"
    pd.DataFrame(rows, columns=SWEEP_COLUMNS).to_csv(path, index=False)
    return str(path)


def _row(mode, lambda_b, eta):
    return [mode, lambda_b, lambda_b / 370.0, eta, eta * 10.0, 10.0, 1e-9]


@pytest.fixture
def sweep_csv(tmp_path):
    rows = [
        _row("all-on", 100.0, 0.10),
        _row("all-on", 300.0, 0.14),
        _row("all-on", 370.0, 0.14),
        _row("on-off", 100.0, 0.18),
        _row("on-off", 300.0, 0.22),
        _row("on-off", 370.0, 0.21),
    ]
    return _write_sweep(tmp_path, rows)


def test_peak_per_mode_prefers_denser_tie(sweep_csv):
    tables = describe_sweep(sweep_csv)
    peak = tables["peak"].set_index("mode")
    assert peak.loc["all-on", "lambda_b_per_km2"] == 370.0
    assert peak.loc["on-off", "lambda_b_per_km2"] == 300.0
    gain = tables["gain"]
    assert list(gain["lambda_b_per_km2"]) == [100.0, 300.0, 370.0]
    assert gain["on_off_gain"].tolist() == pytest.approx([1.8, 0.22 / 0.14, 0.21 / 0.14])


def test_mode_filter_skips_gain(sweep_csv):
    tables = describe_sweep(sweep_csv, "on-off")
    assert list(tables) == ["peak"]
    assert tables["peak"]["mode"].tolist() == ["on-off"]


def test_json_output(sweep_csv, capsys):
    assert main([sweep_csv, "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert {row["mode"] for row in payload["peak"]} == {"all-on", "on-off"}


def test_rejects_non_sweep_csv(tmp_path):
    path = tmp_path / "other.csv"
    pd.DataFrame({"mu": [1.0], "mode": ["on-off"]}).to_csv(path, index=False)
    with pytest.raises(ValueError):
        describe_sweep(str(path))
    assert main([str(path)]) == 1
    assert main([str(tmp_path / "missing.csv")]) == 1

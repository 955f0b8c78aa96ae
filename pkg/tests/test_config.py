import pytest

from smallcell.lib.config import DEFAULT_CONFIG_PATH, load_config, parse_overrides
from smallcell.lib.errors import ConfigError
from smallcell.lib.network_model import PowerMode
from smallcell.simulation.montecarlo import Boundary

BASE = """\
alpha = 3.67
path_loss_constant = 4.33e-6
delta = 0.01
p_r_min = -100 dBm
noise_power = -95 dBm
p0_circuit = 6.8 W
delta_slope = 4.0
p_off = 4.3 W
lambda_u = 370 per_km2
"""


def _write(tmp_path, text: str) -> str:
    path = tmp_path / "run.cfg"
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_shipped_config_in_si_units():
    config = load_config()
    assert DEFAULT_CONFIG_PATH.endswith("paper_s5.cfg")
    assert config.network.alpha == 3.67
    assert config.network.p_r_min == pytest.approx(1e-13, rel=1e-12)
    assert config.network.noise_power == pytest.approx(10 ** -12.5, rel=1e-12)
    assert config.lambda_u == pytest.approx(3.7e-4, rel=1e-12)
    assert config.outage_threshold == pytest.approx(10 ** 0.5, rel=1e-12)
    assert config.reference_outage == 0.26
    assert config.lambda_u_grid[0] == pytest.approx(1e-4) and len(config.lambda_u_grid) == 10
    assert config.sim is not None and config.sim.seed == 2015 and config.sim.boundary is Boundary.TORUS


def test_minimal_file_uses_defaults(tmp_path):
    config = load_config(_write(tmp_path, BASE))
    assert config.sim is None
    assert config.search.grid_points == 64
    assert config.quadrature.rel_tol == 1e-8
    assert config.mu_grid == [0.5, 1.0, 2.0, 4.0]


def test_flags_override_file(tmp_path):
    overrides = parse_overrides(["lambda_u=500 per_km2", "seed=9", "mu_grid=1, 3"])
    config = load_config(_write(tmp_path, BASE), overrides)
    assert config.lambda_u == pytest.approx(5e-4)
    assert config.sim is not None and config.sim.seed == 9
    assert config.mu_grid == [1.0, 3.0]


def test_simulate_false_drops_monte_carlo(tmp_path):
    config = load_config(_write(tmp_path, BASE + "seed = 3\nsimulate = false\n"))
    assert config.sim is None


def test_unknown_key_reports_line(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(_write(tmp_path, BASE + "# trailing\nbogus = 1\n"))
    assert info.value.line == 11
    assert info.value.field == "bogus"


def test_unknown_unit_rejected(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(_write(tmp_path, BASE.replace("6.8 W", "6.8 hp")))
    assert info.value.field == "p0_circuit"
    assert "hp" in str(info.value)


def test_power_without_unit_rejected(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(_write(tmp_path, BASE.replace("4.3 W", "4.3")))
    assert info.value.field == "p_off"


def test_density_unit_on_power_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, BASE.replace("-100 dBm", "-100 per_km2")))


@pytest.mark.parametrize(
    "old, new, field",
    [
        ("alpha = 3.67", "alpha = 2", "alpha"),
        ("delta = 0.01", "delta = 1.5", "delta"),
        ("p_off = 4.3 W", "p_off = 7 W", "network"),
    ],
)
def test_physically_invalid_values(tmp_path, old, new, field):
    with pytest.raises(ConfigError) as info:
        load_config(_write(tmp_path, BASE.replace(old, new)))
    assert info.value.field == field
    if field == "alpha":
        assert info.value.line == 1
        assert "greater than 2" in str(info.value)
    if field == "network":
        assert "p0_circuit" in str(info.value)


def test_malformed_line(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(_write(tmp_path, BASE + "just words\n"))
    assert info.value.line == 10


def test_duplicate_key(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, BASE + "alpha = 4\n"))


def test_lambda_u_required(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, BASE.replace("lambda_u = 370 per_km2\n", "")))


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.cfg")


def test_workers_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SMALLCELL_WORKERS", "3")
    config = load_config(_write(tmp_path, BASE + "seed = 1\n"))
    assert config.search.workers == 3
    assert config.sim.workers == 3


def test_on_off_rate_tolerance(tmp_path):
    config = load_config(_write(tmp_path, BASE))
    assert config.tolerances.rate_tolerance_for(PowerMode.ALL_ON) == 0.05
    assert config.tolerances.rate_tolerance_for(PowerMode.ON_OFF) == 0.10
    wider = load_config(_write(tmp_path, BASE + "on_off_rate_tolerance = 0.2\n"))
    assert wider.tolerances.rate_tolerance_for(PowerMode.ON_OFF) == 0.2

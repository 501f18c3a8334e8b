import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dtcsim.config import ConfigError, RunConfig, load_config, parse_axis, parse_config


def test_defaults():
    cfg = parse_config("")
    assert cfg.engine == "exact" and cfg.pump_w == "optimal" and cfg.seeds == tuple(range(32))


def test_full_example():
    cfg = parse_config("""
[run]
engine = cumulant
output = out
report = yes
[model]
n_spins = 100
g_over_f = 0.5
pump_w = optimal
[scan]
n_spins = 10, 30, 50, 100
g_over_f = 0.01:30:13:log
delta_over_f = 0, 0.05, 0.1
n_seeds = 8
[grid]
eta_max = 6
samples = 512
""")
    assert cfg.report and cfg.scan_n_spins == (10, 30, 50, 100)
    assert len(cfg.scan_g_over_f) == 13
    assert cfg.scan_g_over_f[0] == pytest.approx(0.01) and cfg.scan_g_over_f[-1] == pytest.approx(30)
    assert cfg.seeds == tuple(range(8)) and cfg.eta_max == 6.0


def test_optimal_pump_resolves_per_cell():
    cfg = parse_config("[model]\nf = 2\ngamma = 0.5\n")
    assert cfg.params(n_spins=10).pump_w == pytest.approx(2 * 10 * 0.5 / 2)
    assert cfg.params(n_spins=40).pump_w == pytest.approx(2 * 40 * 0.5 / 2)
    assert cfg.params(n_spins=10, g_over_f=3).g == pytest.approx(6.0)
    assert cfg.params(w_over_f=4).pump_w == pytest.approx(4.0)


@pytest.mark.parametrize("text, path", [
    ("[bogus]\nx = 1\n", "bogus"),
    ("[model]\ncolour = red\n", "model.colour"),
    ("[run]\nengine = magic\n", "run.engine"),
    ("[model]\nn_spins = 0\n", "model.n_spins"),
    ("[model]\nn_spins = 2.5\n", "model.n_spins"),
    ("[model]\ngamma = -1\n", "model.gamma"),
    ("[model]\npump_w = -3\n", "model.pump_w"),
    ("[model]\npump_w = lots\n", "model.pump_w"),
    ("[scan]\ng_over_f = \n", "scan.g_over_f"),
    ("[scan]\ng_over_f = 0:1:3:cubic\n", "scan.g_over_f"),
    ("[scan]\nw_over_f = 0, 1\n", "scan.w_over_f"),
    ("[scan]\nn_spins = 3, 4.5\n", "scan.n_spins"),
    ("[grid]\nsamples = 10\n", "grid.samples"),
    ("[grid]\neta_max = -1\n", "grid.eta_max"),
    ("[grid]\nd_eta = 0.5\n", "grid.d_eta"),
])
def test_errors_name_the_field(text, path):
    with pytest.raises(ConfigError, match=path.replace(".", r"\.")):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_digest_stable_and_sensitive():
    a = parse_config("[model]\nn_spins = 12\n")
    b = parse_config("[model]\nn_spins   =   12\n")
    c = parse_config("[model]\nn_spins = 13\n")
    assert a.digest == b.digest != c.digest


@given(st.floats(0.01, 10), st.floats(0.01, 10), st.integers(1, 50))
def test_range_axis(a, b, n):
    vals = parse_axis(f"{a!r}:{b!r}:{n}", "x")
    np.testing.assert_allclose(vals, np.linspace(a, b, n))
    logs = parse_axis(f"{a!r}:{b!r}:{n}:log", "x")
    np.testing.assert_allclose(logs, np.geomspace(a, b, n))


def test_list_axis_integers():
    assert parse_axis("1, 2,3", "x", integer=True) == (1, 2, 3)
    assert isinstance(RunConfig().seeds, tuple)

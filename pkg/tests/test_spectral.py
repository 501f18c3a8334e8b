import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtcsim.dynamics import steady_state
from dtcsim.liouvillian import ModelParams, build_liouvillian
from dtcsim.regression import correlator, default_tau_grid, fitting_tau_grid
from dtcsim.spectral import (
    MIN_SAMPLES,
    SpectralFit,
    damped_cosine,
    fit_arrays,
    fit_damped_cosine,
    fit_to_json,
    frequency_contour,
    mutual_info_contour,
    stability_map,
    write_stability_csv,
)


def test_synthetic_damped_cosine():
    t = np.linspace(0, 6, 2048)
    fit = fit_arrays(t, np.exp(-t) * np.cos(5 * t))
    assert fit.omega == pytest.approx(5.0, abs=1e-6)
    assert fit.bandwidth_b == pytest.approx(1.0, abs=1e-6)
    assert fit.ratio == pytest.approx(5.0, abs=1e-5)
    assert not fit.low_confidence


def test_negative_frequency_is_canonicalised():
    t = np.linspace(0, 6, 1024)
    fit = fit_arrays(t, 2 * np.exp(-0.5 * t) * np.cos(-3 * t + 0.4))
    assert fit.omega > 0 and fit.amplitude > 0
    assert fit.phase == pytest.approx(-0.4, abs=1e-6)


def test_flat_trace_gives_exponential():
    t = np.linspace(0, 4, 512)
    fit = fit_arrays(t, 0.3 * np.exp(-0.7 * t))
    assert fit.omega == 0.0
    assert fit.bandwidth_b == pytest.approx(0.7, rel=1e-6)
    assert fit.ratio == 0.0


def test_zero_trace_flagged():
    fit = fit_arrays(np.linspace(0, 1, 100), np.zeros(100))
    assert fit.low_confidence and fit.omega == 0.0


def test_rejects_short_or_irregular_grids():
    with pytest.raises(ValueError):
        fit_arrays(np.linspace(0, 1, MIN_SAMPLES - 1), np.ones(MIN_SAMPLES - 1))
    t = np.sort(np.random.default_rng(0).random(100))
    with pytest.raises(ValueError):
        fit_arrays(t, np.cos(t))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 8), st.floats(0.1, 2), st.floats(-3, 3), st.floats(1e-3, 1e3))
def test_amplitude_rescaling_invariance(w, b, ph, scale):
    t = np.linspace(0, 8, 1024)
    y = damped_cosine(t, 1.0, b, w, ph)
    f1 = fit_arrays(t, y)
    f2 = fit_arrays(t, scale * y)
    assert f2.omega == pytest.approx(f1.omega, rel=1e-8)
    assert f2.bandwidth_b == pytest.approx(f1.bandwidth_b, rel=1e-8)
    assert f2.amplitude == pytest.approx(scale * f1.amplitude, rel=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 8), st.floats(0.1, 2), st.floats(-3, 3), st.integers(0, 1000))
def test_refit_is_fixed_point(w, b, ph, seed):
    t = np.linspace(0, 8, 1024)
    noise = 1e-3 * np.random.default_rng(seed).normal(size=t.size)
    f1 = fit_arrays(t, damped_cosine(t, 1.0, b, w, ph) + noise)
    f2 = fit_arrays(t, damped_cosine(t, 1.0, b, w, ph) + noise,
                    guess=(f1.amplitude, f1.bandwidth_b, f1.omega, f1.phase, f1.offset))
    assert f2.omega == pytest.approx(f1.omega, rel=1e-10, abs=1e-10)
    assert f2.bandwidth_b == pytest.approx(f1.bandwidth_b, rel=1e-10, abs=1e-10)


def test_no_oscillation_without_exchange():
    params = ModelParams(20, 1.0, 0.0, 1.0, 10.0)
    L = build_liouvillian(params)
    tr = correlator(L, steady_state(L), default_tau_grid(params, 6.0, 512))
    fit = fit_damped_cosine(tr)
    assert fit.omega < np.pi / tr.tau_grid[-1]


def test_fit_to_json_units():
    fit = SpectralFit(4.0, 2.0, 1.0, 0.0, 0.0, 1e-4)
    rec = json.loads(fit_to_json(fit, {"n_spins": 3}, unit=2.0))
    assert rec["omega"] == 2.0 and rec["bandwidth"] == 1.0 and rec["ratio"] == 2.0
    assert rec["params"] == {"n_spins": 3}


def test_contours():
    assert frequency_contour(100) == pytest.approx(0.1)
    assert np.isnan(mutual_info_contour(30))
    g = mutual_info_contour(100)
    assert 2 * 100 / (1 + 4 * g**2 * 0.03) == pytest.approx(80.0)


def test_stability_map_rows_and_csv(tmp_path):
    fit = SpectralFit(3.0, 1.5, 1.0, 0.0, 0.0, 1e-5)
    rows = stability_map([(50, 1.0, fit, "ok"), (10, 2.0, None, "failed"), (10, 0.5, fit, "ok")])
    assert [(r.n_spins, r.g_over_f) for r in rows] == [(10, 0.5), (10, 2.0), (50, 1.0)]
    assert rows[1].status == "failed" and np.isnan(rows[1].ratio)
    assert rows[0].ratio == pytest.approx(2.0)
    text = write_stability_csv(tmp_path / "s.csv", rows, {"engine": "exact"}).read_text()
    assert text.splitlines()[2].startswith("N,g_over_f,ratio")
    assert stability_map([]) == []


def test_ratio_rises_then_falls_at_fixed_n():
    n = 30
    ratios = []
    for gf in (0.01, 0.618, 30.0):
        params = ModelParams.optimal(n, g=gf)
        L = build_liouvillian(params)
        rho = steady_state(L)
        ratios.append(fit_damped_cosine(correlator(L, rho, fitting_tau_grid(params, rho, samples=1024))).ratio)
    assert ratios[1] > ratios[0] and ratios[1] > ratios[2]

import numpy as np
import pytest

from dtcsim import oracle
from dtcsim.dicke import DickeSpace, SymOperator
from dtcsim.dynamics import DegenerateSteadyStateWarning, collective_expectations, steady_state
from dtcsim.liouvillian import ModelParams, build_liouvillian
from dtcsim.regression import (
    correlator,
    default_tau_grid,
    fitting_tau_grid,
    left_multiply_collective_lowering,
    write_correlator_csv,
)
from dtcsim.spectral import fit_damped_cosine

from conftest import random_symmetric_state


def _trace(params, grid=None):
    L = build_liouvillian(params)
    rho = steady_state(L)
    return rho, correlator(L, rho, grid)


def test_zero_lag_matches_expectations():
    rho, tr = _trace(ModelParams.optimal(12), default_tau_grid(ModelParams.optimal(12), 1.0, 64))
    assert tr.values[0] == pytest.approx(collective_expectations(rho).spsm / 144, abs=1e-10)
    assert tr.order_parameter == pytest.approx(np.sqrt(tr.c0))


def test_dark_steady_state_has_zero_correlator():
    params = ModelParams(5, 1.0, 0.5, 1.0, 0.0)
    L = build_liouvillian(params)
    with pytest.warns(DegenerateSteadyStateWarning):
        rho = steady_state(L, x0=SymOperator.all_down(L.space))
    tr = correlator(L, rho, default_tau_grid(params, 2.0, 64))
    assert np.abs(tr.values).max() < 1e-12


def test_matches_oracle_at_four_spins():
    params = ModelParams.optimal(4)
    grid = default_tau_grid(params, 3.0, 80)
    _, tr = _trace(params, grid)
    want = oracle.oracle_correlator(params, oracle.oracle_steady(params), grid)
    np.testing.assert_allclose(tr.values, want, atol=1e-8)


def test_lowering_annihilates_bottom_state():
    space = DickeSpace(3)
    x = SymOperator.dicke(space, 1.5, -1.5)
    assert np.abs(left_multiply_collective_lowering(x).coeffs).max() == 0.0


def test_lowering_two_spin_top_state():
    space = DickeSpace(2)
    out = left_multiply_collective_lowering(SymOperator.dicke(space, 1, 1))
    want = np.zeros(space.dim, complex)
    want[space.index(2, 0, 2)] = np.sqrt(2)
    np.testing.assert_allclose(out.coeffs, want)


def test_lowering_matches_dense_after_symmetrisation(rng):
    x = random_symmetric_state(4, rng)
    jm = oracle.collective_ops(4)[1].toarray()
    got = oracle.sym_to_dense(left_multiply_collective_lowering(x))
    np.testing.assert_allclose(got, oracle.symmetrizer(jm @ oracle.sym_to_dense(x)), atol=1e-12)


def test_contractivity():
    params = ModelParams.optimal(20)
    _, tr = _trace(params, default_tau_grid(params, 6.0, 512))
    assert np.abs(tr.values).max() <= tr.c0 + 1e-8


def test_grid_independence():
    params = ModelParams.optimal(10)
    coarse = default_tau_grid(params, 4.0, 101)
    fine = default_tau_grid(params, 4.0, 201)
    _, a = _trace(params, coarse)
    _, b = _trace(params, fine)
    np.testing.assert_allclose(a.values, b.values[::2], atol=1e-8)


def test_decay_rate_in_eta_units_falls_with_n():
    rates = []
    for n in (10, 50, 100):
        params = ModelParams.optimal(n)
        L = build_liouvillian(params)
        rho = steady_state(L)
        tr = correlator(L, rho, fitting_tau_grid(params, rho, samples=1024))
        fit = fit_damped_cosine(tr)
        assert fit.omega > 0
        rates.append(fit.bandwidth_b / (params.f * params.n_spins * params.gamma))
    assert rates[0] > rates[1] > rates[2]


def test_fitting_grid_bounds():
    params = ModelParams.optimal(30)
    rho = steady_state(build_liouvillian(params))
    grid = fitting_tau_grid(params, rho, samples=128)
    unit = params.f * params.n_spins * params.gamma
    assert grid[-1] * unit >= 6.0 - 1e-12
    assert grid[-1] <= 10.0 / (params.f * params.gamma) + 1e-12


def test_csv_layout(tmp_path):
    params = ModelParams.optimal(3)
    _, tr = _trace(params, default_tau_grid(params, 1.0, 64))
    path = write_correlator_csv(tmp_path / "c.csv", tr, {"engine": "exact"})
    rows = [r for r in path.read_text().splitlines() if not r.startswith("#")]
    assert rows[0] == "tau,eta,re_C,im_C,re_C_norm,im_C_norm"
    assert len(rows) == 65
    assert float(rows[1].split(",")[4]) == pytest.approx(1.0)


def test_residual_warning():
    params = ModelParams.optimal(4)
    L = build_liouvillian(params)
    with pytest.warns(UserWarning, match="residual"):
        correlator(L, SymOperator.all_up(L.space), default_tau_grid(params, 1.0, 64))

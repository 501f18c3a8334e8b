import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtcsim import dynamics, oracle
from dtcsim.dicke import DickeSpace, SymOperator
from dtcsim.dynamics import (
    DegenerateSteadyStateWarning,
    EvolveConfig,
    PhysicalityError,
    StiffnessError,
    check_physical,
    coherent_x_state,
    collective_expectations,
    dominant_pair,
    evolve,
    evolve_grid,
    low_spectrum,
    propagate,
    steady_state,
    steady_state_residual,
    write_trajectory_csv,
)
from dtcsim.liouvillian import ModelParams, build_liouvillian

from conftest import random_symmetric_state


def test_evolve_zero_time_is_identity():
    L = build_liouvillian(ModelParams.optimal(5))
    x0 = coherent_x_state(L.space)
    out = evolve(L, x0, 0.0)
    assert out is not x0
    np.testing.assert_array_equal(out.coeffs, x0.coeffs)


def test_two_spin_cascade_endpoint():
    L = build_liouvillian(ModelParams(2, 1.0, 0.0, 1.0, 0.0))
    x = evolve(L, SymOperator.all_up(L.space), 40.0)
    assert collective_expectations(x).sz == pytest.approx(-1.0, abs=1e-9)


@pytest.mark.parametrize("method", ["rk", "krylov"])
@pytest.mark.parametrize("n", [2, 3, 5])
def test_trajectory_matches_oracle(method, n):
    params = ModelParams(n, 1.0, 0.5, 1.0, n / 2, detuning=0.3)
    L = build_liouvillian(params)
    x0 = coherent_x_state(L.space)
    times = [0.0, 0.4, 1.3]
    got = evolve_grid(L, x0, times, EvolveConfig(method=method))
    want = oracle.oracle_evolve(params, oracle.sym_to_dense(x0), times)
    for x, r in zip(got, want):
        np.testing.assert_allclose(oracle.sym_to_dense(x), r, atol=1e-8)


def test_rk_checks_every_accepted_step(monkeypatch):
    calls = []
    real = dynamics.check_physical

    def spy(x, t=0.0, raise_on_fail=True):
        calls.append(t)
        return real(x, t, raise_on_fail)

    monkeypatch.setattr(dynamics, "check_physical", spy)
    L = build_liouvillian(ModelParams.optimal(6))
    evolve(L, coherent_x_state(L.space), 2.0)
    assert len(calls) > 5
    assert calls == sorted(calls) and calls[-1] == pytest.approx(2.0)


def test_unphysical_state_detected():
    space = DickeSpace(3)
    x = SymOperator.all_up(space) * 2.0
    with pytest.raises(PhysicalityError):
        check_physical(x)
    assert not check_physical(x, raise_on_fail=False)["ok"]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_stiffness_error_reports_time():
    # exponential growth overflows long before t = 1
    mat = np.array([[1e6 + 0j]])
    with np.errstate(all="ignore"), pytest.raises(StiffnessError) as err:
        propagate(mat, np.array([1.0]), [1.0], EvolveConfig(rel_tol=1e-12, abs_tol=1e-14, max_step=1e-3))
    assert 0.0 <= err.value.t_reached < 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        EvolveConfig(rel_tol=0)
    with pytest.raises(ValueError):
        EvolveConfig(method="euler")


def test_dark_steady_state_without_pump():
    L = build_liouvillian(ModelParams(6, 1.0, 0.5, 1.0, 0.0))
    with pytest.warns(DegenerateSteadyStateWarning):
        rho = steady_state(L, x0=SymOperator.all_down(L.space))
    e = collective_expectations(rho)
    assert e.sz == pytest.approx(-3.0, abs=1e-8)
    assert e.spsm == pytest.approx(0.0, abs=1e-8)


def test_pump_only_steady_state():
    L = build_liouvillian(ModelParams(6, 1.0, 0.0, 0.0, 1.0))
    e = collective_expectations(steady_state(L))
    assert e.sz == pytest.approx(3.0, abs=1e-9)


def test_steady_state_matches_oracle_and_has_no_coherence():
    params = ModelParams(5, 1.0, 0.5, 1.0, 2.5, detuning=0.2)
    L = build_liouvillian(params)
    rho = steady_state(L)
    np.testing.assert_allclose(oracle.sym_to_dense(rho), oracle.oracle_steady(params), atol=1e-8)
    assert abs(collective_expectations(rho).sp) < 1e-10
    assert steady_state_residual(L, rho) < 1e-10


def test_steady_state_forgets_initial_condition():
    params = ModelParams.optimal(8)
    L = build_liouvillian(params)
    t = 50 / (params.f * params.gamma * params.n_spins)
    cfg = EvolveConfig(method="krylov")
    a = evolve(L, SymOperator.all_up(L.space), t, cfg)
    b = evolve(L, SymOperator.all_down(L.space), t, cfg)
    assert np.linalg.norm(a.coeffs - b.coeffs) < 1e-6


@pytest.mark.parametrize("n, sz, spsm", [(4, 2.0, 4.0)])
def test_expectations_all_up(n, sz, spsm):
    e = collective_expectations(SymOperator.all_up(DickeSpace(n)))
    assert (e.sz, e.spsm) == pytest.approx((sz, spsm))


def test_expectations_fully_mixed_two_spins():
    e = collective_expectations(SymOperator.fully_mixed(DickeSpace(2)))
    assert (e.sz, e.spsm) == pytest.approx((0.0, 1.0))


@given(st.integers(1, 40))
def test_coherent_state_properties(n):
    x = coherent_x_state(DickeSpace(n))
    e = collective_expectations(x)
    assert x.trace() == pytest.approx(1.0)
    assert x.purity() == pytest.approx(1.0)
    assert e.spsm == pytest.approx(n / 2 + n * (n - 1) / 4)
    assert e.sp.real == pytest.approx(n / 2)


def test_coherent_state_single_spin():
    x = coherent_x_state(DickeSpace(1))
    np.testing.assert_allclose(oracle.sym_to_dense(x), 0.5 * np.ones((2, 2)), atol=1e-14)


def test_low_spectrum_has_zero_eigenvalue():
    L = build_liouvillian(ModelParams.optimal(10))
    spec = low_spectrum(L, k=4)
    assert abs(spec.eigenvalues[0]) < 1e-9


def test_no_oscillation_without_exchange():
    L = build_liouvillian(ModelParams(20, 1.0, 0.0, 1.0, 10.0))
    spec = low_spectrum(L, k=4)
    low = spec.eigenvalues[np.abs(spec.eigenvalues.real) < 5]
    assert np.abs(low.imag).max() < 1e-6


def test_precession_pair_at_fifty_spins():
    params = ModelParams.optimal(50)
    L = build_liouvillian(params)
    lam = dominant_pair(low_spectrum(L, k=4))
    assert lam is not None
    target = params.g * params.n_spins * params.gamma / 2
    assert abs(lam.imag - target) / target < 0.15


def test_trajectory_csv(tmp_path):
    L = build_liouvillian(ModelParams.optimal(3))
    times = [0.0, 0.5]
    states = evolve_grid(L, coherent_x_state(L.space), times)
    path = write_trajectory_csv(tmp_path / "traj.csv", times, states)
    lines = path.read_text().splitlines()
    assert lines[1].startswith("t,re_z,im_z")
    assert len(lines) == 4


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**31 - 1))
def test_random_state_evolution_stays_physical(n, seed):
    L = build_liouvillian(ModelParams.optimal(n))
    x0 = random_symmetric_state(n, np.random.default_rng(seed))
    for x in evolve_grid(L, x0, np.linspace(0, 1, 5)):
        assert check_physical(x)["ok"]


def test_krylov_result_independent_of_global_rng():
    # scipy's norm estimator draws from the global RNG; at this point seeds 0
    # and 1 used to give correlators differing in the last digits
    from dtcsim.regression import correlator, fitting_tau_grid

    params = ModelParams.optimal(100, g=19.2)
    L = build_liouvillian(params)
    rho = steady_state(L)
    grid = fitting_tau_grid(params, rho)
    np.random.seed(0)
    a = correlator(L, rho, grid).values
    np.random.seed(1)
    b = correlator(L, rho, grid).values
    after = np.random.rand()
    np.random.seed(1)
    assert after == np.random.rand()  # caller's RNG stream untouched
    assert np.array_equal(a, b)

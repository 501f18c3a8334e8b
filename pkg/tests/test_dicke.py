import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtcsim import oracle
from dtcsim.dicke import (
    DickeSpace,
    SymOperator,
    degeneracy,
    enumerate_sectors,
    ladder_coefficient,
    local_channel_elements,
    space_dimension,
)
from dtcsim.liouvillian import ModelParams

from conftest import random_density, random_symmetric_state


@pytest.mark.parametrize("n, expected", [
    (2, [(1, 1), (0, 1)]),
    (3, [(1.5, 1), (0.5, 2)]),
    (4, [(2, 1), (1, 3), (0, 2)]),
])
def test_enumerate_sectors_small(n, expected):
    assert enumerate_sectors(n) == expected


@pytest.mark.parametrize("n, dim", [(1, 4), (2, 10), (100, 176851)])
def test_space_dimension_values(n, dim):
    assert space_dimension(n) == dim


@given(st.integers(1, 200))
def test_dimension_matches_sector_enumeration(n):
    assert space_dimension(n) == sum(int(2 * j + 1) ** 2 for j, _ in enumerate_sectors(n))


@given(st.integers(1, 60))
def test_degeneracies_span_hilbert_space(n):
    assert sum(d * int(2 * j + 1) for j, d in enumerate_sectors(n)) == 2**n
    assert all(degeneracy(n, int(2 * j)) == d for j, d in enumerate_sectors(n))


@pytest.mark.parametrize("j, m, sign, value", [
    (0.5, 0.5, "-", 1.0),
    (1, 1, "-", np.sqrt(2)),
    (1, -1, "-", 0.0),
    (1, 1, "+", 0.0),
])
def test_ladder_coefficient(j, m, sign, value):
    assert ladder_coefficient(j, m, sign) == pytest.approx(value)


def test_space_indexing_round_trip():
    space = DickeSpace(5)
    for idx in range(space.dim):
        j, m, mp = space.label(idx)
        assert space.index(int(2 * j), int(2 * m), int(2 * mp)) == idx


def test_pump_single_spin_ground_state():
    space = DickeSpace(1)
    down = SymOperator.all_down(space)
    up = SymOperator.all_up(space)
    rate = local_channel_elements(space, "pump") @ down.coeffs
    np.testing.assert_allclose(rate, up.coeffs - down.coeffs, atol=1e-14)


def test_pump_conserves_trace_on_fully_mixed():
    space = DickeSpace(4)
    x = SymOperator.fully_mixed(space)
    out = local_channel_elements(space, "pump") @ x.coeffs
    assert abs(space.trace_functional @ out) < 1e-13


@pytest.mark.parametrize("channel", ["pump", "local_decay", "local_dephase"])
@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_local_channels_match_oracle(channel, n, rng):
    space = DickeSpace(n)
    x = random_symmetric_state(n, rng)
    got = SymOperator(space, local_channel_elements(space, channel) @ x.coeffs)
    rho = oracle.sym_to_dense(x)
    op = {"pump": "p", "local_decay": "m", "local_dephase": "z"}[channel]
    want = np.zeros_like(rho)
    for i in range(n):
        a = oracle.site_op(n, i, op).toarray()
        ad = a.conj().T
        want += a @ rho @ ad - 0.5 * (ad @ a @ rho + rho @ ad @ a)
    np.testing.assert_allclose(oracle.sym_to_dense(got), want, atol=1e-10)


@pytest.mark.parametrize("channel", ["pump", "local_decay", "local_dephase"])
def test_trace_functional_annihilates_dissipators(channel):
    space = DickeSpace(7)
    image = local_channel_elements(space, channel)
    assert np.abs(space.trace_functional @ image).max() < 1e-12


def test_pump_preserves_hermiticity(rng):
    space = DickeSpace(6)
    x = oracle.dense_to_sym(random_density(6, rng))
    out = SymOperator(space, local_channel_elements(space, "pump") @ x.coeffs)
    assert out.hermiticity_error() < 1e-12


def test_coherent_state_moments_dense_bridge(rng):
    n = 3
    x = random_symmetric_state(n, rng)
    rho = oracle.sym_to_dense(x)
    jp, jm, jz = oracle.collective_ops(n)
    mom = x.moments()
    assert mom["z"] == pytest.approx(np.trace(jz @ rho))
    assert mom["pm"] == pytest.approx(np.trace(jp @ jm @ rho))
    assert x.trace() == pytest.approx(1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_symmetric_round_trip(n, seed):
    x = random_symmetric_state(n, np.random.default_rng(seed))
    back = oracle.dense_to_sym(oracle.sym_to_dense(x))
    np.testing.assert_allclose(back.coeffs, x.coeffs, atol=1e-12)


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(0)

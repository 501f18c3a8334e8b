"""Steady-state two-time correlation ``C(tau) = Tr[J^+ e^{L tau}(J^- rho_ss)] / N^2``.

By permutation symmetry ``sum_ij <sigma_i^+(tau) sigma_j^-> `` equals the
collective expression, so a single seed ``J^- rho_ss`` is propagated.  The
seed lives in the charge sector ``q = -1`` and stays there.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .dicke import SymOperator
from .dynamics import EvolveConfig, propagate, steady_state_residual
from .liouvillian import Liouvillian, ModelParams

__all__ = [
    "CorrelatorTrace",
    "correlator",
    "left_multiply_collective_lowering",
    "default_tau_grid",
    "fitting_tau_grid",
    "write_correlator_csv",
    "DEFAULT_SAMPLES",
    "DEFAULT_ETA_MAX",
]

DEFAULT_SAMPLES = 2048
DEFAULT_ETA_MAX = 6.0


@dataclass(frozen=True)
class CorrelatorTrace:
    tau_grid: np.ndarray
    values: np.ndarray
    params: ModelParams

    @property
    def eta_grid(self) -> np.ndarray:
        """``f N Gamma tau``."""
        p = self.params
        return p.f * p.n_spins * p.gamma * self.tau_grid

    @property
    def c0(self) -> float:
        return float(np.real(self.values[0]))

    @property
    def normalised(self) -> np.ndarray:
        c0 = self.c0
        return self.values / c0 if c0 > 0 else np.full_like(self.values, np.nan)

    @property
    def order_parameter(self) -> float:
        """``Z_Q = sqrt(C(0))``."""
        return float(np.sqrt(max(self.c0, 0.0)))


def default_tau_grid(params: ModelParams, eta_max: float = DEFAULT_ETA_MAX,
                     samples: int = DEFAULT_SAMPLES) -> np.ndarray:
    """Uniform grid over ``eta in [0, eta_max]`` with ``samples`` points."""
    unit = params.f * params.n_spins * params.gamma
    if unit <= 0:
        raise ValueError("eta grid needs f > 0")
    return np.linspace(0.0, eta_max / unit, samples)


def fitting_tau_grid(params: ModelParams, rho_ss: SymOperator, periods: float = 8.0,
                     samples: int = DEFAULT_SAMPLES, eta_min: float = DEFAULT_ETA_MAX,
                     tau_cap: float = 10.0) -> np.ndarray:
    """Uniform grid long enough to hold ``periods`` oscillations.

    The period is estimated from the bare precession rate
    ``|2 g Gamma <J^z> - delta|`` of ``rho_ss``; the window never drops below
    ``eta_min`` nor exceeds ``tau_cap / (f Gamma)`` in time.
    """
    unit = params.f * params.n_spins * params.gamma
    sz = float(np.real(rho_ss.moments()["z"]))
    prec = abs(2 * params.g * params.gamma * sz - params.detuning)
    eta_max = eta_min
    if prec > 0:
        eta_cap = tau_cap * params.n_spins
        eta_max = max(eta_min, min(eta_cap, periods * 2 * np.pi / prec * unit))
    return default_tau_grid(params, eta_max, samples)


def _lowering_matrix(space) -> sp.csr_matrix:
    """Sparse map ``x -> J^- x`` on coefficient vectors."""
    j2, m2, mp2 = space.j2, space.m2, space.mp2
    src = np.flatnonzero(m2 > -j2)
    m = m2[src] / 2.0
    j = j2[src] / 2.0
    amp = np.sqrt(j * (j + 1) - m * (m - 1))
    dst = space.index(j2[src], m2[src] - 2, mp2[src])
    return sp.csr_matrix((amp, (dst, src)), shape=(space.dim, space.dim))


def left_multiply_collective_lowering(x: SymOperator) -> SymOperator:
    """``J^- x``: within each block, row ``m`` moves to ``m - 1`` with weight ``A^-(j, m)``."""
    return SymOperator(x.space, _lowering_matrix(x.space) @ x.coeffs)


def correlator(liouvillian: Liouvillian, rho_ss: SymOperator, tau_grid=None,
               cfg: EvolveConfig | None = None, residual_tol: float = 1e-8) -> CorrelatorTrace:
    """``C(tau)`` on ``tau_grid`` (default: 2048 points over ``eta in [0, 6]``).

    Propagation defaults to the Krylov exponential, which handles the
    uniform grid in one sweep.
    """
    p = liouvillian.params
    if tau_grid is None:
        tau_grid = default_tau_grid(p)
    tau_grid = np.asarray(tau_grid, float)
    res = steady_state_residual(liouvillian, rho_ss)
    if res > residual_tol:
        warnings.warn(f"rho_ss residual {res:.2e} exceeds {residual_tol:.0e}", stacklevel=2)
    cfg = cfg or EvolveConfig(method="krylov")
    space = liouvillian.space
    seed = left_multiply_collective_lowering(rho_ss)
    idx, mat = liouvillian.sector(-1)
    # Tr[J^+ X] only reads the q = -1 coefficients: sum A^+(j, m) X[j, m+1, m]
    jp = _lowering_matrix(space).T.tocsr()  # transpose of J^- maps (m-1, m') -> (m, m')
    tr = space.trace_functional @ jp  # row vector: Tr[J^+ X]
    tr = np.asarray(tr).ravel()[idx]
    traj = propagate(mat, seed.coeffs[idx], tau_grid, cfg)
    values = traj @ tr / p.n_spins**2
    return CorrelatorTrace(tau_grid, values, p)


def write_correlator_csv(path, trace: CorrelatorTrace, extra_header: dict | None = None) -> Path:
    """Columns ``tau, eta, re_C, im_C, re_C_norm, im_C_norm``; ``#`` header lines."""
    path = Path(path)
    norm = trace.normalised
    with open(path, "w", newline="") as fh:
        for k, v in trace.params.as_dict().items():
            fh.write(f"# {k} = {v!r}\n")
        for k, v in (extra_header or {}).items():
            fh.write(f"# {k} = {v}\n")
        fh.write("# C(tau) = Tr[J^+ exp(L tau)(J^- rho_ss)] / N^2; *_norm columns divide by C(0)\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "eta", "re_C", "im_C", "re_C_norm", "im_C_norm"])
        for t, e, c, cn in zip(trace.tau_grid, trace.eta_grid, trace.values, norm):
            w.writerow([repr(float(t)), repr(float(e)), repr(float(c.real)), repr(float(c.imag)),
                        repr(float(cn.real)), repr(float(cn.imag))])
    return path

"""Mean-field Bloch equations, synchronized solutions and disorder response.

Each spin is described by ``beta_i = <sigma_i^+> = R_i exp(i phi_i)`` and
``s_i = <sigma_i^z> / 2``, so a pure spin has ``R_i^2 + s_i^2 = 1/4`` and the
order parameter is ``Z = |sum_i beta_i| / N``.  Factorising the exact
one-spin equations gives

    d beta_i/dt = (i delta_i + i g Gamma - (W + f Gamma)/2) beta_i
                  + (f Gamma - 2 i g Gamma) s_i sum_{j != i} beta_j
    d s_i/dt    = W (1/2 - s_i) - f Gamma (1/2 + s_i)
                  - Re[(f Gamma - 2 i g Gamma) conj(beta_i) sum_{j != i} beta_j]

The ``i g Gamma`` term is the single-spin part of ``g Gamma J^+ J^-``; it acts
as a uniform detuning, so the azimuthal equation is the Kuramoto-Sakaguchi
form with ``delta_i -> delta_i + g Gamma``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from .liouvillian import ModelParams

__all__ = [
    "BlochEnsemble",
    "SyncSolution",
    "bloch_rhs",
    "bloch_rhs_complex",
    "phase_velocity",
    "sync_fields",
    "find_sync_solution",
    "sync_window",
    "sample_lorentzian_detunings",
    "integrate_ensemble",
    "collective_frequency",
    "DisorderShift",
    "disorder_frequency_shift",
    "write_sync_csv",
    "write_disorder_csv",
]


@dataclass(frozen=True)
class BlochEnsemble:
    radius: np.ndarray
    phase: np.ndarray
    s: np.ndarray
    detunings: np.ndarray
    params: ModelParams

    def __post_init__(self):
        n = self.params.n_spins
        for name in ("radius", "phase", "s", "detunings"):
            arr = np.asarray(getattr(self, name), float)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
            object.__setattr__(self, name, arr)
        if np.any(self.radius < 0):
            raise ValueError("radii must be non-negative")
        if np.any(self.radius**2 + self.s**2 > 0.25 + 1e-9):
            raise ValueError("Bloch vector outside the ball R^2 + s^2 <= 1/4")

    @property
    def beta(self) -> np.ndarray:
        return self.radius * np.exp(1j * self.phase)

    @classmethod
    def from_beta(cls, beta, s, detunings, params) -> "BlochEnsemble":
        beta = np.asarray(beta, complex)
        return cls(np.abs(beta), np.angle(beta), np.asarray(s, float), detunings, params)

    @property
    def order_parameter(self) -> complex:
        return complex(self.beta.mean())


def _couplings(params: ModelParams):
    fg = params.f * params.gamma
    gg = params.g * params.gamma
    return fg, gg, fg - 2j * gg


def bloch_rhs_complex(beta, s, detunings, params: ModelParams):
    """``(d beta/dt, d s/dt)`` in Cartesian form; regular at ``R = 0``."""
    fg, gg, mu = _couplings(params)
    w = params.pump_w
    others = beta.sum() - beta
    dbeta = (1j * detunings + 1j * gg - 0.5 * (w + fg)) * beta + mu * s * others
    ds = w * (0.5 - s) - fg * (0.5 + s) - np.real(mu * np.conj(beta) * others)
    return dbeta, ds


def bloch_rhs(state: BlochEnsemble):
    """``(dR/dt, dphi/dt, ds/dt)`` per spin.

    Where ``R_i = 0`` the phase is undefined; its derivative is returned as
    zero (the phase is held) while ``R_i`` and ``s_i`` evolve normally.
    """
    beta = state.beta
    dbeta, ds = bloch_rhs_complex(beta, state.s, state.detunings, state.params)
    unit = np.exp(-1j * state.phase)
    dr = np.real(dbeta * unit)
    with np.errstate(divide="ignore", invalid="ignore"):
        dphi = np.where(state.radius > 0, np.imag(dbeta * unit) / state.radius, 0.0)
    return dr, dphi, ds


def phase_velocity(radius, phase, s, detunings, params: ModelParams):
    """Kuramoto-Sakaguchi phase equation evaluated term by term.

    ``delta_i + (Gamma s_i / R_i) sum_{j != i} R_j [f sin(phi_j - phi_i)
    - 2 g cos(phi_j - phi_i)]`` with ``delta_i`` the effective detuning
    (bare detuning plus ``g Gamma``).
    """
    d = phase[None, :] - phase[:, None]
    term = radius[None, :] * (params.f * np.sin(d) - 2 * params.g * np.cos(d))
    np.fill_diagonal(term, 0.0)
    return detunings + params.g * params.gamma + params.gamma * s / radius * term.sum(axis=1)


@dataclass(frozen=True)
class SyncSolution:
    z: float
    omega_mf: float
    exists: bool
    pump_w: float
    s: float = 0.0
    residual: float = 0.0


def sync_fields(w_over_f: float, n_spins: int) -> tuple[float, float]:
    """``(s, R^2)`` of the homogeneous co-rotating fixed point.

    ``R^2`` is negative where no synchronized solution exists.
    """
    n = n_spins - 1
    if n < 1:
        return 0.0, -1.0
    s = (w_over_f + 1.0) / (2.0 * n)
    r2 = (w_over_f * (0.5 - s) - (0.5 + s)) / n
    return s, r2


def find_sync_solution(params: ModelParams) -> SyncSolution:
    """Homogeneous synchronized solution ``S^+/N = Z exp(i omega t)``.

    In the co-rotating frame the radial equation fixes ``s`` and the
    population equation fixes ``R = Z``; the azimuthal equation then gives
    ``omega = -g W / f`` (negative: the collective phase turns clockwise).
    Requires ``delta = 0``.
    """
    if params.detuning != 0:
        raise ValueError("synchronized solution is defined for zero detuning")
    fg = params.f * params.gamma
    n = params.n_spins
    if fg <= 0 or n < 2:
        return SyncSolution(0.0, 0.0, False, params.pump_w)
    w = params.pump_w / fg
    s, r2 = sync_fields(w, n)
    if not r2 > 0 or r2 + s * s > 0.25:
        return SyncSolution(0.0, 0.0, False, params.pump_w, s)
    z = float(np.sqrt(r2))
    omega = -params.g * params.pump_w / params.f
    # self-consistency check on the full equations
    beta = np.full(n, z, complex)
    sv = np.full(n, s)
    dbeta, ds = bloch_rhs_complex(beta, sv, np.zeros(n), params)
    res = float(max(np.max(np.abs(dbeta - 1j * omega * beta)), np.max(np.abs(ds))))
    return SyncSolution(z, float(omega), True, params.pump_w, float(s), res)


def sync_window(n_spins: int, f: float = 1.0, gamma: float = 1.0):
    """``(W_min, W_max)`` of the synchronized window, or ``None`` if empty.

    The window is where ``w^2 - (N - 3) w + N < 0`` with ``w = W / (f Gamma)``.
    """
    n = n_spins - 1
    disc = n * (n - 8.0)
    if n < 1 or disc <= 0:
        return None
    lo = ((n - 2) - np.sqrt(disc)) / 2
    hi = ((n - 2) + np.sqrt(disc)) / 2
    return lo * f * gamma, hi * f * gamma


def sample_lorentzian_detunings(n_spins: int, width: float, seed) -> np.ndarray:
    """``n_spins`` i.i.d. Cauchy(0, width) detunings from a seeded generator."""
    if width < 0:
        raise ValueError("width must be non-negative")
    if width == 0:
        return np.zeros(n_spins)
    rng = np.random.default_rng(seed)
    return width * rng.standard_cauchy(n_spins)


def integrate_ensemble(beta0, s0, detunings, params: ModelParams, t_end: float, n_out: int = 2001,
                       rtol: float = 1e-9, atol: float = 1e-12):
    """Integrate the Bloch equations; returns ``(t, beta(t), s(t))``."""
    n = params.n_spins
    beta0 = np.asarray(beta0, complex)
    s0 = np.asarray(s0, float)
    detunings = np.asarray(detunings, float)

    def rhs(_t, y):
        beta = y[:n] + 1j * y[n:2 * n]
        db, ds = bloch_rhs_complex(beta, y[2 * n:], detunings, params)
        return np.concatenate([db.real, db.imag, ds])

    y0 = np.concatenate([beta0.real, beta0.imag, s0])
    t = np.linspace(0.0, t_end, n_out)
    sol = solve_ivp(rhs, (0.0, t_end), y0, method="DOP853", t_eval=t, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"Bloch integration failed: {sol.message}")
    beta = sol.y[:n] + 1j * sol.y[n:2 * n]
    return sol.t, beta.T, sol.y[2 * n:].T


def collective_frequency(t, splus, tail: float = 0.5) -> float:
    """Slope of the unwrapped collective phase over the final ``tail`` fraction."""
    k0 = int((1.0 - tail) * len(t))
    ph = np.unwrap(np.angle(splus[k0:]))
    return float(np.polyfit(t[k0:], ph, 1)[0])


@dataclass(frozen=True)
class DisorderShift:
    width: float
    mean_shift: float
    shifts: np.ndarray
    desync_fraction: float
    n_seeds: int


def disorder_frequency_shift(params: ModelParams, widths, seeds=range(32), t_end: float | None = None,
                             desync_threshold: float = 0.1) -> list[DisorderShift]:
    """Relative shift ``[omega(Delta) - omega(0)] / omega(0)`` of the collective precession.

    Every realization starts on the homogeneous synchronized state and is
    integrated to ``t_end`` (default ``60 / (f Gamma)``); the frequency is the
    phase slope over the final half.  Realizations whose final ``|S^+|/N``
    falls below ``desync_threshold`` times the clean ``Z`` are excluded and
    counted.
    """
    seeds = list(seeds)
    sync = find_sync_solution(params.with_(detuning=0.0))
    if not sync.exists:
        raise ValueError("no synchronized solution at these parameters")
    n = params.n_spins
    fg = params.f * params.gamma
    t_end = t_end or 60.0 / fg
    beta0 = np.full(n, sync.z, complex)
    s0 = np.full(n, sync.s)
    t, b, _ = integrate_ensemble(beta0, s0, np.zeros(n), params, t_end)
    omega0 = collective_frequency(t, b.sum(axis=1))
    out = []
    for width in widths:
        if width == 0:
            out.append(DisorderShift(0.0, 0.0, np.zeros(len(seeds)), 0.0, len(seeds)))
            continue
        shifts, failed = [], 0
        for seed in seeds:
            det = sample_lorentzian_detunings(n, width, seed)
            t, b, _ = integrate_ensemble(beta0, s0, det, params, t_end)
            sp = b.sum(axis=1)
            if abs(sp[-1]) / n < desync_threshold * sync.z:
                failed += 1
                continue
            shifts.append((collective_frequency(t, sp) - omega0) / omega0)
        shifts = np.array(shifts)
        total = len(shifts) + failed
        mean = float(shifts.mean()) if shifts.size else float("nan")
        out.append(DisorderShift(float(width), mean, shifts, failed / total, total))
    return out


def write_sync_csv(path, rows) -> Path:
    """``rows``: iterable of ``(W/fGamma, SyncSolution)``."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write("# homogeneous synchronized solutions; omega in units of f*Gamma\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["W_over_fGamma", "Z", "omega_over_fGamma", "exists"])
        for wf, sol, unit in rows:
            w.writerow([repr(float(wf)), repr(sol.z), repr(sol.omega_mf / unit), int(sol.exists)])
    return path


def write_disorder_csv(path, rows: list[DisorderShift], unit: float = 1.0) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write("# relative collective-frequency shift under Lorentzian detunings\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Delta_over_fGamma", "mean_shift", "desync_fraction", "n_seeds"])
        for r in rows:
            w.writerow([repr(r.width / unit), repr(r.mean_shift), repr(r.desync_fraction), r.n_seeds])
    return path

"""Reduced one- and two-spin states, von Neumann entropy, mutual information.

Entropies use the natural logarithm (nats).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dicke import SymOperator

__all__ = [
    "ReducedState",
    "PositivityError",
    "reduce",
    "reduce_from_moments",
    "von_neumann",
    "mutual_information",
    "MutualInfoResult",
    "mutual_info_trace",
    "growth_law",
    "LOG_BASE",
]

LOG_BASE = "e"

POSITIVITY_FLOOR = -1e-8


class PositivityError(ValueError):
    """A reduced state has a clearly negative eigenvalue."""


@dataclass(frozen=True)
class ReducedState:
    order: int
    matrix: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues()[0])


# |c><a| on one spin (basis up, down) written as sums over {1, z, p, m}
_OUTER = {
    ("u", "u"): {"1": 0.5, "z": 0.5},
    ("d", "d"): {"1": 0.5, "z": -0.5},
    ("u", "d"): {"p": 1.0},
    ("d", "u"): {"m": 1.0},
}
_BASIS = ("u", "d")


def _pair_moments(mom: dict, n: int) -> tuple[dict, dict]:
    """Single-site and distinct-pair Pauli moments from collective moments."""
    P, M, Z = mom["p"], mom["m"], mom["z"]
    single = {"1": 1.0, "p": P / n, "m": M / n, "z": 2 * Z / n}
    if n < 2:
        return single, {}
    # sum over sites of the same-site product sigma^a sigma^b
    same = {
        "pp": 0.0, "pm": n / 2 + Z, "pz": -P,
        "mp": n / 2 - Z, "mm": 0.0, "mz": M,
        "zp": P, "zm": -M, "zz": float(n),
    }
    weight = {"p": 1.0, "m": 1.0, "z": 2.0}
    pair = {}
    for a in "pmz":
        for b in "pmz":
            tot = weight[a] * weight[b] * mom[a + b]
            pair[a + b] = (tot - same[a + b]) / (n * (n - 1))
    for a in "1pmz":
        pair["1" + a] = single[a]
        pair[a + "1"] = single[a]
    return single, pair


def reduce_from_moments(mom: dict, n: int, order: int, check: bool = True) -> ReducedState:
    single, pair = _pair_moments(mom, n)
    if order == 1:
        rho = np.empty((2, 2), complex)
        for r, a in enumerate(_BASIS):
            for c, cc in enumerate(_BASIS):
                # <a|rho|c> = Tr[rho |c><a|]
                rho[r, c] = sum(w * single[k] for k, w in _OUTER[(cc, a)].items())
    elif order == 2:
        if n < 2:
            raise ValueError("two-spin reduced state needs N >= 2")
        rho = np.empty((4, 4), complex)
        for r, (a, b) in enumerate((x, y) for x in _BASIS for y in _BASIS):
            for c, (cc, dd) in enumerate((x, y) for x in _BASIS for y in _BASIS):
                tot = 0.0
                for k1, w1 in _OUTER[(cc, a)].items():
                    for k2, w2 in _OUTER[(dd, b)].items():
                        tot += w1 * w2 * pair[k1 + k2]
                rho[r, c] = tot
    else:
        raise ValueError("order must be 1 or 2")
    state = ReducedState(order, rho)
    if check:
        lam = state.min_eigenvalue()
        if lam < POSITIVITY_FLOOR:
            raise PositivityError(
                f"order-{order} reduced state has eigenvalue {lam:.3e}; refusing to repair"
            )
    return state


def reduce(x: SymOperator, order: int, check: bool = True) -> ReducedState:
    """Reduced state of ``order`` (1 or 2) spins of a symmetric state.

    By permutation symmetry every pair is equivalent, so the two-spin state is
    assembled from collective second moments with the same-site terms removed.
    Negative eigenvalues below ``-1e-8`` raise :class:`PositivityError`.
    """
    return reduce_from_moments(x.moments(), x.space.n_spins, order, check=check)


def von_neumann(r: ReducedState | np.ndarray) -> float:
    """``-sum lam ln lam`` over eigenvalues, with ``0 ln 0 = 0``."""
    mat = r.matrix if isinstance(r, ReducedState) else np.asarray(r)
    lam = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))
    lam = lam[lam > 0]
    return float(max(-np.sum(lam * np.log(lam)), 0.0))


def mutual_information(x: SymOperator) -> float:
    """``I_AB = S_A + S_B - S_AB`` for two single spins A and B."""
    mom = x.moments()
    n = x.space.n_spins
    s1 = von_neumann(reduce_from_moments(mom, n, 1))
    s2 = von_neumann(reduce_from_moments(mom, n, 2))
    return 2 * s1 - s2


def growth_law(n_spins: int, g: float, f: float, gamma: float, eta: float) -> float:
    """Large-N short-time mutual-information growth rate ``dI/dtau``."""
    return 0.5 * f * gamma * (1.0 / n_spins + 4 * g * g * eta / (n_spins * f * f))


@dataclass(frozen=True)
class MutualInfoResult:
    tau: np.ndarray
    eta: np.ndarray
    values: np.ndarray
    eta_probe: float
    growth_rate: float
    log_base: str = LOG_BASE


def mutual_info_trace(liouvillian, x0: SymOperator, tau_grid=None, eta_probe: float = 0.03,
                      d_eta: float = 0.002, cfg=None) -> MutualInfoResult:
    """Evolve ``x0`` and record ``I_AB(tau)`` plus ``dI_AB/dtau`` at ``eta_probe``.

    The derivative is a centred difference with spacing ``d_eta`` in
    ``eta = f N Gamma tau``.
    """
    from .dynamics import EvolveConfig, evolve_grid

    p = liouvillian.params
    unit = p.f * p.gamma * p.n_spins
    if unit <= 0:
        raise ValueError("characteristic time needs f > 0")
    if tau_grid is None:
        tau_grid = np.linspace(0.0, 2 * eta_probe / unit, 41)
    tau_grid = np.asarray(tau_grid, float)
    probe = np.array([eta_probe - d_eta, eta_probe + d_eta]) / unit
    times = np.union1d(tau_grid, probe)
    cfg = cfg or EvolveConfig(method="krylov")
    states = evolve_grid(liouvillian, x0, times, cfg, charges=range(-2, 3))
    info = np.array([mutual_information(s) for s in states])
    lo = info[np.searchsorted(times, probe[0])]
    hi = info[np.searchsorted(times, probe[1])]
    rate = (hi - lo) / (probe[1] - probe[0])
    keep = np.isin(times, tau_grid)
    return MutualInfoResult(times[keep], times[keep] * unit, info[keep], eta_probe, float(rate))

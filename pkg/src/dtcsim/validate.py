"""Cross-check suite: every fast engine against the brute-force oracle.

Used by ``dtcsim validate``.  Each check prints one line and the suite passes
only if every check is below its tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle
from .cumulant import CumulantState, cumulant_rhs, product_state
from .dynamics import EvolveConfig, coherent_x_state, evolve, steady_state
from .entropy import reduce
from .liouvillian import ModelParams, build_liouvillian
from .meanfield import bloch_rhs_complex
from .regression import correlator, default_tau_grid

__all__ = ["Check", "run_validation", "symmetric_checks", "product_state_checks"]

TOL = 1e-8


@dataclass(frozen=True)
class Check:
    name: str
    error: float
    tol: float = TOL

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tol)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: max error {self.error:.2e} (tol {self.tol:.0e})"


def symmetric_checks(params: ModelParams, t_probe: float = 0.7, samples: int = 65) -> list[Check]:
    """Steady state, trajectories, correlator and reduced states for one cell."""
    n = params.n_spins
    tag = f"N={n} W={params.pump_w:g} g/f={params.g / params.f:g}"
    L = build_liouvillian(params)
    out = []

    rho = steady_state(L)
    ro = oracle.oracle_steady(params)
    out.append(Check(f"steady {tag}", float(np.abs(oracle.sym_to_dense(rho) - ro).max())))

    x0 = coherent_x_state(L.space)
    r0 = oracle.sym_to_dense(x0)
    rt = oracle.oracle_evolve(params, r0, [t_probe])[0]
    for method in ("krylov", "rk"):
        xt = evolve(L, x0, t_probe, EvolveConfig(method=method))
        err = float(np.abs(oracle.sym_to_dense(xt) - rt).max())
        out.append(Check(f"trajectory[{method}] {tag}", err))

    grid = default_tau_grid(params, 2.0, samples)
    c_sym = correlator(L, rho, grid).values
    c_or = oracle.oracle_correlator(params, ro, grid)
    out.append(Check(f"correlator {tag}", float(np.abs(c_sym - c_or).max())))

    if n >= 2:
        err = 0.0
        for state, dense in ((rho, ro), (x0, r0)):
            err = max(err, float(np.abs(reduce(state, 1).matrix - oracle.oracle_partial_trace(dense, [0])).max()))
            err = max(err, float(np.abs(reduce(state, 2).matrix - oracle.oracle_partial_trace(dense, [0, 1])).max()))
        out.append(Check(f"reduced states {tag}", err))
    return out


def _random_product(n, rng):
    beta = 0.45 * rng.random(n) * np.exp(2j * np.pi * rng.random(n))
    s = (0.5 - np.abs(beta)) * (2 * rng.random(n) - 1)
    rho = None
    for b, ss in zip(beta, s):
        r = np.array([[0.5 + ss, np.conj(b)], [b, 0.5 - ss]])
        rho = r if rho is None else np.kron(rho, r)
    return beta, s, rho


def product_state_checks(n: int = 4, seed: int = 0) -> list[Check]:
    """Mean-field and cumulant equations against the oracle on a product state.

    For an uncorrelated state the first-moment derivatives of both closures
    and the second-moment derivatives of the cumulant closure are exact.
    """
    rng = np.random.default_rng(seed)
    params = ModelParams(n, gamma=1.0, g=0.7, f=1.3, pump_w=0.9)
    det = rng.normal(size=n)
    beta, s, rho = _random_product(n, rng)
    e1, e2 = oracle.oracle_moments(oracle.oracle_rhs(params, rho, det))

    db, ds = bloch_rhs_complex(beta, s, det, params)
    mf = max(float(np.abs(db - e1["p"]).max()), float(np.abs(ds - e1["z"] / 2).max()))

    d = cumulant_rhs(product_state(params, beta, 2 * s, det))
    first = max(float(np.abs(d.first[a] - e1[a]).max()) for a in "pmz")
    second = max(float(np.abs(d.second[k] - e2[k]).max()) for k in d.second)

    # exact correlated moments: the closure only drops third cumulants
    rs = oracle.oracle_steady(params, det)
    m1, m2 = oracle.oracle_moments(rs)
    st = CumulantState({a: m1[a] for a in "pmz"}, dict(m2), det, params)
    ds1, _ = oracle.oracle_moments(oracle.oracle_rhs(params, rs, det))
    first_ss = max(float(np.abs(cumulant_rhs(st).first[a] - ds1[a]).max()) for a in "pmz")
    return [
        Check(f"mean-field rhs N={n}", mf),
        Check(f"cumulant first-moment rhs N={n}", first),
        Check(f"cumulant second-moment rhs N={n}", second),
        Check(f"cumulant first-moment rhs on correlated state N={n}", first_ss),
    ]


def run_validation(emit=print, spins=(2, 3, 4)) -> bool:
    checks = []
    for n in spins:
        for w in (0.5, n / 2):
            for gf in (0.1, 2.0):
                for c in symmetric_checks(ModelParams(n, 1.0, gf, 1.0, w)):
                    emit(c.line())
                    checks.append(c)
    for c in product_state_checks():
        emit(c.line())
        checks.append(c)
    ok = all(c.passed for c in checks)
    emit(f"{'PASS' if ok else 'FAIL'} validation: {sum(c.passed for c in checks)}/{len(checks)} checks")
    return ok

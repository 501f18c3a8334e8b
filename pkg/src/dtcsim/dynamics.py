"""Time evolution, steady state, expectation values and low-lying spectrum.

All propagation happens inside the union of the U(1) charge sectors that the
initial operator occupies; the generator is block diagonal in ``q = m - m'``
so nothing leaks out.
"""
from __future__ import annotations

import csv
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import DOP853

from .dicke import DickeSpace, SymOperator
from .entropy import reduce_from_moments
from .liouvillian import Liouvillian

__all__ = [
    "EvolveConfig",
    "SpectrumResult",
    "CollectiveExpectations",
    "PhysicalityError",
    "StiffnessError",
    "SteadyStateError",
    "DegenerateSteadyStateWarning",
    "check_physical",
    "evolve",
    "evolve_grid",
    "propagate",
    "steady_state",
    "steady_state_residual",
    "collective_expectations",
    "low_spectrum",
    "dominant_pair",
    "coherent_x_state",
    "write_trajectory_csv",
]

METHODS = ("rk", "krylov")

TRACE_TOL = 1e-9
HERM_TOL = 1e-9
REDUCED_TOL = -1e-7


class PhysicalityError(RuntimeError):
    """A trajectory violated trace, Hermiticity or reduced positivity."""


class StiffnessError(RuntimeError):
    """The adaptive integrator could not make progress."""

    def __init__(self, message, t_reached):
        super().__init__(f"{message} (reached t = {t_reached:.6g})")
        self.t_reached = t_reached


class SteadyStateError(RuntimeError):
    pass


class DegenerateSteadyStateWarning(UserWarning):
    """More than one stationary state; the result depends on the start state."""


@dataclass(frozen=True)
class EvolveConfig:
    """Integrator settings.

    ``method`` is ``"rk"`` (adaptive embedded Runge-Kutta, DOP853, with
    physicality checks at every accepted step) or ``"krylov"`` (action of the
    matrix exponential, checked at output times only).
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = np.inf
    method: str = "rk"
    check: bool = True

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not 0 < v <= 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2], got {v}")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")


@dataclass(frozen=True)
class CollectiveExpectations:
    sz: float
    spsm: float
    szsz: float
    sp: complex


@dataclass(frozen=True)
class SpectrumResult:
    """Eigenvalues sorted by ascending ``|Re lambda|`` and their charge sectors."""

    eigenvalues: np.ndarray
    charges: np.ndarray
    k: int
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))


# --------------------------------------------------------------------------
# physicality
# --------------------------------------------------------------------------
def check_physical(x: SymOperator, t: float = 0.0, raise_on_fail: bool = True) -> dict:
    """Trace, Hermiticity and reduced one-/two-spin positivity of ``x``."""
    mom = x.moments()
    n = x.space.n_spins
    report = {
        "t": t,
        "trace_error": abs(x.trace() - 1.0),
        "hermiticity_error": x.hermiticity_error(),
        "min_eig_1": reduce_from_moments(mom, n, 1, check=False).min_eigenvalue(),
        "min_eig_2": (reduce_from_moments(mom, n, 2, check=False).min_eigenvalue()
                      if n > 1 else 0.0),
    }
    ok = (report["trace_error"] < TRACE_TOL and report["hermiticity_error"] < HERM_TOL
          and report["min_eig_1"] > REDUCED_TOL and report["min_eig_2"] > REDUCED_TOL)
    report["ok"] = ok
    if raise_on_fail and not ok:
        raise PhysicalityError(f"unphysical state at t = {t:.6g}: {report}")
    return report


def _is_physical(x: SymOperator) -> bool:
    return (abs(x.trace() - 1.0) < 1e-6 and x.hermiticity_error() < 1e-6)


# --------------------------------------------------------------------------
# propagation on a sub-space
# --------------------------------------------------------------------------
def _support(liouvillian: Liouvillian, x0: SymOperator, charges=None) -> np.ndarray:
    space = liouvillian.space
    if charges is None:
        charges = np.unique(space.charge[x0.coeffs != 0])
    charges = list(charges)
    if not charges:
        return np.zeros(0, dtype=np.int64)
    idx = np.concatenate([liouvillian.sector(int(q))[0] for q in charges])
    return np.sort(idx)


def _restrict(liouvillian: Liouvillian, idx: np.ndarray) -> sp.csr_matrix:
    if idx.size == liouvillian.dim:
        return liouvillian.matrix
    return liouvillian.matrix[idx][:, idx].tocsr()


def propagate(matrix, v0: np.ndarray, times, cfg: EvolveConfig | None = None,
              on_step=None) -> np.ndarray:
    """``exp(matrix t) v0`` for each of ``times`` (ascending, >= 0).

    ``on_step(t, v)`` is called after every accepted step of the Runge-Kutta
    integrator (or at each output time for the Krylov route).
    """
    cfg = cfg or EvolveConfig()
    times = np.atleast_1d(np.asarray(times, float))
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and ascending")
    v0 = np.asarray(v0, complex)
    out = np.empty((times.size, v0.size), complex)
    if v0.size == 0:
        return out
    if cfg.method == "krylov":
        return _propagate_krylov(matrix, v0, times, out, on_step)
    return _propagate_rk(matrix, v0, times, cfg, out, on_step)


@contextmanager
def _fixed_legacy_rng(seed: int = 0):
    """Seed numpy's global RNG for the duration, then restore it.

    scipy's 1-norm estimator inside ``expm_multiply`` draws random sign
    vectors from the global RNG, so without this the rounding of a result
    depends on what ran earlier in the process.
    """
    state = np.random.get_state()
    np.random.seed(seed)
    try:
        yield
    finally:
        np.random.set_state(state)


def _start_vector(n: int) -> np.ndarray:
    # fixed ARPACK start vector: its default draws from internal state
    rng = np.random.default_rng(0)
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def _propagate_krylov(matrix, v0, times, out, on_step):
    with _fixed_legacy_rng():
        return _propagate_krylov_inner(matrix, v0, times, out, on_step)


def _propagate_krylov_inner(matrix, v0, times, out, on_step):
    t_prev, v = 0.0, v0
    dt = np.diff(times)
    uniform = times.size > 2 and np.allclose(dt, dt[0], rtol=1e-12, atol=0) and dt[0] > 0
    if uniform:
        # the first segment brings v0 to times[0]; the grid is then one call
        if times[0] > 0:
            v = spla.expm_multiply(matrix * times[0], v0)
        block = spla.expm_multiply(matrix, v, start=0.0, stop=times[-1] - times[0],
                                   num=times.size, endpoint=True)
        out[:] = block
    else:
        for k, t in enumerate(times):
            if t > t_prev:
                v = spla.expm_multiply(matrix * (t - t_prev), v)
            out[k] = v
            t_prev = t
    if on_step is not None:
        for t, row in zip(times, out):
            on_step(t, row)
    return out


def _propagate_rk(matrix, v0, times, cfg, out, on_step):
    k0 = np.searchsorted(times, 0.0, side="right")
    out[:k0] = v0
    if k0 == times.size:
        return out
    solver = DOP853(lambda t, y: matrix @ y, 0.0, v0, times[-1], max_step=cfg.max_step,
                    rtol=cfg.rel_tol, atol=cfg.abs_tol, vectorized=False)
    k = k0
    while k < times.size:
        t_old = solver.t
        msg = solver.step()
        if solver.status == "failed":
            raise StiffnessError(f"step-size underflow: {msg}", solver.t)
        if on_step is not None:
            on_step(solver.t, solver.y)
        if k < times.size and times[k] <= solver.t:
            interp = solver.dense_output()
            while k < times.size and times[k] <= solver.t:
                out[k] = solver.y if times[k] == solver.t else interp(times[k])
                k += 1
        if solver.status == "finished" or solver.t == t_old:
            break
    if k < times.size:
        raise StiffnessError("integration stopped before the final time", solver.t)
    return out


def evolve_grid(liouvillian: Liouvillian, x0: SymOperator, times,
                cfg: EvolveConfig | None = None, charges=None) -> list[SymOperator]:
    """States at each of ``times``.

    ``charges`` restricts propagation to the listed U(1) sectors; by default
    the sectors occupied by ``x0``.  Coefficients outside the restriction are
    dropped, which is exact whenever only those sectors are needed.
    """
    if x0.space != liouvillian.space:
        raise ValueError(
            f"dimension mismatch: state on N={x0.space.n_spins}, "
            f"generator on N={liouvillian.space.n_spins}"
        )
    cfg = cfg or EvolveConfig()
    idx = _support(liouvillian, x0, charges)
    mat = _restrict(liouvillian, idx)
    space = liouvillian.space
    check = cfg.check and _is_physical(x0)

    def embed(v):
        c = np.zeros(space.dim, complex)
        c[idx] = v
        return SymOperator(space, c)

    on_step = (lambda t, v: check_physical(embed(v), t)) if check else None
    traj = propagate(mat, x0.coeffs[idx], times, cfg, on_step)
    return [embed(v) for v in traj]


def evolve(liouvillian: Liouvillian, x0: SymOperator, t: float,
           cfg: EvolveConfig | None = None) -> SymOperator:
    """``x(t) = exp(L t) x0``; ``t = 0`` returns ``x0`` unchanged."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        if x0.space != liouvillian.space:
            raise ValueError("dimension mismatch")
        return SymOperator(x0.space, x0.coeffs.copy())
    return evolve_grid(liouvillian, x0, [t], cfg)[0]


# --------------------------------------------------------------------------
# steady state
# --------------------------------------------------------------------------
def steady_state_residual(liouvillian: Liouvillian, x: SymOperator) -> float:
    """``||L x||_1 / (scale ||x||_1)``."""
    r = liouvillian.matrix @ x.coeffs
    return float(np.abs(r).sum() / (liouvillian.scale() * max(np.abs(x.coeffs).sum(), 1e-300)))


def _normalise(space: DickeSpace, idx, v):
    c = np.zeros(space.dim, complex)
    c[idx] = v
    x = SymOperator(space, c)
    tr = x.trace()
    if abs(tr) < 1e-300:
        raise SteadyStateError("iterate has zero trace")
    x = x * (1.0 / tr)
    # hermitian part; the exact null vector is hermitian
    return SymOperator(space, 0.5 * (x.coeffs + x.dagger().coeffs))


def _null_degeneracy(mat, scale, shift) -> float | None:
    """Magnitude of the second-smallest eigenvalue of ``mat`` (``None`` if unknown)."""
    n = mat.shape[0]
    try:
        if n <= 400:
            lam = la.eigvals(mat.toarray())
        else:
            lam = spla.eigs(mat.tocsc(), k=2, sigma=shift, which="LM", v0=_start_vector(n),
                            return_eigenvectors=False, tol=1e-10)
    except (spla.ArpackNoConvergence, RuntimeError):
        return None
    lam = np.sort(np.abs(lam))
    return float(lam[1] / scale) if lam.size > 1 else None


def steady_state(liouvillian: Liouvillian, x0: SymOperator | None = None, tol: float = 1e-10,
                 maxiter: int = 12, check_degeneracy: bool = True,
                 fallback_time: float | None = None) -> SymOperator:
    """Stationary state ``L rho = 0`` by shifted inverse iteration.

    The iteration starts from ``x0`` (default: fully mixed) and uses a sparse
    LU factorisation of ``L - s`` for a tiny shift ``s`` in the charge-zero
    sector.  If the null space is degenerate (for example ``W = 0``, where every
    ``|j, -j>`` is dark) a :class:`DegenerateSteadyStateWarning` is issued and
    the result is the long-time limit reached from ``x0``.  When the
    factorisation fails the state is obtained by long-time evolution.
    """
    space = liouvillian.space
    if x0 is None:
        x0 = SymOperator.fully_mixed(space)
    idx, mat = liouvillian.sector(0)
    scale = liouvillian.scale()
    shift = -1e-7 * scale
    v = x0.coeffs[idx].copy()
    x = None
    try:
        lu = spla.splu((mat - shift * sp.identity(mat.shape[0], format="csr")).tocsc())
        for _ in range(maxiter):
            v = lu.solve(v)
            v /= np.abs(v).max()
            x = _normalise(space, idx, v)
            v = x.coeffs[idx]
            if steady_state_residual(liouvillian, x) < tol:
                break
        else:
            x = None
    except (RuntimeError, MemoryError):
        x = None

    degenerate = False
    if check_degeneracy:
        second = _null_degeneracy(mat, scale, shift)
        degenerate = second is not None and second < 1e-8
        if degenerate:
            warnings.warn("stationary state is not unique; result depends on the start state",
                          DegenerateSteadyStateWarning, stacklevel=2)

    if x is None or degenerate:
        # exact long-time limit from x0
        p = liouvillian.params
        rate = max(min(p.f * p.gamma, p.pump_w if p.pump_w > 0 else np.inf), 1e-12)
        t_end = fallback_time or 200.0 / rate
        x = evolve(liouvillian, x0, t_end, EvolveConfig(method="krylov", check=False))
        x = _normalise(space, idx, x.coeffs[idx])
        res = steady_state_residual(liouvillian, x)
        if res > max(tol, 1e-8):
            raise SteadyStateError(f"steady state not converged: residual {res:.3e}")
    return x


# --------------------------------------------------------------------------
# observables
# --------------------------------------------------------------------------
def collective_expectations(x: SymOperator) -> CollectiveExpectations:
    mom = x.moments()
    return CollectiveExpectations(
        sz=float(np.real(mom["z"])),
        spsm=float(np.real(mom["pm"])),
        szsz=float(np.real(mom["zz"])),
        sp=complex(mom["p"]),
    )


def coherent_x_state(space: DickeSpace) -> SymOperator:
    """Product state with every spin along ``+x`` (lives in ``j = N/2``)."""
    from math import comb

    n = space.n_spins
    j2 = n
    k = np.arange(n + 1)  # number of flipped spins, m = N/2 - k
    amp = np.sqrt(np.array([comb(n, int(i)) for i in k], dtype=float)) / 2.0 ** (n / 2)
    return SymOperator.from_blocks(space, {j2: np.outer(amp, amp)})


def write_trajectory_csv(path, times, states, observables=("z", "pm", "zz", "p")) -> Path:
    """One row per time with ``Re``/``Im`` of each requested collective moment.

    Moment names follow ``DickeSpace.moment_functionals`` (``p`` is ``J^+``,
    ``m`` is ``J^-``, ``z`` is ``J^z``, pairs are products in that order).
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write("# collective moments Tr[O rho(t)]; columns t then re_O, im_O per O\n")
        w = csv.writer(fh, lineterminator="\n")
        header = ["t"]
        for o in observables:
            header += [f"re_{o}", f"im_{o}"]
        w.writerow(header)
        for t, x in zip(times, states):
            mom = x.moments()
            row = [repr(float(t))]
            for o in observables:
                row += [repr(float(np.real(mom[o]))), repr(float(np.imag(mom[o])))]
            w.writerow(row)
    return path


# --------------------------------------------------------------------------
# spectrum
# --------------------------------------------------------------------------
def _sector_eigs(mat, k, sigmas, tol):
    n = mat.shape[0]
    if n <= max(2 * k + 2, 400):
        lam, vecs = la.eig(mat.toarray())
        res = np.linalg.norm(mat @ vecs - vecs * lam, axis=0)
        order = np.argsort(np.abs(lam.real))[:k]
        return lam[order], res[order]
    lams, ress = [], []
    csc = mat.tocsc()
    for s in sigmas:
        try:
            lam, vecs = spla.eigs(csc, k=k, sigma=s, which="LM", tol=tol, v0=_start_vector(n))
        except spla.ArpackNoConvergence as exc:
            lam, vecs = exc.eigenvalues, exc.eigenvectors
            res = np.linalg.norm(mat @ vecs - vecs * lam, axis=0)
            raise RuntimeError(f"eigenvalue search did not converge; residuals {res}") from exc
        lams.append(lam)
        ress.append(np.linalg.norm(mat @ vecs - vecs * lam, axis=0))
    lam = np.concatenate(lams)
    res = np.concatenate(ress)
    # drop duplicates found from several shifts
    keep = []
    for i, v in enumerate(lam):
        if all(abs(v - lam[j]) > 1e-8 * max(1.0, abs(v)) for j in keep):
            keep.append(i)
    return lam[keep], res[keep]


def low_spectrum(liouvillian: Liouvillian, k: int = 6, charges=(0, -1, 1),
                 rho_ss: SymOperator | None = None, tol: float = 1e-10) -> SpectrumResult:
    """Eigenvalues with the smallest ``|Re lambda|`` in the given charge sectors.

    Shift-invert Arnoldi at ``0`` in each sector; in the ``q = -1`` (``+1``)
    sector a second shift is placed at the bare precession frequency
    ``-(+) i (2 g Gamma <J^z> - delta)`` of the steady state, around which the
    oscillating coherences cluster.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    p = liouvillian.params
    if rho_ss is None and any(q != 0 for q in charges):
        rho_ss = steady_state(liouvillian, check_degeneracy=False)
    precession = 0.0
    if rho_ss is not None:
        sz = collective_expectations(rho_ss).sz
        precession = 2 * p.g * p.gamma * sz - p.detuning
    lams, qs, res = [], [], []
    for q in charges:
        _, mat = liouvillian.sector(int(q))
        if mat.shape[0] == 0:
            continue
        sigmas = [0.0]
        if q != 0 and abs(precession) > 0:
            sigmas.append(1j * q * precession)
        kk = min(k, max(mat.shape[0] - 2, 1))
        lam, r = _sector_eigs(mat, kk, sigmas, tol)
        lams.append(lam)
        res.append(r)
        qs.append(np.full(lam.size, q))
    lam = np.concatenate(lams)
    q = np.concatenate(qs)
    r = np.concatenate(res)
    order = np.lexsort((np.abs(lam.imag), np.abs(lam.real)))[: k * len(charges)]
    return SpectrumResult(lam[order], q[order], k, r[order])


def dominant_pair(spec: SpectrumResult, im_floor: float = 1e-6) -> complex | None:
    """Least-damped eigenvalue with ``Im lambda > im_floor`` (``None`` if absent)."""
    lam = spec.eigenvalues
    osc = lam[np.abs(lam.imag) > im_floor]
    if osc.size == 0:
        return None
    best = osc[np.argmin(np.abs(osc.real))]
    return complex(best.real, abs(best.imag))

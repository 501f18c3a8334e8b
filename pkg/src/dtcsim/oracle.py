"""Brute-force Lindblad engine on the full 2^N Hilbert space (N <= 6).

Nothing here assumes permutation symmetry; per-spin detunings are allowed.
It is the reference that the symmetric, mean-field and cumulant engines are
tested against, so it stays deliberately plain: explicit Kronecker products,
dense linear solves, and a tight-tolerance ODE integrator for propagation.

Basis: spin state ``|up> = (1, 0)``, ``|down> = (0, 1)``; spin 0 is the most
significant tensor factor.  Vectorisation is column stacking,
``vec(A X B) = (B^T kron A) vec(X)``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .dicke import DickeSpace, SymOperator
from .liouvillian import ModelParams

__all__ = [
    "ORACLE_MAX_SPINS",
    "DenseState",
    "site_op",
    "collective_ops",
    "oracle_hamiltonian",
    "oracle_generator",
    "oracle_rhs",
    "oracle_evolve",
    "oracle_steady",
    "oracle_correlator",
    "oracle_partial_trace",
    "oracle_moments",
    "sym_to_dense",
    "dense_to_sym",
    "symmetrizer",
]

ORACLE_MAX_SPINS = 6

SP = np.array([[0, 1], [0, 0]], dtype=complex)
SM = SP.T.copy()
SZ = np.diag([1.0, -1.0]).astype(complex)
_PAULI = {"p": SP, "m": SM, "z": SZ}


def _check_n(n):
    if n > ORACLE_MAX_SPINS:
        raise ValueError(f"oracle refuses N = {n} > {ORACLE_MAX_SPINS}")


class DenseState(np.ndarray):
    """Marker subclass; oracle states are plain ``2^N x 2^N`` arrays."""


@lru_cache(maxsize=64)
def site_op(n: int, site: int, which: str) -> sp.csr_matrix:
    """Single-spin Pauli operator (``p``, ``m`` or ``z``) on ``site``."""
    _check_n(n)
    left = sp.identity(2**site, format="csr")
    right = sp.identity(2 ** (n - site - 1), format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(_PAULI[which])), right, format="csr")


@lru_cache(maxsize=16)
def collective_ops(n: int):
    """``(J^+, J^-, J^z)`` with ``J^z = sum_i sigma_i^z / 2``."""
    jp = sum(site_op(n, i, "p") for i in range(n))
    jm = sum(site_op(n, i, "m") for i in range(n))
    jz = 0.5 * sum(site_op(n, i, "z") for i in range(n))
    return jp.tocsr(), jm.tocsr(), jz.tocsr()


def _detunings(params: ModelParams, detunings):
    n = params.n_spins
    if detunings is None:
        return np.full(n, params.detuning, dtype=float)
    d = np.asarray(detunings, dtype=float)
    if d.shape != (n,):
        raise ValueError(f"need {n} detunings, got shape {d.shape}")
    return d


def oracle_hamiltonian(params: ModelParams, detunings=None) -> sp.csr_matrix:
    n = params.n_spins
    _check_n(n)
    d = _detunings(params, detunings)
    jp, jm, _ = collective_ops(n)
    h = params.g * params.gamma * (jp @ jm)
    for i in range(n):
        h = h + 0.5 * d[i] * site_op(n, i, "z")
    return h.tocsr()


def _jumps(params: ModelParams):
    n = params.n_spins
    jp, jm, _ = collective_ops(n)
    out = []
    if params.f > 0:
        out.append(np.sqrt(params.f * params.gamma) * jm)
    if params.pump_w > 0:
        out.extend(np.sqrt(params.pump_w) * site_op(n, i, "p") for i in range(n))
    return out


def oracle_generator(params: ModelParams, detunings=None) -> sp.csr_matrix:
    """Superoperator matrix (``4^N x 4^N``) of the full master equation."""
    n = params.n_spins
    _check_n(n)
    dim = 2**n
    eye = sp.identity(dim, format="csr")
    h = oracle_hamiltonian(params, detunings)
    gen = -1j * (sp.kron(eye, h) - sp.kron(h.T, eye))
    for a in _jumps(params):
        ada = (a.conj().T @ a).tocsr()
        gen = gen + sp.kron(a.conj(), a) - 0.5 * sp.kron(eye, ada) - 0.5 * sp.kron(ada.T, eye)
    return gen.tocsr()


def oracle_rhs(params: ModelParams, rho: np.ndarray, detunings=None) -> np.ndarray:
    """``L[rho]`` evaluated directly on the density matrix."""
    h = oracle_hamiltonian(params, detunings)
    out = -1j * (h @ rho - (h.T @ rho.T).T)
    for a in _jumps(params):
        ad = a.conj().T.tocsr()
        ada = (ad @ a).tocsr()
        arho = a @ rho
        out += (ad.T @ arho.T).T - 0.5 * (ada @ rho + (ada.T @ rho.T).T)
    return out


def _vec(rho):
    return np.asarray(rho).reshape(-1, order="F")


def _unvec(v, dim):
    return np.asarray(v).reshape(dim, dim, order="F")


def oracle_evolve(params: ModelParams, rho0: np.ndarray, times, detunings=None,
                  rtol: float = 1e-12, atol: float = 1e-14) -> np.ndarray:
    """States at each of ``times`` (ascending, starting at or after 0)."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    dim = rho0.shape[0]
    if times[-1] == 0:
        return np.repeat(np.asarray(rho0, complex)[None], times.size, axis=0)
    gen = oracle_generator(params, detunings)
    sol = solve_ivp(lambda t, y: gen @ y, (0.0, times[-1]), _vec(rho0).astype(complex),
                    method="DOP853", t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"oracle integration failed: {sol.message}")
    return np.stack([_unvec(sol.y[:, k], dim) for k in range(times.size)])


def oracle_steady(params: ModelParams, detunings=None, fallback_time: float | None = None
                  ) -> np.ndarray:
    """Steady state via a dense solve with a trace constraint.

    If the stationary state is not unique (the constrained system is
    singular, e.g. ``W = 0`` where every dark state of ``J^-`` is
    stationary) the all-up state is evolved to ``fallback_time`` (default
    ``200 / (f Gamma)``) instead.
    """
    n = params.n_spins
    dim = 2**n
    gen = oracle_generator(params, detunings).toarray()
    rhs = np.zeros(dim * dim, complex)
    # replace the first equation by Tr rho = 1
    gen[0, :] = 0.0
    gen[0, np.arange(dim) * (dim + 1)] = 1.0
    rhs[0] = 1.0
    try:
        rho = _unvec(la.solve(gen, rhs), dim)
    except la.LinAlgError:
        rate = max(params.f * params.gamma, params.pump_w, 1e-12)
        up = np.zeros((dim, dim), complex)
        up[0, 0] = 1.0
        rho = oracle_evolve(params, up, [fallback_time or 200.0 / rate], detunings)[0]
    return 0.5 * (rho + rho.conj().T)


def oracle_correlator(params: ModelParams, rho_ss: np.ndarray, tau_grid, detunings=None,
                      rtol: float = 1e-12, atol: float = 1e-14) -> np.ndarray:
    """``sum_ij Tr[sigma_i^+ e^{L tau} (sigma_j^- rho_ss)] / N^2`` site by site."""
    n = params.n_spins
    tau_grid = np.asarray(tau_grid, float)
    total = np.zeros(tau_grid.size, complex)
    for j in range(n):
        seed = site_op(n, j, "m") @ rho_ss
        traj = oracle_evolve(params, seed, tau_grid, detunings, rtol=rtol, atol=atol)
        for i in range(n):
            sp_i = site_op(n, i, "p")
            total += np.array([(sp_i @ x).trace() for x in traj])
    return total / n**2


def oracle_partial_trace(rho: np.ndarray, keep) -> np.ndarray:
    """Reduced density matrix on the spins listed in ``keep`` (in that order)."""
    n = int(round(np.log2(rho.shape[0])))
    keep = list(keep)
    traced = [k for k in range(n) if k not in keep]
    t = rho.reshape([2] * (2 * n))
    # move kept bra/ket axes to the front, trace the rest
    perm = keep + traced + [n + k for k in keep] + [n + k for k in traced]
    t = t.transpose(perm)
    nk, nt = len(keep), len(traced)
    t = t.reshape(2**nk, 2**nt, 2**nk, 2**nt)
    return np.einsum("aibi->ab", t)


def oracle_moments(rho: np.ndarray):
    """One- and two-site Pauli moments ``<sigma_i^a>`` and ``<sigma_i^a sigma_j^b>``.

    Returns ``(m1, m2)`` with ``m1[a]`` of shape ``(N,)`` and ``m2[(a, b)]`` of
    shape ``(N, N)`` (diagonal set to zero), for ``a, b`` in ``"pmz"``.
    """
    n = int(round(np.log2(rho.shape[0])))
    m1 = {a: np.array([(site_op(n, i, a) @ rho).trace() for i in range(n)]) for a in "pmz"}
    m2 = {}
    for a in "pmz":
        for b in "pmz":
            mat = np.zeros((n, n), complex)
            for i in range(n):
                for j in range(n):
                    if i != j:
                        mat[i, j] = (site_op(n, i, a) @ site_op(n, j, b) @ rho).trace()
            m2[(a, b)] = mat
    return m1, m2


# --------------------------------------------------------------------------
# bridge to the symmetric representation
# --------------------------------------------------------------------------
@lru_cache(maxsize=8)
def _sector_maps(n: int):
    """For each ``j2``: list over ``m`` (descending) of isometries ``V_m``.

    Columns of ``V_m`` span the ``|j, m, alpha>`` states for all ``alpha``,
    built consistently by lowering from ``m = j`` so that
    ``V_{m-1} = J^- V_m / A^-(j, m)``.
    """
    _check_n(n)
    jp, jm, jz = collective_ops(n)
    j2op = (jp @ jm + jz @ jz - jz).toarray().real
    evals, evecs = la.eigh(j2op)
    jzd = np.real(jz.diagonal())
    maps = {}
    for j2 in range(n, -1, -2):
        jj = j2 * (j2 + 2) / 4.0
        q = evecs[:, np.abs(evals - jj) < 1e-8]
        proj = q @ q.T
        # restrict to the top weight m = j
        top_mask = np.abs(jzd - j2 / 2.0) < 1e-9
        top = proj[:, top_mask]
        u, s, _ = la.svd(top, full_matrices=False)
        basis = u[:, s > 1e-8]
        vs = [basis.astype(complex)]
        m2 = j2
        while m2 > -j2:
            amp = np.sqrt((j2 * (j2 + 2) - m2 * (m2 - 2)) / 4.0)
            vs.append((jm @ vs[-1]) / amp)
            m2 -= 2
        maps[j2] = vs
    return maps


def sym_to_dense(x: SymOperator) -> np.ndarray:
    """Full ``2^N x 2^N`` matrix of a symmetric operator."""
    n = x.space.n_spins
    maps = _sector_maps(n)
    out = np.zeros((2**n, 2**n), complex)
    for j2, vs in maps.items():
        block = x.block(j2)
        d = vs[0].shape[1]
        for k, vk in enumerate(vs):
            for kp, vkp in enumerate(vs):
                if block[k, kp] != 0:
                    out += block[k, kp] / d * (vk @ vkp.conj().T)
    return out


def dense_to_sym(rho: np.ndarray) -> SymOperator:
    """Coefficients ``x_{j,m,m'} = sum_alpha <j m alpha| rho |j m' alpha>``.

    For a non-symmetric ``rho`` this is the coefficient vector of its
    projection onto permutation-symmetric operators.
    """
    n = int(round(np.log2(rho.shape[0])))
    space = DickeSpace(n)
    maps = _sector_maps(n)
    blocks = {}
    for j2, vs in maps.items():
        mats = np.array([[np.trace(vk.conj().T @ rho @ vkp) for vkp in vs] for vk in vs])
        blocks[j2] = mats
    return SymOperator.from_blocks(space, blocks)


def symmetrizer(rho: np.ndarray) -> np.ndarray:
    """Average of ``rho`` over all spin permutations (via the symmetric basis)."""
    return sym_to_dense(dense_to_sym(rho))

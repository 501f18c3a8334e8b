"""Permutation-symmetric operator space for N spin-1/2 particles.

A permutation-symmetric operator decomposes as ``sum_j X_j (x) 1_{d_j} / d_j``
over total-spin sectors ``j`` with multiplicity ``d_j``.  We store the
``(2j+1) x (2j+1)`` matrices ``X_j`` flattened into a single coefficient
vector.  The degeneracy is absorbed into the coefficients, so the trace of an
operator is simply ``sum_j tr X_j``.

Conventions
-----------
* Half-integers are carried as doubled integers (``j2 = 2j``, ``m2 = 2m``).
* Sectors are ordered by descending ``j``; inside a sector the local index
  ``k = j - m`` runs over ``m = j, j-1, ..., -j`` and blocks are row-major in
  ``(m, m')``.
* Entry ``x[j, m, m']`` multiplies ``|j, m><j, m'|``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np
import scipy.sparse as sp

__all__ = [
    "DickeSpace",
    "SymOperator",
    "enumerate_sectors",
    "space_dimension",
    "ladder_coefficient",
    "degeneracy",
    "local_channel_elements",
    "collective_sandwich",
    "LOCAL_CHANNELS",
]

LOCAL_CHANNELS = ("pump", "local_decay", "local_dephase")


def degeneracy(n_spins: int, j2: int) -> int:
    """Multiplicity of total spin ``j = j2/2`` among ``n_spins`` spins (exact)."""
    if n_spins == 0:
        return 1 if j2 == 0 else 0
    if j2 < 0 or j2 > n_spins or (n_spins - j2) % 2:
        return 0
    k = (n_spins - j2) // 2
    return comb(n_spins, k) - (comb(n_spins, k - 1) if k >= 1 else 0)


def enumerate_sectors(n_spins: int) -> list[tuple[float, int]]:
    """Total-spin sectors ``(j, d_j)`` for ``n_spins`` spins, descending in ``j``.

    >>> enumerate_sectors(3)
    [(1.5, 1), (0.5, 2)]
    """
    if int(n_spins) != n_spins or n_spins < 1:
        raise ValueError(f"n_spins must be a positive integer, got {n_spins!r}")
    n_spins = int(n_spins)
    return [(j2 / 2, degeneracy(n_spins, j2)) for j2 in range(n_spins, -1, -2)]


def space_dimension(n_spins: int) -> int:
    """Dimension ``(N+1)(N+2)(N+3)/6`` of the symmetric operator space."""
    if int(n_spins) != n_spins or n_spins < 1:
        raise ValueError(f"n_spins must be a positive integer, got {n_spins!r}")
    n = int(n_spins)
    return (n + 1) * (n + 2) * (n + 3) // 6


def ladder_coefficient(j: float, m: float, sign: int | str) -> float:
    """Matrix element ``<j, m±1| J^± |j, m> = sqrt(j(j+1) - m(m±1))``."""
    s = _parse_sign(sign)
    j2, m2 = _doubled(j), _doubled(m)
    if abs(m2) > j2 or (j2 - m2) % 2:
        raise ValueError(f"invalid (j, m) = ({j}, {m})")
    return float(np.sqrt(_ladder_sq(j2, m2, s)))


def _parse_sign(sign) -> int:
    if sign in (+1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise ValueError(f"sign must be + or -, got {sign!r}")


def _doubled(value: float) -> int:
    v2 = 2 * value
    if abs(v2 - round(v2)) > 1e-12:
        raise ValueError(f"{value} is not a half-integer")
    return int(round(v2))


def _ladder_sq(j2, m2, s):
    # j(j+1) - m(m+s) in doubled integers, divided by 4; clipped at the ends
    val = (j2 * (j2 + 2) - m2 * (m2 + 2 * s)) / 4.0
    return np.maximum(val, 0.0)


@dataclass(frozen=True, eq=False)
class DickeSpace:
    """Index bookkeeping for the symmetric operator space of ``n_spins`` spins."""

    n_spins: int

    def __post_init__(self):
        if int(self.n_spins) != self.n_spins or self.n_spins < 1:
            raise ValueError(f"n_spins must be a positive integer, got {self.n_spins!r}")
        object.__setattr__(self, "n_spins", int(self.n_spins))

    def __eq__(self, other):
        return isinstance(other, DickeSpace) and other.n_spins == self.n_spins

    def __hash__(self):
        return hash(("DickeSpace", self.n_spins))

    @cached_property
    def j2_values(self) -> np.ndarray:
        return np.arange(self.n_spins, -1, -2)

    @property
    def sectors(self) -> list[tuple[float, int]]:
        return enumerate_sectors(self.n_spins)

    @cached_property
    def degeneracies(self) -> dict[int, int]:
        return {int(j2): degeneracy(self.n_spins, int(j2)) for j2 in self.j2_values}

    @cached_property
    def offsets(self) -> dict[int, int]:
        out, pos = {}, 0
        for j2 in self.j2_values:
            out[int(j2)] = pos
            pos += (int(j2) + 1) ** 2
        return out

    @cached_property
    def _offset_lookup(self) -> np.ndarray:
        table = np.full(self.n_spins + 1, -1, dtype=np.int64)
        for j2, off in self.offsets.items():
            table[j2] = off
        return table

    @property
    def dim(self) -> int:
        return space_dimension(self.n_spins)

    @cached_property
    def _labels(self):
        j2s, m2s, mp2s = [], [], []
        for j2 in self.j2_values:
            n = j2 + 1
            m2 = j2 - 2 * np.arange(n)
            j2s.append(np.full(n * n, j2))
            m2s.append(np.repeat(m2, n))
            mp2s.append(np.tile(m2, n))
        return np.concatenate(j2s), np.concatenate(m2s), np.concatenate(mp2s)

    @property
    def j2(self) -> np.ndarray:
        """Doubled total spin of every flat index."""
        return self._labels[0]

    @property
    def m2(self) -> np.ndarray:
        """Doubled row magnetisation ``2m`` of every flat index."""
        return self._labels[1]

    @property
    def mp2(self) -> np.ndarray:
        """Doubled column magnetisation ``2m'`` of every flat index."""
        return self._labels[2]

    @cached_property
    def charge(self) -> np.ndarray:
        """U(1) charge ``q = m - m'`` of every flat index (integer)."""
        return (self.m2 - self.mp2) // 2

    def index(self, j2, m2, mp2):
        """Flat index of ``(j2, m2, mp2)``; vectorised over array input."""
        j2 = np.asarray(j2)
        m2 = np.asarray(m2)
        mp2 = np.asarray(mp2)
        if np.any(np.abs(m2) > j2) or np.any(np.abs(mp2) > j2):
            raise IndexError("|m| exceeds j")
        if np.any((j2 - m2) % 2) or np.any((j2 - mp2) % 2):
            raise IndexError("m and j must share parity")
        if np.any(j2 > self.n_spins) or np.any(j2 < 0) or np.any((self.n_spins - j2) % 2):
            raise IndexError("j outside the sector list")
        off = self._offset_lookup[j2]
        n = j2 + 1
        out = off + ((j2 - m2) // 2) * n + (j2 - mp2) // 2
        return out if out.ndim else int(out)

    def label(self, idx: int) -> tuple[float, float, float]:
        """Inverse of :meth:`index`, as half-integers ``(j, m, m')``."""
        return self.j2[idx] / 2, self.m2[idx] / 2, self.mp2[idx] / 2

    def block_slice(self, j2: int) -> slice:
        start = self.offsets[int(j2)]
        return slice(start, start + (int(j2) + 1) ** 2)

    @cached_property
    def transpose_perm(self) -> np.ndarray:
        """Permutation mapping index(j, m, m') to index(j, m', m)."""
        return self.index(self.j2, self.mp2, self.m2)

    def charge_indices(self, q: int) -> np.ndarray:
        return np.flatnonzero(self.charge == q)

    @cached_property
    def trace_functional(self) -> np.ndarray:
        return (self.m2 == self.mp2).astype(float)

    # -- collective operators inside each sector (m descending) -------------
    def jz_block(self, j2: int) -> np.ndarray:
        return np.diag((j2 - 2 * np.arange(j2 + 1)) / 2.0)

    def jp_block(self, j2: int) -> np.ndarray:
        """Matrix of ``J^+`` in sector ``j2/2``; ``J^+ |m> = A^+ |m+1>``."""
        m2 = j2 - 2 * np.arange(j2 + 1)
        amp = np.sqrt(_ladder_sq(j2, m2, +1))
        # column k (m) maps to row k-1 (m+1)
        return np.diag(amp[1:], k=1)

    def jm_block(self, j2: int) -> np.ndarray:
        return self.jp_block(j2).T.copy()

    @cached_property
    def moment_functionals(self) -> tuple[tuple[str, ...], sp.csr_matrix]:
        """Linear functionals giving collective moments from coefficients.

        Row ``r`` contracts coefficients into ``Tr[O_r X]`` for the products of
        collective operators listed in the returned names, where ``p``, ``m``
        and ``z`` denote ``J^+``, ``J^-`` and ``J^z``.
        """
        names = ("1", "p", "m", "z") + tuple(a + b for a in "pmz" for b in "pmz")
        rows, cols, vals = [], [], []
        for j2 in self.j2_values:
            ops = {"p": self.jp_block(j2), "m": self.jm_block(j2), "z": self.jz_block(j2)}
            ops["1"] = np.eye(j2 + 1)
            base = self.offsets[int(j2)]
            for r, name in enumerate(names):
                mat = ops["1"] if name == "1" else ops[name[0]]
                if len(name) == 2:
                    mat = ops[name[0]] @ ops[name[1]]
                # Tr[O X] = sum_{k,k'} O[k', k] X[k, k']
                kk, kp = np.nonzero(mat.T)
                rows.append(np.full(kk.size, r))
                cols.append(base + kk * (j2 + 1) + kp)
                vals.append(mat.T[kk, kp])
        mat = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(len(names), self.dim),
        )
        return names, mat


@dataclass(frozen=True, eq=False)
class SymOperator:
    """Coefficient vector of a permutation-symmetric operator on a DickeSpace."""

    space: DickeSpace
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.space.dim,):
            raise ValueError(f"expected {self.space.dim} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    # construction helpers
    @classmethod
    def zeros(cls, space: DickeSpace) -> "SymOperator":
        return cls(space, np.zeros(space.dim, complex))

    @classmethod
    def fully_mixed(cls, space: DickeSpace) -> "SymOperator":
        """The normalised identity ``1 / 2^N``."""
        n = space.n_spins
        c = np.zeros(space.dim, complex)
        diag = space.m2 == space.mp2
        for j2, d in space.degeneracies.items():
            c[diag & (space.j2 == j2)] = d / 2.0**n
        return cls(space, c)

    @classmethod
    def dicke(cls, space: DickeSpace, j: float, m: float) -> "SymOperator":
        """The sector-uniform state ``|j, m><j, m| (x) 1_d / d``."""
        j2, m2 = _doubled(j), _doubled(m)
        c = np.zeros(space.dim, complex)
        c[space.index(j2, m2, m2)] = 1.0
        return cls(space, c)

    @classmethod
    def all_up(cls, space: DickeSpace) -> "SymOperator":
        n = space.n_spins
        return cls.dicke(space, n / 2, n / 2)

    @classmethod
    def all_down(cls, space: DickeSpace) -> "SymOperator":
        n = space.n_spins
        return cls.dicke(space, n / 2, -n / 2)

    @classmethod
    def from_blocks(cls, space: DickeSpace, blocks: dict[int, np.ndarray]) -> "SymOperator":
        c = np.zeros(space.dim, complex)
        for j2, mat in blocks.items():
            c[space.block_slice(j2)] = np.asarray(mat).ravel()
        return cls(space, c)

    # views and scalars
    def block(self, j2: int) -> np.ndarray:
        return self.coeffs[self.space.block_slice(j2)].reshape(j2 + 1, j2 + 1)

    def blocks(self) -> dict[int, np.ndarray]:
        return {int(j2): self.block(int(j2)) for j2 in self.space.j2_values}

    def trace(self) -> complex:
        return complex(self.space.trace_functional @ self.coeffs)

    def dagger(self) -> "SymOperator":
        return SymOperator(self.space, self.coeffs[self.space.transpose_perm].conj())

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.coeffs - self.coeffs[self.space.transpose_perm].conj())))

    def moments(self) -> dict[str, complex]:
        """All collective moments ``Tr[O X]`` listed in ``moment_functionals``."""
        names, mat = self.space.moment_functionals
        return dict(zip(names, mat @ self.coeffs))

    def purity(self) -> float:
        """``Tr[rho^2]`` of the full N-spin operator (degeneracy-aware)."""
        tot = 0.0
        for j2, d in self.space.degeneracies.items():
            b = self.block(j2)
            tot += float(np.real(np.vdot(b.conj().T, b))) / d
        return tot

    def __add__(self, other):
        return SymOperator(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SymOperator(self.space, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SymOperator(self.space, self.coeffs * scalar)

    __rmul__ = __mul__


# --------------------------------------------------------------------------
# superoperator matrix elements
# --------------------------------------------------------------------------
def _cg_half(j1_2, j2, m2, mu2):
    """Clebsch-Gordan ``<j1, m-mu; 1/2, mu | j, m>`` with doubled arguments.

    Vectorised; zero whenever a projection is out of range.
    """
    j1_2 = np.asarray(j1_2)
    j2 = np.asarray(j2)
    m2 = np.asarray(m2)
    denom = 2.0 * np.maximum(j1_2 + 1, 1)
    plus = np.sqrt(np.maximum(j1_2 + m2 + 1, 0) / denom)
    minus = np.sqrt(np.maximum(j1_2 - m2 + 1, 0) / denom)
    if mu2 > 0:
        val = np.where(j2 == j1_2 + 1, plus, -minus)
    else:
        val = np.where(j2 == j1_2 + 1, minus, plus)
    ok = (np.abs(m2 - mu2) <= j1_2) & (np.abs(m2) <= j2) & (j1_2 >= 0)
    return np.where(ok, val, 0.0)


# single-spin operators as {(mu'_2, mu_2): value} with <mu'|a|mu>
_SINGLE = {
    "p": {(1, -1): 1.0},
    "m": {(-1, 1): 1.0},
    "z": {(1, 1): 1.0, (-1, -1): -1.0},
}


def _local_sandwich_triplets(space: DickeSpace, op: str):
    """COO triplets for ``sum_i a_i X a_i^dag`` with ``a`` a single-spin operator.

    Couples each ``X_j`` to sectors ``j' = j, j +- 1`` by coupling the first
    ``N - 1`` spins (total spin ``j1``) to the last one.
    """
    n = space.n_spins
    elems = _SINGLE[op]
    j2, m2, mp2 = space.j2, space.m2, space.mp2
    src = np.arange(space.dim)
    d_n = np.array([float(space.degeneracies[int(v)]) for v in space.j2_values])
    d_n = dict(zip(space.j2_values.tolist(), d_n))
    rows, cols, vals = [], [], []
    for dj2 in (-2, 0, 2):
        jo2 = j2 + dj2
        valid_out = (jo2 >= 0) & (jo2 <= n)
        for dj1 in (-1, 1):
            j1_2 = j2 + dj1
            # j1 must also couple to j' (|j1 - j'| = 1/2) and live in N-1 spins
            ok = valid_out & (np.abs(j1_2 - jo2) == 1) & (j1_2 >= 0) & (j1_2 <= n - 1)
            if not np.any(ok):
                continue
            weight = np.zeros(space.dim)
            for jj in np.unique(j2[ok]):
                d_prev = degeneracy(n - 1, int(jj + dj1))
                weight[(j2 == jj) & ok] = n * d_prev / d_n[int(jj)]
            for (mu_o, mu_i), a_val in elems.items():
                for (nu_o, nu_i), b_val in elems.items():
                    mo2 = m2 - mu_i + mu_o
                    mpo2 = mp2 - nu_i + nu_o
                    sel = ok & (np.abs(mo2) <= jo2) & (np.abs(mpo2) <= jo2)
                    if not np.any(sel):
                        continue
                    amp = (
                        _cg_half(j1_2, j2, m2, mu_i)
                        * _cg_half(j1_2, j2, mp2, nu_i)
                        * _cg_half(j1_2, jo2, np.where(sel, mo2, 0), mu_o)
                        * _cg_half(j1_2, jo2, np.where(sel, mpo2, 0), nu_o)
                    )
                    # <nu|a^dag|nu'> = conj(<nu'|a|nu>); all entries are real
                    val = weight * a_val * b_val * amp
                    sel &= val != 0
                    if not np.any(sel):
                        continue
                    rows.append(space.index(jo2[sel], mo2[sel], mpo2[sel]))
                    cols.append(src[sel])
                    vals.append(val[sel])
    if not rows:
        return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def local_channel_elements(space: DickeSpace, channel: str) -> sp.csr_matrix:
    """Unit-rate superoperator of ``sum_i D[A_i]`` for a local channel.

    ``channel`` is ``"pump"`` (``A_i = sigma_i^+``), ``"local_decay"``
    (``sigma_i^-``) or ``"local_dephase"`` (``sigma_i^z``).  Multiply by the
    physical rate.
    """
    if channel not in LOCAL_CHANNELS:
        raise ValueError(f"unknown channel {channel!r}; expected one of {LOCAL_CHANNELS}")
    op = {"pump": "p", "local_decay": "m", "local_dephase": "z"}[channel]
    rows, cols, vals = _local_sandwich_triplets(space, op)
    n = space.n_spins
    m, mp = space.m2 / 2.0, space.mp2 / 2.0
    # -1/2 {sum_i A_i^dag A_i, X}; the sums are collective and diagonal here
    if op == "p":
        anti = -0.5 * ((n / 2 - m) + (n / 2 - mp))
    elif op == "m":
        anti = -0.5 * ((n / 2 + m) + (n / 2 + mp))
    else:
        anti = -float(n) * np.ones(space.dim)
    idx = np.arange(space.dim)
    rows = np.concatenate([rows, idx])
    cols = np.concatenate([cols, idx])
    vals = np.concatenate([vals, anti])
    return sp.csr_matrix((vals, (rows, cols)), shape=(space.dim, space.dim))


def collective_sandwich(space: DickeSpace, op: str = "m") -> sp.csr_matrix:
    """Superoperator of ``X -> J^a X (J^a)^dag`` for ``a`` in ``{"m", "p"}``."""
    s = -1 if op == "m" else 1
    j2, m2, mp2 = space.j2, space.m2, space.mp2
    amp = np.sqrt(_ladder_sq(j2, m2, s) * _ladder_sq(j2, mp2, s))
    sel = amp > 0
    rows = space.index(j2[sel], m2[sel] + 2 * s, mp2[sel] + 2 * s)
    cols = np.flatnonzero(sel)
    return sp.csr_matrix((amp[sel], (rows, cols)), shape=(space.dim, space.dim))

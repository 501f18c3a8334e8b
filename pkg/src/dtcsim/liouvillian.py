"""Sparse generator of the pumped, superradiant spin ensemble.

The master equation is

    d rho/dt = -i [H, rho] + f Gamma D[J^-] rho + W sum_i D[sigma_i^+] rho,
    H = g Gamma J^+ J^- + delta J^z,

with ``D[A] rho = A rho A^dag - {A^dag A, rho}/2``.  The exchange term is not
normalised by ``N`` and includes the single-spin part of ``J^+ J^-``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .dicke import DickeSpace, SymOperator, collective_sandwich, local_channel_elements

__all__ = [
    "ModelParams",
    "Liouvillian",
    "build_liouvillian",
    "apply",
    "dump_binary",
    "load_binary",
    "MAX_SPINS",
]

MAX_SPINS = 200


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters; ``gamma`` and ``pump_w`` are rates, ``g`` and ``f``
    dimensionless couplings, ``detuning`` a homogeneous rate."""

    n_spins: int
    gamma: float = 1.0
    g: float = 0.5
    f: float = 1.0
    pump_w: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        if int(self.n_spins) != self.n_spins or self.n_spins < 1:
            raise ValueError(f"n_spins must be a positive integer, got {self.n_spins!r}")
        object.__setattr__(self, "n_spins", int(self.n_spins))
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.f < 0:
            raise ValueError("f must be non-negative")
        if self.pump_w < 0:
            raise ValueError("pump_w must be non-negative")
        for name in ("gamma", "g", "f", "pump_w", "detuning"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def optimal(cls, n_spins: int, g: float = 0.5, f: float = 1.0, gamma: float = 1.0,
                detuning: float = 0.0) -> "ModelParams":
        """Parameters at the optimal pump ``W = f N Gamma / 2``."""
        return cls(n_spins, gamma, g, f, f * n_spins * gamma / 2, detuning)

    @property
    def rate_unit(self) -> float:
        """``f Gamma``, the unit of every dimensionless output column."""
        return self.f * self.gamma

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {
            "n_spins": self.n_spins,
            "gamma": self.gamma,
            "g": self.g,
            "f": self.f,
            "pump_w": self.pump_w,
            "detuning": self.detuning,
        }


@dataclass(frozen=True, eq=False)
class Liouvillian:
    params: ModelParams
    space: DickeSpace
    matrix: sp.csr_matrix
    _sectors: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.space.dim

    def sector(self, q: int) -> tuple[np.ndarray, sp.csr_matrix]:
        """Indices and sub-matrix of the U(1) charge sector ``m - m' = q``.

        The generator is block diagonal in ``q``.
        """
        if q not in self._sectors:
            idx = self.space.charge_indices(q)
            self._sectors[q] = (idx, self.matrix[idx][:, idx].tocsc().tocsr())
        return self._sectors[q]

    def scale(self) -> float:
        """Max absolute column sum, used to make residuals dimensionless."""
        return float(abs(self.matrix).sum(axis=0).max())


def _hamiltonian_diagonal(space: DickeSpace, params: ModelParams) -> np.ndarray:
    """``E_m - E_m'`` for every flat index; H is diagonal in the Dicke basis."""
    j2, m2, mp2 = space.j2, space.m2, space.mp2
    gg = params.g * params.gamma

    def energy(m2_):
        # J^+ J^- = J^2 - Jz^2 + Jz
        jj = j2 * (j2 + 2) / 4.0
        m = m2_ / 2.0
        return gg * (jj - m * m + m) + params.detuning * m

    return energy(m2) - energy(mp2)


def build_liouvillian(params: ModelParams, max_spins: int = MAX_SPINS) -> Liouvillian:
    if params.n_spins > max_spins:
        raise MemoryError(
            f"N = {params.n_spins} exceeds the configured cap of {max_spins} spins"
        )
    space = DickeSpace(params.n_spins)
    dim = space.dim
    idx = np.arange(dim)

    diag = -1j * _hamiltonian_diagonal(space, params)
    mats = []
    fg = params.f * params.gamma
    if fg > 0:
        m, mp = space.m2 / 2.0, space.mp2 / 2.0
        jj = space.j2 * (space.j2 + 2) / 4.0
        # -1/2 {J^+ J^-, X}
        diag = diag - 0.5 * fg * ((jj - m * m + m) + (jj - mp * mp + mp))
        mats.append(fg * collective_sandwich(space, "m"))
    if params.pump_w > 0:
        mats.append(params.pump_w * local_channel_elements(space, "pump"))

    matrix = sp.csr_matrix((diag, (idx, idx)), shape=(dim, dim))
    for extra in mats:
        matrix = matrix + extra
    matrix = matrix.tocsr()
    matrix.sum_duplicates()
    matrix.eliminate_zeros()
    matrix.sort_indices()
    return Liouvillian(params, space, matrix)


def apply(liouvillian: Liouvillian, x: SymOperator) -> SymOperator:
    """``L x`` for a symmetric operator ``x``."""
    if x.space != liouvillian.space:
        raise ValueError(
            f"dimension mismatch: operator on N={x.space.n_spins}, "
            f"generator on N={liouvillian.space.n_spins}"
        )
    return SymOperator(liouvillian.space, liouvillian.matrix @ x.coeffs)


# --------------------------------------------------------------------------
# binary dump
# --------------------------------------------------------------------------
_MAGIC = b"DTCL"


def dump_binary(liouvillian: Liouvillian, path) -> Path:
    """Write the CSR matrix in a little-endian layout.

    Layout: magic ``b"DTCL"``, then int64 ``rows, cols, nnz``, int64 row
    pointers (``rows + 1``), int64 column indices (``nnz``), float64 values
    interleaved as ``re, im`` (``2 * nnz``).
    """
    m = liouvillian.matrix.tocsr()
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<qqq", m.shape[0], m.shape[1], m.nnz))
        fh.write(m.indptr.astype("<i8").tobytes())
        fh.write(m.indices.astype("<i8").tobytes())
        vals = np.empty(2 * m.nnz, dtype="<f8")
        vals[0::2] = m.data.real
        vals[1::2] = m.data.imag
        fh.write(vals.tobytes())
    return path


def load_binary(path) -> sp.csr_matrix:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path} is not a generator dump")
        rows, cols, nnz = struct.unpack("<qqq", fh.read(24))
        indptr = np.frombuffer(fh.read(8 * (rows + 1)), dtype="<i8")
        indices = np.frombuffer(fh.read(8 * nnz), dtype="<i8")
        vals = np.frombuffer(fh.read(16 * nnz), dtype="<f8")
    data = vals[0::2] + 1j * vals[1::2]
    return sp.csr_matrix((data, indices, indptr), shape=(rows, cols))

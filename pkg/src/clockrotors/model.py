"""Chiral clock Hamiltonians on a periodic ring of rotors."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .clockops import (
    ClockParams,
    basis_digits,
    build_mu,
    build_sigma,
    embed_local,
    two_site_bond,
)


class Variant(str, Enum):
    STANDARD = "standard"
    ROTATED = "rotated"


def staggered_phases(phi: float, M: int) -> tuple[float, ...]:
    """phi_j = (-1)**j * phi for bonds j = 1..M."""
    return tuple(float((-1) ** j * phi) for j in range(1, M + 1))


def homogeneous_phases(phi: float, M: int) -> tuple[float, ...]:
    return tuple(float(phi) for _ in range(M))


@dataclass(frozen=True)
class CCMParams:
    """Chain parameters. Bond j couples site j to site j+1, with bond M closing the ring."""

    clock: ClockParams
    f: float
    phases: tuple[float, ...]
    variant: Variant = Variant.STANDARD

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))
        object.__setattr__(self, "variant", Variant(self.variant))
        if len(self.phases) != self.clock.M:
            raise ValueError(f"need {self.clock.M} bond phases, got {len(self.phases)}")
        if not 0.0 <= self.f <= 1.0:
            raise ValueError(f"f must lie in [0, 1], got {self.f}")

    @classmethod
    def staggered(cls, M: int, f: float, phi: float, N_s: int = 3, variant=Variant.STANDARD):
        return cls(ClockParams(N_s, M), f, staggered_phases(phi, M), variant)

    @classmethod
    def homogeneous(cls, M: int, f: float, phi: float, N_s: int = 3, variant=Variant.STANDARD):
        return cls(ClockParams(N_s, M), f, homogeneous_phases(phi, M), variant)

    @property
    def dim(self) -> int:
        return self.clock.dim

    def with_f(self, f: float) -> "CCMParams":
        return CCMParams(self.clock, f, self.phases, self.variant)


@dataclass(frozen=True)
class HamiltonianSplit:
    """H together with its diagonal (H_D) and off-diagonal (H_ND) parts in the clock basis."""

    H: sp.csr_matrix
    H_D: sp.csr_matrix
    H_ND: sp.csr_matrix
    params: CCMParams = field(repr=False)

    @property
    def dim(self) -> int:
        return self.H.shape[0]


def _field_term(op, clock: ClockParams) -> sp.csr_matrix:
    out = sp.csr_matrix((clock.dim, clock.dim), dtype=complex)
    for j in range(1, clock.M + 1):
        local = embed_local(op, j, clock)
        out = out + local + local.conj().T
    return out.tocsr()


def _bond_term(op, params: CCMParams) -> sp.csr_matrix:
    clock = params.clock
    out = sp.csr_matrix((clock.dim, clock.dim), dtype=complex)
    for j in range(1, clock.M + 1):
        nxt = j % clock.M + 1
        out = out + two_site_bond(op, j, op, nxt, params.phases[j - 1], clock)
    return out.tocsr()


def _split(H_D, H_ND, params) -> HamiltonianSplit:
    H_D = sp.csr_matrix(H_D)
    H_ND = sp.csr_matrix(H_ND)
    H_D.eliminate_zeros()
    H_ND.eliminate_zeros()
    H = (H_D + H_ND).tocsr()
    return HamiltonianSplit(H=H, H_D=H_D, H_ND=H_ND, params=params)


def build_hccm(params: CCMParams) -> HamiltonianSplit:
    """H = -f sum(sigma_j + h.c.) - (1-f) sum(mu_j mu_{j+1}^dag e^{i phi_j} + h.c.)."""
    if params.variant is not Variant.STANDARD:
        raise ValueError("build_hccm expects the standard variant")
    clock = params.clock
    H_ND = -params.f * _field_term(build_sigma(clock.N_s), clock)
    H_D = -(1.0 - params.f) * _bond_term(build_mu(clock.N_s), params)
    return _split(H_D, H_ND, params)


def build_hccm_rotated(params: CCMParams) -> HamiltonianSplit:
    """Same Hamiltonian with the roles of sigma and mu exchanged."""
    if params.variant is not Variant.ROTATED:
        raise ValueError("build_hccm_rotated expects the rotated variant")
    clock = params.clock
    H_D = -params.f * _field_term(build_mu(clock.N_s), clock)
    H_ND = -(1.0 - params.f) * _bond_term(build_sigma(clock.N_s), params)
    return _split(H_D, H_ND, params)


def build_hamiltonian(params: CCMParams) -> HamiltonianSplit:
    if params.variant is Variant.ROTATED:
        return build_hccm_rotated(params)
    return build_hccm(params)


def diagonal_energies(H: HamiltonianSplit, atol: float = 1e-14) -> np.ndarray:
    """E_j = <j|H|j> as a real vector."""
    diag = H.H.diagonal()
    if diag.size and np.max(np.abs(diag.imag)) > atol:
        raise ValueError("Hamiltonian has a non-real diagonal")
    return np.ascontiguousarray(diag.real)


def sector_indices(clock: ClockParams, charge: int = 0) -> np.ndarray:
    """Basis indices whose digit sum is congruent to ``charge`` mod N_s."""
    digits = basis_digits(clock)
    return np.flatnonzero(digits.sum(axis=1) % clock.N_s == charge % clock.N_s)


def build_symmetry_projector(params: CCMParams) -> sp.csr_matrix:
    """D x D_0 isometry onto the eigenvalue-1 sector of U = prod_j mu_j^dag.

    U is diagonal in the clock basis with eigenvalue w**(-sum of digits), so the
    sector is spanned by the basis states with digit sum = 0 mod N_s. Returns the
    matrix P with P^dag P = 1; the projected Hamiltonian is P^dag H P.
    """
    if params.variant is not Variant.ROTATED:
        raise ValueError("the symmetry sector is defined for the rotated variant")
    idx = sector_indices(params.clock, 0)
    if idx.size == 0:
        raise ValueError("empty symmetry sector")
    D = params.dim
    return sp.csr_matrix(
        (np.ones(idx.size, dtype=complex), (idx, np.arange(idx.size))), shape=(D, idx.size)
    )


def project(H, P) -> sp.csr_matrix:
    return (P.conj().T @ H @ P).tocsr()


def symmetry_operator(clock: ClockParams) -> sp.csr_matrix:
    """U = prod_j mu_j^dag as a diagonal many-body operator."""
    charge = basis_digits(clock).sum(axis=1)
    w = np.exp(-2j * np.pi * charge / clock.N_s)
    return sp.diags(w, format="csr")

"""Clock and shift operators and their many-body embeddings.

Basis convention: a product state |k_1 k_2 ... k_M> has flat index
sum_i k_i * N_s**(M - i), i.e. site 1 is the most significant digit. All
embedded operators are built with Kronecker products in that order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

DENSE_LIMIT = 1000


@dataclass(frozen=True)
class ClockParams:
    """Number of clock states per rotor and number of rotors."""

    N_s: int = 3
    M: int = 4

    def __post_init__(self):
        if int(self.N_s) != self.N_s or self.N_s < 2:
            raise ValueError(f"N_s must be an integer >= 2, got {self.N_s}")
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"M must be an integer >= 2, got {self.M}")
        if self.N_s ** self.M > np.iinfo(np.int64).max ** 0.5:
            raise ValueError("Hilbert space too large to index its Liouville space")

    @property
    def dim(self) -> int:
        return self.N_s ** self.M


def _check_ns(N_s: int) -> None:
    if int(N_s) != N_s or N_s < 2:
        raise ValueError(f"N_s must be an integer >= 2, got {N_s}")


def omega(N_s: int) -> complex:
    return np.exp(2j * np.pi / N_s)


def build_sigma(N_s: int = 3) -> sp.csr_matrix:
    """Cyclic shift with unit entries at (k, k+1 mod N_s), so sigma|k+1> = |k>."""
    _check_ns(N_s)
    rows = np.arange(N_s)
    cols = (rows + 1) % N_s
    return sp.csr_matrix((np.ones(N_s, dtype=complex), (rows, cols)), shape=(N_s, N_s))


def build_mu(N_s: int = 3) -> sp.csr_matrix:
    """Diagonal clock operator diag(1, w, ..., w**(N_s-1)), w = exp(2i pi / N_s)."""
    _check_ns(N_s)
    return sp.diags(omega(N_s) ** np.arange(N_s), format="csr", dtype=complex)


def digits_to_index(digits, N_s: int) -> int:
    idx = 0
    for d in digits:
        if not 0 <= d < N_s:
            raise ValueError(f"digit {d} outside [0, {N_s - 1}]")
        idx = idx * N_s + int(d)
    return idx


def index_to_digits(index: int, params: ClockParams) -> tuple[int, ...]:
    if not 0 <= index < params.dim:
        raise ValueError(f"index {index} outside [0, {params.dim - 1}]")
    out = []
    for _ in range(params.M):
        index, d = divmod(index, params.N_s)
        out.append(d)
    return tuple(reversed(out))


def basis_digits(params: ClockParams) -> np.ndarray:
    """(D, M) integer array whose row i holds the digits of basis state i."""
    idx = np.arange(params.dim)
    powers = params.N_s ** np.arange(params.M - 1, -1, -1)
    return (idx[:, None] // powers[None, :]) % params.N_s


def embed_local(op, site: int, params: ClockParams) -> sp.csr_matrix:
    """Place a single-rotor operator at ``site`` (1-based) with identities elsewhere."""
    if not 1 <= site <= params.M:
        raise ValueError(f"site {site} outside [1, {params.M}]")
    op = sp.csr_matrix(op, dtype=complex)
    if op.shape != (params.N_s, params.N_s):
        raise ValueError(f"operator shape {op.shape} does not match N_s={params.N_s}")
    left = sp.identity(params.N_s ** (site - 1), dtype=complex, format="csr")
    right = sp.identity(params.N_s ** (params.M - site), dtype=complex, format="csr")
    return sp.kron(sp.kron(left, op, format="csr"), right, format="csr")


def two_site_bond(opA, siteA: int, opB, siteB: int, phase: float, params: ClockParams) -> sp.csr_matrix:
    """Hermitian bond opA_siteA opB_siteB^dagger exp(i phase) + h.c."""
    if siteA == siteB:
        raise ValueError("two_site_bond needs two distinct sites")
    a = embed_local(opA, siteA, params)
    b = embed_local(sp.csr_matrix(opB).conj().T, siteB, params)
    term = (a @ b) * np.exp(1j * phase)
    return (term + term.conj().T).tocsr()


def to_dense(op) -> np.ndarray:
    """Dense copy of a many-body operator; refused above DENSE_LIMIT."""
    if not sp.issparse(op):
        return np.asarray(op)
    if op.shape[0] > DENSE_LIMIT:
        raise ValueError(f"refusing dense conversion of a {op.shape[0]}-dimensional operator")
    return op.toarray()


def is_hermitian(op, atol: float = 1e-12) -> bool:
    diff = op - op.conj().T
    if sp.issparse(diff):
        return diff.nnz == 0 or float(np.max(np.abs(diff.data))) <= atol
    return bool(np.max(np.abs(diff)) <= atol)

"""Low-lying spectrum and critical diagnostics of the isolated chain."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .clockops import DENSE_LIMIT, build_mu, build_sigma, embed_local
from .model import (
    CCMParams,
    HamiltonianSplit,
    Variant,
    build_hamiltonian,
    build_symmetry_projector,
    project,
)
from .observables import tunneling_current

DEGENERACY_TOL = 1e-10


class EigensolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectrumResult:
    """Lowest eigenpairs; ``states`` are columns in the full Hilbert space."""

    energies: np.ndarray
    states: np.ndarray
    sector: str
    residuals: np.ndarray

    @property
    def gap(self) -> float:
        return float(self.energies[1] - self.energies[0])

    @property
    def degenerate(self) -> bool:
        return len(self.energies) > 1 and self.gap < DEGENERACY_TOL

    @property
    def ground_state(self) -> np.ndarray:
        return self.states[:, 0]


@dataclass(frozen=True)
class BinderPoint:
    f: float
    M: int
    m2: float
    m4: float

    @property
    def B(self) -> float:
        return binder_cumulant(self.m2, self.m4)


def _eigs(A, k: int, method: str):
    n = A.shape[0]
    if method == "auto":
        method = "dense" if n <= 4 * k + 20 else "lanczos"
    if method == "lanczos":
        v0 = np.random.default_rng(12345).normal(size=n).astype(complex)
        try:
            w, v = spla.eigsh(A, k=k, which="SA", v0=v0, tol=0, ncv=max(2 * k + 1, 20))
        except spla.ArpackNoConvergence:
            if n > DENSE_LIMIT:
                raise EigensolverError(f"Lanczos did not converge for dimension {n}")
            method = "dense"
        else:
            order = np.argsort(w)
            return w[order], v[:, order]
    if method == "dense":
        if n > DENSE_LIMIT and sp.issparse(A):
            raise EigensolverError(f"dense diagonalization refused for dimension {n}")
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        w, v = la.eigh(dense, subset_by_index=[0, min(k, n) - 1])
        return w, v
    raise ValueError(f"unknown eigensolver method {method!r}")


def lowest_eigenpairs(H: HamiltonianSplit, k: int = 2, sector: str = "full",
                      method: str = "auto") -> SpectrumResult:
    """k lowest eigenpairs, optionally restricted to the symmetric sector.

    ``sector="symmetric"`` needs the rotated variant; the reduced problem is
    solved and the eigenvectors embedded back into the full space.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if sector == "symmetric":
        P = build_symmetry_projector(H.params)
        A = project(H.H, P)
    elif sector == "full":
        P, A = None, H.H
    else:
        raise ValueError(f"unknown sector {sector!r}")
    w, v = _eigs(A, k, method)
    res = np.linalg.norm(A @ v - v * w, axis=0)
    states = P @ v if P is not None else v
    return SpectrumResult(np.asarray(w), np.asarray(states), sector, res)


def order_parameter_operator(params: CCMParams) -> sp.csr_matrix:
    """m = (1/M) sum_j (mu_j + mu_j^dag), written in the frame of ``params.variant``.

    In the rotated frame mu and sigma trade places, so the same observable reads
    (1/M) sum_j (sigma_j + sigma_j^dag) there.
    """
    clock = params.clock
    op = build_mu(clock.N_s) if params.variant is Variant.STANDARD else build_sigma(clock.N_s)
    out = sp.csr_matrix((clock.dim, clock.dim), dtype=complex)
    for j in range(1, clock.M + 1):
        local = embed_local(op, j, clock)
        out = out + local + local.conj().T
    return (out / clock.M).tocsr()


def _real_expect(psi, op) -> float:
    val = np.vdot(psi, op @ psi)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"non-real expectation value {val}")
    return float(val.real)


def order_parameter_mean(state, params: CCMParams) -> float:
    return _real_expect(np.asarray(state), order_parameter_operator(params))


def order_parameter_moments(state, params: CCMParams) -> tuple[float, float]:
    """(<m^2>, <m^4>) in a normalized pure state."""
    psi = np.asarray(state)
    m = order_parameter_operator(params)
    mpsi = m @ psi
    m2psi = m @ mpsi
    m2 = float(np.vdot(mpsi, mpsi).real)
    m4 = float(np.vdot(m2psi, m2psi).real)
    return m2, m4


def binder_cumulant(m2: float, m4: float) -> float:
    """B = (3 - <m^4>/<m^2>^2) / 2."""
    if not m2 > 0:
        raise ValueError("Binder cumulant needs <m^2> > 0")
    return 0.5 * (3.0 - m4 / m2 ** 2)


def binder_point(params: CCMParams) -> BinderPoint:
    """Moments in the ground state of the symmetric sector (rotated model)."""
    H = build_hamiltonian(params)
    gs = lowest_eigenpairs(H, 1, sector="symmetric").ground_state
    m2, m4 = order_parameter_moments(gs, params)
    return BinderPoint(params.f, params.clock.M, m2, m4)


def binder_curve(params: CCMParams, f_grid) -> list[BinderPoint]:
    return [binder_point(params.with_f(float(f))) for f in f_grid]


def curve_crossings(f_grid, y1, y2) -> list[float]:
    """Zeros of y1 - y2 located by linear interpolation between sign changes."""
    f = np.asarray(f_grid, dtype=float)
    d = np.asarray(y1, dtype=float) - np.asarray(y2, dtype=float)
    out = []
    for i in range(len(f) - 1):
        if d[i] == 0.0:
            out.append(float(f[i]))
        elif d[i] * d[i + 1] < 0:
            out.append(float(f[i] - d[i] * (f[i + 1] - f[i]) / (d[i + 1] - d[i])))
    if len(d) and d[-1] == 0.0:
        out.append(float(f[-1]))
    return out


def gap_curve(params: CCMParams, f_grid, sector: str = "symmetric") -> list[tuple[float, float]]:
    out = []
    for f in f_grid:
        H = build_hamiltonian(params.with_f(float(f)))
        out.append((float(f), lowest_eigenpairs(H, 2, sector=sector).gap))
    return out


def fit_gap_exponent(curve, f_c: float) -> float:
    """Least-squares slope of log(gap) against log|f - f_c|."""
    pts = [(f, g) for f, g in curve if g > 0 and f != f_c]
    if len(pts) < 3:
        raise ValueError("need at least three points with a positive gap")
    x = np.log([abs(f - f_c) for f, _ in pts])
    y = np.log([g for _, g in pts])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def ground_tunneling_current(params: CCMParams, f_grid, j: int = 0, jp: int = 1) -> np.ndarray:
    """Per-rotor tunneling current j -> j' in the symmetric-sector ground state.

    Returns an array of shape (len(f_grid), M).
    """
    if params.variant is not Variant.ROTATED:
        raise ValueError("ground-state currents are evaluated for the rotated variant")
    rows = []
    for f in f_grid:
        H = build_hamiltonian(params.with_f(float(f)))
        psi = lowest_eigenpairs(H, 1, sector="symmetric").ground_state
        rows.append([tunneling_current(psi, H, params.clock, m, j, jp)
                     for m in range(1, params.clock.M + 1)])
    return np.asarray(rows)

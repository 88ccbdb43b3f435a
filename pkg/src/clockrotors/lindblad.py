"""Local GKLS dynamics of the rotor chain.

Density matrices are vectorized by column stacking: the element rho[r, c] sits at
position r + c * D, so vec(A rho B) = (B^T kron A) vec(rho). ``vec``/``unvec``
below are the only places that convention is spelled out.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .clockops import ClockParams, basis_digits
from .model import HamiltonianSplit, diagonal_energies

log = logging.getLogger(__name__)

DENSE_SUPEROP_LIMIT = 100


class SteadyStateError(RuntimeError):
    pass


class DegenerateSteadyState(SteadyStateError):
    pass


@dataclass(frozen=True)
class BathConfig:
    """Inverse temperature per site (index 0 is site 1) and microscopic rate g."""

    beta: tuple[float, ...]
    g: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if any(not b > 0 for b in self.beta):
            raise ValueError(f"inverse temperatures must be positive, got {self.beta}")
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g}")

    @classmethod
    def staggered(cls, M: int, beta_e: float, beta_o: float, g: float = 0.2) -> "BathConfig":
        """beta_e on even sites, beta_o on odd sites (1-based)."""
        return cls(tuple(beta_e if m % 2 == 0 else beta_o for m in range(1, M + 1)), g)


def rate(delta_e: float, beta: float, g: float) -> float:
    """Bosonic rate gamma(delta_e) for a jump releasing energy delta_e = E_source - E_target.

    gamma(w) = g|w| / (1 - exp(-beta|w|)) for w > 0, times exp(beta w) for w <= 0,
    with the removable singularity at w = 0 replaced by its limit g / beta.
    beta = inf is the zero-temperature limit: g|w| downhill, nothing uphill.
    """
    if not beta > 0 or not g > 0:
        raise ValueError("beta and g must be positive")
    return float(rates(np.array([delta_e]), beta, g)[0])


def rates(delta_e: np.ndarray, beta, g: float) -> np.ndarray:
    """Vectorized :func:`rate`; ``beta`` may be an array matching ``delta_e``."""
    delta_e = np.asarray(delta_e, dtype=float)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), delta_e.shape)
    w = np.abs(delta_e)
    zero = w == 0.0
    x = np.where(zero, 0.0, beta * np.where(zero, 1.0, w))
    small = x < 1e-8
    out = np.empty_like(w)
    # series g/beta (1 + x/2) near the singularity, also for subnormal w
    out[small] = g / beta[small] * (1.0 + 0.5 * x[small])
    big = ~small
    out[big] = g * w[big] / -np.expm1(-x[big])
    # uphill written as downhill * exp(-x) so large x underflows gracefully
    up = delta_e < 0
    out[up] *= np.exp(-x[up])
    return out


@dataclass(frozen=True)
class Transitions:
    """All single-rotor jumps source -> target, stored column-wise.

    ``site`` is 1-based; ``rate`` is W_{target, source}.
    """

    site: np.ndarray
    source: np.ndarray
    target: np.ndarray
    rate: np.ndarray
    dim: int
    clock: ClockParams = field(repr=False)

    def __len__(self) -> int:
        return self.site.size

    def at_site(self, m: int) -> "Transitions":
        mask = self.site == m
        return Transitions(self.site[mask], self.source[mask], self.target[mask],
                           self.rate[mask], self.dim, self.clock)

    def __iter__(self):
        for i in range(len(self)):
            yield int(self.site[i]), int(self.source[i]), int(self.target[i]), float(self.rate[i])


def enumerate_transitions(H: HamiltonianSplit, baths: BathConfig) -> Transitions:
    """Every basis state, every site, digit +-1 mod N_s: 2 * M * D jumps."""
    clock = H.params.clock
    if len(baths.beta) != clock.M:
        raise ValueError(f"need {clock.M} inverse temperatures, got {len(baths.beta)}")
    E = diagonal_energies(H)
    digits = basis_digits(clock)
    D = clock.dim
    src = np.arange(D)
    sites, sources, targets, betas = [], [], [], []
    for m in range(1, clock.M + 1):
        weight = clock.N_s ** (clock.M - m)
        d = digits[:, m - 1]
        for step in (+1, -1):
            tgt = src + (((d + step) % clock.N_s) - d) * weight
            sites.append(np.full(D, m))
            sources.append(src)
            targets.append(tgt)
            betas.append(np.full(D, baths.beta[m - 1]))
    site = np.concatenate(sites)
    source = np.concatenate(sources)
    target = np.concatenate(targets)
    beta = np.concatenate(betas)
    W = rates(E[source] - E[target], beta, baths.g)
    return Transitions(site, source, target, W, D, clock)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, D: int) -> np.ndarray:
    return np.asarray(v).reshape((D, D), order="F")


def commutator_superop(H) -> sp.csr_matrix:
    """Superoperator of rho -> -i[H, rho]."""
    H = sp.csr_matrix(H, dtype=complex)
    eye = sp.identity(H.shape[0], dtype=complex, format="csr")
    return (-1j * (sp.kron(eye, H) - sp.kron(H.T, eye))).tocsr()


def dissipator_superop(trans: Transitions) -> sp.csr_matrix:
    """sum_l W_l (L rho L^dag - {L^dag L, rho}/2) with L_l = |target><source|.

    The jump part moves population rho[s, s] to rho[t, t]; the anticommutator damps
    rho[r, c] by half the escape rates of r and c.
    """
    D = trans.dim
    escape = np.bincount(trans.source, weights=trans.rate, minlength=D)
    jump = sp.csr_matrix(
        (trans.rate.astype(complex), (trans.target * (D + 1), trans.source * (D + 1))),
        shape=(D * D, D * D),
    )
    decay = -0.5 * (np.tile(escape, D) + np.repeat(escape, D))
    return (jump + sp.diags(decay.astype(complex), format="csr")).tocsr()


@dataclass(frozen=True)
class Liouvillian:
    """Full generator plus the pieces it was assembled from.

    The per-site dissipators are needed for heat currents; H and the transition
    list let the steady-state solver work on populations instead of the full
    Liouville space.
    """

    matrix: sp.csr_matrix
    dissipators: dict = field(repr=False)
    dim: int
    hamiltonian: sp.csr_matrix | None = field(default=None, repr=False)
    transitions: Transitions | None = field(default=None, repr=False)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)

    def norm(self) -> float:
        return float(spla.norm(self.matrix, np.inf))


def build_liouvillian(H, transitions: Transitions) -> Liouvillian:
    """-i[H, .] + sum_m D_m with each site's dissipator kept separately."""
    Hm = H.H if isinstance(H, HamiltonianSplit) else sp.csr_matrix(H)
    D = Hm.shape[0]
    if transitions.dim != D:
        raise ValueError(f"transitions live in dimension {transitions.dim}, H in {D}")
    L = commutator_superop(Hm)
    dissipators = {}
    for m in range(1, transitions.clock.M + 1):
        Dm = dissipator_superop(transitions.at_site(m))
        dissipators[m] = Dm
        L = L + Dm
    return Liouvillian(L.tocsr(), dissipators, D, Hm, transitions)


def _finalize(rho: np.ndarray) -> np.ndarray:
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def check_density_matrix(rho, herm_tol=1e-10, trace_tol=1e-10, pos_tol=1e-8) -> None:
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > trace_tol:
        raise ValueError(f"density matrix has trace {np.trace(rho)}")
    if np.linalg.eigvalsh(rho)[0] < -pos_tol:
        raise ValueError("density matrix is not positive")


def _steady_dense(L: Liouvillian, null_tol: float) -> np.ndarray:
    A = L.matrix.toarray()
    _, s, vh = la.svd(A)
    scale = max(s[0], 1.0)
    null = np.sum(s <= null_tol * scale)
    if null > 1:
        raise DegenerateSteadyState(f"Liouvillian has a {null}-dimensional null space")
    return unvec(vh[-1].conj(), L.dim)


def _steady_sparse(L: Liouvillian) -> np.ndarray:
    D = L.dim
    A = L.matrix.tolil()
    A[0, :] = 0
    diag = np.arange(D) * (D + 1)
    A[0, diag] = 1.0
    b = np.zeros(D * D, dtype=complex)
    b[0] = 1.0
    A = A.tocsc()
    try:
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise DegenerateSteadyState(f"constrained system is singular: {exc}") from exc
    x = lu.solve(b)
    # one step of iterative refinement
    x += lu.solve(b - A @ x)
    return unvec(x, D)


def _population_map_eig(K: np.ndarray, chunk: int = 16) -> np.ndarray:
    """G[i, a] = <i| X_a |i> where K X_a + X_a K^dag = -|a><a|, via the eigenbasis of K.

    With K = V diag(lam) W, W = V^-1:
    G[i, a] = -sum_kl V_ik conj(V_il) W_ka conj(W_la) / (lam_k + conj(lam_l)),
    evaluated as one matrix product over the flattened (k, l) index, in chunks of k.
    """
    lam, V = la.eig(K)
    W = la.inv(V)
    R = 1.0 / (lam[:, None] + lam.conj()[None, :])
    D = K.shape[0]
    Vc, Wc = V.conj(), W.conj()
    G = np.zeros((D, D), dtype=complex)
    for start in range(0, D, chunk):
        ks = slice(start, min(start + chunk, D))
        c = ks.stop - ks.start
        X = (V[:, ks, None] * Vc[:, None, :]).reshape(D, c * D)
        Y = (R[ks, :, None] * W[ks, None, :] * Wc[None, :, :]).reshape(c * D, D)
        G += X @ Y
    return -G.real


def _population_map_schur(K: np.ndarray) -> np.ndarray:
    """Same map as :func:`_population_map_eig` via Bartels-Stewart on the Schur form."""
    T, Z = la.schur(K, output="complex")
    (trsyl,) = la.get_lapack_funcs(("trsyl",), (T,))
    D = K.shape[0]
    G = np.empty((D, D))
    for a in range(D):
        C = -np.outer(Z[a, :].conj(), Z[a, :])
        Y, scale, info = trsyl(T, T, C, trana="N", tranb="C")
        if info < 0:
            raise SteadyStateError(f"trsyl failed with info={info}")
        X = (Z @ (Y / scale)) @ Z.conj().T
        G[:, a] = X.diagonal().real
    return G


def _steady_lyapunov(L: Liouvillian, null_tol: float, use_schur: bool = False) -> np.ndarray:
    """Steady state by elimination of the coherences.

    The generator reads L(rho) = K rho + rho K^dag + diag(J p) with K = -iH - Gamma/2
    (Gamma the escape rates), J the matrix of inflow rates and p = diag(rho). K is
    strictly stable, so for given populations rho is the unique solution of a
    Lyapunov equation; requiring that its diagonal reproduce p leaves a D x D
    eigenproblem p = G J p.
    """
    if L.hamiltonian is None or L.transitions is None:
        raise SteadyStateError("population elimination needs H and the transition list")
    D = L.dim
    trans = L.transitions
    escape = np.bincount(trans.source, weights=trans.rate, minlength=D)
    J = sp.csr_matrix((trans.rate, (trans.target, trans.source)), shape=(D, D)).toarray()
    K = -1j * L.hamiltonian.toarray() - 0.5 * np.diag(escape)
    G = _population_map_schur(K) if use_schur else _population_map_eig(K)
    A = G @ J - np.eye(D)
    s = la.svdvals(A)
    if D > 1 and s[-2] <= null_tol * max(s[0], 1.0):
        raise DegenerateSteadyState("population map has more than one fixed point")
    A[0, :] = 1.0
    b = np.zeros(D)
    b[0] = 1.0
    p = la.solve(A, b)
    return la.solve_continuous_lyapunov(K, -np.diag(J @ p).astype(complex))


def _steady_iterative(L: Liouvillian, tol: float) -> np.ndarray:
    D = L.dim
    A = L.matrix.tolil()
    A[0, :] = 0
    A[0, np.arange(D) * (D + 1)] = 1.0
    A = A.tocsc()
    b = np.zeros(D * D, dtype=complex)
    b[0] = 1.0
    ilu = spla.spilu(A, drop_tol=1e-5, fill_factor=20)
    M = spla.LinearOperator(A.shape, ilu.solve, dtype=complex)
    x, info = spla.gmres(A, b, M=M, rtol=tol, restart=200, maxiter=2000)
    if info != 0:
        raise SteadyStateError(f"GMRES did not converge (info={info})")
    return unvec(x, D)


def steady_state(L: Liouvillian, method: str = "auto", residual_tol: float = 1e-10,
                 null_tol: float = 1e-10) -> np.ndarray:
    """Unique trace-one fixed point of L.

    method: "dense" (SVD null space), "sparse" (LU of L with its first row replaced
    by the trace condition), "iterative" (preconditioned GMRES on the same system)
    "lyapunov" (elimination of coherences, see :func:`_steady_lyapunov`) or "auto",
    which picks dense for superoperators up to 100 x 100 and lyapunov otherwise.
    The result is checked against ||L rho|| <= residual_tol * ||L||.
    """
    n = L.dim * L.dim
    if method == "auto":
        method = "dense" if n <= DENSE_SUPEROP_LIMIT else "lyapunov"
    if method == "lyapunov":
        rho = _finalize(_steady_lyapunov(L, null_tol))
        if residual(L, rho) > residual_tol * L.norm():
            log.info("eigenbasis elimination inaccurate, retrying with Schur form")
            rho = _steady_lyapunov(L, null_tol, use_schur=True)
    elif method == "dense":
        rho = _steady_dense(L, null_tol)
    elif method == "sparse":
        rho = _steady_sparse(L)
    elif method == "iterative":
        rho = _steady_iterative(L, residual_tol)
    elif method == "propagate":
        rho = propagate(np.eye(L.dim, dtype=complex) / L.dim, L, t=_relaxation_time(L))
    else:
        raise ValueError(f"unknown steady-state method {method!r}")
    if not np.all(np.isfinite(rho)):
        raise DegenerateSteadyState("steady-state solve produced non-finite entries")
    rho = _finalize(rho)
    res = residual(L, rho)
    if res > residual_tol * L.norm():
        raise SteadyStateError(f"steady-state residual {res:.3e} above tolerance")
    return rho


def residual(L: Liouvillian, rho: np.ndarray) -> float:
    return float(np.linalg.norm(L.matrix @ vec(rho), np.inf))


def _relaxation_time(L: Liouvillian) -> float:
    rmin = min((abs(Dm.diagonal()).max() for Dm in L.dissipators.values()), default=1.0)
    return 200.0 / max(rmin, 1e-12)


def default_dt(L: Liouvillian) -> float:
    return 0.1 / L.norm()


def propagate(rho0: np.ndarray, L: Liouvillian, t: float, dt: float | None = None,
              drift_tol: float = 1e-8) -> np.ndarray:
    """Classical fourth-order Runge-Kutta integration of d rho/dt = L rho up to time t.

    dt defaults to 0.1 / ||L||_inf; the step is shrunk so that t is hit exactly.
    Raises if trace or Hermiticity drift beyond ``drift_tol``.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return rho0.copy()
    if dt is None:
        dt = default_dt(L) if L.matrix.nnz else t
    nsteps = max(1, int(np.ceil(t / dt)))
    h = t / nsteps
    A = L.matrix
    x = vec(rho0).copy()
    tr0 = np.trace(rho0)
    diag = np.arange(L.dim) * (L.dim + 1)
    check_every = max(1, nsteps // 20)
    for step in range(1, nsteps + 1):
        k1 = A @ x
        k2 = A @ (x + 0.5 * h * k1)
        k3 = A @ (x + 0.5 * h * k2)
        k4 = A @ (x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if step % check_every == 0 or step == nsteps:
            if not np.all(np.isfinite(x)) or abs(x[diag].sum() - tr0) > drift_tol:
                raise SteadyStateError(f"integration unstable at t={step * h:.4g}")
            rho = unvec(x, L.dim)
            if np.max(np.abs(rho - rho.conj().T)) > drift_tol:
                raise SteadyStateError(f"Hermiticity lost at t={step * h:.4g}")
    return unvec(x, L.dim).copy()


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))

"""Entropies, correlations and global discord of multi-rotor density matrices.

Sites are 1-based and ordered as in :mod:`clockrotors.clockops`. Logarithms are
natural throughout.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .clockops import ClockParams

log = logging.getLogger(__name__)

EIG_FLOOR = 1e-12


def _shape(rho, clock: ClockParams | None, N_s: int = 3) -> tuple[int, int]:
    """(local dimension, number of sites) of a state, inferred when not given."""
    D = np.asarray(rho).shape[0]
    if clock is not None:
        if clock.dim != D:
            raise ValueError(f"state of dimension {D} does not match {clock}")
        return clock.N_s, clock.M
    M = int(round(np.log(D) / np.log(N_s)))
    if M < 1 or N_s ** M != D:
        raise ValueError(f"dimension {D} is not a power of {N_s}")
    return N_s, M


@dataclass(frozen=True)
class Partition:
    """Bipartition of the sites 1..M into A and its complement B."""

    subset_a: frozenset
    M: int

    def __post_init__(self):
        a = frozenset(int(s) for s in self.subset_a)
        object.__setattr__(self, "subset_a", a)
        if not a or len(a) >= self.M or not a <= set(range(1, self.M + 1)):
            raise ValueError(f"invalid subset {sorted(a)} of {self.M} sites")

    @property
    def subset_b(self) -> frozenset:
        return frozenset(range(1, self.M + 1)) - self.subset_a

    @classmethod
    def half_chain(cls, M: int) -> "Partition":
        return cls(frozenset(range(1, M // 2 + 1)), M)


def partial_trace(rho, keep, clock: ClockParams | None = None) -> np.ndarray:
    """Reduced state on the sites in ``keep``."""
    d, M = _shape(rho, clock)
    keep = sorted(set(int(s) for s in keep))
    if not keep:
        raise ValueError("keep at least one site")
    if keep[0] < 1 or keep[-1] > M:
        raise ValueError(f"sites {keep} outside [1, {M}]")
    t = np.asarray(rho).reshape((d,) * (2 * M))
    drop = [s for s in range(1, M + 1) if s not in keep]
    # trace out from the highest site down so that axis numbers stay valid
    for n_done, s in enumerate(sorted(drop, reverse=True)):
        m_now = M - n_done
        t = np.trace(t, axis1=s - 1, axis2=s - 1 + m_now)
    k = d ** len(keep)
    return t.reshape(k, k)


def partial_transpose(rho, sites, clock: ClockParams | None = None) -> np.ndarray:
    d, M = _shape(rho, clock)
    t = np.asarray(rho).reshape((d,) * (2 * M))
    axes = list(range(2 * M))
    for s in sites:
        axes[s - 1], axes[s - 1 + M] = axes[s - 1 + M], axes[s - 1]
    return t.transpose(axes).reshape(d ** M, d ** M)


def entropy_from_eigenvalues(w: np.ndarray) -> float:
    w = np.where(w < EIG_FLOOR, 0.0, w)
    nz = w[w > 0]
    return float(-np.sum(nz * np.log(nz)))


def von_neumann_entropy(rho) -> float:
    return entropy_from_eigenvalues(np.linalg.eigvalsh(np.asarray(rho)))


def negativity(rho, partition: Partition, clock: ClockParams | None = None) -> float:
    """Sum of |negative eigenvalues| of the partial transpose over A."""
    w = np.linalg.eigvalsh(partial_transpose(rho, partition.subset_a, clock))
    return float(-np.sum(w[w < 0]))


def mutual_information(rho, partition: Partition, clock: ClockParams | None = None) -> float:
    rho_a = partial_trace(rho, partition.subset_a, clock)
    rho_b = partial_trace(rho, partition.subset_b, clock)
    return von_neumann_entropy(rho_a) + von_neumann_entropy(rho_b) - von_neumann_entropy(rho)


def l1_coherence(rho) -> float:
    rho = np.asarray(rho)
    return float(np.sum(np.abs(rho)) - np.sum(np.abs(np.diag(rho))))


def gellmann_generators() -> np.ndarray:
    """The eight Gell-Mann matrices, normalized to tr(L_a L_b) = 2 delta_ab."""
    g = np.zeros((8, 3, 3), dtype=complex)
    g[0][0, 1] = g[0][1, 0] = 1
    g[1][0, 1], g[1][1, 0] = -1j, 1j
    g[2][0, 0], g[2][1, 1] = 1, -1
    g[3][0, 2] = g[3][2, 0] = 1
    g[4][0, 2], g[4][2, 0] = -1j, 1j
    g[5][1, 2] = g[5][2, 1] = 1
    g[6][1, 2], g[6][2, 1] = -1j, 1j
    g[7] = np.diag([1, 1, -2]) / np.sqrt(3)
    return g


_GELLMANN = gellmann_generators()


def local_rotation(theta) -> np.ndarray:
    """exp(i theta . Lambda) for one qutrit."""
    A = np.tensordot(np.asarray(theta, dtype=float), _GELLMANN, axes=1)
    w, V = np.linalg.eigh(A)
    return (V * np.exp(1j * w)) @ V.conj().T


def global_rotation(angles) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    R = np.ones((1, 1), dtype=complex)
    for theta in angles:
        R = np.kron(R, local_rotation(theta))
    return R


def _check_angles(angles, M: int) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (M, 8):
        raise ValueError(f"angles must have shape ({M}, 8), got {angles.shape}")
    return angles


def dephase(rho, angles) -> np.ndarray:
    """Pi(rho) = sum_j P_j rho P_j with P_j = R|j><j|R^dag, R the product of local rotations."""
    rho = np.asarray(rho)
    _, M = _shape(rho, None)
    angles = _check_angles(angles, M)
    R = global_rotation(angles)
    p = np.sum(R.conj() * (rho @ R), axis=0)
    return (R * p) @ R.conj().T


def discord_objective(rho, angles, clock: ClockParams | None = None,
                      _cache: dict | None = None) -> float:
    """S(rho||Pi(rho)) - sum_i S(rho_i||Pi_i(rho_i)) for one choice of local bases.

    Uses S(rho||Pi(rho)) = S(Pi(rho)) - S(rho), valid for complete dephasing in an
    orthonormal basis, and that Pi(rho) has the diagonal of R^dag rho R as spectrum.
    """
    rho = np.asarray(rho)
    _, M = _shape(rho, clock)
    angles = np.asarray(angles, dtype=float).reshape(M, 8)
    cache = _cache if _cache is not None else _discord_cache(rho, M)
    locs = [local_rotation(t) for t in angles]
    R = locs[0]
    for r in locs[1:]:
        R = np.kron(R, r)
    p = np.sum(R.conj() * (rho @ R), axis=0).real
    val = entropy_from_eigenvalues(p) - cache["S"]
    for Ri, (rho_i, S_i) in zip(locs, cache["marginals"]):
        pi = np.sum(Ri.conj() * (rho_i @ Ri), axis=0).real
        val -= entropy_from_eigenvalues(pi) - S_i
    return float(val)


def _discord_cache(rho, M: int) -> dict:
    marg = []
    for i in range(1, M + 1):
        r = partial_trace(rho, {i})
        marg.append((r, von_neumann_entropy(r)))
    return {"S": von_neumann_entropy(rho), "marginals": marg}


def _shannon(p: np.ndarray) -> float:
    p = p[p >= EIG_FLOOR]
    return float(-np.dot(p, np.log(p)))


class _Objective:
    """Batched evaluation of :func:`discord_objective` for a fixed state."""

    def __init__(self, rho: np.ndarray, M: int):
        cache = _discord_cache(rho, M)
        self.rho = rho
        self.M = M
        self.offset = cache["S"] - sum(S_i for _, S_i in cache["marginals"])
        self.marginals = np.array([r for r, _ in cache["marginals"]])
        self.calls = 0

    def __call__(self, x) -> float:
        self.calls += 1
        A = np.tensordot(np.reshape(x, (self.M, 8)), _GELLMANN, axes=1)
        w, V = np.linalg.eigh(A)
        U = (V * np.exp(1j * w)[:, None, :]) @ V.conj().transpose(0, 2, 1)
        R = U[0]
        for u in U[1:]:
            R = np.kron(R, u)
        val = _shannon(np.sum(R.conj() * (self.rho @ R), axis=0).real)
        local = np.sum(U.conj() * (self.marginals @ U), axis=1).real
        for pi in local:
            val -= _shannon(pi)
        return val - self.offset


@dataclass(frozen=True)
class AnnealConfig:
    initial_temperature: float = 1.0
    cooling_factor: float = 0.95
    steps_per_temperature: int = 200
    restarts: int = 8
    proposal_width: float = 0.3
    seed: int = 0
    tolerance: float = 1e-6
    patience: int = 8
    max_levels: int = 400
    polish: bool = True

    def __post_init__(self):
        if not self.initial_temperature > 0:
            raise ValueError("initial_temperature must be positive")
        if not 0 < self.cooling_factor < 1:
            raise ValueError("cooling_factor must lie in (0, 1)")
        if self.steps_per_temperature < 1 or self.restarts < 1:
            raise ValueError("steps_per_temperature and restarts must be positive")
        if not self.proposal_width > 0 or not self.tolerance > 0:
            raise ValueError("proposal_width and tolerance must be positive")


@dataclass
class DiscordResult:
    value: float
    angles: np.ndarray
    restart_values: list = field(default_factory=list)
    converged: bool = True
    evaluations: int = 0


def _anneal_once(objective, x0, cfg: AnnealConfig, rng, n_blocks: int):
    x = x0.copy()
    fx = objective(x)
    best_x, best_f = x.copy(), fx
    T = cfg.initial_temperature
    width = cfg.proposal_width
    stale = 0
    for _ in range(cfg.max_levels):
        level_best = best_f
        accepted = 0
        for _ in range(cfg.steps_per_temperature):
            y = x.copy()
            b = rng.integers(n_blocks)
            y[b] += rng.normal(scale=width, size=y.shape[1])
            fy = objective(y)
            if fy <= fx or rng.random() < np.exp(-(fy - fx) / T):
                x, fx = y, fy
                accepted += 1
                if fx < best_f:
                    best_x, best_f = x.copy(), fx
        # keep the acceptance ratio in a workable band
        ratio = accepted / cfg.steps_per_temperature
        if ratio > 0.5:
            width = min(width * 1.5, np.pi)
        elif ratio < 0.2:
            width = max(width / 1.5, 1e-4)
        stale = stale + 1 if level_best - best_f < cfg.tolerance else 0
        if stale >= cfg.patience:
            break
        T *= cfg.cooling_factor
    return best_x, best_f


def global_discord(rho, config: AnnealConfig | None = None,
                   clock: ClockParams | None = None) -> DiscordResult:
    """Global quantum discord minimized by simulated annealing over local Gell-Mann rotations.

    Each restart draws its own generator from (seed, restart index), anneals with
    single-rotor Gaussian moves until the best value stalls for ``patience``
    temperature levels, and is optionally finished by a quasi-Newton polish.
    The lowest value over restarts is returned.
    """
    cfg = config or AnnealConfig()
    rho = np.asarray(rho)
    d, M = _shape(rho, clock)
    if d != 3:
        raise ValueError("global discord uses Gell-Mann generators and needs N_s = 3")
    objective = _Objective(rho, M)

    results = []
    for r in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, r])
        x0 = rng.uniform(-np.pi, np.pi, size=(M, 8))
        x, fx = _anneal_once(objective, x0, cfg, rng, M)
        if cfg.polish:
            opt = minimize(objective, x.ravel(), method="BFGS",
                           options={"gtol": 1e-8, "maxiter": 1000 * M})
            if opt.fun < fx:
                x, fx = opt.x.reshape(M, 8), float(opt.fun)
        results.append((fx, x))
    values = [v for v, _ in results]
    i = int(np.argmin(values))
    best, angles = results[i]
    close = sum(v - best <= 100 * cfg.tolerance for v in values)
    converged = close >= min(2, cfg.restarts)
    if not converged:
        log.warning("global discord: restarts disagree, best %.6g of %s", best, values)
    return DiscordResult(float(best), np.asarray(angles), values, converged, objective.calls)

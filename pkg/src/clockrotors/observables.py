"""Rotational currents and heat flows of a state of the rotor chain.

Orientation: J_{j -> j'} > 0 means probability flowing from local state j into j'.
Per-rotor currents are reported for j -> j+1, i.e. increasing clock index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .clockops import ClockParams, basis_digits, embed_local
from .lindblad import (
    BathConfig,
    Liouvillian,
    Transitions,
    build_liouvillian,
    enumerate_transitions,
    steady_state,
    unvec,
    vec,
)
from .model import CCMParams, HamiltonianSplit, build_hamiltonian


class CurrentIndependenceError(RuntimeError):
    """Per-rotor currents depend on the pair of clock states: the state is not stationary."""


class StationarityError(RuntimeError):
    pass


@dataclass(frozen=True)
class CurrentRecord:
    per_rotor_tun: tuple[float, ...]
    per_rotor_th: tuple[float, ...]

    @property
    def total_tun(self) -> float:
        return float(sum(self.per_rotor_tun))

    @property
    def total_th(self) -> float:
        return float(sum(self.per_rotor_th))


@dataclass(frozen=True)
class HeatRecord:
    qdot_d: tuple[float, ...]
    qdot_nd: tuple[float, ...]
    entropy_production: float

    @property
    def first_law_residual(self) -> float:
        return float(sum(self.qdot_d) + sum(self.qdot_nd))


def _expect(rho, op, imag_tol=1e-10) -> float:
    """tr(rho op); a 1-D ``rho`` is taken as a pure state vector."""
    if np.ndim(rho) == 1:
        val = np.vdot(rho, op @ rho)
    elif sp.issparse(op):
        val = (op.multiply(np.asarray(rho).T)).sum()
    else:
        val = np.sum(op * np.asarray(rho).T)
    if abs(val.imag) > imag_tol * max(1.0, abs(val.real)):
        raise ValueError(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def _check_pair(clock: ClockParams, site: int, j: int, jp: int) -> None:
    if j == jp:
        raise ValueError("current needs two distinct local states")
    if not (0 <= j < clock.N_s and 0 <= jp < clock.N_s):
        raise ValueError(f"local states must lie in [0, {clock.N_s - 1}]")
    if not 1 <= site <= clock.M:
        raise ValueError(f"site {site} outside [1, {clock.M}]")


def local_projector(clock: ClockParams, site: int, j: int) -> sp.csr_matrix:
    x = sp.csr_matrix(([1.0 + 0j], ([j], [j])), shape=(clock.N_s, clock.N_s))
    return embed_local(x, site, clock)


def tunneling_current_operator(H, clock: ClockParams, site: int, j: int, jp: int) -> sp.csr_matrix:
    """i (x_j H x_j' - x_j' H x_j) with x the projectors of rotor ``site``."""
    _check_pair(clock, site, j, jp)
    H = H.H if isinstance(H, HamiltonianSplit) else sp.csr_matrix(H)
    xj = local_projector(clock, site, j)
    xjp = local_projector(clock, site, jp)
    return (1j * (xj @ H @ xjp - xjp @ H @ xj)).tocsr()


def tunneling_current(rho, H, clock: ClockParams, site: int, j: int, jp: int) -> float:
    return _expect(rho, tunneling_current_operator(H, clock, site, j, jp))


def _thermal_diagonal(trans: Transitions, site: int, j: int, jp: int) -> np.ndarray:
    """Diagonal of (1/2) sum_l W_l ({x_j, L^dag x_j' L} - {x_j', L^dag x_j L}).

    For L = |a><b| one has L^dag x L = <a|x|a> |b><b|, so every term is diagonal
    and the anticommutators reduce to twice a product.
    """
    digits = basis_digits(trans.clock)[:, site - 1]
    d_src = digits[trans.source]
    d_tgt = digits[trans.target]
    weight = trans.rate * ((d_src == j) & (d_tgt == jp)).astype(float) \
        - trans.rate * ((d_src == jp) & (d_tgt == j)).astype(float)
    return np.bincount(trans.source, weights=weight, minlength=trans.dim)


def thermal_current_operator(trans: Transitions, site: int, j: int, jp: int,
                             restrict: bool = False) -> sp.csr_matrix:
    """Thermal current operator of rotor ``site``, summed over every jump in ``trans``.

    Jumps on other rotors leave the digit of ``site`` unchanged and so drop out;
    this is checked rather than assumed. ``restrict=True`` sums over the jumps of
    ``site`` only.
    """
    _check_pair(trans.clock, site, j, jp)
    full = _thermal_diagonal(trans, site, j, jp)
    own = _thermal_diagonal(trans.at_site(site), site, j, jp)
    if np.max(np.abs(full - own)) > 1e-12:
        raise AssertionError("jumps on other rotors contribute to the thermal current")
    return sp.diags((own if restrict else full).astype(complex), format="csr")


def thermal_current(rho, trans: Transitions, site: int, j: int, jp: int) -> float:
    return _expect(rho, thermal_current_operator(trans, site, j, jp))


def classical_current(p: np.ndarray, trans: Transitions, site: int, j: int, jp: int) -> float:
    """W_{j'j} p_j - W_{jj'} p_j' summed over the configurations of the other rotors."""
    digits = basis_digits(trans.clock)[:, site - 1]
    mine = trans.site == site
    src, tgt, W = trans.source[mine], trans.target[mine], trans.rate[mine]
    fwd = (digits[src] == j) & (digits[tgt] == jp)
    bwd = (digits[src] == jp) & (digits[tgt] == j)
    return float(np.sum(W[fwd] * p[src[fwd]]) - np.sum(W[bwd] * p[src[bwd]]))


def steady_currents(rho, H, trans: Transitions, tol: float = 1e-9) -> CurrentRecord:
    """Tunneling and thermal current of every rotor for 0 -> 1.

    In a stationary state every pair (k, k+1) carries the same current; the other
    pairs are evaluated and must agree within ``tol``.
    """
    clock = trans.clock
    tun, th = [], []
    for m in range(1, clock.M + 1):
        pairs = [(k, (k + 1) % clock.N_s) for k in range(clock.N_s)]
        t_vals = [tunneling_current(rho, H, clock, m, a, b) for a, b in pairs]
        h_vals = [thermal_current(rho, trans, m, a, b) for a, b in pairs]
        for name, vals in (("tunneling", t_vals), ("thermal", h_vals)):
            if max(vals) - min(vals) > tol:
                raise CurrentIndependenceError(
                    f"{name} current of rotor {m} depends on the state pair: {vals}"
                )
        tun.append(t_vals[0])
        th.append(h_vals[0])
    return CurrentRecord(tuple(tun), tuple(th))


def dual_dissipator(trans: Transitions, X) -> sp.csr_matrix:
    """D*[X] = sum_l W_l (L^dag X L - {L^dag L, X}/2) for L_l = |target><source|."""
    D = trans.dim
    X = sp.csr_matrix(X)
    xdiag = X.diagonal()
    gain = np.bincount(trans.source, weights=trans.rate * xdiag[trans.target].real, minlength=D) \
        + 1j * np.bincount(trans.source, weights=trans.rate * xdiag[trans.target].imag, minlength=D)
    escape = sp.diags(np.bincount(trans.source, weights=trans.rate, minlength=D), format="csr")
    return (sp.diags(gain, format="csr") - 0.5 * (escape @ X + X @ escape)).tocsr()


def heat_currents(rho, H: HamiltonianSplit, trans: Transitions, baths: BathConfig,
                  first_law_tol: float | None = 1e-9) -> HeatRecord:
    """Diagonal and off-diagonal heat currents per bath, positive into the system.

    The entropy production uses stationarity (dS/dt = 0); a first-law residual
    above ``first_law_tol`` means rho is not a steady state and raises.
    """
    M = trans.clock.M
    qd, qnd = [], []
    for m in range(1, M + 1):
        tm = trans.at_site(m)
        qd.append(_expect(rho, dual_dissipator(tm, H.H_D)))
        qnd.append(_expect(rho, dual_dissipator(tm, H.H_ND)))
    rec = HeatRecord(tuple(qd), tuple(qnd),
                     float(-sum(b * q for b, q in zip(baths.beta, qd))))
    if first_law_tol is not None and abs(rec.first_law_residual) > first_law_tol:
        raise StationarityError(f"first-law residual {rec.first_law_residual:.3e}")
    return rec


def heat_currents_superop(rho, H: HamiltonianSplit, L: Liouvillian, baths: BathConfig) -> HeatRecord:
    """Same quantities through tr(X D_m[rho]) with the assembled per-site dissipators."""
    qd, qnd = [], []
    for m, Dm in sorted(L.dissipators.items()):
        drho = unvec(Dm @ vec(rho), L.dim)
        qd.append(_expect(drho, H.H_D))
        qnd.append(_expect(drho, H.H_ND))
    return HeatRecord(tuple(qd), tuple(qnd),
                      float(-sum(b * q for b, q in zip(baths.beta, qd))))


def mean_square_current(rho, current_operator) -> float:
    """<J^2> for a current operator."""
    J = sp.csr_matrix(current_operator)
    return _expect(rho, J @ J)


@dataclass(frozen=True)
class NessSolution:
    params: CCMParams
    baths: BathConfig
    H: HamiltonianSplit
    transitions: Transitions
    liouvillian: Liouvillian
    rho: np.ndarray
    residual: float


def solve_ness(params: CCMParams, baths: BathConfig, method: str = "auto") -> NessSolution:
    """Model -> transitions -> Liouvillian -> steady state."""
    H = build_hamiltonian(params)
    trans = enumerate_transitions(H, baths)
    L = build_liouvillian(H, trans)
    rho = steady_state(L, method=method)
    res = float(np.linalg.norm(L.matrix @ vec(rho), np.inf))
    return NessSolution(params, baths, H, trans, L, rho, res)


def current_susceptibility(params: CCMParams, baths: BathConfig, delta_t: float = 1e-3,
                           partition=None, method: str = "auto") -> tuple[float, float]:
    """Forward differences of the total thermal current and of I(A:B) in Delta T.

    beta_e is read from the even sites of ``baths``; the reference point has both
    sub-lattices at T_e = 1/beta_e, the shifted point has beta_o = 1/(T_e + delta_t).
    """
    from .infotheory import Partition, mutual_information

    if delta_t == 0:
        raise ValueError("delta_t must be non-zero")
    M = params.clock.M
    beta_e = baths.beta[1]
    T_e = 1.0 / beta_e
    partition = partition or Partition.half_chain(M)
    values = []
    for dt in (0.0, delta_t):
        b = BathConfig.staggered(M, beta_e, 1.0 / (T_e + dt), baths.g)
        sol = solve_ness(params, b, method=method)
        cur = steady_currents(sol.rho, sol.H, sol.transitions)
        values.append((cur.total_th, mutual_information(sol.rho, partition, params.clock)))
    (j0, i0), (j1, i1) = values
    return (j1 - j0) / delta_t, (i1 - i0) / delta_t

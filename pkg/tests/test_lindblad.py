import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import assume, given
from hypothesis import strategies as st

import oracles
from clockrotors.clockops import basis_digits
from clockrotors.lindblad import (
    BathConfig,
    DegenerateSteadyState,
    Liouvillian,
    SteadyStateError,
    build_liouvillian,
    check_density_matrix,
    commutator_superop,
    enumerate_transitions,
    propagate,
    rate,
    rates,
    steady_state,
    trace_distance,
    unvec,
    vec,
)
from clockrotors.model import CCMParams, build_hamiltonian, diagonal_energies

FIG2_BATHS = dict(beta_e=1.0, beta_o=1.1, g=0.2)


def system(M=2, f=0.37, phi=np.pi / 2, beta_e=1.0, beta_o=1.1, g=0.2):
    H = build_hamiltonian(CCMParams.staggered(M, f, phi))
    trans = enumerate_transitions(H, BathConfig.staggered(M, beta_e, beta_o, g))
    return H, trans, build_liouvillian(H, trans)


# ---------------------------------------------------------------- rates


def test_rate_zero_gap_limit():
    assert rate(0.0, 1.0, 0.2) == pytest.approx(0.2)
    assert rate(0.0, 2.5, 0.2) == pytest.approx(0.08)
    assert rate(1e-14, 1.0, 0.2) == pytest.approx(0.2, rel=1e-12)


def test_rate_downhill_value():
    # 0.2 / (1 - e^-1), from direct evaluation of the bosonic rate
    assert rate(1.0, 1.0, 0.2) == pytest.approx(0.3163953413738653, rel=1e-14)
    assert rate(1.0, 1.0, 0.2) / rate(-1.0, 1.0, 0.2) == pytest.approx(np.e, rel=1e-14)


def test_rate_detailed_balance_example():
    assert rate(2.0, 1.0, 0.2) / rate(-2.0, 1.0, 0.2) == pytest.approx(np.exp(2.0), rel=1e-14)


def test_rate_zero_temperature_limit():
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert rate(1.5, np.inf, 0.2) == pytest.approx(0.3)
        assert rate(-1.5, np.inf, 0.2) == 0.0
        assert rate(0.0, np.inf, 0.2) == 0.0
        assert rate(-3.0, 1e4, 0.2) == 0.0
        np.testing.assert_array_equal(rates(np.array([1.5, -1.5, 0.0]), np.inf, 0.2),
                                      [0.2 * 1.5, 0.0, 0.0])


def test_rate_rejects_bad_inputs():
    with pytest.raises(ValueError):
        rate(1.0, 0.0, 0.2)
    with pytest.raises(ValueError):
        rate(1.0, 1.0, -0.2)
    with pytest.raises(ValueError):
        BathConfig((1.0, -1.0))
    with pytest.raises(ValueError):
        BathConfig((1.0, 1.0), g=0.0)


@given(st.floats(-50, 50), st.floats(0.05, 20), st.floats(0.01, 5))
def test_rate_detailed_balance(de, beta, g):
    # beyond beta |de| ~ 700 the uphill rate is below the smallest double
    assume(beta * abs(de) < 700)
    up, down = rate(de, beta, g), rate(-de, beta, g)
    assert up > 0 and down > 0
    assert np.log(up) - np.log(down) == pytest.approx(beta * de, abs=1e-9)


def test_rate_large_gap_underflows_without_overflow():
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert rate(-36.0, 20.0, 1.0) == pytest.approx(36.0 * np.exp(-720.0), rel=1e-9)
        assert rate(-50.0, 20.0, 1.0) == 0.0
        assert rates(np.array([-50.0]), 20.0, 1.0)[0] == 0.0


@given(st.lists(st.floats(-30, 30), min_size=1, max_size=20), st.floats(0.1, 5))
def test_rates_vectorized(des, beta):
    np.testing.assert_allclose(rates(des, beta, 0.3), [rate(d, beta, 0.3) for d in des],
                               rtol=1e-14)


def test_staggered_baths():
    assert BathConfig.staggered(4, 1.0, 1.1).beta == (1.1, 1.0, 1.1, 1.0)


# ---------------------------------------------------------------- transitions


@pytest.mark.parametrize("M,count", [(2, 36), (3, 162), (4, 648)])
def test_transition_count(M, count):
    _, trans, _ = system(M)
    assert len(trans) == count


def test_transitions_single_digit_and_detailed_balance():
    H, trans, _ = system(3, f=0.2)
    digits = basis_digits(H.params.clock)
    E = diagonal_energies(H)
    beta = BathConfig.staggered(3, 1.0, 1.1).beta
    pairs = {(b, a): (m, W) for m, b, a, W in trans}
    for (b, a), (m, W) in pairs.items():
        diff = np.flatnonzero(digits[a] != digits[b])
        assert list(diff) == [m - 1]
        assert (digits[a][m - 1] - digits[b][m - 1]) % 3 in (1, 2)
        m2, W2 = pairs[(a, b)]
        assert m2 == m
        assert W / W2 == pytest.approx(np.exp(beta[m - 1] * (E[b] - E[a])), rel=1e-12)


def test_transitions_match_oracle_jumps():
    H, trans, _ = system(3, f=0.6)
    ref = oracles.jumps(H.H_D.toarray(), 3, BathConfig.staggered(3, 1.0, 1.1).beta, 0.2)
    got = sorted((m, b, a) for m, b, a, _ in trans)
    assert got == sorted((m, b, a) for m, b, a, _ in ref)
    W = {(m, b, a): w for m, b, a, w in trans}
    for m, b, a, w in ref:
        assert W[(m, b, a)] == pytest.approx(w, rel=1e-9)


def test_bath_size_mismatch():
    H = build_hamiltonian(CCMParams.staggered(3, 0.5, 0.0))
    with pytest.raises(ValueError):
        enumerate_transitions(H, BathConfig.staggered(4, 1.0, 1.0))


# ---------------------------------------------------------------- Liouvillian


def test_vec_convention():
    rng = np.random.default_rng(1)
    A, B, X = (rng.normal(size=(4, 4)) for _ in range(3))
    np.testing.assert_allclose(np.kron(B.T, A) @ vec(X), vec(A @ X @ B))
    np.testing.assert_array_equal(unvec(vec(X), 4), X)


@pytest.mark.parametrize("M", [2, 3, 4])
def test_trace_preservation(M):
    _, _, L = system(M)
    ones = vec(np.eye(L.dim))
    assert np.abs(L.matrix.conj().T @ ones).max() < 1e-10


@pytest.mark.parametrize("M,f", [(2, 0.37), (2, 1.0), (3, 0.0), (3, 0.62)])
def test_liouvillian_matches_dense_oracle(M, f):
    H, trans, L = system(M, f=f)
    Hd, HD, _ = oracles.dense_hamiltonian(M, f, H.params.phases)
    ref = oracles.dense_liouvillian(Hd, oracles.jumps(HD, M, BathConfig.staggered(
        M, 1.0, 1.1).beta, 0.2))
    np.testing.assert_allclose(L.matrix.toarray(), ref, atol=1e-12)


def test_dissipators_sum_to_generator():
    H, _, L = system(3)
    total = commutator_superop(H.H) + sum(L.dissipators.values())
    assert abs(total - L.matrix).max() < 1e-14


def test_commutator_spectrum():
    H = build_hamiltonian(CCMParams.staggered(2, 0.4, 0.9))
    E = np.linalg.eigvalsh(H.H.toarray())
    ev = np.linalg.eigvals(commutator_superop(H.H).toarray())
    ref = (-1j * (E[:, None] - E[None, :])).ravel()
    np.testing.assert_allclose(np.sort_complex(np.round(ev, 9)),
                               np.sort_complex(np.round(ref, 9)), atol=1e-8)


def test_classical_block_at_f_zero():
    H, trans, L = system(3, f=0.0)
    D = L.dim
    diag = np.arange(D) * (D + 1)
    block = L.matrix[diag][:, diag].toarray()
    Q = np.zeros((D, D))
    for _, b, a, W in oracles.jumps(H.H_D.toarray(), 3, BathConfig.staggered(
            3, 1.0, 1.1).beta, 0.2):
        Q[a, b] += W
        Q[b, b] -= W
    np.testing.assert_allclose(block.real, Q, atol=1e-13)
    assert np.abs(block.imag).max() == 0


def test_dimension_mismatch():
    H, _, _ = system(2)
    _, trans3, _ = system(3)
    with pytest.raises(ValueError):
        build_liouvillian(H, trans3)


@pytest.mark.parametrize("M", [2, 3])
def test_unique_steady_state_spectrum(M):
    _, _, L = system(M)
    ev = np.sort(np.abs(np.linalg.eigvals(L.matrix.toarray())))
    assert ev[0] < 1e-10
    assert ev[1] > 1e-8


# ---------------------------------------------------------------- steady state


@pytest.mark.parametrize("M", [2, 3])
def test_steady_state_matches_null_space_oracle(M):
    H, trans, L = system(M)
    Hd, HD, _ = oracles.dense_hamiltonian(M, 0.37, H.params.phases)
    ref = oracles.dense_steady_state(oracles.dense_liouvillian(
        Hd, oracles.jumps(HD, M, BathConfig.staggered(M, 1.0, 1.1).beta, 0.2)))
    np.testing.assert_allclose(steady_state(L), ref, atol=1e-12)


@pytest.mark.parametrize("method", ["dense", "sparse", "lyapunov", "iterative"])
def test_solver_paths_agree(method):
    _, _, L = system(3, f=0.45)
    rho = steady_state(L, method=method, residual_tol=1e-9 if method == "iterative" else 1e-10)
    ref = steady_state(L, method="dense")
    assert np.abs(rho - ref).max() < 1e-9
    check_density_matrix(rho)


def test_schur_fallback_agrees():
    from clockrotors.lindblad import _steady_lyapunov

    _, _, L = system(3, f=0.45)
    a = _steady_lyapunov(L, 1e-10)
    b = _steady_lyapunov(L, 1e-10, use_schur=True)
    assert np.abs(a - b).max() < 1e-12


def test_unknown_method():
    _, _, L = system(2)
    with pytest.raises(ValueError):
        steady_state(L, method="magic")


def test_degenerate_null_space_reported():
    H = build_hamiltonian(CCMParams.staggered(2, 0.4, 0.3))
    L = Liouvillian(commutator_superop(H.H), {}, 9, H.H, None)
    with pytest.raises(DegenerateSteadyState):
        steady_state(L, method="dense")


def test_gibbs_at_equal_temperatures():
    beta = 0.8
    H, trans, L = system(2, f=0.0, phi=0.0, beta_e=beta, beta_o=beta)
    rho = steady_state(L)
    E = diagonal_energies(H)
    gibbs = np.exp(-beta * E) / np.exp(-beta * E).sum()
    np.testing.assert_allclose(np.diag(rho).real, gibbs, atol=1e-13)
    np.testing.assert_allclose(rho, np.diag(np.diag(rho)), atol=1e-13)
    assert np.abs(rho @ H.H_D - H.H_D @ rho).max() < 1e-13


@pytest.mark.parametrize("f", [0.0, 0.3])
def test_steady_state_properties(f):
    _, _, L = system(4, f=f)
    rho = steady_state(L)
    check_density_matrix(rho)
    assert np.linalg.norm(L.matrix @ vec(rho), np.inf) <= 1e-10 * L.norm()


def test_classical_stationarity_at_f_zero():
    H, trans, L = system(4, f=0.0)
    rho = steady_state(L)
    p = np.diag(rho).real
    ref = oracles.classical_steady_state(81, list(trans))
    np.testing.assert_allclose(p, ref, atol=1e-12)


def test_density_matrix_checks():
    with pytest.raises(ValueError):
        check_density_matrix(np.diag([0.5, 0.6]))
    with pytest.raises(ValueError):
        check_density_matrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError):
        check_density_matrix(np.array([[0.5, 0.1], [0.2, 0.5]]))


# ---------------------------------------------------------------- propagation


def test_propagate_zero_generator():
    rho0 = np.diag([0.2, 0.3, 0.5]).astype(complex)
    L = Liouvillian(sp.csr_matrix((9, 9), dtype=complex), {}, 3)
    np.testing.assert_array_equal(propagate(rho0, L, 5.0), rho0)


def test_propagate_eigenprojector_stationary():
    H = build_hamiltonian(CCMParams.staggered(2, 0.4, 0.3))
    _, V = np.linalg.eigh(H.H.toarray())
    rho0 = np.outer(V[:, 0], V[:, 0].conj())
    L = Liouvillian(commutator_superop(H.H), {}, 9, H.H, None)
    assert np.abs(propagate(rho0, L, 10.0) - rho0).max() < 1e-10


def test_propagate_preserves_trace_and_hermiticity(rng):
    _, _, L = system(2)
    rho0 = oracles.random_density_matrix(9, rng)
    rho = propagate(rho0, L, 3.0)
    assert np.trace(rho) == pytest.approx(1.0, abs=1e-10)
    assert np.abs(rho - rho.conj().T).max() < 1e-10


def test_propagate_negative_time():
    _, _, L = system(2)
    with pytest.raises(ValueError):
        propagate(np.eye(9) / 9, L, -1.0)


def test_propagate_detects_instability():
    _, _, L = system(2)
    with pytest.raises(SteadyStateError):
        propagate(np.eye(9) / 9, L, 50.0, dt=5.0)


def test_propagation_reaches_steady_state(rng):
    _, _, L = system(2)
    rho0 = oracles.random_density_matrix(9, rng)
    rho_t = propagate(rho0, L, 200 / 0.2)
    assert trace_distance(rho_t, steady_state(L)) < 1e-6

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import unitary_group

import oracles
from clockrotors.infotheory import (
    AnnealConfig,
    Partition,
    _Objective,
    dephase,
    discord_objective,
    entropy_from_eigenvalues,
    gellmann_generators,
    global_discord,
    global_rotation,
    l1_coherence,
    local_rotation,
    mutual_information,
    negativity,
    partial_trace,
    partial_transpose,
    von_neumann_entropy,
)
from clockrotors.lindblad import BathConfig
from clockrotors.observables import solve_ness

PHI = np.ones(9) / 3  # maximally entangled two-qutrit state
PHI[[1, 2, 3, 5, 6, 7]] = 0
PHI = PHI * np.sqrt(3)
FAST = AnnealConfig(restarts=3, steps_per_temperature=60)


def rand_state(seed, d=9):
    return oracles.random_density_matrix(d, np.random.default_rng(seed))


seeds = st.integers(0, 2 ** 32 - 1)


def test_partition():
    p = Partition.half_chain(4)
    assert p.subset_a == {1, 2} and p.subset_b == {3, 4}
    for bad in ([], [1, 2, 3, 4], [0], [5]):
        with pytest.raises(ValueError):
            Partition(frozenset(bad), 4)


def test_partial_trace_product(rng):
    a, b = oracles.random_density_matrix(3, rng), oracles.random_density_matrix(9, rng)
    rho = np.kron(a, b)
    np.testing.assert_allclose(partial_trace(rho, {1}), a, atol=1e-14)
    np.testing.assert_allclose(partial_trace(rho, {2, 3}), b, atol=1e-14)


def test_partial_trace_maximally_entangled():
    rho = np.outer(PHI, PHI)
    np.testing.assert_allclose(partial_trace(rho, {1}), np.eye(3) / 3, atol=1e-15)
    np.testing.assert_allclose(partial_trace(rho, {2}), np.eye(3) / 3, atol=1e-15)


@given(seeds)
def test_partial_trace_composition(seed):
    rho = rand_state(seed, 27)
    step = partial_trace(partial_trace(rho, {1, 2}), {1})
    np.testing.assert_allclose(step, partial_trace(rho, {1}), atol=1e-14)
    assert np.trace(partial_trace(rho, {2})) == pytest.approx(1.0)


def test_partial_trace_matches_index_loops(rng):
    rho = oracles.random_density_matrix(27, rng)
    for site in (1, 2, 3):
        np.testing.assert_allclose(partial_trace(rho, {site}), oracles.reduced(rho, site, 3),
                                   atol=1e-14)


def test_partial_trace_bad_input():
    with pytest.raises(ValueError):
        partial_trace(np.eye(9) / 9, set())
    with pytest.raises(ValueError):
        partial_trace(np.eye(9) / 9, {3})
    with pytest.raises(ValueError):
        partial_trace(np.eye(8) / 8, {1})


def test_entropy_examples():
    assert von_neumann_entropy(np.outer(PHI, PHI)) == pytest.approx(0.0, abs=1e-12)
    assert von_neumann_entropy(np.eye(9) / 9) == pytest.approx(np.log(9))
    assert entropy_from_eigenvalues(np.array([0.75, 0.25])) == pytest.approx(
        0.5623351446188083, rel=1e-14)
    assert entropy_from_eigenvalues(np.array([1.0, -1e-15])) == 0.0


@given(seeds, seeds)
def test_entropy_unitary_invariance(s1, s2):
    rho = rand_state(s1)
    U = unitary_group.rvs(9, random_state=s2 % (2 ** 32))
    assert von_neumann_entropy(U @ rho @ U.conj().T) == pytest.approx(
        von_neumann_entropy(rho), abs=1e-10)


def test_negativity_examples(rng):
    prod = np.kron(oracles.random_density_matrix(3, rng), oracles.random_density_matrix(3, rng))
    assert negativity(prod, Partition(frozenset({1}), 2)) < 1e-14
    assert negativity(np.outer(PHI, PHI), Partition(frozenset({1}), 2)) == pytest.approx(1.0)


def test_partial_transpose_elementwise(rng):
    rho = oracles.random_density_matrix(9, rng)
    pt = partial_transpose(rho, {1})
    r = rho.reshape(3, 3, 3, 3)
    np.testing.assert_allclose(pt, r.transpose(2, 1, 0, 3).reshape(9, 9))


def test_mutual_information_examples(rng):
    prod = np.kron(oracles.random_density_matrix(3, rng), oracles.random_density_matrix(3, rng))
    part = Partition(frozenset({1}), 2)
    assert mutual_information(prod, part) == pytest.approx(0.0, abs=1e-12)
    assert mutual_information(np.outer(PHI, PHI), part) == pytest.approx(2 * np.log(3))


@given(seeds)
def test_mutual_information_bounds(seed):
    rho = rand_state(seed, 27)
    part = Partition(frozenset({2}), 3)
    I = mutual_information(rho, part)
    sa = von_neumann_entropy(partial_trace(rho, {2}))
    sb = von_neumann_entropy(partial_trace(rho, {1, 3}))
    assert -1e-12 <= I <= 2 * min(sa, sb) + 1e-12


def test_l1_coherence_examples():
    assert l1_coherence(np.diag([0.2, 0.3, 0.5])) == 0.0
    psi = np.ones(9) / 3
    assert l1_coherence(np.outer(psi, psi)) == pytest.approx(8.0)


def test_gellmann_generators():
    g = gellmann_generators()
    for a in range(8):
        assert np.allclose(g[a], g[a].conj().T)
        assert abs(np.trace(g[a])) < 1e-15
        for b in range(8):
            assert np.trace(g[a] @ g[b]) == pytest.approx(2.0 * (a == b), abs=1e-14)


@given(st.lists(st.floats(-10, 10), min_size=8, max_size=8))
def test_local_rotation_unitary(theta):
    U = local_rotation(theta)
    np.testing.assert_allclose(U @ U.conj().T, np.eye(3), atol=1e-12)


def test_dephase_zero_angles(rng):
    rho = oracles.random_density_matrix(9, rng)
    zero = np.zeros((2, 8))
    np.testing.assert_allclose(dephase(rho, zero), np.diag(np.diag(rho)), atol=1e-15)
    d = np.diag(rng.dirichlet(np.ones(9))).astype(complex)
    np.testing.assert_allclose(dephase(d, zero), d, atol=1e-15)
    with pytest.raises(ValueError):
        dephase(rho, np.zeros((3, 8)))


@given(seeds)
def test_dephase_is_a_projection(seed):
    rng = np.random.default_rng(seed)
    rho = oracles.random_density_matrix(9, rng)
    x = rng.uniform(-np.pi, np.pi, size=(2, 8))
    once = dephase(rho, x)
    np.testing.assert_allclose(dephase(once, x), once, atol=1e-12)
    assert np.trace(once) == pytest.approx(1.0)
    ref = oracles.dephased(rho, global_rotation(x))
    np.testing.assert_allclose(once, ref, atol=1e-12)


@given(seeds)
def test_objective_paths_agree(seed):
    rng = np.random.default_rng(seed)
    for M in (2, 3):
        rho = oracles.random_density_matrix(3 ** M, rng)
        x = rng.uniform(-np.pi, np.pi, size=(M, 8))
        assert _Objective(rho, M)(x) == pytest.approx(discord_objective(rho, x), abs=1e-12)


@given(seeds)
def test_objective_is_relative_entropy_difference(seed):
    rng = np.random.default_rng(seed)
    rho = oracles.random_density_matrix(9, rng)
    x = rng.uniform(-np.pi, np.pi, size=(2, 8))
    ref = oracles.discord_relative_entropy(rho, local_rotation(x[0]), local_rotation(x[1]))
    assert discord_objective(rho, x) == pytest.approx(ref, abs=1e-10)


def test_discord_of_classical_product_state(rng):
    rho = np.kron(np.diag(rng.dirichlet(np.ones(3))), np.diag(rng.dirichlet(np.ones(3))))
    assert abs(global_discord(rho, FAST).value) < 1e-6


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_discord_of_pure_state_is_entanglement_entropy(seed):
    psi = oracles.random_pure_state(9, np.random.default_rng(seed))
    res = global_discord(np.outer(psi, psi.conj()), FAST)
    assert res.value == pytest.approx(oracles.entanglement_entropy(psi), abs=1e-6)


@pytest.mark.parametrize("seed", [11, 12])
def test_discord_matches_grid_oracle(seed):
    rho = rand_state(seed)
    assert global_discord(rho).value == pytest.approx(oracles.discord_grid_oracle(rho),
                                                      abs=1e-3)


@given(seeds)
def test_discord_nonnegative(seed):
    res = global_discord(rand_state(seed), AnnealConfig(restarts=1, steps_per_temperature=20))
    assert res.value >= -1e-12


def test_discord_reproducible():
    rho = rand_state(5)
    a, b = global_discord(rho, FAST), global_discord(rho, FAST)
    assert a.value == b.value
    np.testing.assert_array_equal(a.angles, b.angles)
    assert discord_objective(rho, a.angles) == discord_objective(rho, b.angles)
    assert len(a.restart_values) == 3


def test_discord_needs_qutrits():
    with pytest.raises(ValueError):
        global_discord(np.eye(4) / 4)


def test_anneal_config_validation():
    for bad in (dict(initial_temperature=0), dict(cooling_factor=1.0), dict(restarts=0),
                dict(proposal_width=-1), dict(tolerance=0)):
        with pytest.raises(ValueError):
            AnnealConfig(**bad)


# ---------------------------------------------------------------- NESS measures


@pytest.fixture(scope="module")
def ness_measures():
    f = np.linspace(0, 1, 26)
    part = Partition.half_chain(4)
    rows = []
    for x in f:
        rho = solve_ness(_params(x, np.pi / 2), BathConfig.staggered(4, 1.0, 1.1)).rho
        rows.append((von_neumann_entropy(partial_trace(rho, part.subset_a)),
                     mutual_information(rho, part), l1_coherence(rho)))
    return f, np.array(rows)


def _params(f, phi):
    from clockrotors.model import CCMParams

    return CCMParams.staggered(4, f, phi)


def test_coherence_peak(ness_measures):
    f, rows = ness_measures
    assert abs(f[np.argmax(rows[:, 2])] - 0.46) <= 0.03
    assert rows[0, 2] < 1e-12


def test_entropy_and_information_smooth_with_inflection(ness_measures):
    f, rows = ness_measures
    for col in (0, 1):
        y = rows[:, col]
        assert np.max(np.abs(np.diff(y))) < 0.2
        d2 = np.diff(y, 2)
        flips = [f[i + 1] for i in range(len(d2) - 1) if d2[i] * d2[i + 1] < 0]
        assert any(0.25 <= x <= 0.55 for x in flips)


def test_measures_are_phase_periodic():
    part = Partition.half_chain(4)
    b = BathConfig.staggered(4, 1.0, 1.1)
    r1 = solve_ness(_params(0.45, 0.4), b).rho
    r2 = solve_ness(_params(0.45, 0.4 + 2 * np.pi / 3), b).rho
    for fn in (lambda r: von_neumann_entropy(partial_trace(r, part.subset_a)),
               lambda r: mutual_information(r, part), l1_coherence,
               lambda r: negativity(r, part)):
        assert fn(r1) == pytest.approx(fn(r2), abs=1e-9)

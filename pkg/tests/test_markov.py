import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trustdyn.game import GameParams, PopulationState, Strategy, average_payoff, enumerate_states
from trustdyn.markov import (
    MOVES,
    ConvergenceError,
    NonUniqueStationaryError,
    build_chain,
    dense_stationary,
    drift_u,
    fermi,
    gradient_field,
    pair_transition,
    residual,
    state_index,
    state_out_transitions,
    stationary,
    summaries,
)

from oracles import eig_stationary

CI, T, U = Strategy.CI, Strategy.T, Strategy.U


# --- Fermi rule ---------------------------------------------------------------


@pytest.mark.parametrize("beta", [0.0, 0.1, 5.0, 1e3])
def test_fermi_symmetric_point(beta):
    assert fermi(0.0, beta) == 0.5


@pytest.mark.parametrize("delta", [-100.0, -1.0, 3.0, 1e6])
def test_fermi_neutral_selection(delta):
    assert fermi(delta, 0.0) == 0.5


def test_fermi_value():
    assert fermi(1.0, 5.0) == pytest.approx(1 / (1 + math.exp(-5)), rel=1e-15)
    assert fermi(1.0, 5.0) == pytest.approx(0.993307, abs=1e-6)


def test_fermi_saturates_without_overflow():
    with np.errstate(all="raise"):
        assert fermi(1e4, 1.0) == 1.0
        assert fermi(-1e4, 1.0) == 0.0
        assert np.all(np.isfinite(fermi(np.array([-1e4, 0.0, 1e4]), 1.0)))


def test_fermi_rejects_negative_beta():
    with pytest.raises(ValueError):
        fermi(1.0, -1.0)


# --- pairwise transitions -----------------------------------------------------------


def test_full_mutation_ignores_payoffs():
    p = GameParams(Z=20, mu=1.0)
    state = PopulationState(7, 5)
    assert pair_transition(CI, T, state, p) == pytest.approx(7 / 40, abs=1e-15)
    assert pair_transition(U, CI, state, p) == pytest.approx(8 / 40, abs=1e-15)


def test_no_source_agents_no_transition():
    p = GameParams(Z=20)
    assert pair_transition(CI, T, PopulationState(0, 10), p) == 0.0


def test_neutral_no_mutation():
    p = GameParams(Z=20, mu=0.0, beta=0.0)
    state = PopulationState(7, 5)
    assert pair_transition(CI, U, state, p) == pytest.approx(7 * 8 / (2 * 20 * 19), abs=1e-15)


def test_pair_transition_formula():
    p = GameParams(Z=20)
    state = PopulationState(10, 5)
    f_t, f_u = average_payoff(T, state, p), average_payoff(U, state, p)
    expected = (1 - p.mu) * (5 / 20) * (5 / 19) / (1 + math.exp(-p.beta * (f_u - f_t))) + p.mu * 5 / 40
    assert pair_transition(T, U, state, p) == pytest.approx(expected, rel=1e-14)


def test_pair_transition_rejects_same_strategy():
    with pytest.raises(ValueError):
        pair_transition(CI, CI, PopulationState(1, 1), GameParams(Z=10))


def test_all_ci_state_only_mutates_out():
    p = GameParams(Z=20)
    tr = state_out_transitions(PopulationState(20, 0), p)
    assert tr.CI_T == tr.CI_U == pytest.approx(p.mu / 2, abs=1e-15)
    assert tr.U_CI == tr.T_CI == tr.U_T == tr.T_U == 0.0
    assert tr.stay == pytest.approx(1 - p.mu, abs=1e-15)


@pytest.mark.parametrize("state", [PopulationState(10, 0), PopulationState(0, 10), PopulationState(0, 0)])
def test_monomorphic_absorbing_without_mutation(state):
    tr = state_out_transitions(state, GameParams(Z=10, mu=0.0))
    assert tr.stay == 1.0
    assert sum(tr.moves) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 30), st.data(), st.floats(0, 1), st.floats(0, 20))
def test_transition_bounds(Z, data, mu, beta):
    i_ci = data.draw(st.integers(0, Z))
    i_t = data.draw(st.integers(0, Z - i_ci))
    tr = state_out_transitions(PopulationState(i_ci, i_t), GameParams(Z=Z, mu=mu, beta=beta))
    assert all(x >= 0 for x in tr.moves)
    assert sum(tr.moves) <= 1 + 1e-15
    assert tr.stay >= -1e-15


# --- chain -------------------------------------------------------------------------


def test_state_counts():
    assert build_chain(GameParams(Z=2, N=2, M=1)).n_states == 6
    assert build_chain(GameParams(Z=100)).n_states == 5151


def test_state_index_is_enumeration_order():
    Z = 13
    for k, s in enumerate(enumerate_states(Z)):
        assert state_index(s.i_CI, s.i_T, Z) == k


def test_rejects_small_population():
    with pytest.raises(ValueError):
        build_chain(GameParams(Z=4, N=4).with_(Z=3))


@pytest.mark.parametrize("params", [GameParams(Z=20), GameParams(Z=20, M=0), GameParams(Z=20, M=4, mu=0.3),
                                    GameParams(Z=15, N=6, M=3, beta=50.0), GameParams(Z=100)])
def test_rows_stochastic_and_sparse(params):
    chain = build_chain(params)
    P = chain.matrix
    assert np.abs(np.asarray(P.sum(axis=1)).ravel() - 1).max() <= 1e-12
    assert P.data.min() >= 0 and P.data.max() <= 1
    nnz = np.diff(P.indptr)
    assert nnz.max() <= 7
    Z = params.Z
    coo = P.tocoo()
    src, dst = chain.states[coo.row], chain.states[coo.col]
    step = dst - src
    allowed = {(0, 0)} | {(dc, dt) for _, _, dc, dt in MOVES}
    assert {tuple(d) for d in step} <= allowed
    assert (dst.sum(axis=1) <= Z).all()


def test_matrix_entries_match_scalar_transitions():
    p = GameParams(Z=9, M=1, sigma=0.5)
    chain = build_chain(p)
    P = chain.matrix.toarray()
    for state in enumerate_states(p.Z):
        i = chain.index_of(state)
        tr = state_out_transitions(state, p)
        for prob, (_, _, dc, dt) in zip(tr.moves, MOVES):
            dest = PopulationState(state.i_CI + dc, state.i_T + dt)
            if prob > 0:
                assert P[i, chain.index_of(dest)] == pytest.approx(prob, rel=1e-12, abs=1e-15)
        assert P[i, i] == pytest.approx(tr.stay, abs=1e-14)


# --- stationary distribution ----------------------------------------------------------


@pytest.mark.parametrize("Z", [8, 12, 20])
@pytest.mark.parametrize("M", [0, 2, 4])
def test_power_iteration_matches_dense(Z, M):
    chain = build_chain(GameParams(Z=Z, M=M))
    res = stationary(chain, method="power")
    dense = dense_stationary(chain)
    assert np.abs(res.distribution - dense).max() <= 1e-10
    assert residual(chain, res.distribution) <= 1e-10
    assert res.iterations > 0


@pytest.mark.parametrize("Z", [8, 20, 40])
def test_direct_matches_eigenvector(Z):
    chain = build_chain(GameParams(Z=Z))
    res = stationary(chain)
    ref = eig_stationary(chain.matrix.toarray())
    assert np.abs(res.distribution - ref).max() <= 1e-10
    assert res.residual <= 1e-14


def test_uniqueness_from_random_starts():
    chain = build_chain(GameParams(Z=12))
    rng = np.random.default_rng(7)
    results = [stationary(chain, method="power", x0=rng.random(chain.n_states)).distribution for _ in range(10)]
    for r in results[1:]:
        assert np.abs(r - results[0]).max() <= 1e-8


def test_full_mutation_is_uniform_in_strategy():
    res = stationary(build_chain(GameParams(mu=1.0)))
    assert res.rho == pytest.approx((1 / 3, 1 / 3, 1 / 3), abs=1e-10)


def test_probability_vector():
    res = stationary(build_chain(GameParams(Z=30, M=1)))
    assert res.distribution.min() >= 0
    assert abs(res.distribution.sum() - 1) <= 1e-12
    assert abs(sum(res.rho) - 1) <= 1e-12


def test_zero_mutation_refused():
    chain = build_chain(GameParams(Z=10, mu=0.0))
    with pytest.raises(NonUniqueStationaryError):
        stationary(chain)
    with pytest.raises(NonUniqueStationaryError):
        dense_stationary(chain)


def test_non_convergence_reported():
    chain = build_chain(GameParams(Z=20, mu=1e-4))
    with pytest.raises(ConvergenceError, match="stalled"):
        stationary(chain, method="power", max_iters=100)


def test_unknown_method():
    with pytest.raises(ValueError):
        stationary(build_chain(GameParams(Z=6)), method="qr")


# --- gradient and summaries ----------------------------------------------------------


def test_gradient_at_all_ci():
    p = GameParams(Z=20)
    field = gradient_field(p)
    k = state_index(20, 0, 20)
    assert field.drift[k] == pytest.approx((-p.mu, p.mu / 2), abs=1e-15)


def test_gradient_vanishes_at_absorbing_states():
    p = GameParams(Z=10, mu=0.0)
    field = gradient_field(p)
    for s in (PopulationState(10, 0), PopulationState(0, 10), PopulationState(0, 0)):
        assert tuple(field.drift[state_index(s.i_CI, s.i_T, 10)]) == (0.0, 0.0)


@pytest.mark.parametrize("params", [GameParams(Z=30), GameParams(Z=100, M=0), GameParams(Z=25, N=6, M=3, mu=0.2)])
def test_drift_sums_to_zero(params):
    chain = build_chain(params)
    field = gradient_field(chain)
    total = field.drift_CI + field.drift_T + drift_u(np.asarray(chain.moves))
    assert np.abs(total).max() <= 1e-15


def test_gradient_from_params_equals_from_chain():
    p = GameParams(Z=15)
    a, b = gradient_field(p), gradient_field(build_chain(p))
    assert np.array_equal(a.drift, b.drift)


def test_point_mass_summaries():
    chain = build_chain(GameParams(Z=10))
    pi = np.zeros(chain.n_states)
    pi[chain.index_of(PopulationState(10, 0))] = 1.0
    rho_ci, rho_t, rho_u, f_ci, f_t, f_u = summaries(chain, pi)
    assert (rho_ci, rho_t, rho_u) == (1.0, 0.0, 0.0)
    assert f_ci == pytest.approx(average_payoff(CI, PopulationState(10, 0), chain.params))
    assert f_t == f_u == 0.0


def test_summaries_match_direct_weighting():
    p = GameParams(Z=12, M=1)
    chain = build_chain(p)
    res = stationary(chain)
    rho = np.zeros(3)
    fbar = np.zeros(3)
    for k, s in enumerate(enumerate_states(p.Z)):
        rho += np.array(s.counts(p.Z)) / p.Z * res.distribution[k]
        fbar += np.array([average_payoff(x, s, p) for x in Strategy]) * res.distribution[k]
    assert res.rho == pytest.approx(tuple(rho), abs=1e-14)
    assert res.fbar == pytest.approx(tuple(fbar), abs=1e-12)

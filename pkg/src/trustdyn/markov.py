"""Mutation-selection Markov chain over population states.

One step of the chain is one revision event: a random agent either mutates
(probability ``mu``) to one of the two other strategies, or compares itself
with a random role model and imitates it with Fermi probability.

States ``(i_CI, i_T)`` are indexed lexicographically; the transition matrix is
stored row-stochastic (row = source state), so the stationary distribution
solves ``pi P = pi``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import expit

from .game import GameParams, PopulationState, Strategy, average_payoff, enumerate_states, payoff_table

__all__ = [
    "ConvergenceError",
    "NonUniqueStationaryError",
    "Transitions",
    "TransitionChain",
    "StationaryResult",
    "GradientField",
    "fermi",
    "pair_transition",
    "state_out_transitions",
    "state_index",
    "build_chain",
    "stationary",
    "dense_stationary",
    "gradient_field",
    "summaries",
    "residual",
]

log = logging.getLogger(__name__)

CI, T, U = Strategy.CI, Strategy.T, Strategy.U

# (source, target, d_CI, d_T) for the six adjacent moves.
MOVES = (
    (U, CI, +1, 0),
    (CI, U, -1, 0),
    (U, T, 0, +1),
    (T, U, 0, -1),
    (CI, T, -1, +1),
    (T, CI, +1, -1),
)


class ConvergenceError(RuntimeError):
    """Power iteration did not reach the requested tolerance."""


class NonUniqueStationaryError(ValueError):
    """The chain has absorbing states (``mu == 0``)."""


def fermi(delta, beta):
    """Imitation probability ``1 / (1 + exp(-beta * delta))``.

    Works on scalars and arrays and saturates cleanly for large arguments.
    """
    if np.any(np.asarray(beta) < 0):
        raise ValueError("beta must be non-negative")
    out = expit(np.multiply(beta, delta))
    return float(out) if np.ndim(out) == 0 else out


def pair_transition(A: Strategy | str, B: Strategy | str, state: PopulationState, params: GameParams) -> float:
    """Probability that the next event turns one ``A`` agent into a ``B`` agent."""
    A, B = Strategy.coerce(A), Strategy.coerce(B)
    if A == B:
        raise ValueError("pair_transition needs two different strategies")
    Z, mu = params.Z, params.mu
    state.check(Z)
    counts = state.counts(Z)
    i_A, i_B = counts[A], counts[B]
    if i_A == 0:
        return 0.0
    imitation = 0.0
    if i_B > 0:
        f_A = average_payoff(A, state, params)
        f_B = average_payoff(B, state, params)
        imitation = i_A / Z * i_B / (Z - 1) * fermi(f_B - f_A, params.beta)
    return (1.0 - mu) * imitation + mu * i_A / (2 * Z)


class Transitions(NamedTuple):
    U_CI: float
    CI_U: float
    U_T: float
    T_U: float
    CI_T: float
    T_CI: float
    stay: float

    @property
    def moves(self) -> tuple[float, ...]:
        return self[:6]


def state_out_transitions(state: PopulationState, params: GameParams) -> Transitions:
    """The six adjacent-move probabilities out of ``state`` plus the self-loop."""
    probs = [pair_transition(a, b, state, params) for a, b, _, _ in MOVES]
    return Transitions(*probs, 1.0 - sum(probs))


def _transition_arrays(states: np.ndarray, f: np.ndarray, params: GameParams) -> np.ndarray:
    # (S, 6) move probabilities in MOVES order, vectorised over states.
    Z, mu, beta = params.Z, params.mu, params.beta
    counts = np.column_stack([states[:, 0], states[:, 1], Z - states.sum(axis=1)]).astype(float)
    out = np.empty((len(states), 6))
    for m, (a, b, _, _) in enumerate(MOVES):
        imitate = counts[:, a] / Z * counts[:, b] / (Z - 1) * expit(beta * (f[:, b] - f[:, a]))
        out[:, m] = (1.0 - mu) * imitate + mu * counts[:, a] / (2 * Z)
    return out


def state_index(i_CI, i_T, Z: int):
    """Position of ``(i_CI, i_T)`` in the lexicographic state enumeration."""
    return i_CI * (Z + 1) - i_CI * (i_CI - 1) // 2 + i_T


@dataclass(frozen=True)
class TransitionChain:
    """Enumerated states, their payoffs and the sparse transition matrix."""

    params: GameParams
    states: np.ndarray  # (S, 2) rows (i_CI, i_T)
    payoffs: np.ndarray  # (S, 3) f_CI, f_T, f_U
    moves: np.ndarray  # (S, 6) in MOVES order
    matrix: sp.csr_matrix

    @property
    def n_states(self) -> int:
        return len(self.states)

    def index_of(self, state: PopulationState) -> int:
        state.check(self.params.Z)
        return int(state_index(state.i_CI, state.i_T, self.params.Z))

    def state_at(self, index: int) -> PopulationState:
        i_CI, i_T = self.states[index]
        return PopulationState(int(i_CI), int(i_T))

    @property
    def counts(self) -> np.ndarray:
        Z = self.params.Z
        return np.column_stack([self.states, Z - self.states.sum(axis=1)])


def build_chain(params: GameParams) -> TransitionChain:
    Z = params.Z
    if Z < params.N:
        raise ValueError(f"Z={Z} smaller than group size N={params.N}")
    states = np.array([(s.i_CI, s.i_T) for s in enumerate_states(Z)], dtype=np.int64)
    f = payoff_table(params, states)
    moves = _transition_arrays(states, f, params)
    n = len(states)
    src = np.arange(n)

    rows, cols, vals = [src], [src], [1.0 - moves.sum(axis=1)]
    for m, (_, _, d_ci, d_t) in enumerate(MOVES):
        p = moves[:, m]
        keep = p > 0
        dest = state_index(states[keep, 0] + d_ci, states[keep, 1] + d_t, Z)
        rows.append(src[keep])
        cols.append(dest)
        vals.append(p[keep])
    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    matrix.sum_duplicates()
    matrix.eliminate_zeros()
    matrix.sort_indices()
    for arr in (states, f, moves):
        arr.setflags(write=False)
    return TransitionChain(params, states, f, moves, matrix)


@dataclass(frozen=True)
class StationaryResult:
    distribution: np.ndarray
    rho: tuple[float, float, float]
    fbar: tuple[float, float, float]
    residual: float
    iterations: int


def _check_mutation(chain: TransitionChain):
    if chain.params.mu == 0:
        raise NonUniqueStationaryError(
            "mu = 0 leaves three absorbing monomorphic states; the stationary "
            "distribution is not unique"
        )


def residual(chain: TransitionChain, pi: np.ndarray) -> float:
    """L1 norm of ``pi P - pi``."""
    return float(np.abs(chain.matrix.T @ pi - pi).sum())


def stationary(
    chain: TransitionChain,
    tol: float = 1e-12,
    max_iters: int = 10_000_000,
    method: str = "direct",
    x0: np.ndarray | None = None,
    residual_tol: float = 1e-10,
) -> StationaryResult:
    """Unique stationary distribution of a chain with ``mu > 0``.

    ``method="direct"`` solves ``pi (P - I) = 0, sum(pi) = 1`` with a sparse
    LU factorisation (``iterations`` is reported as 0). ``method="power"``
    iterates ``x <- x P`` from ``x0`` (uniform by default) until the L1 change
    between successive iterates drops below ``tol``; its mixing slows down
    roughly like ``1 / mu``, so it is only practical for moderate mutation.
    Either way the fixed point residual is checked against ``residual_tol``.

    Raises
    ------
    NonUniqueStationaryError
        If ``mu == 0``.
    ConvergenceError
        If ``max_iters`` is exhausted or the final residual is too large.
    """
    _check_mutation(chain)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method == "power":
        x, it = _power_iteration(chain, tol, max_iters, x0)
    elif method == "direct":
        x, it = _sparse_solve(chain), 0
    else:
        raise ValueError(f"unknown stationary method {method!r}")
    x = np.clip(x, 0.0, None)
    x /= x.sum()
    res = residual(chain, x)
    if res > residual_tol:
        raise ConvergenceError(f"stationary residual {res:.3e} exceeds {residual_tol:.1e}")
    log.debug("%s solve: %d iterations, residual %.2e", method, it, res)
    return _result(chain, x, res, it)


def _power_iteration(chain, tol, max_iters, x0):
    n = chain.n_states
    PT = chain.matrix.T.tocsr()
    x = np.full(n, 1.0 / n) if x0 is None else np.asarray(x0, dtype=float) / np.sum(x0)
    change = np.inf
    it = 0
    check_every = 16
    while it < max_iters:
        # the L1 change is only measured every few products
        for _ in range(check_every - 1):
            x = PT @ x
        y = PT @ x
        it += check_every
        change = np.abs(y - x).sum()
        x = y
        if change <= tol:
            return x, it
    raise ConvergenceError(
        f"power iteration stalled at L1 change {change:.3e} after {it} iterations"
    )


def _sparse_solve(chain):
    n = chain.n_states
    A = (chain.matrix.T - sp.identity(n, format="csr")).tolil()
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[-1] = 1.0
    return spla.spsolve(A.tocsc(), b)


def dense_stationary(chain: TransitionChain, max_states: int = 861) -> np.ndarray:
    """Direct dense solve of ``pi (P - I) = 0`` with ``sum(pi) = 1``.

    Meant as an independent check for small chains (``Z <= 40`` by default).
    """
    _check_mutation(chain)
    n = chain.n_states
    if n > max_states:
        raise ValueError(f"dense solve limited to {max_states} states, chain has {n}")
    A = chain.matrix.toarray().T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    return pi


def summaries(chain: TransitionChain, pi: np.ndarray) -> tuple[float, ...]:
    """``(rho_CI, rho_T, rho_U, fbar_CI, fbar_T, fbar_U)`` weighted by ``pi``."""
    pi = np.asarray(pi, dtype=float)
    rho = chain.counts.T @ pi / chain.params.Z
    fbar = chain.payoffs.T @ pi
    return (*map(float, rho), *map(float, fbar))


def _result(chain: TransitionChain, pi: np.ndarray, res: float, iterations: int) -> StationaryResult:
    s = summaries(chain, pi)
    return StationaryResult(pi, s[:3], s[3:], res, iterations)


@dataclass(frozen=True)
class GradientField:
    states: np.ndarray  # (S, 2)
    drift: np.ndarray  # (S, 2) drift_CI, drift_T

    @property
    def drift_CI(self) -> np.ndarray:
        return self.drift[:, 0]

    @property
    def drift_T(self) -> np.ndarray:
        return self.drift[:, 1]

    @property
    def drift_U(self) -> np.ndarray:
        return -self.drift[:, 0] - self.drift[:, 1]


def _drift(moves: np.ndarray) -> np.ndarray:
    U_CI, CI_U, U_T, T_U, CI_T, T_CI = moves.T
    return np.column_stack([(U_CI + T_CI) - (CI_U + CI_T), (U_T + CI_T) - (T_U + T_CI)])


def gradient_field(params: GameParams | TransitionChain) -> GradientField:
    """Net expected change of the CI and T counts at every state.

    Accepts a built chain to reuse its transition probabilities. Defined for
    ``mu = 0`` as well.
    """
    if isinstance(params, TransitionChain):
        return GradientField(params.states, _drift(np.asarray(params.moves)))
    states = np.array([(s.i_CI, s.i_T) for s in enumerate_states(params.Z)], dtype=np.int64)
    moves = _transition_arrays(states, payoff_table(params, states), params)
    return GradientField(states, _drift(moves))


def drift_u(moves: np.ndarray) -> np.ndarray:
    """U-count drift computed directly from its own in- and out-flows."""
    U_CI, CI_U, U_T, T_U, CI_T, T_CI = moves.T
    return (CI_U + T_U) - (U_CI + U_T)

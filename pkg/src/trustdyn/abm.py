"""Agent-based simulation of the revision process.

Runs the same mutation-selection dynamics as the Markov chain, but one agent
at a time on an explicit strategy vector. Payoffs come either from the
analytic averages (``payoff_mode="expected"``) or from actually playing
randomly formed groups through a geometric number of rounds
(``payoff_mode="sampled"``).

Random numbers come from :class:`numpy.random.Generator` (PCG64) seeded via
:class:`numpy.random.SeedSequence`; independent replicas use
``SeedSequence(seed).spawn(n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .game import GameParams, GroupComposition, PopulationState, Strategy, enumerate_states, payoff_table
from .markov import state_index

__all__ = [
    "Population",
    "SimConfig",
    "SimResult",
    "draw_rounds",
    "play_group_game",
    "play_group_games",
    "sample_group",
    "sample_groups",
    "abm_step",
    "abm_run",
    "replica_seeds",
]

PAYOFF_MODES = ("expected", "sampled")


class Population:
    """Strategy of every agent plus running counts."""

    def __init__(self, strategies):
        self.strategies = [int(s) for s in strategies]
        if any(s not in (0, 1, 2) for s in self.strategies):
            raise ValueError("strategies must be 0 (CI), 1 (T) or 2 (U)")
        self.counts = [self.strategies.count(s) for s in range(3)]

    @classmethod
    def from_state(cls, state: PopulationState, Z: int, rng: np.random.Generator | None = None):
        state.check(Z)
        strategies = np.repeat([0, 1, 2], state.counts(Z))
        if rng is not None:
            rng.shuffle(strategies)
        return cls(strategies)

    @classmethod
    def random(cls, Z: int, rng: np.random.Generator):
        return cls(rng.integers(0, 3, size=Z))

    @property
    def Z(self) -> int:
        return len(self.strategies)

    @property
    def state(self) -> PopulationState:
        return PopulationState(self.counts[0], self.counts[1])

    def switch(self, agent: int, new: int) -> None:
        old = self.strategies[agent]
        self.strategies[agent] = new
        self.counts[old] -= 1
        self.counts[new] += 1

    def copy(self) -> "Population":
        return Population(self.strategies)

    def as_array(self) -> np.ndarray:
        return np.array(self.strategies, dtype=np.int8)


@dataclass(frozen=True)
class SimConfig:
    params: GameParams
    steps: int
    burn_in: int = 0
    seed: int | np.random.SeedSequence | None = 0
    payoff_mode: str = "expected"
    groups_per_evaluation: int = 1
    initial: PopulationState | None = None
    record_every: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if not 0 <= self.burn_in < self.steps:
            raise ValueError("burn_in must satisfy 0 <= burn_in < steps")
        if self.payoff_mode not in PAYOFF_MODES:
            raise ValueError(f"payoff_mode must be one of {PAYOFF_MODES}")
        if self.groups_per_evaluation < 1:
            raise ValueError("groups_per_evaluation must be >= 1")
        if self.record_every < 0:
            raise ValueError("record_every must be >= 0")


def replica_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    """Independent child seeds for ``n`` parallel replicas."""
    return np.random.SeedSequence(seed).spawn(n)


# --- one repeated game -------------------------------------------------------


def draw_rounds(params: GameParams, rng: np.random.Generator, size=None):
    """Number of rounds played: 1 plus a geometric number of continuations.

    The mean is ``1 / (1 - w)``, or ``rounds_override`` when set.
    """
    if params.rounds_override is not None:
        stop = 1.0 / params.rounds_override
    else:
        stop = 1.0 - params.w
    return rng.geometric(stop, size=size)


def _per_round(comp: GroupComposition, params: GameParams) -> np.ndarray:
    # Per-member payoff of (CI, T, U) in one invested round, from the transfers.
    n_CI, n_T, n_U = comp.n_CI, comp.n_T, comp.n_U
    n_tr = n_T + n_U
    if n_tr == 0 or n_CI == 0:
        return np.zeros(3)
    tv = params.tv
    received = n_CI * tv / n_tr  # by every trustee
    returned_each = params.R_T * tv / n_tr  # from each T to each CI
    ci = -tv + n_T * returned_each
    t = params.R_T * received
    u = params.R_U * received
    return np.array([ci, t, u])


def play_group_games(comp: GroupComposition, params: GameParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """Realised payoffs of ``size`` independent plays of one group.

    Returns a ``(size, 3)`` array holding the payoff of a CI, T and U member;
    columns of strategies absent from the group are 0.
    """
    if comp.size != params.N:
        raise ValueError(f"composition {comp} does not sum to N={params.N}")
    rounds = draw_rounds(params, rng, size=size)
    per_round = _per_round(comp, params)
    if comp.n_CI == 0 or comp.trustees == 0:
        return np.zeros((size, 3))
    # round 1 is always invested; later rounds need enough trustworthy members
    invested = 1 + (rounds - 1) * (comp.n_T >= params.M)
    out = invested[:, None] * per_round[None, :]
    out[:, 0] -= params.sigma
    for s in Strategy:
        if comp.count(s) == 0:
            out[:, s] = 0.0
    return out


def play_group_game(comp: GroupComposition, params: GameParams, rng: np.random.Generator) -> np.ndarray:
    """One play of the repeated game; payoff of a CI, T and U member."""
    return play_group_games(comp, params, rng, 1)[0]


def sample_group(pop: Population, agent: int, N: int, rng: np.random.Generator) -> GroupComposition:
    """Composition of a group made of ``agent`` and ``N - 1`` random others."""
    Z = pop.Z
    picks = rng.choice(Z - 1, size=N - 1, replace=False)
    counts = [0, 0, 0]
    counts[pop.strategies[agent]] += 1
    for p in picks:
        other = p + 1 if p >= agent else p
        counts[pop.strategies[other]] += 1
    return GroupComposition(*counts)


def sample_groups(pop: Population, agent: int, N: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` group compositions around ``agent``, as a ``(size, 3)`` count array."""
    Z = pop.Z
    others = np.array(pop.strategies[:agent] + pop.strategies[agent + 1:])
    out = np.zeros((size, 3), dtype=np.int64)
    chunk = max(1, 2_000_000 // max(Z, 1))
    for start in range(0, size, chunk):
        n = min(chunk, size - start)
        keys = rng.random((n, Z - 1))
        members = others[np.argpartition(keys, N - 2, axis=1)[:, : N - 1]]
        for s in range(3):
            out[start:start + n, s] = (members == s).sum(axis=1)
    out[:, pop.strategies[agent]] += 1
    return out


# --- revision events ---------------------------------------------------------


class _Dynamics:
    """Event kernel shared by :func:`abm_step` and :func:`abm_run`."""

    def __init__(self, config: SimConfig):
        p = config.params
        self.config = config
        self.params = p
        self.Z = p.Z
        self.mu = p.mu
        if config.payoff_mode == "expected":
            f = payoff_table(p)
            # imitation[idx][a][b] = fermi(f_b - f_a) at state idx
            table = expit(p.beta * (f[:, None, :] - f[:, :, None]))
            self.imitation = table.tolist()
        else:
            self.imitation = None

    def sampled_payoff(self, pop: Population, agent: int, rng: np.random.Generator) -> float:
        s = pop.strategies[agent]
        total = 0.0
        g = self.config.groups_per_evaluation
        for _ in range(g):
            comp = sample_group(pop, agent, self.params.N, rng)
            total += play_group_game(comp, self.params, rng)[s]
        return total / g

    def event(self, pop, k, u_mut, u_kind, m_raw, u_imit, rng) -> None:
        a = pop.strategies[k]
        if u_mut < self.mu:
            pop.switch(k, (a + 1 + (u_kind >= 0.5)) % 3)
            return
        m = m_raw + 1 if m_raw >= k else m_raw
        b = pop.strategies[m]
        if b == a:
            return
        if self.imitation is not None:
            c = pop.counts
            prob = self.imitation[c[0] * (self.Z + 1) - c[0] * (c[0] - 1) // 2 + c[1]][a][b]
        else:
            f_focal = self.sampled_payoff(pop, k, rng)
            f_model = self.sampled_payoff(pop, m, rng)
            prob = float(expit(self.params.beta * (f_model - f_focal)))
        if u_imit < prob:
            pop.switch(k, b)


def abm_step(pop: Population, config: SimConfig, rng: np.random.Generator, _dynamics=None) -> Population:
    """Apply one revision event to ``pop`` in place and return it.

    A uniformly chosen agent mutates with probability ``mu`` to one of the two
    other strategies; otherwise it imitates a uniformly chosen other agent with
    Fermi probability of their payoff difference.
    """
    dyn = _dynamics or _Dynamics(config)
    Z = pop.Z
    k = int(rng.integers(Z))
    u_mut, u_kind, u_imit = rng.random(3)
    m_raw = int(rng.integers(Z - 1))
    dyn.event(pop, k, u_mut, u_kind, m_raw, u_imit, rng)
    return pop


@dataclass
class SimResult:
    rho: tuple[float, float, float]
    visits: np.ndarray  # per state index, post burn-in
    states: np.ndarray  # (S, 2)
    series: list[tuple[int, int, int, int]] = field(default_factory=list)
    final: PopulationState | None = None

    def visit_distribution(self) -> np.ndarray:
        return self.visits / self.visits.sum()


def abm_run(config: SimConfig, chunk: int = 1 << 16) -> SimResult:
    """Run ``config.steps`` events and time-average the post burn-in states.

    The state after each event from ``burn_in + 1`` to ``steps`` counts once.
    With ``record_every > 0`` the state is also logged every that many events
    (event 0 being the initial population). Output depends only on the config.
    """
    p = config.params
    Z = p.Z
    rng = np.random.default_rng(config.seed)
    if config.initial is None:
        pop = Population.random(Z, rng)
    else:
        pop = Population.from_state(config.initial, Z, rng)
    dyn = _Dynamics(config)
    n_states = (Z + 1) * (Z + 2) // 2
    visits = [0] * n_states
    series = []
    every = config.record_every
    if every:
        series.append((0, *pop.counts))
    counts = pop.counts
    event = dyn.event
    t = 0
    while t < config.steps:
        n = min(chunk, config.steps - t)
        ks = rng.integers(Z, size=n).tolist()
        ms = rng.integers(Z - 1, size=n).tolist()
        us = rng.random((n, 3)).tolist()
        for k, m, (u_mut, u_kind, u_imit) in zip(ks, ms, us):
            event(pop, k, u_mut, u_kind, m, u_imit, rng)
            t += 1
            if t > config.burn_in:
                c0 = counts[0]
                visits[c0 * (Z + 1) - c0 * (c0 - 1) // 2 + counts[1]] += 1
            if every and t % every == 0:
                series.append((t, *counts))
    visits = np.array(visits, dtype=np.int64)
    states = np.array([(s.i_CI, s.i_T) for s in enumerate_states(Z)], dtype=np.int64)
    full = np.column_stack([states, Z - states.sum(axis=1)])
    rho = tuple(float(x) for x in full.T @ visits / (visits.sum() * Z))
    return SimResult(rho, visits, states, series, pop.state)


def visit_index(state: PopulationState, Z: int) -> int:
    return int(state_index(state.i_CI, state.i_T, Z))

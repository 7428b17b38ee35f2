"""Payoffs of the repeated N-player trust game with conditional investors.

Three strategies share the population:

* ``CI`` conditional investors: pay an observation cost once, always invest in
  the first round and keep investing only while the group holds at least ``M``
  trustworthy trustees.
* ``T`` trustworthy trustees: return ``R_T`` times what they receive.
* ``U`` untrustworthy trustees: keep ``R_U`` times what they receive.

All payoffs are written as functions of the *full* group composition, focal
agent included, and every member faces the same continuation condition
``n_T >= M``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace
from functools import lru_cache
from typing import Iterator

import numpy as np

__all__ = [
    "Strategy",
    "GameParams",
    "GroupComposition",
    "PopulationState",
    "heaviside",
    "expected_rounds",
    "group_payoff",
    "hypergeom_pmf",
    "average_payoff",
    "enumerate_states",
    "payoff_table",
]


class Strategy(enum.IntEnum):
    CI = 0
    T = 1
    U = 2

    @classmethod
    def coerce(cls, value: "Strategy | str | int") -> "Strategy":
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ValueError(f"unknown strategy {value!r}") from None
        return cls(value)


@dataclass(frozen=True)
class GameParams:
    """Model constants.

    ``mu`` defaults to ``1 / Z`` when left as ``None``. ``rounds_override``
    replaces the expected number of rounds derived from ``w``.
    """

    Z: int = 100
    N: int = 4
    M: int = 2
    tv: float = 1.0
    R_T: float = 6.0
    R_U: float = 8.0
    sigma: float = 0.1
    w: float = 0.8
    beta: float = 5.0
    mu: float | None = None
    rounds_override: float | None = None

    def __post_init__(self):
        for name in ("Z", "N", "M"):
            value = getattr(self, name)
            if isinstance(value, float) and value.is_integer():
                object.__setattr__(self, name, int(value))
            elif not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ValueError(f"{name} must be an integer, got {value!r}")
            else:
                object.__setattr__(self, name, int(value))
        for name in ("tv", "R_T", "R_U", "sigma", "w", "beta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.mu is None:
            object.__setattr__(self, "mu", 1.0 / self.Z if self.Z > 0 else 0.0)
        object.__setattr__(self, "mu", float(self.mu))
        if self.rounds_override is not None:
            object.__setattr__(self, "rounds_override", float(self.rounds_override))
        self._validate()

    def _validate(self):
        checks = [
            ("N", self.N >= 2, "N >= 2"),
            ("Z", self.Z >= self.N, "Z >= N"),
            ("M", 0 <= self.M <= self.N, "0 <= M <= N"),
            ("tv", self.tv > 0, "tv > 0"),
            ("R_T", self.R_T > 0, "R_T > 0"),
            ("R_U", self.R_U > 0, "R_U > 0"),
            ("sigma", self.sigma >= 0, "sigma >= 0"),
            ("w", 0 < self.w < 1, "0 < w < 1"),
            ("beta", self.beta >= 0, "beta >= 0"),
            ("mu", 0 <= self.mu <= 1, "0 <= mu <= 1"),
        ]
        if self.rounds_override is not None:
            checks.append(
                ("rounds_override", self.rounds_override >= 1, "rounds_override >= 1")
            )
        for name, ok, constraint in checks:
            if not ok:
                raise ValueError(
                    f"invalid {name}={getattr(self, name)!r}: requires {constraint}"
                )

    @property
    def rounds(self) -> float:
        return expected_rounds(self)

    def with_(self, **changes) -> "GameParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class GroupComposition:
    n_CI: int
    n_T: int
    n_U: int

    def __post_init__(self):
        if min(self.n_CI, self.n_T, self.n_U) < 0:
            raise ValueError(f"negative count in {self}")

    @property
    def size(self) -> int:
        return self.n_CI + self.n_T + self.n_U

    @property
    def trustees(self) -> int:
        return self.n_T + self.n_U

    def count(self, strategy: Strategy) -> int:
        return (self.n_CI, self.n_T, self.n_U)[strategy]


@dataclass(frozen=True, order=True)
class PopulationState:
    i_CI: int
    i_T: int

    def i_U(self, Z: int) -> int:
        return Z - self.i_CI - self.i_T

    def counts(self, Z: int) -> tuple[int, int, int]:
        return self.i_CI, self.i_T, Z - self.i_CI - self.i_T

    def check(self, Z: int) -> None:
        if self.i_CI < 0 or self.i_T < 0 or self.i_CI + self.i_T > Z:
            raise ValueError(f"invalid state {self} for Z={Z}")


def heaviside(k: int) -> int:
    """1 for ``k >= 0``, 0 otherwise."""
    return 1 if k >= 0 else 0


def expected_rounds(params: GameParams) -> float:
    """Mean length ``1 / (1 - w)`` of a game continued with probability ``w``."""
    if params.rounds_override is not None:
        return params.rounds_override
    if not 0 < params.w < 1:
        raise ValueError(f"w must lie in (0, 1), got {params.w}")
    return 1.0 / (1.0 - params.w)


def _single_round(n_CI: int, n_T: int, n_U: int, params: GameParams) -> tuple[float, float, float]:
    # Per-round payoff of each strategy when every CI invests; 0 in degenerate groups.
    n_tr = n_T + n_U
    if n_tr == 0 or n_CI == 0:
        return 0.0, 0.0, 0.0
    tv = params.tv
    ci = params.R_T * n_T * tv / n_tr - tv
    t = params.R_T * n_CI * tv / n_tr
    u = params.R_U * n_CI * tv / n_tr
    return ci, t, u


def group_payoff(comp: GroupComposition, focal: Strategy | str, params: GameParams) -> float:
    """Expected payoff of one ``focal`` member over a whole repeated game.

    Rounds after the first pay out only if the group holds at least ``M``
    trustworthy agents. Conditional investors pay ``sigma`` once, except in
    a group without trustees where no game takes place.
    """
    focal = Strategy.coerce(focal)
    if comp.size != params.N:
        raise ValueError(f"composition {comp} does not sum to N={params.N}")
    if comp.count(focal) < 1:
        raise ValueError(f"focal strategy {focal.name} absent from {comp}")
    r = expected_rounds(params)
    base = _single_round(comp.n_CI, comp.n_T, comp.n_U, params)[focal]
    payoff = base + base * (r - 1.0) * heaviside(comp.n_T - params.M)
    if focal is Strategy.CI:
        if comp.trustees == 0:
            return 0.0
        payoff -= params.sigma
    return payoff


@lru_cache(maxsize=64)
def _binom_table(n_max: int, k_max: int) -> np.ndarray:
    # C(n, k) as floats for 0 <= n <= n_max, 0 <= k <= k_max; exact integers rounded once.
    table = np.zeros((n_max + 1, k_max + 1))
    for n in range(n_max + 1):
        for k in range(min(n, k_max) + 1):
            table[n, k] = float(math.comb(n, k))
    table.setflags(write=False)
    return table


def hypergeom_pmf(j_CI: int, j_T: int, draws: int, i_CI: int, i_T: int, pool: int) -> float:
    """Probability of drawing ``j_CI`` CI and ``j_T`` T agents in ``draws`` draws.

    Draws are without replacement from ``pool`` agents of which ``i_CI`` are CI
    and ``i_T`` are T. Out-of-support arguments give 0.
    """
    if draws > pool:
        raise ValueError(f"cannot draw {draws} from a pool of {pool}")
    i_U = pool - i_CI - i_T
    j_U = draws - j_CI - j_T
    if min(j_CI, j_T, j_U, i_CI, i_T, i_U) < 0:
        return 0.0
    if j_CI > i_CI or j_T > i_T or j_U > i_U:
        return 0.0
    num = math.comb(i_CI, j_CI) * math.comb(i_T, j_T) * math.comb(i_U, j_U)
    return num / math.comb(pool, draws)


def _others(state: PopulationState, focal: Strategy, Z: int) -> tuple[int, int, int]:
    counts = list(state.counts(Z))
    counts[focal] -= 1
    return counts[0], counts[1], counts[2]


def average_payoff(strategy: Strategy | str, state: PopulationState, params: GameParams) -> float:
    """Mean game payoff of a ``strategy`` agent in population ``state``.

    The other ``N - 1`` group members are drawn without replacement from the
    remaining ``Z - 1`` agents. Returns 0 when the strategy is absent.
    """
    strategy = Strategy.coerce(strategy)
    Z, N = params.Z, params.N
    state.check(Z)
    if state.counts(Z)[strategy] == 0:
        return 0.0
    o_CI, o_T, _ = _others(state, strategy, Z)
    total = 0.0
    for j_CI in range(N):
        for j_T in range(N - j_CI):
            prob = hypergeom_pmf(j_CI, j_T, N - 1, o_CI, o_T, Z - 1)
            if prob == 0.0:
                continue
            comp = [j_CI, j_T, N - 1 - j_CI - j_T]
            comp[strategy] += 1
            total += prob * group_payoff(GroupComposition(*comp), strategy, params)
    return total


def enumerate_states(Z: int) -> Iterator[PopulationState]:
    """All states with ``i_CI + i_T <= Z``, lexicographic in ``(i_CI, i_T)``."""
    for i_CI in range(Z + 1):
        for i_T in range(Z - i_CI + 1):
            yield PopulationState(i_CI, i_T)


def payoff_table(params: GameParams, states: np.ndarray | None = None) -> np.ndarray:
    """Average payoffs of all three strategies at many states at once.

    Parameters
    ----------
    params : GameParams
    states : (S, 2) int array, optional
        Rows ``(i_CI, i_T)``. Defaults to every state in enumeration order.

    Returns
    -------
    (S, 3) float array with columns ``f_CI, f_T, f_U``; entries for absent
    strategies are 0.
    """
    Z, N = params.Z, params.N
    if states is None:
        states = np.array([(s.i_CI, s.i_T) for s in enumerate_states(Z)], dtype=np.int64)
    states = np.asarray(states, dtype=np.int64).reshape(-1, 2)
    counts = np.column_stack([states[:, 0], states[:, 1], Z - states.sum(axis=1)])
    if (counts < 0).any():
        raise ValueError("invalid state in table request")
    C = _binom_table(Z, N)
    norm = C[Z - 1, N - 1]
    r = expected_rounds(params)
    out = np.zeros((len(states), 3))
    for focal in Strategy:
        present = counts[:, focal] > 0
        others = counts.copy()
        others[:, focal] -= 1
        others = np.where(present[:, None], others, 0)
        acc = np.zeros(len(states))
        for j_CI in range(N):
            for j_T in range(N - j_CI):
                j = (j_CI, j_T, N - 1 - j_CI - j_T)
                weight = C[others[:, 0], j[0]] * C[others[:, 1], j[1]] * C[others[:, 2], j[2]]
                comp = list(j)
                comp[focal] += 1
                base = _single_round(*comp, params)[focal]
                pay = base + base * (r - 1.0) * heaviside(comp[1] - params.M)
                if focal is Strategy.CI and comp[1] + comp[2] > 0:
                    pay -= params.sigma
                acc += weight * pay
        out[:, focal] = np.where(present, acc / norm, 0.0)
    return out

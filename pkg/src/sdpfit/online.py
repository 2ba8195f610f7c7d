"""Greedy online assignment under Smith's Rule.

Players arrive one at a time and irrevocably take the strategy whose
insertion raises the total weighted completion time the least. On every
resource the arrived players stay sorted by Smith ratio, so the increase of
inserting ``j`` is ``w_j p_ej`` plus ``w_j`` times the processing time
already queued ahead of ``j`` plus ``p_ej`` times the weight queued behind
it. Two Fenwick trees per resource, indexed by the precomputed rank of every
potential user, answer both prefix sums in logarithmic time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cost import Mechanism, social_cost
from .model import Assignment, CongestionInstance, DimensionMismatch


class Fenwick:
    """Prefix sums over a fixed-size array with point updates."""

    def __init__(self, n: int):
        self.tree = np.zeros(n + 1)

    def add(self, pos: int, value: float) -> None:
        i = pos + 1
        while i < len(self.tree):
            self.tree[i] += value
            i += i & -i

    def prefix(self, pos: int) -> float:
        """Sum of entries ``0 .. pos - 1``."""
        s, i = 0.0, pos
        while i > 0:
            s += self.tree[i]
            i -= i & -i
        return float(s)

    def total(self) -> float:
        return self.prefix(len(self.tree) - 1)


@dataclass(frozen=True)
class OnlineState:
    """An arrived prefix with its choices and the running cost after each arrival.

    ``cumulative[t]`` is the total cost after ``t`` arrivals, so
    ``cumulative[0] == 0``; ``alternatives[t]`` holds the increase every
    strategy of the ``t``-th arrival would have caused.
    """

    instance: CongestionInstance
    order: tuple[int, ...]
    choices: tuple[int | None, ...]
    cumulative: tuple[float, ...]
    alternatives: tuple[np.ndarray, ...] = ()

    @property
    def increments(self) -> np.ndarray:
        """``C^(j) - C^(j-1)`` per player index (not per arrival step)."""
        inc = np.zeros(self.instance.n_players)
        for t, j in enumerate(self.order):
            inc[j] = self.cumulative[t + 1] - self.cumulative[t]
        return inc

    @property
    def arrived(self) -> frozenset[int]:
        return frozenset(self.order)

    def assignment(self) -> Assignment:
        if len(self.order) != self.instance.n_players:
            raise DimensionMismatch("not every player has arrived")
        return Assignment.from_choices(self.instance, [int(c) for c in self.choices])

    @classmethod
    def empty(cls, instance: CongestionInstance) -> "OnlineState":
        return cls(instance, (), (None,) * instance.n_players, (0.0,))


def greedy_increase(state: OnlineState, j: int, i: int) -> float:
    """Closed-form increase ``sum_e w_j p_ej + sum_k w_j w_k min(d_ej, d_ek)`` over arrived ``k`` on ``e``."""
    inst = state.instance
    if j in state.arrived:
        raise ValueError(f"player {inst.players[j].id} has already arrived")
    w, p, d = inst.weights, inst.proc, inst.ratios
    total = 0.0
    for e in inst.strategy_resources[j][i]:
        total += w[j] * p[e, j]
        if w[j] == 0:
            continue
        for k in state.order:
            if w[k] > 0 and e in inst.strategy_resources[k][state.choices[k]]:
                total += w[j] * w[k] * min(d[e, j], d[e, k])
    return float(total)


def _check_order(instance: CongestionInstance, order: Sequence[int] | None) -> tuple[int, ...]:
    if order is None:
        return tuple(range(instance.n_players))
    order = tuple(int(j) for j in order)
    if sorted(order) != list(range(instance.n_players)):
        raise DimensionMismatch("arrival order must be a permutation of the players")
    return order


def greedy_online(instance: CongestionInstance, order: Sequence[int] | None = None) -> tuple[Assignment, OnlineState]:
    """Run the greedy rule; ties between equal increases go to the lowest strategy index."""
    order = _check_order(instance, order)
    w, p, rank = instance.weights, instance.proc, instance.rank
    ahead = [Fenwick(len(o)) for o in instance.order]  # processing time per rank
    behind = [Fenwick(len(o)) for o in instance.order]  # weight per rank
    choices: list[int | None] = [None] * instance.n_players
    cumulative = [0.0]
    alternatives = []
    for j in order:
        inc = np.zeros(instance.strategy_counts[j])
        for i, s in enumerate(instance.strategy_resources[j]):
            v = 0.0
            for e in s:
                r = rank[e, j]
                v += w[j] * p[e, j] + w[j] * ahead[e].prefix(r)
                v += p[e, j] * (behind[e].total() - behind[e].prefix(r + 1))
            inc[i] = v
        c = int(np.argmin(inc))
        choices[j] = c
        for e in instance.strategy_resources[j][c]:
            ahead[e].add(rank[e, j], p[e, j])
            behind[e].add(rank[e, j], w[j])
        cumulative.append(cumulative[-1] + float(inc[c]))
        alternatives.append(inc)
    state = OnlineState(instance, order, tuple(choices), tuple(cumulative), tuple(alternatives))
    return state.assignment(), state


def prefix_cost(instance: CongestionInstance, order: Sequence[int], choices: Sequence[int | None]) -> float:
    """Smith cost of the arrived players alone, recomputed from scratch."""
    if not order:
        return 0.0
    sub = instance.subinstance(list(order))
    x = Assignment.from_choices(sub, [choices[j] for j in order])
    return social_cost(sub, x, Mechanism.SMITH).social


@dataclass(frozen=True)
class ReplayReport:
    max_violation: float
    max_recompute_error: float
    telescoping_error: float


def replay_check(state: OnlineState) -> ReplayReport:
    """Recompute every prefix cost and check the greedy inequalities.

    For each arrival the realized increase must not exceed the closed-form
    increase of any alternative strategy; violations and recomputation
    errors are relative to ``max(1, increase)``.
    """
    inst = state.instance
    viol = err = 0.0
    for t, j in enumerate(state.order):
        before = OnlineState(inst, state.order[:t], tuple(c if k in state.order[:t] else None for k, c in enumerate(state.choices)), state.cumulative[: t + 1])
        realized = state.cumulative[t + 1] - state.cumulative[t]
        full = prefix_cost(inst, state.order[: t + 1], state.choices) - prefix_cost(inst, state.order[:t], state.choices)
        err = max(err, abs(full - realized) / max(1.0, abs(full)))
        for i in range(inst.strategy_counts[j]):
            alt = greedy_increase(before, j, i)
            viol = max(viol, (realized - alt) / max(1.0, abs(alt)))
    final = social_cost(inst, state.assignment(), Mechanism.SMITH).social if len(state.order) == inst.n_players else state.cumulative[-1]
    tele = abs(state.cumulative[-1] - final) / max(1.0, abs(final))
    return ReplayReport(max(viol, 0.0), err, tele)

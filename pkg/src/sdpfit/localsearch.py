"""Local search for weighted completion time scheduling on unrelated machines.

``jump_opt`` moves single jobs while the total Smith-rule cost decreases.
``improved_local_search`` instead lets every job minimize its own potential

    f_j(x) = w_j p_ij + GAMMA * sum_{k != j on i} w_j w_k min(d_ij, d_ik),

which is an exact potential game, so it always terminates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cost import Mechanism, resource_costs, social_cost
from .model import Assignment, CongestionInstance, DimensionMismatch, InstanceError, usage_marginals
from .online import greedy_online

GAMMA = (9 + math.sqrt(5)) / 19


class NotScheduling(InstanceError):
    pass


def _require_scheduling(instance: CongestionInstance) -> None:
    if not isinstance(instance, CongestionInstance) or not instance.is_scheduling:
        raise NotScheduling("local search needs singleton strategies (machines)")


def _pure(instance: CongestionInstance, x: Assignment) -> tuple[int, ...]:
    x.validate(instance)
    if not x.is_pure:
        raise DimensionMismatch("local search works on pure profiles")
    return x.choices()


def _machines(instance: CongestionInstance, j: int) -> np.ndarray:
    return np.array([instance.machine_of(j, i) for i in range(instance.strategy_counts[j])], dtype=int)


def default_init(instance: CongestionInstance) -> Assignment:
    """Greedy online assignment in declaration order."""
    return greedy_online(instance)[0]


@dataclass(frozen=True)
class LocalOptCertificate:
    kind: str
    max_violation: float
    worst: tuple[int, int] | None
    f_values: np.ndarray | None = None
    sum_f: float | None = None
    identity_residual: float | None = None

    def passed(self, tol: float = 1e-9) -> bool:
        ok = self.max_violation <= tol
        if self.identity_residual is not None:
            ok = ok and self.identity_residual <= tol
        return ok

    def to_json(self, instance: CongestionInstance) -> dict:
        out = {"kind": self.kind, "maxViolation": self.max_violation}
        if self.worst is not None:
            out["worst"] = {"player": instance.players[self.worst[0]].id, "strategy": self.worst[1]}
        if self.f_values is not None:
            out["fValues"] = dict(zip((p.id for p in instance.players), self.f_values.tolist()))
            out["sumF"] = self.sum_f
            out["identityResidual"] = self.identity_residual
        return out


@dataclass(frozen=True)
class SearchResult:
    assignment: Assignment
    converged: bool
    moves: int


# ---------------------------------------------------------------------------
# JumpOpt


def jump_gains(instance: CongestionInstance, choices: Sequence[int]) -> list[np.ndarray]:
    """Change ``C(x') - C(x)`` of moving each job to each of its strategies.

    Removing ``j`` and reinserting it on machine ``i`` changes the total cost
    by ``w_j`` times its proportional-sharing time there, because the time
    ``j`` waits for earlier jobs and the time it adds to later jobs combine
    into exactly that quantity.
    """
    x = Assignment.from_choices(instance, choices)
    R = resource_costs(instance, usage_marginals(instance, x), Mechanism.PS)
    w = instance.weights
    out = []
    for j, c in enumerate(choices):
        here = _machines(instance, j)
        insert = w[j] * R[here, j]
        out.append(insert - insert[c])
    return out


def jump_opt(
    instance: CongestionInstance,
    init: Assignment | None = None,
    max_iters: int = 100_000,
    tol: float = 1e-9,
) -> SearchResult:
    """Sweep jobs by index; move a job to its best machine if that lowers ``C(x)``.

    A move is accepted when the decrease exceeds ``tol * max(1, w_j C_j + D_j)``,
    the normalization used by ``check_jumpopt``.
    """
    _require_scheduling(instance)
    choices = list(_pure(instance, init if init is not None else default_init(instance)))
    moves, idle, j = 0, 0, 0
    n = instance.n_players
    while moves < max_iters and idle < n:
        x = Assignment.from_choices(instance, choices)
        R = resource_costs(instance, usage_marginals(instance, x), Mechanism.PS)
        here = _machines(instance, j)
        insert = instance.weights[j] * R[here, j]
        cur = insert[choices[j]]
        best = int(np.argmin(insert))
        if cur - insert[best] > tol * max(1.0, cur):
            choices[j] = best
            moves += 1
            idle = 0
        else:
            idle += 1
        j = (j + 1) % n
    x = Assignment.from_choices(instance, choices)
    return SearchResult(x, check_jumpopt(instance, x).max_violation <= tol, moves)


def check_jumpopt(instance: CongestionInstance, x: Assignment) -> LocalOptCertificate:
    """Violation of ``w_j C_j + D_j <= w_j p_ij + sum_k w_j w_k min(d_ij, d_ik) x_ik``."""
    _require_scheduling(instance)
    choices = _pure(instance, x)
    br = social_cost(instance, x, Mechanism.SMITH)
    lhs = instance.weights * br.per_player + br.delays
    rhs = _pair_sums(instance, choices, 1.0)
    return _certificate("JumpOpt", lhs, rhs)


# ---------------------------------------------------------------------------
# potential-based local search


def _pair_sums(instance: CongestionInstance, choices: Sequence[int], g: float) -> list[np.ndarray]:
    """``w_j p_ij + g * sum_{k != j on i} w_j w_k min(d_ij, d_ik)`` per job and strategy."""
    w, p, d = instance.weights, instance.proc, instance.ratios
    on = [[] for _ in range(instance.n_resources)]
    for k, c in enumerate(choices):
        on[instance.machine_of(k, c)].append(k)
    out = []
    for j in range(instance.n_players):
        row = np.zeros(instance.strategy_counts[j])
        for i, e in enumerate(_machines(instance, j)):
            v = w[j] * p[e, j]
            if w[j] > 0:
                for k in on[e]:
                    if k != j and w[k] > 0:
                        v += g * w[j] * w[k] * min(d[e, j], d[e, k])
            row[i] = v
        out.append(row)
    return out


def potentials(instance: CongestionInstance, x: Assignment) -> np.ndarray:
    """``f_j(x)`` for every job."""
    _require_scheduling(instance)
    choices = _pure(instance, x)
    rows = _pair_sums(instance, choices, GAMMA)
    return np.array([rows[j][c] for j, c in enumerate(choices)])


def _certificate(kind: str, current: np.ndarray, rows: list[np.ndarray], **extra) -> LocalOptCertificate:
    worst, vmax = None, 0.0
    for j, row in enumerate(rows):
        v = np.maximum(0.0, current[j] - row) / max(1.0, current[j])
        if len(v) and v.max() > vmax:
            vmax, worst = float(v.max()), (j, int(v.argmax()))
    return LocalOptCertificate(kind, vmax, worst, **extra)


def check_gamma_potential(instance: CongestionInstance, x: Assignment) -> LocalOptCertificate:
    """Potential local-optimality violations, the ``f_j`` values and the sum identity.

    The identity ``sum_j f_j = 2 GAMMA C(x) - (2 GAMMA - 1) eta(x)`` is
    reported as a relative residual.
    """
    _require_scheduling(instance)
    choices = _pure(instance, x)
    rows = _pair_sums(instance, choices, GAMMA)
    f = np.array([rows[j][c] for j, c in enumerate(choices)])
    br = social_cost(instance, x, Mechanism.SMITH)
    target = 2 * GAMMA * br.social - (2 * GAMMA - 1) * br.eta
    resid = abs(f.sum() - target) / max(1.0, abs(target))
    return _certificate("GammaPotential", f, rows, f_values=f, sum_f=float(f.sum()), identity_residual=resid)


def improved_local_search(
    instance: CongestionInstance,
    init: Assignment | None = None,
    eps_rel: float = 1e-9,
    max_iters: int = 100_000,
) -> SearchResult:
    """Repeatedly apply the move with the largest potential decrease.

    A move of ``j`` counts when it lowers ``f_j`` by more than
    ``eps_rel * max(1, f_j)``. Ties go to the lowest job, then the lowest
    strategy index.
    """
    _require_scheduling(instance)
    choices = list(_pure(instance, init if init is not None else default_init(instance)))
    moves = 0
    while moves < max_iters:
        rows = _pair_sums(instance, choices, GAMMA)
        best = None
        for j, row in enumerate(rows):
            f = row[choices[j]]
            i = int(np.argmin(row))
            gain = f - row[i]
            if gain > eps_rel * max(1.0, f) and (best is None or gain > best[0]):
                best = (gain, j, i)
        if best is None:
            return SearchResult(Assignment.from_choices(instance, choices), True, moves)
        _, j, i = best
        choices[j] = i
        moves += 1
    x = Assignment.from_choices(instance, choices)
    return SearchResult(x, check_gamma_potential(instance, x).max_violation <= eps_rel, moves)

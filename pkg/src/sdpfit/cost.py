"""Player and social costs under Smith's Rule, Proportional Sharing and Rand.

All three congestion mechanisms share one evaluation path: for a marginal
matrix ``z`` we compute ``R[e, j]``, the expected time player ``j`` would need
on resource ``e`` given everyone else's usage. ``R`` never depends on ``j``'s
own marginal, so it simultaneously yields current costs and the exact cost of
every unilateral deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import (
    AffineInstance,
    Assignment,
    CongestionInstance,
    Instance,
    SdpfitError,
    precedes,
    usage_marginals,
)


class Mechanism(str, Enum):
    SMITH = "smith"
    PS = "ps"
    RAND = "rand"


class StrategyOutOfRange(SdpfitError, IndexError):
    pass


class MixedAssignmentUnsupported(SdpfitError, ValueError):
    pass


def after_probability(dj: float, dk: float) -> float:
    """Probability that Rand schedules ``j`` after ``k``; 1/2 when undetermined."""
    if math.isinf(dj) and math.isinf(dk):
        return 0.5
    if math.isinf(dj):
        return 1.0
    if math.isinf(dk):
        return 0.0
    s = dj + dk
    return 0.5 if s == 0 else dj / s


def _rand_after(instance: CongestionInstance, e: int) -> np.ndarray:
    """``P[a, b]`` = prob. that ``order[e][a]`` runs after ``order[e][b]``, zero diagonal."""
    cache = instance.__dict__.setdefault("_rand_after", {})
    if e not in cache:
        o = instance.order[e]
        d = instance.ratios[e, o]
        P = np.array([[after_probability(d[a], d[b]) for b in range(len(o))] for a in range(len(o))])
        np.fill_diagonal(P, 0.0)
        cache[e] = P
    return cache[e]


def resource_costs(instance: CongestionInstance, z: np.ndarray, m: Mechanism) -> np.ndarray:
    """Time ``R[e, j]`` that ``j`` would spend on ``e`` against the others' marginals."""
    m = Mechanism(m)
    R = np.zeros((instance.n_resources, instance.n_players))
    w_all = instance.weights
    for e, o in enumerate(instance.order):
        if len(o) == 0:
            continue
        p = instance.proc[e, o]
        ze = z[e, o]
        pz = p * ze
        if m is Mechanism.RAND:
            R[e, o] = p + _rand_after(instance, e) @ pz
            continue
        before = np.cumsum(pz) - pz
        cost = p + before
        if m is Mechanism.PS:
            wz = w_all[o] * ze
            after = wz[::-1].cumsum()[::-1] - wz
            d = instance.ratios[e, o]
            with np.errstate(invalid="ignore"):
                cost = cost + np.where(after > 0, d * after, 0.0)
        R[e, o] = cost
    return R


@dataclass(frozen=True)
class CostBreakdown:
    """Per-player costs ``C_j``, weighted costs and the social cost.

    ``eta`` (weighted processing) and ``delays`` (``D_j``, the weighted delay
    ``j`` inflicts on players behind it) are ordering quantities independent
    of the mechanism; for Smith's Rule ``social == eta + delays.sum()``.
    """

    mechanism: str
    per_player: np.ndarray
    weighted: np.ndarray
    social: float
    eta: float | None = None
    delays: np.ndarray | None = None
    loads: np.ndarray | None = None

    def to_json(self, instance: Instance) -> dict:
        ids = [p.id for p in instance.players]
        out = {
            "mechanism": self.mechanism,
            "social": self.social,
            "perPlayer": dict(zip(ids, self.per_player.tolist())),
        }
        if self.eta is not None:
            out["eta"] = self.eta
        if self.delays is not None:
            out["D"] = dict(zip(ids, self.delays.tolist()))
        return out


def _expected_over_strategies(instance: Instance, x: Assignment, R: np.ndarray) -> np.ndarray:
    C = np.zeros(instance.n_players)
    for j, strats in enumerate(instance.strategy_resources):
        C[j] = sum(x.probs[j][i] * R[s, j].sum() for i, s in enumerate(strats) if x.probs[j][i])
    return C


def eta_and_delays(instance: CongestionInstance, z: np.ndarray) -> tuple[float, np.ndarray]:
    w = instance.weights
    eta = float((instance.proc * z * w).sum())
    D = np.zeros(instance.n_players)
    for e, o in enumerate(instance.order):
        if len(o) == 0:
            continue
        wz = w[o] * z[e, o]
        after = wz[::-1].cumsum()[::-1] - wz
        D[o] += instance.proc[e, o] * z[e, o] * after
    return eta, D


def social_cost(instance: Instance, x: Assignment, m: Mechanism | str | None = None) -> CostBreakdown:
    if isinstance(instance, AffineInstance):
        return affine_cost(instance, x)
    m = Mechanism.SMITH if m is None else Mechanism(m)
    z = usage_marginals(instance, x)
    C = _expected_over_strategies(instance, x, resource_costs(instance, z, m))
    weighted = instance.weights * C
    eta, D = eta_and_delays(instance, z)
    return CostBreakdown(m.value, C, weighted, float(weighted.sum()), eta, D)


def deviation_costs(instance: Instance, x: Assignment, m: Mechanism | str | None = None) -> list[np.ndarray]:
    """``C_j(x_{-j}, i)`` for every player and strategy, one array per player."""
    if isinstance(instance, AffineInstance):
        return _affine_deviations(instance, x)
    z = usage_marginals(instance, x)
    R = resource_costs(instance, z, Mechanism.SMITH if m is None else Mechanism(m))
    return [np.array([R[s, j].sum() for s in strats]) for j, strats in enumerate(instance.strategy_resources)]


def deviation_cost(
    instance: Instance,
    x: Assignment,
    j: int,
    i: int,
    m: Mechanism | str | None = None,
    literal: bool = False,
) -> float:
    """Cost of player ``j`` when it plays strategy ``i``.

    ``literal=True`` evaluates the right-hand side of the equilibrium
    inequality with every marginal taken from ``x`` unchanged, term by term.
    ``literal=False`` replaces ``j``'s distribution by strategy ``i`` and
    recomputes ``C_j`` from scratch. For the three scheduling mechanisms the
    two agree, since no term involves ``j``'s own marginal; for affine games
    the literal form counts ``j``'s current load on shared resources.
    """
    if not 0 <= i < instance.strategy_counts[j]:
        raise StrategyOutOfRange(f"player {instance.players[j].id} has no strategy {i}")
    if not literal:
        y = x.with_choice(j, i)
        if isinstance(instance, AffineInstance):
            return _affine_player_costs(instance, y)[j]
        return float(social_cost(instance, y, m).per_player[j])
    z = usage_marginals(instance, x)
    s = instance.strategy_resources[j][i]
    if isinstance(instance, AffineInstance):
        w, a, b = instance.rweights, instance.a, instance.b
        load = (w * z).sum(axis=1)
        return float(sum(w[e, j] * (a[e] * (load[e] + w[e, j]) + b[e]) for e in s))
    m = Mechanism.SMITH if m is None else Mechanism(m)
    p, d, wts = instance.proc, instance.ratios, instance.weights
    total = 0.0
    for e in s:
        t = p[e, j]
        for k in instance.users[e]:
            if k == j or z[e, k] == 0:
                continue
            if m is Mechanism.RAND:
                t += after_probability(d[e, j], d[e, k]) * p[e, k] * z[e, k]
            elif precedes(instance, e, k, j):
                t += p[e, k] * z[e, k]
            elif m is Mechanism.PS and wts[k] > 0:
                t += wts[k] * z[e, k] * d[e, j]
        total += t
    return float(total)


# ---------------------------------------------------------------------------
# affine congestion games


def _require_pure(x: Assignment) -> None:
    if not x.is_pure:
        raise MixedAssignmentUnsupported("affine costs are defined for pure profiles only")


def loads(instance: AffineInstance, x: Assignment) -> np.ndarray:
    return (instance.rweights * usage_marginals(instance, x)).sum(axis=1)


def _affine_player_costs(instance: AffineInstance, x: Assignment) -> np.ndarray:
    _require_pure(x)
    ell = loads(instance, x)
    lat = instance.a * ell + instance.b
    w = instance.rweights
    C = np.zeros(instance.n_players)
    for j, c in enumerate(x.choices()):
        s = instance.strategy_resources[j][c]
        C[j] = float((w[s, j] * lat[s]).sum())
    return C


def _affine_deviations(instance: AffineInstance, x: Assignment) -> list[np.ndarray]:
    _require_pure(x)
    z = usage_marginals(instance, x)
    w, a, b = instance.rweights, instance.a, instance.b
    ell = (w * z).sum(axis=1)
    out = []
    for j, strats in enumerate(instance.strategy_resources):
        others = ell - w[:, j] * z[:, j]
        out.append(np.array([float((w[s, j] * (a[s] * (others[s] + w[s, j]) + b[s])).sum()) for s in strats]))
    return out


def affine_cost(instance: AffineInstance, x: Assignment) -> CostBreakdown:
    C = _affine_player_costs(instance, x)
    ell = loads(instance, x)
    social = float((instance.a * ell**2 + instance.b * ell).sum())
    return CostBreakdown("affine", C, C.copy(), social, loads=ell)

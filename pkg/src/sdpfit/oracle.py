"""Brute-force ground truth for small instances.

Besides exhaustive optima and equilibrium enumeration, this module holds
schedule simulators that compute completion times from first principles
(sequential processing, processor sharing, random orderings) without using
the closed-form cost formulas, so the two can be cross-checked.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .cost import Mechanism, social_cost
from .equilibria import check_equilibrium
from .model import AffineInstance, Assignment, CongestionInstance, Instance, SdpfitError

DEFAULT_CAP = 2_000_000


class SearchSpaceTooLarge(SdpfitError, ValueError):
    pass


class NoEquilibriumFound(SdpfitError, RuntimeError):
    pass


def profile_count(instance: Instance) -> int:
    return math.prod(instance.strategy_counts)


def pure_profiles(instance: Instance, cap: int = DEFAULT_CAP) -> Iterator[tuple[int, ...]]:
    """Mixed-radix enumeration of all pure profiles, last player fastest."""
    total = profile_count(instance)
    if total > cap:
        raise SearchSpaceTooLarge(f"{total} profiles exceed the cap of {cap}")
    return itertools.product(*(range(n) for n in instance.strategy_counts))


def _mech(instance: Instance, m):
    return None if isinstance(instance, AffineInstance) else Mechanism(m)


def brute_force_opt(
    instance: Instance, m: Mechanism | str | None = Mechanism.SMITH, cap: int = DEFAULT_CAP
) -> tuple[float, Assignment]:
    m = _mech(instance, m)
    best, arg = math.inf, None
    for c in pure_profiles(instance, cap):
        x = Assignment.from_choices(instance, c)
        v = social_cost(instance, x, m).social
        if v < best:
            best, arg = v, x
    return best, arg


def enumerate_pure_equilibria(
    instance: Instance, m: Mechanism | str | None = Mechanism.SMITH, tol: float = 1e-9, cap: int = DEFAULT_CAP
) -> list[tuple[Assignment, float]]:
    m = _mech(instance, m)
    out = []
    for c in pure_profiles(instance, cap):
        x = Assignment.from_choices(instance, c)
        if check_equilibrium(instance, x, m, tol).is_equilibrium:
            out.append((x, social_cost(instance, x, m).social))
    return out


@dataclass(frozen=True)
class OracleReport:
    mechanism: str
    opt: dict[str, float]
    opt_profiles: dict[str, Assignment]
    equilibria: list[tuple[Assignment, float]] = field(default_factory=list)
    coordination_ratio: float = math.nan
    poa: float = math.nan

    def to_json(self, instance: Instance) -> dict:
        from .model import assignment_to_json

        return {
            "mechanism": self.mechanism,
            "opt": self.opt,
            "optProfiles": {k: assignment_to_json(v, instance)["x"] for k, v in self.opt_profiles.items()},
            "equilibria": [{"x": assignment_to_json(x, instance)["x"], "cost": c} for x, c in self.equilibria],
            "coordinationRatio": self.coordination_ratio,
            "poa": self.poa,
        }


def _ratio(num: float, den: float) -> float:
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


def ratio_report(
    instance: Instance, m: Mechanism | str | None = Mechanism.SMITH, tol: float = 1e-9, cap: int = DEFAULT_CAP
) -> OracleReport:
    """Worst pure equilibrium under ``m`` against the Smith optimum and the ``m`` optimum."""
    m = _mech(instance, m)
    if m is None:
        opt, arg = brute_force_opt(instance, None, cap)
        opts, args, name = {"affine": opt}, {"affine": arg}, "affine"
        smith_opt = opt
    else:
        opts, args = {}, {}
        for mech in Mechanism:
            opts[mech.value], args[mech.value] = brute_force_opt(instance, mech, cap)
        name, smith_opt = m.value, opts[Mechanism.SMITH.value]
    eqs = enumerate_pure_equilibria(instance, m, tol, cap)
    if not eqs:
        raise NoEquilibriumFound(f"no pure equilibrium under {name}")
    worst = max(c for _, c in eqs)
    return OracleReport(name, opts, args, eqs, _ratio(worst, smith_opt), _ratio(worst, opts[name]))


# ---------------------------------------------------------------------------
# schedule simulators


def _jobs_on(instance: CongestionInstance, choices: Sequence[int]) -> list[list[int]]:
    out: list[list[int]] = [[] for _ in range(instance.n_resources)]
    for j, c in enumerate(choices):
        for e in instance.strategy_resources[j][c]:
            out[e].append(j)
    return out


def _smith_key(instance: CongestionInstance, e: int, j: int):
    w = instance.players[j].weight
    p = instance.players[j].processing[instance.resource_ids[e]]
    return (p / w if w > 0 else math.inf, j)


def simulate_sequential(instance: CongestionInstance, e: int, jobs: Sequence[int]) -> dict[int, float]:
    """Completion times when ``e`` runs its jobs one after another by Smith ratio."""
    rid = instance.resource_ids[e]
    t, out = 0.0, {}
    for j in sorted(jobs, key=lambda j: _smith_key(instance, e, j)):
        t += instance.players[j].processing[rid]
        out[j] = t
    return out


def simulate_sharing(instance: CongestionInstance, e: int, jobs: Sequence[int]) -> dict[int, float]:
    """Event-driven processor sharing: rates proportional to weight among unfinished jobs.

    Zero-weight jobs receive capacity only once every positive-weight job is
    done, and then run one at a time by index.
    """
    rid = instance.resource_ids[e]
    rem = {j: float(instance.players[j].processing[rid]) for j in jobs}
    w = {j: float(instance.players[j].weight) for j in jobs}
    t, out = 0.0, {}
    for j in [j for j in rem if rem[j] == 0.0 and w[j] > 0]:
        out[j] = 0.0
        del rem[j]
    while rem:
        active = [j for j in rem if w[j] > 0] or [min(rem)]
        tw = sum(w[j] for j in active)
        rate = {j: (w[j] / tw if tw > 0 else 1.0) for j in active}
        dt = min(rem[j] / rate[j] for j in active)
        t += dt
        for j in active:
            rem[j] -= rate[j] * dt
        done = [j for j in active if rem[j] <= 1e-12 * max(1.0, t)]
        for j in done:
            out[j] = t
            del rem[j]
    return out


def random_orderings(ratios: dict[int, float]) -> list[tuple[tuple[int, ...], float]]:
    """All orderings with their probabilities under repeated "choose the last job".

    The last job is drawn with probability proportional to its ratio; jobs with
    infinite ratio are drawn first (uniformly), and an all-zero remainder is
    drawn uniformly.
    """
    out: list[tuple[tuple[int, ...], float]] = []

    def rec(left: tuple[int, ...], suffix: tuple[int, ...], prob: float) -> None:
        if not left:
            out.append((suffix, prob))
            return
        inf = [j for j in left if math.isinf(ratios[j])]
        if inf:
            weights = {j: (1.0 if j in inf else 0.0) for j in left}
        else:
            tot = sum(ratios[j] for j in left)
            weights = {j: (ratios[j] if tot > 0 else 1.0) for j in left}
        tot = sum(weights.values())
        for j in left:
            if weights[j] > 0:
                rest = tuple(k for k in left if k != j)
                rec(rest, (j,) + suffix, prob * weights[j] / tot)

    rec(tuple(sorted(ratios)), (), 1.0)
    return out


def simulate_random(instance: CongestionInstance, e: int, jobs: Sequence[int]) -> dict[int, float]:
    """Expected completion times over the exact distribution of random orderings."""
    rid = instance.resource_ids[e]
    p = {j: float(instance.players[j].processing[rid]) for j in jobs}
    ratios = {j: (p[j] / instance.players[j].weight if instance.players[j].weight > 0 else math.inf) for j in jobs}
    out = {j: 0.0 for j in jobs}
    for order, prob in random_orderings(ratios):
        t = 0.0
        for j in order:
            t += p[j]
            out[j] += prob * t
    return out


_SIMULATORS = {
    Mechanism.SMITH: simulate_sequential,
    Mechanism.PS: simulate_sharing,
    Mechanism.RAND: simulate_random,
}


def simulate_completion_times(instance: CongestionInstance, choices: Sequence[int], m: Mechanism | str) -> np.ndarray:
    """Per-player cost of a pure profile, summed over the resources it uses."""
    sim = _SIMULATORS[Mechanism(m)]
    C = np.zeros(instance.n_players)
    for e, jobs in enumerate(_jobs_on(instance, choices)):
        if jobs:
            for j, t in sim(instance, e, jobs).items():
                C[j] += t
    return C


def simulate_social_cost(instance: CongestionInstance, choices: Sequence[int], m: Mechanism | str) -> float:
    return float(instance.weights @ simulate_completion_times(instance, choices, m))


def expected_cost_by_enumeration(instance: Instance, x: Assignment, m: Mechanism | str | None) -> tuple[np.ndarray, float]:
    """Per-player and social cost of a mixed profile as an explicit average over pure realizations."""
    per = np.zeros(instance.n_players)
    social = 0.0
    for c in pure_profiles(instance):
        prob = math.prod(x.probs[j][i] for j, i in enumerate(c))
        if prob == 0:
            continue
        br = social_cost(instance, Assignment.from_choices(instance, c), m)
        per += prob * br.per_player
        social += prob * br.social
    return per, social

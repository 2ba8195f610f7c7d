"""Nash and coarse-correlated equilibrium checks, and best-response dynamics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .cost import Mechanism, deviation_costs, social_cost
from .model import PROB_TOL, Assignment, DimensionMismatch, Instance, SdpfitError, parse_assignment, assignment_to_json

DEFAULT_TOL = 1e-9


class EmptySupport(SdpfitError, ValueError):
    pass


@dataclass(frozen=True)
class ProfileDistribution:
    """Finitely supported distribution over pure profiles."""

    support: tuple[tuple[Assignment, float], ...]

    def validate(self, instance: Instance) -> "ProfileDistribution":
        if not self.support:
            raise EmptySupport("distribution has no support")
        total = 0.0
        for x, p in self.support:
            x.validate(instance)
            if not x.is_pure:
                raise ValueError("distribution support must consist of pure profiles")
            if p < 0:
                raise ValueError("negative probability in distribution")
            total += p
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"distribution probabilities sum to {total!r}")
        return self

    @classmethod
    def point_mass(cls, x: Assignment) -> "ProfileDistribution":
        return cls(((x, 1.0),))

    @classmethod
    def uniform(cls, profiles: Sequence[Assignment]) -> "ProfileDistribution":
        p = 1.0 / len(profiles) if profiles else 0.0
        return cls(tuple((x, p) for x in profiles))

    def to_json(self, instance: Instance) -> dict:
        return {"support": [{"x": assignment_to_json(x, instance)["x"], "p": p} for x, p in self.support]}


def parse_distribution(raw: Mapping, instance: Instance) -> ProfileDistribution:
    entries = raw.get("support", [])
    if not entries:
        raise EmptySupport("distribution has no support")
    sup = tuple((parse_assignment({"x": ent["x"]}, instance), float(ent["p"])) for ent in entries)
    return ProfileDistribution(sup).validate(instance)


@dataclass(frozen=True)
class EquilibriumReport:
    max_violation: float
    worst: tuple[int, int] | None
    is_equilibrium: bool
    tol: float
    costs: np.ndarray

    def to_json(self, instance: Instance) -> dict:
        worst = None
        if self.worst is not None:
            worst = {"player": instance.players[self.worst[0]].id, "strategy": self.worst[1]}
        return {
            "isEquilibrium": self.is_equilibrium,
            "maxViolation": self.max_violation,
            "worst": worst,
            "tol": self.tol,
        }


def _report(current: np.ndarray, devs: Sequence[np.ndarray], tol: float) -> EquilibriumReport:
    worst, vmax = None, 0.0
    for j, row in enumerate(devs):
        gain = np.maximum(0.0, current[j] - row) / max(1.0, current[j])
        if len(gain) and gain.max() > vmax:
            vmax = float(gain.max())
            worst = (j, int(gain.argmax()))
    return EquilibriumReport(vmax, worst, vmax <= tol, tol, current)


def player_costs(instance: Instance, x: Assignment, m: Mechanism | str | None) -> np.ndarray:
    return social_cost(instance, x, m).per_player


def check_equilibrium(
    instance: Instance, x: Assignment, m: Mechanism | str | None = None, tol: float = DEFAULT_TOL
) -> EquilibriumReport:
    """Relative Nash violation ``max(0, C_j(x) - C_j(x_-j, i)) / max(1, C_j(x))``.

    Mixed profiles are evaluated with the independent-randomization costs.
    """
    return _report(player_costs(instance, x, m), deviation_costs(instance, x, m), tol)


def check_cce(
    instance: Instance, sigma: ProfileDistribution, m: Mechanism | str | None = None, tol: float = DEFAULT_TOL
) -> EquilibriumReport:
    """Same violation measure with both sides replaced by expectations over ``sigma``."""
    sigma.validate(instance)
    current = np.zeros(instance.n_players)
    devs = [np.zeros(n) for n in instance.strategy_counts]
    for x, p in sigma.support:
        if p == 0:
            continue
        current += p * player_costs(instance, x, m)
        for j, row in enumerate(deviation_costs(instance, x, m)):
            devs[j] += p * row
    return _report(current, devs, tol)


@dataclass(frozen=True)
class DynamicsResult:
    assignment: Assignment
    converged: bool
    moves: int
    trace: tuple[tuple[int, int], ...]


def improvement_threshold(cost: float, tol: float) -> float:
    return tol * max(1.0, cost)


def best_response_dynamics(
    instance: Instance,
    m: Mechanism | str | None,
    init: Assignment,
    max_iters: int = 10_000,
    policy: str = "round-robin",
    seed: int | None = None,
    tol: float = DEFAULT_TOL,
) -> DynamicsResult:
    """Move one player at a time to a strictly better strategy.

    ``round-robin`` scans players by index and takes the first improving
    strategy; ``random`` draws the next improving (player, strategy) pair from
    a seeded generator. A move needs a gain above ``tol * max(1, C_j)``, the
    same normalization ``check_equilibrium`` uses, so convergence implies the
    check passes at ``tol``.
    """
    init.validate(instance)
    if not init.is_pure:
        raise DimensionMismatch("best-response dynamics start from a pure profile")
    choices = list(init.choices())
    rng = np.random.default_rng(seed)
    trace: list[tuple[int, int]] = []
    start = 0
    while len(trace) < max_iters:
        x = Assignment.from_choices(instance, choices)
        cur = player_costs(instance, x, m)
        devs = deviation_costs(instance, x, m)
        options = []
        for j, row in enumerate(devs):
            thr = improvement_threshold(cur[j], tol)
            better = [i for i in range(len(row)) if i != choices[j] and cur[j] - row[i] > thr]
            if better:
                options.append((j, better))
        if not options:
            return DynamicsResult(x, True, len(trace), tuple(trace))
        if policy == "random":
            j, better = options[rng.integers(len(options))]
            i = better[rng.integers(len(better))]
        else:
            # first improving player at or after the sweep position
            j, better = min(options, key=lambda o: (o[0] - start) % instance.n_players)
            i = better[0]
            start = (j + 1) % instance.n_players
        choices[j] = i
        trace.append((j, i))
    x = Assignment.from_choices(instance, choices)
    return DynamicsResult(x, check_equilibrium(instance, x, m, tol).is_equilibrium, len(trace), tuple(trace))

"""Instances, assignments and the per-resource processing order.

Players and resources are addressed by string ids in every external format;
internally they get dense indices in declaration order. Instances are frozen
after validation and cache their derived arrays lazily.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12


class SdpfitError(Exception):
    """Base class for all errors raised by this package."""


class InstanceError(SdpfitError, ValueError):
    pass


class UnknownResource(InstanceError):
    pass


class EmptyStrategy(InstanceError):
    pass


class NegativeValue(InstanceError):
    pass


class MissingProcessingTime(InstanceError):
    pass


class DimensionMismatch(SdpfitError, ValueError):
    pass


@dataclass(frozen=True)
class Player:
    id: str
    weight: float
    strategies: tuple[tuple[str, ...], ...]
    processing: Mapping[str, float]


@dataclass(frozen=True)
class AffinePlayer:
    id: str
    strategies: tuple[tuple[str, ...], ...]
    resource_weights: Mapping[str, float]


@dataclass(frozen=True)
class AffineResource:
    id: str
    a: float
    b: float


class _Indexed:
    """Shared index bookkeeping for both instance kinds."""

    resource_ids: tuple[str, ...]
    players: tuple

    @property
    def n_players(self) -> int:
        return len(self.players)

    @property
    def n_resources(self) -> int:
        return len(self.resource_ids)

    @cached_property
    def resource_index(self) -> dict[str, int]:
        return {r: i for i, r in enumerate(self.resource_ids)}

    @cached_property
    def player_index(self) -> dict[str, int]:
        return {pl.id: j for j, pl in enumerate(self.players)}

    @cached_property
    def strategy_resources(self) -> tuple[tuple[np.ndarray, ...], ...]:
        """Resource indices of every strategy, per player."""
        idx = self.resource_index
        return tuple(
            tuple(np.array([idx[r] for r in s], dtype=int) for s in pl.strategies)
            for pl in self.players
        )

    @cached_property
    def strategy_counts(self) -> tuple[int, ...]:
        return tuple(len(pl.strategies) for pl in self.players)

    @cached_property
    def users(self) -> tuple[np.ndarray, ...]:
        """Players having the resource in at least one strategy, by index."""
        out: list[set[int]] = [set() for _ in self.resource_ids]
        for j, strats in enumerate(self.strategy_resources):
            for s in strats:
                for e in s:
                    out[e].add(j)
        return tuple(np.array(sorted(u), dtype=int) for u in out)

    @property
    def is_scheduling(self) -> bool:
        return all(len(s) == 1 for pl in self.players for s in pl.strategies)

    def machine_of(self, j: int, i: int) -> int:
        """Machine index of strategy ``i`` of job ``j`` in a scheduling instance."""
        (e,) = self.strategy_resources[j][i]
        return int(e)


@dataclass(frozen=True)
class CongestionInstance(_Indexed):
    """Players with weights, strategy sets and resource-dependent processing times.

    Smith ratios are ``p / w``; a zero-weight player gets ratio ``inf`` so that
    it is processed last and never delays anyone.
    """

    resource_ids: tuple[str, ...]
    players: tuple[Player, ...]

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([pl.weight for pl in self.players], dtype=float)

    @cached_property
    def proc(self) -> np.ndarray:
        """Dense ``p[e, j]``; zero where ``j`` never uses ``e``."""
        p = np.zeros((self.n_resources, self.n_players))
        for e, us in enumerate(self.users):
            rid = self.resource_ids[e]
            for j in us:
                p[e, j] = self.players[j].processing[rid]
        return p

    @cached_property
    def ratios(self) -> np.ndarray:
        """Dense Smith ratios ``delta[e, j]`` (zero where undefined)."""
        w = self.weights
        d = np.zeros_like(self.proc)
        with np.errstate(divide="ignore", invalid="ignore"):
            for e, us in enumerate(self.users):
                for j in us:
                    d[e, j] = self.proc[e, j] / w[j] if w[j] > 0 else math.inf
        return d

    @cached_property
    def order(self) -> tuple[np.ndarray, ...]:
        """Users of every resource sorted by ``(ratio, index)``."""
        out = []
        for e, us in enumerate(self.users):
            out.append(np.array(sorted(us, key=lambda j: (self.ratios[e, j], j)), dtype=int))
        return tuple(out)

    @cached_property
    def rank(self) -> np.ndarray:
        """``rank[e, j]`` = position of ``j`` in ``order[e]``; -1 when undefined."""
        r = -np.ones((self.n_resources, self.n_players), dtype=int)
        for e, o in enumerate(self.order):
            r[e, o] = np.arange(len(o))
        return r

    def ratio(self, e: int, j: int) -> float:
        return float(self.ratios[e, j])

    def subinstance(self, indices: Sequence[int]) -> "CongestionInstance":
        return CongestionInstance(self.resource_ids, tuple(self.players[j] for j in indices))


@dataclass(frozen=True)
class AffineInstance(_Indexed):
    """Weighted congestion game with affine latencies ``a_e * load + b_e``."""

    resources: tuple[AffineResource, ...]
    players: tuple[AffinePlayer, ...]

    @property
    def resource_ids(self) -> tuple[str, ...]:  # type: ignore[override]
        return tuple(r.id for r in self.resources)

    @cached_property
    def a(self) -> np.ndarray:
        return np.array([r.a for r in self.resources], dtype=float)

    @cached_property
    def b(self) -> np.ndarray:
        return np.array([r.b for r in self.resources], dtype=float)

    @cached_property
    def rweights(self) -> np.ndarray:
        """Dense ``w[e, j]``; zero where ``j`` never uses ``e``."""
        w = np.zeros((self.n_resources, self.n_players))
        for e, us in enumerate(self.users):
            rid = self.resource_ids[e]
            for j in us:
                w[e, j] = self.players[j].resource_weights[rid]
        return w


Instance = CongestionInstance | AffineInstance


def precedes(instance: CongestionInstance, e: int, k: int, j: int) -> bool:
    """``k`` is processed before ``j`` on resource ``e`` (ratio, then index)."""
    if k == j:
        return False
    dk, dj = instance.ratios[e, k], instance.ratios[e, j]
    return bool(dk < dj or (dk == dj and k < j))


# ---------------------------------------------------------------------------
# assignments


@dataclass(frozen=True)
class Assignment:
    """Per-player probability vectors over the player's own strategy list."""

    probs: tuple[tuple[float, ...], ...]

    @classmethod
    def pure(cls, choices: Sequence[int], counts: Sequence[int]) -> "Assignment":
        if len(choices) != len(counts):
            raise DimensionMismatch(f"{len(choices)} choices for {len(counts)} players")
        rows = []
        for c, n in zip(choices, counts):
            if not 0 <= c < n:
                raise DimensionMismatch(f"strategy index {c} out of range for {n} strategies")
            rows.append(tuple(1.0 if i == c else 0.0 for i in range(n)))
        return cls(tuple(rows))

    @classmethod
    def from_choices(cls, instance: Instance, choices: Sequence[int]) -> "Assignment":
        return cls.pure(choices, instance.strategy_counts)

    @property
    def is_pure(self) -> bool:
        return all(v in (0.0, 1.0) for row in self.probs for v in row)

    def choices(self) -> tuple[int, ...]:
        if not self.is_pure:
            raise ValueError("assignment is mixed")
        return tuple(row.index(1.0) for row in self.probs)

    def with_choice(self, j: int, i: int) -> "Assignment":
        row = tuple(1.0 if t == i else 0.0 for t in range(len(self.probs[j])))
        return Assignment(self.probs[:j] + (row,) + self.probs[j + 1 :])

    def validate(self, instance: Instance) -> "Assignment":
        if len(self.probs) != instance.n_players:
            raise DimensionMismatch(
                f"assignment has {len(self.probs)} players, instance has {instance.n_players}"
            )
        for j, (row, n) in enumerate(zip(self.probs, instance.strategy_counts)):
            pid = instance.players[j].id
            if len(row) != n:
                raise DimensionMismatch(f"player {pid}: {len(row)} probabilities for {n} strategies")
            if any(v < -PROB_TOL or v > 1 + PROB_TOL for v in row):
                raise ValueError(f"player {pid}: probabilities outside [0, 1]")
            if abs(sum(row) - 1.0) > PROB_TOL:
                raise ValueError(f"player {pid}: probabilities sum to {sum(row)!r}")
        return self


def usage_marginals(instance: Instance, x: Assignment) -> np.ndarray:
    """Probability ``z[e, j]`` that player ``j`` uses resource ``e``."""
    x.validate(instance)
    z = np.zeros((instance.n_resources, instance.n_players))
    for j, strats in enumerate(instance.strategy_resources):
        for i, s in enumerate(strats):
            if x.probs[j][i]:
                z[s, j] += x.probs[j][i]
    return z


# ---------------------------------------------------------------------------
# construction and validation


def _nonneg(value, what: str) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise MissingProcessingTime(f"{what} is not finite")
    if v < 0:
        raise NegativeValue(f"{what} is negative ({v})")
    return v


def _strategies(pid: str, raw: Iterable, known: set[str]) -> tuple[tuple[str, ...], ...]:
    out: list[tuple[str, ...]] = []
    seen: set[frozenset] = set()
    for s in raw:
        s = tuple(str(r) for r in s)
        if not s:
            raise EmptyStrategy(f"player {pid} has an empty strategy")
        if len(set(s)) != len(s):
            raise InstanceError(f"player {pid}: strategy {list(s)} repeats a resource")
        for r in s:
            if r not in known:
                raise UnknownResource(r)
        key = frozenset(s)
        if key in seen:
            raise InstanceError(f"player {pid}: duplicate strategy {sorted(s)}")
        seen.add(key)
        out.append(s)
    if not out:
        raise EmptyStrategy(f"player {pid} has no strategies")
    return tuple(out)


def validate_instance(raw: Mapping) -> Instance:
    """Build an instance from the JSON-style description.

    ``kind`` defaults to ``"congestion"``. Errors name the offending player or
    resource.
    """
    kind = raw.get("kind", "congestion")
    players_raw = raw.get("players", [])
    if not players_raw:
        raise InstanceError("instance has no players")
    if kind == "congestion":
        resources = tuple(str(r) for r in raw["resources"])
        if len(set(resources)) != len(resources):
            raise InstanceError("duplicate resource ids")
        known = set(resources)
        players = []
        for pr in players_raw:
            pid = str(pr["id"])
            w = _nonneg(pr.get("weight", 1.0), f"weight of player {pid}")
            strats = _strategies(pid, pr["strategies"], known)
            proc_raw = pr.get("processing", {})
            proc = {}
            for r in {r for s in strats for r in s}:
                if r not in proc_raw or proc_raw[r] is None:
                    raise MissingProcessingTime(f"player {pid} on resource {r}")
                proc[r] = _nonneg(proc_raw[r], f"processing time of player {pid} on {r}")
            players.append(Player(pid, w, strats, proc))
        _unique_ids(players)
        return CongestionInstance(resources, tuple(players))
    if kind == "affine":
        resources = []
        for rr in raw["resources"]:
            rid = str(rr["id"])
            resources.append(
                AffineResource(rid, _nonneg(rr.get("a", 0.0), f"a of {rid}"), _nonneg(rr.get("b", 0.0), f"b of {rid}"))
            )
        if len({r.id for r in resources}) != len(resources):
            raise InstanceError("duplicate resource ids")
        known = {r.id for r in resources}
        aplayers = []
        for pr in players_raw:
            pid = str(pr["id"])
            strats = _strategies(pid, pr["strategies"], known)
            wr = pr.get("resource_weights", {})
            weights = {}
            for r in {r for s in strats for r in s}:
                if r not in wr:
                    raise MissingProcessingTime(f"player {pid} has no weight on resource {r}")
                weights[r] = _nonneg(wr[r], f"weight of player {pid} on {r}")
            aplayers.append(AffinePlayer(pid, strats, weights))
        _unique_ids(aplayers)
        return AffineInstance(tuple(resources), tuple(aplayers))
    raise InstanceError(f"unknown instance kind {kind!r}")


def _unique_ids(players) -> None:
    ids = [p.id for p in players]
    if len(set(ids)) != len(ids):
        raise InstanceError("duplicate player ids")


def scheduling_instance(
    processing: Sequence[Mapping[str, float]] | np.ndarray,
    weights: Sequence[float],
    machines: Sequence[str] | None = None,
    job_ids: Sequence[str] | None = None,
) -> CongestionInstance:
    """Machines become resources and every feasible machine a singleton strategy.

    ``processing`` is either a jobs x machines matrix with ``inf`` marking
    infeasible machines, or one ``{machine: p}`` dict per job.
    """
    if not isinstance(processing, np.ndarray) and processing and not isinstance(processing[0], Mapping):
        processing = np.asarray(processing, dtype=float)
    if isinstance(processing, np.ndarray):
        n, m = processing.shape
        machines = list(machines) if machines is not None else [f"m{i + 1}" for i in range(m)]
        processing = [
            {machines[i]: float(processing[j, i]) for i in range(m) if math.isfinite(processing[j, i])}
            for j in range(n)
        ]
    elif machines is None:
        seen: dict[str, None] = {}
        for row in processing:
            for mach in row:
                seen.setdefault(mach)
        machines = list(seen)
    job_ids = list(job_ids) if job_ids is not None else [f"j{j + 1}" for j in range(len(processing))]
    raw = {
        "kind": "congestion",
        "resources": list(machines),
        "players": [
            {"id": jid, "weight": w, "strategies": [[mach] for mach in row], "processing": dict(row)}
            for jid, w, row in zip(job_ids, weights, processing)
        ],
    }
    return validate_instance(raw)


def instance_to_json(instance: Instance) -> dict:
    if isinstance(instance, AffineInstance):
        return {
            "kind": "affine",
            "resources": [{"id": r.id, "a": r.a, "b": r.b} for r in instance.resources],
            "players": [
                {"id": p.id, "strategies": [list(s) for s in p.strategies], "resource_weights": dict(p.resource_weights)}
                for p in instance.players
            ],
        }
    return {
        "kind": "congestion",
        "resources": list(instance.resource_ids),
        "players": [
            {
                "id": p.id,
                "weight": p.weight,
                "strategies": [list(s) for s in p.strategies],
                "processing": dict(p.processing),
            }
            for p in instance.players
        ],
    }


def parse_assignment(raw: Mapping, instance: Instance) -> Assignment:
    """Read ``{"x": {playerId: [probs] | strategyIndex}}``."""
    xs = raw["x"] if "x" in raw else raw
    rows = []
    for j, pl in enumerate(instance.players):
        if pl.id not in xs:
            raise DimensionMismatch(f"assignment has no entry for player {pl.id}")
        v = xs[pl.id]
        n = instance.strategy_counts[j]
        if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
            if not 0 <= v < n:
                raise DimensionMismatch(f"player {pl.id}: strategy index {v} out of range")
            rows.append(tuple(1.0 if i == v else 0.0 for i in range(n)))
        else:
            rows.append(tuple(float(t) for t in v))
    extra = set(xs) - set(instance.player_index)
    if extra:
        raise DimensionMismatch(f"assignment names unknown players {sorted(extra)}")
    return Assignment(tuple(rows)).validate(instance)


def assignment_to_json(x: Assignment, instance: Instance) -> dict:
    if x.is_pure:
        return {"x": {pl.id: c for pl, c in zip(instance.players, x.choices())}}
    return {"x": {pl.id: list(row) for pl, row in zip(instance.players, x.probs)}}

"""Fan-in constrained first-fit-decreasing packing of spins into IMC blocks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from fpia.qubo import Qubo


class PackingError(ValueError):
    """A spin cannot fit in any block (fan-in above the input budget)."""

    def __init__(self, spin: int, fan_in: int, max_inputs: int):
        super().__init__(f"spin {spin} has fan-in {fan_in} > max_inputs {max_inputs}")
        self.spin = spin
        self.fan_in = fan_in
        self.max_inputs = max_inputs


@dataclass(frozen=True)
class ClusterParams:
    max_inputs: int
    max_outputs: int
    occupancy: float = 1.0
    # count only neighbours outside the cluster against max_inputs
    external_only: bool = False

    def __post_init__(self):
        if self.max_inputs < 1 or self.max_outputs < 1:
            raise ValueError("max_inputs and max_outputs must be >= 1")
        if not 0 < self.occupancy <= 1:
            raise ValueError("occupancy must lie in (0, 1]")

    @property
    def spin_cap(self) -> int:
        frac = Fraction(str(self.occupancy)) if isinstance(self.occupancy, float) else Fraction(self.occupancy)
        return max(1, math.ceil(frac * self.max_outputs))


@dataclass(frozen=True)
class Cluster:
    members: tuple[int, ...]
    input_union: frozenset[int]

    @property
    def external_inputs(self) -> frozenset[int]:
        return self.input_union - set(self.members)


@dataclass(frozen=True)
class Clustering:
    clusters: tuple[Cluster, ...]

    def __len__(self):
        return len(self.clusters)

    def directory(self) -> dict[int, tuple[int, int]]:
        """spin -> (cluster index, position within cluster)."""
        return {s: (b, k) for b, c in enumerate(self.clusters) for k, s in enumerate(c.members)}

    def to_dict(self) -> dict:
        return {"clusters": [{"members": list(c.members), "inputs": sorted(c.input_union)}
                             for c in self.clusters]}

    @classmethod
    def from_dict(cls, doc) -> "Clustering":
        return cls(tuple(Cluster(tuple(c["members"]), frozenset(c["inputs"]))
                         for c in doc["clusters"]))

    def dumps(self) -> str:
        return json.dumps(self.to_dict())


def ffd_pack(q: Qubo, p: ClusterParams) -> Clustering:
    """Greedy first-fit-decreasing packing.

    Spins are visited by decreasing fan-in (ties by index) and go into the
    first cluster that still has a free spin slot and whose input union stays
    within ``max_inputs`` after adding the spin's neighbours.
    """
    cap = p.spin_cap
    order = sorted(range(q.n), key=lambda s: (-q.fan_in(s), s))
    for s in range(q.n):
        if q.fan_in(s) > p.max_inputs:
            raise PackingError(s, q.fan_in(s), p.max_inputs)

    members: list[list[int]] = []
    unions: list[set[int]] = []
    for s in order:
        nbrs = q.neighbors(s)
        for k, union in enumerate(unions):
            if len(members[k]) >= cap:
                continue
            if p.external_only:
                size = len((union | nbrs.keys()) - set(members[k]) - {s})
            else:
                size = len(union) + sum(1 for j in nbrs if j not in union)
            if size <= p.max_inputs:
                members[k].append(s)
                union.update(nbrs)
                break
        else:
            members.append([s])
            unions.append(set(nbrs))
    return Clustering(tuple(Cluster(tuple(m), frozenset(u)) for m, u in zip(members, unions)))


@dataclass(frozen=True)
class UtilizationReport:
    improvement: Fraction | float
    used_cells: int
    # same metric with co-clustered neighbours excluded from I_j
    improvement_external: Fraction | float
    used_cells_external: int


def utilization(c: Clustering, n: int) -> UtilizationReport:
    """``n**2 / sum_j I_j * O_j``; ``inf`` when no cells are used."""
    used = sum(len(cl.input_union) * len(cl.members) for cl in c.clusters)
    used_ext = sum(len(cl.external_inputs) * len(cl.members) for cl in c.clusters)

    def ratio(u):
        return math.inf if u == 0 else Fraction(n * n, u)

    return UtilizationReport(ratio(used), used, ratio(used_ext), used_ext)


def validate(c: Clustering, q: Qubo, p: ClusterParams) -> list[str]:
    """Re-derive every clustering invariant; returns the violations (empty if valid)."""
    problems: list[str] = []
    seen: dict[int, int] = {}
    for b, cl in enumerate(c.clusters):
        if not cl.members:
            problems.append(f"cluster {b} is empty")
        for s in cl.members:
            if not 0 <= s < q.n:
                problems.append(f"cluster {b} has unknown spin {s}")
            elif s in seen:
                problems.append(f"spin {s} in clusters {seen[s]} and {b}")
            else:
                seen[s] = b
        if len(cl.members) > p.spin_cap:
            problems.append(f"cluster {b} has {len(cl.members)} spins > cap {p.spin_cap}")
        expected: set[int] = set()
        for s in cl.members:
            if 0 <= s < q.n:
                expected.update(q.neighbors(s))
        if set(cl.input_union) != expected:
            problems.append(f"cluster {b} input union differs from neighbours of its members")
        budget = len(expected - set(cl.members)) if p.external_only else len(expected)
        if budget > p.max_inputs:
            problems.append(f"cluster {b} needs {budget} inputs > {p.max_inputs}")
    missing = set(range(q.n)) - seen.keys()
    if missing:
        problems.append(f"spins not packed: {sorted(missing)[:10]}")
    return problems


def is_valid(c: Clustering, q: Qubo, p: ClusterParams) -> bool:
    return not validate(c, q, p)


def max_fan_in(q: Qubo) -> int:
    return max((q.fan_in(s) for s in range(q.n)), default=0)


def cluster_sizes(c: Clustering) -> Sequence[int]:
    return [len(cl.members) for cl in c.clusters]

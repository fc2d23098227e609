"""Functional model of the Ising machine, logical and as mapped onto IMC blocks.

A mapped block stores an ``(E + L) x L`` integer crossbar: ``E`` external
rows indexed by the spins routed in from other blocks, then ``L`` local
feedback rows, one column per local spin. Linear terms sit on a separate
always-on row (``bias``) that does not count against the input budget.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from fpia.cluster import Clustering
from fpia.qubo import Qubo, check_state, energy, local_field


@dataclass(frozen=True)
class Block:
    members: tuple[int, ...]
    external: tuple[int, ...]
    weights: np.ndarray
    bias: np.ndarray

    @property
    def rows(self) -> tuple[int, ...]:
        """Source spin of each crossbar row, external rows first."""
        return self.external + self.members


@dataclass(frozen=True)
class MappedMachine:
    n: int
    blocks: tuple[Block, ...]
    directory: dict[int, tuple[int, int]]
    constant: object = 0

    def with_weight(self, block: int, row: int, col: int, value) -> "MappedMachine":
        """Copy with one crossbar cell overwritten (used for fault injection)."""
        blk = self.blocks[block]
        w = blk.weights.copy()
        w[row, col] = value
        blocks = list(self.blocks)
        blocks[block] = Block(blk.members, blk.external, w, blk.bias)
        return MappedMachine(self.n, tuple(blocks), self.directory, self.constant)


class EmbeddingError(ValueError):
    pass


def build_mapped_machine(q: Qubo, c: Clustering) -> MappedMachine:
    dtype = np.int64 if q.is_integral() else object
    directory: dict[int, tuple[int, int]] = {}
    for b, cl in enumerate(c.clusters):
        for k, s in enumerate(cl.members):
            if s in directory:
                raise EmbeddingError(f"spin {s} appears in two clusters")
            directory[s] = (b, k)
    if len(directory) != q.n or any(not 0 <= s < q.n for s in directory):
        raise EmbeddingError("clustering does not partition the QUBO's spins")
    blocks = []
    for b, cl in enumerate(c.clusters):
        local = {s: k for k, s in enumerate(cl.members)}
        external = tuple(sorted(s for s in cl.input_union if s not in local))
        ext_row = {s: r for r, s in enumerate(external)}
        E = len(external)
        w = np.zeros((E + len(local), len(local)), dtype=dtype)
        bias = np.zeros(len(local), dtype=dtype)
        for s, col in local.items():
            bias[col] = q.linear[s]
            for j, wij in q.neighbors(s).items():
                if j in local:
                    w[E + local[j], col] = wij
                elif j in ext_row:
                    w[ext_row[j], col] = wij
                else:
                    raise EmbeddingError(f"coupling ({s}, {j}) has no crossbar row in block {b}")
        blocks.append(Block(tuple(cl.members), external, w, bias))
    return MappedMachine(q.n, tuple(blocks), directory, q.constant)


def mapped_field(m: MappedMachine, x: Sequence[int], i: int):
    """Field of spin ``i`` from its own block's crossbar and inputs only."""
    if len(x) != m.n:
        raise ValueError(f"state has length {len(x)}, machine has {m.n} spins")
    try:
        b, col = m.directory[i]
    except KeyError:
        raise KeyError(f"unknown spin {i}") from None
    blk = m.blocks[b]
    total = _py(blk.bias[col])
    column = blk.weights[:, col]
    for r, s in enumerate(blk.rows):
        if x[s]:
            total += _py(column[r])
    return total


def _py(v):
    return int(v) if isinstance(v, np.integer) else v


def mapped_energy(m: MappedMachine, x: Sequence[int]):
    """Energy recovered from block-local quantities only."""
    lin = 0
    pair2 = 0  # every coupling is seen from both endpoint blocks
    for i in range(m.n):
        if x[i]:
            b, col = m.directory[i]
            bias = _py(m.blocks[b].bias[col])
            lin += bias
            pair2 += mapped_field(m, x, i) - bias
    half = pair2 // 2 if isinstance(pair2, int) else pair2 / 2
    return m.constant + lin + half


def field_mismatches(q: Qubo, m: MappedMachine, num_states: int = 1000, seed: int = 0) -> int:
    """Count (state, spin) pairs where the crossbar field differs from the logical one.

    Logical fields come from a global sparse coupling matrix, mapped fields from
    the per-block crossbars; both in exact int64 arithmetic.
    """
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(num_states, q.n), dtype=np.int64)
    if not q.is_integral():
        bad = 0
        for x in X.tolist():
            bad += sum(local_field(q, x, i) != mapped_field(m, x, i) for i in range(q.n))
        return bad
    rows, cols, vals = [], [], []
    for i, j, w in q.edges():
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    A = sp.csr_matrix((np.asarray(vals, dtype=np.int64), (rows, cols)), shape=(q.n, q.n))
    logical = np.asarray(X @ A) + np.asarray(q.linear, dtype=np.int64)
    mapped = np.empty_like(logical)
    for blk in m.blocks:
        rows_idx = np.asarray(blk.rows, dtype=np.int64)
        cols_idx = np.asarray(blk.members, dtype=np.int64)
        mapped[:, cols_idx] = X[:, rows_idx] @ blk.weights.astype(np.int64) + blk.bias.astype(np.int64)
    return int(np.count_nonzero(logical != mapped))


# ---------------------------------------------------------------- annealing


@dataclass(frozen=True)
class AnnealSchedule:
    sweeps: int = 1000
    T_start: float = 3.0
    T_end: float = 0.05

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if not self.T_start >= self.T_end > 0:
            raise ValueError("need T_start >= T_end > 0")

    def temperature(self, k: int) -> float:
        if self.sweeps == 1:
            return self.T_start
        return self.T_start * (self.T_end / self.T_start) ** (k / (self.sweeps - 1))


@dataclass
class AnnealResult:
    state: list[int]
    energy: object
    proposals: int
    # (proposal index, spin) of every accepted flip when recording
    flips: list[tuple[int, int]] = field(default_factory=list)


def _metropolis(n: int, initial_energy_fn: Callable, field_fn: Callable, on_flip: Callable | None,
                s: AnnealSchedule, rng: random.Random, x: list[int], target, record: bool,
                max_proposals: int | None) -> AnnealResult:
    E = initial_energy_fn(x)
    best_e, best_x = E, list(x)
    flips: list[tuple[int, int]] = []
    proposals = 0
    if target is not None and E <= target:
        return AnnealResult(best_x, best_e, 0, flips)
    for k in range(s.sweeps):
        T = s.temperature(k)
        for i in range(n):
            u = 1.0 - rng.random()  # (0, 1]
            h = field_fn(x, i)
            d = -h if x[i] else h
            proposals += 1
            if d <= 0 or d <= -T * math.log(u):
                x[i] ^= 1
                if on_flip is not None:
                    on_flip(i, x[i])
                E += d
                if record:
                    flips.append((proposals - 1, i))
                if E < best_e:
                    best_e, best_x = E, list(x)
                    if target is not None and best_e <= target:
                        return AnnealResult(best_x, best_e, proposals, flips)
            if max_proposals is not None and proposals >= max_proposals:
                return AnnealResult(best_x, best_e, proposals, flips)
    return AnnealResult(best_x, best_e, proposals, flips)


def anneal(q: Qubo, s: AnnealSchedule = AnnealSchedule(), seed: int = 0, *, target=None,
           record: bool = False, max_proposals: int | None = None) -> AnnealResult:
    """Single-flip Metropolis annealing with geometric cooling; keeps the best state.

    Spins are proposed in index order every sweep. A flip with energy change
    ``d`` is accepted when ``d <= 0`` or ``d <= -T ln(u)``. Stops early once
    ``target`` is reached.
    """
    rng = random.Random(seed)
    x = [rng.getrandbits(1) for _ in range(q.n)]
    fields = [local_field(q, x, i) for i in range(q.n)]
    nbrs = [list(q.neighbors(i).items()) for i in range(q.n)]

    def on_flip(i, v):
        sign = 1 if v else -1
        for j, w in nbrs[i]:
            fields[j] += sign * w

    return _metropolis(q.n, lambda st: energy(q, st), lambda st, i: fields[i], on_flip,
                       s, rng, x, target, record, max_proposals)


def anneal_mapped(m: MappedMachine, s: AnnealSchedule = AnnealSchedule(), seed: int = 0, *,
                  target=None, record: bool = False, max_proposals: int | None = None,
                  synchronous: bool = False) -> AnnealResult:
    """Anneal using crossbar fields only.

    With the default sequential update this reproduces :func:`anneal` flip for
    flip. ``synchronous=True`` updates each block's spins from the state at the
    start of the sweep instead; it has no convergence guarantee.
    """
    rng = random.Random(seed)
    x = [rng.getrandbits(1) for _ in range(m.n)]
    if not synchronous:
        return _metropolis(m.n, lambda st: mapped_energy(m, st), lambda st, i: mapped_field(m, st, i),
                           None, s, rng, x, target, record, max_proposals)
    best_x = list(x)
    best_e = mapped_energy(m, x)
    flips: list[tuple[int, int]] = []
    proposals = 0
    for k in range(s.sweeps):
        T = s.temperature(k)
        snap = list(x)
        for i in range(m.n):
            u = 1.0 - rng.random()
            h = mapped_field(m, snap, i)
            d = -h if snap[i] else h
            proposals += 1
            if d <= 0 or d <= -T * math.log(u):
                x[i] ^= 1
                if record:
                    flips.append((proposals - 1, i))
        e = mapped_energy(m, x)
        if e < best_e:
            best_e, best_x = e, list(x)
        if target is not None and best_e <= target:
            break
        if max_proposals is not None and proposals >= max_proposals:
            break
    return AnnealResult(best_x, best_e, proposals, flips)


def check_solution(q: Qubo, result: AnnealResult) -> bool:
    check_state(q, result.state)
    return energy(q, result.state) == result.energy

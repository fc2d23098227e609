"""Simulated-annealing placement minimizing half-perimeter wirelength.

The schedule follows the usual VPR recipe: the starting temperature is
20x the standard deviation of the cost over 100 random moves, the cooling
factor depends on the acceptance ratio, and a range limiter shrinks the
move window as acceptance falls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from fpia.pnr.netlist import Netlist

TARGET_TILE_OCCUPANCY = 0.9


class PlacementError(ValueError):
    pass


def default_grid(num_clusters: int, occupancy: float = TARGET_TILE_OCCUPANCY) -> int:
    """Smallest square grid leaving roughly 10% of the tiles free."""
    return max(1, math.ceil(math.sqrt(num_clusters / occupancy)))


@dataclass(frozen=True)
class Placement:
    M: int
    xy: tuple[tuple[int, int], ...]
    cost: int

    def tile(self, block: int) -> int:
        x, y = self.xy[block]
        return y * self.M + x

    def to_dict(self) -> dict:
        return {"M": self.M, "cost": self.cost,
                "assignment": {str(b): list(p) for b, p in enumerate(self.xy)}}


def _net_arrays(nl: Netlist):
    """Deduplicated net terminal lists with multiplicities, plus block->net index."""
    groups: dict[tuple[int, ...], int] = {}
    for net in nl.nets:
        key = tuple(sorted(set(net.blocks)))
        groups[key] = groups.get(key, 0) + 1
    keys = sorted(groups)
    net_ptr = np.zeros(len(keys) + 1, dtype=np.int64)
    pins = []
    for k, key in enumerate(keys):
        pins.extend(key)
        net_ptr[k + 1] = len(pins)
    weights = np.array([groups[k] for k in keys], dtype=np.int64)
    per_block: list[list[int]] = [[] for _ in range(nl.num_blocks)]
    for k, key in enumerate(keys):
        for b in key:
            per_block[b].append(k)
    blk_ptr = np.zeros(nl.num_blocks + 1, dtype=np.int64)
    blk_nets = []
    for b, lst in enumerate(per_block):
        blk_nets.extend(lst)
        blk_ptr[b + 1] = len(blk_nets)
    return (net_ptr, np.asarray(pins, dtype=np.int64), weights,
            blk_ptr, np.asarray(blk_nets, dtype=np.int64))


@njit(cache=True)
def _net_cost(k, net_ptr, pins, weights, px, py):
    xmin = 1 << 30
    xmax = -1
    ymin = 1 << 30
    ymax = -1
    for q in range(net_ptr[k], net_ptr[k + 1]):
        b = pins[q]
        if px[b] < xmin:
            xmin = px[b]
        if px[b] > xmax:
            xmax = px[b]
        if py[b] < ymin:
            ymin = py[b]
        if py[b] > ymax:
            ymax = py[b]
    return weights[k] * ((xmax - xmin) + (ymax - ymin))


@njit(cache=True)
def _try_move(a, tx, ty, px, py, grid, M, net_ptr, pins, weights, blk_ptr, blk_nets,
              net_cost, stamp, mark, affected, new_cost):
    """Apply a move of block ``a`` to ``(tx, ty)`` (swapping any occupant).

    Returns (delta, n_affected, other_block); the caller reverts on rejection.
    """
    b = grid[ty * M + tx]
    ax, ay = px[a], py[a]
    grid[ty * M + tx] = a
    grid[ay * M + ax] = b
    px[a] = tx
    py[a] = ty
    if b >= 0:
        px[b] = ax
        py[b] = ay
    n_aff = 0
    for q in range(blk_ptr[a], blk_ptr[a + 1]):
        k = blk_nets[q]
        if mark[k] != stamp:
            mark[k] = stamp
            affected[n_aff] = k
            n_aff += 1
    if b >= 0:
        for q in range(blk_ptr[b], blk_ptr[b + 1]):
            k = blk_nets[q]
            if mark[k] != stamp:
                mark[k] = stamp
                affected[n_aff] = k
                n_aff += 1
    delta = 0
    for r in range(n_aff):
        k = affected[r]
        c = _net_cost(k, net_ptr, pins, weights, px, py)
        new_cost[r] = c
        delta += c - net_cost[k]
    return delta, n_aff, b


@njit(cache=True)
def _undo(a, b, ax, ay, px, py, grid, M):
    tx, ty = px[a], py[a]
    grid[ay * M + ax] = a
    grid[ty * M + tx] = b
    px[a] = ax
    py[a] = ay
    if b >= 0:
        px[b] = tx
        py[b] = ty


@njit(cache=True)
def _anneal(n_blocks, M, net_ptr, pins, weights, blk_ptr, blk_nets, seed):
    np.random.seed(seed)
    n_tiles = M * M
    perm = np.random.permutation(n_tiles)
    px = np.empty(n_blocks, dtype=np.int64)
    py = np.empty(n_blocks, dtype=np.int64)
    grid = -np.ones(n_tiles, dtype=np.int64)
    for b in range(n_blocks):
        px[b] = perm[b] % M
        py[b] = perm[b] // M
        grid[perm[b]] = b
    n_nets = len(weights)
    net_cost = np.empty(n_nets, dtype=np.int64)
    total = 0
    for k in range(n_nets):
        net_cost[k] = _net_cost(k, net_ptr, pins, weights, px, py)
        total += net_cost[k]
    if n_blocks <= 1 or n_nets == 0 or n_tiles <= 1:
        return px, py, total

    mark = -np.ones(n_nets, dtype=np.int64)
    affected = np.empty(n_nets, dtype=np.int64)
    new_cost = np.empty(n_nets, dtype=np.int64)
    stamp = 0

    rlim = float(M)
    moves_per_t = max(1, int(10.0 * n_blocks ** (4.0 / 3.0)))

    # starting temperature from the spread of 100 accepted random moves
    samples = np.empty(100, dtype=np.float64)
    for s in range(100):
        a = np.random.randint(0, n_blocks)
        tile = np.random.randint(0, n_tiles)
        tx, ty = tile % M, tile // M
        if tx == px[a] and ty == py[a]:
            samples[s] = total
            continue
        stamp += 1
        delta, n_aff, b = _try_move(a, tx, ty, px, py, grid, M, net_ptr, pins, weights,
                                    blk_ptr, blk_nets, net_cost, stamp, mark, affected, new_cost)
        for r in range(n_aff):
            net_cost[affected[r]] = new_cost[r]
        total += delta
        samples[s] = total
    T = 20.0 * samples.std()

    while True:
        accepted = 0
        for _ in range(moves_per_t):
            a = np.random.randint(0, n_blocks)
            r = int(rlim)
            x0 = max(0, px[a] - r)
            x1 = min(M - 1, px[a] + r)
            y0 = max(0, py[a] - r)
            y1 = min(M - 1, py[a] + r)
            tx = np.random.randint(x0, x1 + 1)
            ty = np.random.randint(y0, y1 + 1)
            if tx == px[a] and ty == py[a]:
                continue
            ax, ay = px[a], py[a]
            stamp += 1
            delta, n_aff, b = _try_move(a, tx, ty, px, py, grid, M, net_ptr, pins, weights,
                                        blk_ptr, blk_nets, net_cost, stamp, mark, affected, new_cost)
            if delta <= 0 or (T > 0 and np.random.random() < np.exp(-delta / T)):
                for q in range(n_aff):
                    net_cost[affected[q]] = new_cost[q]
                total += delta
                accepted += 1
            else:
                _undo(a, b, ax, ay, px, py, grid, M)
        ra = accepted / moves_per_t
        if T <= 0.0 or T < 0.005 * total / n_nets or total == 0:
            break
        if ra > 0.96:
            T *= 0.5
        elif ra > 0.8:
            T *= 0.9
        elif ra > 0.15:
            T *= 0.95
        else:
            T *= 0.8
        rlim = min(float(M), max(1.0, rlim * (1.0 - 0.44 + ra)))

    # greedy quench
    for _ in range(moves_per_t):
        a = np.random.randint(0, n_blocks)
        r = int(rlim)
        x0 = max(0, px[a] - r)
        x1 = min(M - 1, px[a] + r)
        y0 = max(0, py[a] - r)
        y1 = min(M - 1, py[a] + r)
        tx = np.random.randint(x0, x1 + 1)
        ty = np.random.randint(y0, y1 + 1)
        if tx == px[a] and ty == py[a]:
            continue
        ax, ay = px[a], py[a]
        stamp += 1
        delta, n_aff, b = _try_move(a, tx, ty, px, py, grid, M, net_ptr, pins, weights,
                                    blk_ptr, blk_nets, net_cost, stamp, mark, affected, new_cost)
        if delta <= 0:
            for q in range(n_aff):
                net_cost[affected[q]] = new_cost[q]
            total += delta
        else:
            _undo(a, b, ax, ay, px, py, grid, M)
    return px, py, total


def placement_cost(nl: Netlist, xy) -> int:
    """Total half-perimeter wirelength, recomputed from scratch."""
    total = 0
    for net in nl.nets:
        xs = [xy[b][0] for b in net.blocks]
        ys = [xy[b][1] for b in net.blocks]
        total += (max(xs) - min(xs)) + (max(ys) - min(ys))
    return total


def place(nl: Netlist, M: int, seed: int = 0) -> Placement:
    """Anneal the blocks of ``nl`` onto an ``M x M`` grid."""
    if nl.num_blocks > M * M:
        raise PlacementError(f"{nl.num_blocks} clusters do not fit on a {M}x{M} grid")
    if nl.num_blocks == 0:
        return Placement(M, (), 0)
    arrays = _net_arrays(nl)
    px, py, total = _anneal(nl.num_blocks, M, *arrays, seed)
    xy = tuple((int(x), int(y)) for x, y in zip(px, py))
    return Placement(M, xy, int(total))

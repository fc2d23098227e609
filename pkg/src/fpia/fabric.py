"""Island-style FPIA fabric description and routing-resource graph.

Geometry
--------
Tiles sit at ``(x, y)`` with ``0 <= x, y < M``; each tile holds one IMC block.
Horizontal channel ``j`` (``0 <= j <= M``) runs below tile row ``j`` and
vertical channel ``i`` runs left of tile column ``i``, so the perimeter has
channels too. Switch blocks sit at channel crossings ``(i, j)``.

Each track carries wire segments spanning ``R_tile`` tiles, with segment
boundaries staggered by ``track % R_tile``. Segments at the array edge are
clipped. At a switch block a segment end on side ``s`` connects to one track
on each other side via the Wilton permutation (``Fs = 3``) or ``Fs // 3``
consecutive tracks from it for larger ``Fs``. Switches are bidirectional.

Block pins are dealt round-robin to the bottom/right/top/left sides. A pin
with index ``k`` (slot ``k // 4`` on its side) reaches ``fc`` tracks
``(slot + m * W // fc) % W`` for ``m < fc`` where ``fc = ceil(F * W)``.
Input pins of a block are logically equivalent (they all drain into the
block's single SINK), as are the output pins (fed by the block SOURCE).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

SOURCE, SINK, OPIN, IPIN, CHANX, CHANY = range(6)
KIND_NAMES = ("SOURCE", "SINK", "OPIN", "IPIN", "CHANX", "CHANY")

BOTTOM, RIGHT, TOP, LEFT = range(4)
SIDE_NAMES = ("bottom", "right", "top", "left")


def exact(frac) -> Fraction:
    """Decimal-faithful fraction of a config value (0.15 means 15/100)."""
    if isinstance(frac, float):
        return Fraction(repr(frac))
    return Fraction(frac)


def fc_tracks(frac, W: int) -> int:
    """Tracks a pin connects to: ``ceil(frac * W)``."""
    return math.ceil(exact(frac) * W)


@dataclass(frozen=True)
class FabricParams:
    I: int
    O: int
    F_I: float
    F_O: float
    R_tile: int = 4
    Fs: int = 3
    grid: int | None = None
    W: int | None = None

    def __post_init__(self):
        if self.I < 1 or self.O < 1:
            raise ValueError("I and O must be positive")
        for name in ("F_I", "F_O"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if self.R_tile < 1:
            raise ValueError("R_tile must be positive")
        if self.Fs < 3 or self.Fs % 3:
            raise ValueError("Fs must be a positive multiple of 3")
        if self.grid is not None and self.grid < 0:
            raise ValueError("grid must be non-negative")
        if self.W is not None and self.W < 0:
            raise ValueError("W must be non-negative")

    def with_(self, **kw) -> "FabricParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc) -> "FabricParams":
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown fabric fields: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path: str | Path) -> "FabricParams":
        return cls.from_dict(load_config(path))


SHARED = FabricParams(I=140, O=40, F_I=0.15, F_O=0.2, R_tile=4, Fs=3)


def load_config(path: str | Path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


@dataclass(frozen=True)
class Fabric:
    params: FabricParams
    M: int
    W: int

    @property
    def num_tiles(self) -> int:
        return self.M * self.M

    @property
    def num_channels(self) -> tuple[int, int]:
        """(horizontal, vertical) channel count."""
        return self.M + 1, self.M + 1

    @property
    def total_input_pins(self) -> int:
        return self.num_tiles * self.params.I

    @property
    def total_output_pins(self) -> int:
        return self.num_tiles * self.params.O

    def tile_xy(self, tile: int) -> tuple[int, int]:
        return tile % self.M, tile // self.M


def build_fabric(p: FabricParams, M: int | None = None, W: int | None = None) -> Fabric:
    M = p.grid if M is None else M
    W = p.W if W is None else W
    if M is None or M < 1:
        raise ValueError("fabric needs a grid of at least 1x1 tiles")
    if W is None:
        raise ValueError("fabric needs a channel width")
    return Fabric(p.with_(grid=M, W=W), M, W)


# Wilton track permutation: (from_side, to_side) -> f(t, W)
_WILTON = {
    (LEFT, TOP): lambda t, W: (W - t) % W,
    (LEFT, RIGHT): lambda t, W: t,
    (LEFT, BOTTOM): lambda t, W: (W + t - 1) % W,
    (RIGHT, BOTTOM): lambda t, W: (2 * W - 2 - t) % W,
    (RIGHT, LEFT): lambda t, W: t,
    (RIGHT, TOP): lambda t, W: (t + 1) % W,
    (TOP, RIGHT): lambda t, W: (t + W - 1) % W,
    (TOP, LEFT): lambda t, W: (W - t) % W,
    (TOP, BOTTOM): lambda t, W: t,
    (BOTTOM, LEFT): lambda t, W: (t + 1) % W,
    (BOTTOM, RIGHT): lambda t, W: (2 * W - 2 - t) % W,
    (BOTTOM, TOP): lambda t, W: t,
}


def wilton(from_side: int, to_side: int, track: int, W: int) -> int:
    return _WILTON[(from_side, to_side)](track, W)


def pin_side(k: int) -> int:
    return k % 4


def pin_tracks(k: int, fc: int, W: int) -> list[int]:
    slot = k // 4
    return [(slot + (m * W) // fc) % W for m in range(fc)]


def _segments(length: int, track: int, R: int) -> list[tuple[int, int]]:
    """Inclusive tile spans of the segments on one track of one channel."""
    off = track % R
    starts = [0] + [s for s in range(1, length) if (s - off) % R == 0]
    ends = [s - 1 for s in starts[1:]] + [length - 1]
    return list(zip(starts, ends))


@dataclass
class RoutingGraph:
    fabric: Fabric
    kind: np.ndarray
    xlo: np.ndarray
    xhi: np.ndarray
    ylo: np.ndarray
    yhi: np.ndarray
    track: np.ndarray
    ptc: np.ndarray
    block: np.ndarray
    capacity: np.ndarray
    base_cost: np.ndarray
    edge_ptr: np.ndarray
    edge_dst: np.ndarray
    # forward switch connections from wire ends: (corner_x, corner_y, from_side, wire, to_side, target)
    switch_conns: np.ndarray
    chanx: np.ndarray  # [j, t, x] -> node
    chany: np.ndarray  # [i, t, y] -> node
    nodes_per_block: int

    @property
    def num_nodes(self) -> int:
        return len(self.kind)

    @property
    def num_edges(self) -> int:
        return len(self.edge_dst)

    def source_of(self, blk: int) -> int:
        return blk * self.nodes_per_block

    def sink_of(self, blk: int) -> int:
        return blk * self.nodes_per_block + 1

    def opin(self, blk: int, k: int) -> int:
        return blk * self.nodes_per_block + 2 + k

    def ipin(self, blk: int, k: int) -> int:
        return blk * self.nodes_per_block + 2 + self.fabric.params.O + k

    def successors(self, node: int) -> np.ndarray:
        return self.edge_dst[self.edge_ptr[node]:self.edge_ptr[node + 1]]

    def span(self, node: int) -> int:
        return int(self.xhi[node] - self.xlo[node] + 1) if self.kind[node] == CHANX else \
            int(self.yhi[node] - self.ylo[node] + 1)

    def wire_nodes(self) -> np.ndarray:
        return np.flatnonzero((self.kind == CHANX) | (self.kind == CHANY))

    def describe(self, node: int) -> str:
        k = int(self.kind[node])
        base = f"{node} {KIND_NAMES[k]}"
        if k in (CHANX, CHANY):
            return (f"{base} chan={self.seg_chan[node]} track={self.track[node]} "
                    f"span={self.seg_lo[node]}..{self.seg_hi[node]}")
        return f"{base} block={self.block[node]} ptc={self.ptc[node]}"

    def dump(self) -> str:
        """Plain-text listing of every node and edge."""
        lines = [f"# M={self.fabric.M} W={self.fabric.W} nodes={self.num_nodes} edges={self.num_edges}"]
        lines += [f"node {self.describe(n)}" for n in range(self.num_nodes)]
        for n in range(self.num_nodes):
            lines += [f"edge {n} {int(d)}" for d in self.successors(n)]
        return "\n".join(lines) + "\n"

    # filled in by build_rr_graph
    seg_chan: np.ndarray = None
    seg_lo: np.ndarray = None
    seg_hi: np.ndarray = None


def build_rr_graph(f: Fabric) -> RoutingGraph:
    p = f.params
    M, W, R = f.M, f.W, p.R_tile
    I, O = p.I, p.O
    per_block = 2 + O + I
    n_blocks = M * M

    kind, xlo, xhi, ylo, yhi, track, ptc, block, chan, slo, shi = ([] for _ in range(11))

    def add(k, x0, x1, y0, y1, t=-1, pc=-1, b=-1, ch=-1, s0=-1, s1=-1):
        kind.append(k); xlo.append(x0); xhi.append(x1); ylo.append(y0); yhi.append(y1)
        track.append(t); ptc.append(pc); block.append(b); chan.append(ch); slo.append(s0); shi.append(s1)
        return len(kind) - 1

    for b in range(n_blocks):
        x, y = b % M, b // M
        add(SOURCE, x, x, y, y, b=b)
        add(SINK, x, x, y, y, b=b)
        for k in range(O):
            add(OPIN, x, x, y, y, pc=k, b=b)
        for k in range(I):
            add(IPIN, x, x, y, y, pc=k, b=b)

    chanx = np.full((M + 1, W, M), -1, dtype=np.int64)
    chany = np.full((M + 1, W, M), -1, dtype=np.int64)
    for j in range(M + 1):
        y0, y1 = max(0, j - 1), min(M - 1, j)
        for t in range(W):
            for s0, s1 in _segments(M, t, R):
                nid = add(CHANX, s0, s1, y0, y1, t=t, ch=j, s0=s0, s1=s1)
                chanx[j, t, s0:s1 + 1] = nid
    for i in range(M + 1):
        x0, x1 = max(0, i - 1), min(M - 1, i)
        for t in range(W):
            for s0, s1 in _segments(M, t, R):
                nid = add(CHANY, x0, x1, s0, s1, t=t, ch=i, s0=s0, s1=s1)
                chany[i, t, s0:s1 + 1] = nid

    src: list[int] = []
    dst: list[int] = []
    fc_in = fc_tracks(p.F_I, W)
    fc_out = fc_tracks(p.F_O, W)

    def side_wires(x, y, side):
        if side == BOTTOM:
            return chanx[y, :, x]
        if side == TOP:
            return chanx[y + 1, :, x]
        if side == LEFT:
            return chany[x, :, y]
        return chany[x + 1, :, y]

    for b in range(n_blocks):
        x, y = b % M, b // M
        base = b * per_block
        wires_by_side = [side_wires(x, y, s) for s in range(4)] if W else None
        for k in range(O):
            pin = base + 2 + k
            src.append(base)
            dst.append(pin)
            if W:
                wires = wires_by_side[pin_side(k)]
                for t in pin_tracks(k, fc_out, W):
                    src.append(pin)
                    dst.append(int(wires[t]))
        for k in range(I):
            pin = base + 2 + O + k
            src.append(pin)
            dst.append(base + 1)
            if W:
                wires = wires_by_side[pin_side(k)]
                for t in pin_tracks(k, fc_in, W):
                    src.append(int(wires[t]))
                    dst.append(pin)

    # switch blocks
    conns = []
    reps = p.Fs // 3
    for cy in range(M + 1):
        for cx in range(M + 1):
            sides = {}
            if cx >= 1:
                sides[LEFT] = (chanx[cy, :, cx - 1], "hi")
            if cx < M:
                sides[RIGHT] = (chanx[cy, :, cx], "lo")
            if cy >= 1:
                sides[BOTTOM] = (chany[cx, :, cy - 1], "hi")
            if cy < M:
                sides[TOP] = (chany[cx, :, cy], "lo")
            for s, (wires, end) in sides.items():
                for t in range(W):
                    w = int(wires[t])
                    at_end = (shi[w] == (cx - 1 if s == LEFT else cy - 1)) if end == "hi" else \
                        (slo[w] == (cx if s == RIGHT else cy))
                    if not at_end:
                        continue
                    for s2, (wires2, _) in sides.items():
                        if s2 == s:
                            continue
                        t0 = wilton(s, s2, t, W)
                        for r in range(reps):
                            target = int(wires2[(t0 + r) % W])
                            if target == w:
                                continue
                            conns.append((cx, cy, s, w, s2, target))
                            src += [w, target]
                            dst += [target, w]

    n_nodes = len(kind)
    src_a = np.asarray(src, dtype=np.int64)
    dst_a = np.asarray(dst, dtype=np.int64)
    if len(src_a):
        keys = np.unique(src_a * n_nodes + dst_a)
        src_a, dst_a = keys // n_nodes, keys % n_nodes
    ptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.add.at(ptr, src_a + 1, 1)
    ptr = np.cumsum(ptr)

    kind_a = np.asarray(kind, dtype=np.int8)
    capacity = np.ones(n_nodes, dtype=np.int32)
    capacity[kind_a == SOURCE] = O
    capacity[kind_a == SINK] = I
    base_cost = np.ones(n_nodes, dtype=np.float64)
    base_cost[kind_a == IPIN] = 0.95
    base_cost[kind_a == SINK] = 0.0

    return RoutingGraph(
        fabric=f,
        kind=kind_a,
        xlo=np.asarray(xlo, dtype=np.int32),
        xhi=np.asarray(xhi, dtype=np.int32),
        ylo=np.asarray(ylo, dtype=np.int32),
        yhi=np.asarray(yhi, dtype=np.int32),
        track=np.asarray(track, dtype=np.int32),
        ptc=np.asarray(ptc, dtype=np.int32),
        block=np.asarray(block, dtype=np.int32),
        capacity=capacity,
        base_cost=base_cost,
        edge_ptr=ptr,
        edge_dst=dst_a,
        switch_conns=np.asarray(conns, dtype=np.int64).reshape(-1, 6),
        chanx=chanx,
        chany=chany,
        nodes_per_block=per_block,
        seg_chan=np.asarray(chan, dtype=np.int32),
        seg_lo=np.asarray(slo, dtype=np.int32),
        seg_hi=np.asarray(shi, dtype=np.int32),
    )

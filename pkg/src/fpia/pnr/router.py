"""Negotiated-congestion (PathFinder) routing on the routing-resource graph.

Node cost while routing one net::

    base_cost * (1 + present_overuse * pres_fac) * (1 + history)

where ``present_overuse`` is how far the node would exceed its capacity if
this net took it. Overused nodes bump ``history`` by ``hist_inc`` after every
iteration and ``pres_fac`` grows geometrically. After the first pass only nets
touching an overused node are ripped up and rerouted.

Each net is a tree grown sink by sink with A*-directed maze expansion from the
whole partial tree.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from fpia.fabric import CHANX, CHANY, IPIN, OPIN, SINK, SOURCE, FabricParams, build_fabric, build_rr_graph
from fpia.fabric import RoutingGraph
from fpia.pnr.netlist import Netlist
from fpia.pnr.placer import Placement

W_CAP = 512


class RoutingError(RuntimeError):
    """Routing did not converge; ``congestion`` maps node -> overuse."""

    def __init__(self, msg: str, congestion: dict[int, int] | None = None, graph: RoutingGraph | None = None):
        super().__init__(msg)
        self.congestion = congestion or {}
        self.graph = graph

    def heatmap_csv(self) -> str:
        """Per-tile overuse of wires and pins as ``x,y,overuse`` rows."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "overuse"])
        if self.graph is None:
            return buf.getvalue()
        acc: dict[tuple[int, int], int] = {}
        g = self.graph
        for node, over in self.congestion.items():
            key = (int(g.xlo[node]), int(g.ylo[node]))
            acc[key] = acc.get(key, 0) + over
        for (x, y), over in sorted(acc.items()):
            w.writerow([x, y, over])
        return buf.getvalue()


class Unroutable(RoutingError):
    """No channel width up to the cap routes the design."""

    def __init__(self, msg: str, widest_failure: int):
        super().__init__(msg)
        self.widest_failure = widest_failure


@dataclass(frozen=True)
class DelayParams:
    """Per-hop delays in seconds (defaults sized for a 45 nm-class process)."""

    segment_delay: float = 80e-12
    switch_delay: float = 60e-12
    conn_delay: float = 40e-12

    def scaled(self, k: float) -> "DelayParams":
        return DelayParams(self.segment_delay * k, self.switch_delay * k, self.conn_delay * k)


@dataclass
class RoutedDesign:
    placement: Placement
    netlist: Netlist
    graph: RoutingGraph
    # net index -> (nodes, parents) in insertion order; parents[0] == -1
    routes: dict[int, tuple[np.ndarray, np.ndarray]]
    channel_width: int
    iterations: int = 0
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "channel_width": self.channel_width,
            "iterations": self.iterations,
            "placement": self.placement.to_dict(),
            "nets": [
                {"spin": self.netlist.nets[k].spin,
                 "source": self.netlist.nets[k].source,
                 "sinks": list(self.netlist.nets[k].sinks),
                 "nodes": [int(v) for v in nodes],
                 "parents": [int(v) for v in parents]}
                for k, (nodes, parents) in sorted(self.routes.items())
            ],
        }

    def wirelength(self) -> int:
        g = self.graph
        wires = 0
        for nodes, _ in self.routes.values():
            kinds = g.kind[nodes]
            wires += int(np.count_nonzero((kinds == CHANX) | (kinds == CHANY)))
        return wires


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def _heap_push(keys, vals, size, k, v):
    if size == len(keys):
        return size
    i = size
    keys[i] = k
    vals[i] = v
    while i > 0:
        p = (i - 1) >> 1
        if keys[p] <= keys[i]:
            break
        keys[p], keys[i] = keys[i], keys[p]
        vals[p], vals[i] = vals[i], vals[p]
        i = p
    return size + 1


@njit(cache=True)
def _heap_pop(keys, vals, size):
    k = keys[0]
    v = vals[0]
    size -= 1
    keys[0] = keys[size]
    vals[0] = vals[size]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= size:
            break
        c = l
        if l + 1 < size and keys[l + 1] < keys[l]:
            c = l + 1
        if keys[i] <= keys[c]:
            break
        keys[c], keys[i] = keys[i], keys[c]
        vals[c], vals[i] = vals[i], vals[c]
        i = c
    return k, v, size


@njit(cache=True)
def _heuristic(v, tx, ty, xlo, xhi, ylo, yhi, astar):
    dx = 0
    if tx < xlo[v]:
        dx = xlo[v] - tx
    elif tx > xhi[v]:
        dx = tx - xhi[v]
    dy = 0
    if ty < ylo[v]:
        dy = ylo[v] - ty
    elif ty > yhi[v]:
        dy = ty - yhi[v]
    return astar * (dx + dy)


@njit(cache=True)
def _route_net(ptr, dst, kind, xlo, xhi, ylo, yhi, base_cost, hist, occ, cap, pres_fac,
               source, sinks, sink_x, sink_y, bb, astar, pd_alpha,
               g_cost, prev, touched, heap_k, heap_v, in_tree, depth, tree_nodes, tree_par):
    """Grow one net's route tree; returns node count or -1 if a sink is unreachable.

    Each sink search starts from every usable tree node, seeded with
    ``pd_alpha`` times that node's base-cost distance from the source.
    """
    n_tree = 1
    tree_nodes[0] = source
    tree_par[0] = -1
    in_tree[source] = 1
    depth[source] = 0.0
    has_opin = False
    for si in range(len(sinks)):
        target = sinks[si]
        tx = sink_x[si]
        ty = sink_y[si]
        size = 0
        n_touch = 0
        for q in range(n_tree):
            u = tree_nodes[q]
            ku = kind[u]
            if ku == SINK or ku == IPIN:
                continue
            if ku == SOURCE and has_opin:
                continue
            g_cost[u] = pd_alpha * depth[u]
            prev[u] = -1
            touched[n_touch] = u
            n_touch += 1
            size = _heap_push(heap_k, heap_v, size,
                              g_cost[u] + _heuristic(u, tx, ty, xlo, xhi, ylo, yhi, astar), u)
        found = False
        while size > 0:
            key, u, size = _heap_pop(heap_k, heap_v, size)
            if key > g_cost[u] + _heuristic(u, tx, ty, xlo, xhi, ylo, yhi, astar) + 1e-9:
                continue
            if u == target:
                found = True
                break
            gu = g_cost[u]
            for e in range(ptr[u], ptr[u + 1]):
                v = dst[e]
                kv = kind[v]
                if kv == SINK:
                    if v != target:
                        continue
                elif kv == IPIN:
                    if dst[ptr[v]] != target:
                        continue
                elif kv == CHANX or kv == CHANY:
                    if xhi[v] < bb[0] or xlo[v] > bb[1] or yhi[v] < bb[2] or ylo[v] > bb[3]:
                        continue
                elif kv == SOURCE:
                    continue
                if in_tree[v]:
                    continue
                over = occ[v] + 1 - cap[v]
                if over < 0:
                    over = 0
                c = base_cost[v] * (1.0 + over * pres_fac) * (1.0 + hist[v])
                ng = gu + c
                if prev[v] == -2 or ng < g_cost[v]:
                    if prev[v] == -2:
                        touched[n_touch] = v
                        n_touch += 1
                    g_cost[v] = ng
                    prev[v] = u
                    size = _heap_push(heap_k, heap_v, size,
                                      ng + _heuristic(v, tx, ty, xlo, xhi, ylo, yhi, astar), v)
        if found:
            # walk back to the tree, collecting new nodes
            start = n_tree
            v = target
            while not in_tree[v]:
                tree_nodes[n_tree] = v
                n_tree += 1
                v = prev[v]
            # reverse the appended segment so parents precede children
            lo = start
            hi = n_tree - 1
            while lo < hi:
                tree_nodes[lo], tree_nodes[hi] = tree_nodes[hi], tree_nodes[lo]
                lo += 1
                hi -= 1
            for q in range(start, n_tree):
                w = tree_nodes[q]
                tree_par[q] = prev[w]
                depth[w] = depth[prev[w]] + base_cost[w]
                in_tree[w] = 1
                if kind[w] == OPIN:
                    has_opin = True
        for q in range(n_touch):
            prev[touched[q]] = -2
        if not found:
            for q in range(n_tree):
                in_tree[tree_nodes[q]] = 0
            return -1
    for q in range(n_tree):
        in_tree[tree_nodes[q]] = 0
    return n_tree


@njit(cache=True)
def _adjust(occ, nodes, delta):
    for q in range(len(nodes)):
        occ[nodes[q]] += delta


# ---------------------------------------------------------------- driver


def _net_terminals(nl: Netlist, pl: Placement, g: RoutingGraph):
    terms = []
    for net in nl.nets:
        sx, sy = pl.xy[net.source]
        sinks = sorted(net.sinks, key=lambda b: (abs(pl.xy[b][0] - sx) + abs(pl.xy[b][1] - sy), b))
        sink_nodes = np.array([g.sink_of(pl.tile(b)) for b in sinks], dtype=np.int64)
        xs = np.array([pl.xy[b][0] for b in sinks], dtype=np.int64)
        ys = np.array([pl.xy[b][1] for b in sinks], dtype=np.int64)
        allx = [sx, *xs.tolist()]
        ally = [sy, *ys.tolist()]
        terms.append((g.source_of(pl.tile(net.source)), sink_nodes, xs, ys,
                      (min(allx), max(allx), min(ally), max(ally))))
    return terms


def route(nl: Netlist, pl: Placement, g: RoutingGraph, max_iters: int = 50, *,
          pres_fac: float = 0.5, pres_mult: float = 1.8, hist_inc: float = 1.0,
          bb_margin: int = 3, astar: float | None = None, pd_alpha: float = 0.3,
          reroute_all: bool = False,
          give_up: bool = True, progress=None) -> RoutedDesign:
    """Route every net of ``nl`` or raise :class:`RoutingError`.

    ``pd_alpha`` trades tree wirelength (0, Prim-like) against source-to-sink
    path length (1, shortest-path tree). With ``give_up`` the negotiation stops early once the overuse trend says it
    cannot converge within ``max_iters``. ``progress(it, overused)`` is called
    after every iteration.
    """
    W = g.fabric.W
    if not nl.nets:
        return RoutedDesign(pl, nl, g, {}, W, 0)
    if W == 0:
        raise RoutingError("channel width 0 leaves no routing tracks", graph=g)
    M = g.fabric.M
    R = g.fabric.params.R_tile
    if astar is None:
        astar = 1.0 / R
    n = g.num_nodes
    occ = np.zeros(n, dtype=np.int64)
    hist = np.zeros(n, dtype=np.float64)
    cap = g.capacity.astype(np.int64)
    g_cost = np.zeros(n, dtype=np.float64)
    prev = np.full(n, -2, dtype=np.int64)
    touched = np.empty(n, dtype=np.int64)
    heap_cap = 2 * (g.num_edges + n) + 1
    heap_k = np.empty(heap_cap, dtype=np.float64)
    heap_v = np.empty(heap_cap, dtype=np.int64)
    in_tree = np.zeros(n, dtype=np.uint8)
    depth = np.zeros(n, dtype=np.float64)
    tree_nodes = np.empty(n, dtype=np.int64)
    tree_par = np.empty(n, dtype=np.int64)

    terms = _net_terminals(nl, pl, g)
    routes: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    todo = list(range(len(nl.nets)))
    pf = pres_fac
    trend: list[int] = []
    for it in range(1, max_iters + 1):
        for k in todo:
            if k in routes:
                _adjust(occ, routes[k][0], -1)
                del routes[k]
            src, sinks, xs, ys, box = terms[k]
            for margin in (bb_margin, M):
                bb = np.array([max(0, box[0] - margin), min(M - 1, box[1] + margin),
                               max(0, box[2] - margin), min(M - 1, box[3] + margin)], dtype=np.int64)
                cnt = _route_net(g.edge_ptr, g.edge_dst, g.kind, g.xlo, g.xhi, g.ylo, g.yhi,
                                 g.base_cost, hist, occ, cap, pf, src, sinks, xs, ys, bb, astar, pd_alpha,
                                 g_cost, prev, touched, heap_k, heap_v, in_tree, depth, tree_nodes, tree_par)
                if cnt > 0:
                    break
            if cnt < 0:
                raise RoutingError(f"net {k} (spin {nl.nets[k].spin}) is disconnected at W={W}", graph=g)
            nodes = tree_nodes[:cnt].copy()
            routes[k] = (nodes, tree_par[:cnt].copy())
            _adjust(occ, nodes, 1)
        over = occ > cap
        n_over = int(np.count_nonzero(over))
        if progress is not None:
            progress(it, n_over)
        if not n_over:
            return RoutedDesign(pl, nl, g, routes, W, it)
        trend.append(n_over)
        if give_up and _hopeless(trend, max_iters):
            break
        hist[over] += hist_inc
        pf *= pres_mult
        if reroute_all:
            todo = list(range(len(nl.nets)))
        else:
            todo = [k for k in sorted(routes) if over[routes[k][0]].any()]
    overused = np.flatnonzero(occ > cap)
    congestion = {int(v): int(occ[v] - cap[v]) for v in overused}
    err = RoutingError(f"{len(overused)} nodes still overused after {len(trend)} iterations at W={W}",
                       congestion, g)
    err.occupancy = occ
    raise err


def _hopeless(trend: list[int], max_iters: int, window: int = 5, start: int = 10) -> bool:
    """Extrapolate the geometric decay of overuse over the last ``window`` iterations."""
    it = len(trend)
    if it < start:
        return False
    now, before = trend[-1], trend[-1 - window]
    if now >= before:
        return True
    rate = math.log(before / now) / window
    return it + math.log(now) / rate > 2 * max_iters


def audit_routes(rd: RoutedDesign) -> list[str]:
    """Independent legality check of a routed design; returns problems found."""
    g = rd.graph
    problems: list[str] = []
    occ = np.zeros(g.num_nodes, dtype=np.int64)
    for k, net in enumerate(rd.netlist.nets):
        if k not in rd.routes:
            problems.append(f"net {k} unrouted")
            continue
        nodes, parents = rd.routes[k]
        if len(set(nodes.tolist())) != len(nodes):
            problems.append(f"net {k} visits a node twice")
        pos = {int(v): q for q, v in enumerate(nodes)}
        src = g.source_of(rd.placement.tile(net.source))
        if int(nodes[0]) != src or int(parents[0]) != -1:
            problems.append(f"net {k} is not rooted at its source")
        for q in range(1, len(nodes)):
            u, v = int(parents[q]), int(nodes[q])
            if pos.get(u, q) >= q:
                problems.append(f"net {k}: parent of node {v} not earlier in the tree")
            if v not in set(g.successors(u).tolist()):
                problems.append(f"net {k}: edge {u}->{v} not in graph")
        for b in net.sinks:
            if g.sink_of(rd.placement.tile(b)) not in pos:
                problems.append(f"net {k} misses sink block {b}")
        opins = int(np.count_nonzero(g.kind[nodes] == OPIN))
        if opins != 1:
            problems.append(f"net {k} uses {opins} output pins")
        np.add.at(occ, nodes, 1)
    over = np.flatnonzero(occ > g.capacity)
    for v in over:
        problems.append(f"node {int(v)} used {int(occ[v])} times, capacity {int(g.capacity[v])}")
    return problems


def sink_delays(rd: RoutedDesign, d: DelayParams = DelayParams()) -> list[tuple[int, int, float]]:
    """(net, sink block, source-to-sink delay) for every connection."""
    g = rd.graph
    out = []
    for k, (nodes, parents) in sorted(rd.routes.items()):
        parent = dict(zip(nodes.tolist(), parents.tolist()))
        for b in rd.netlist.nets[k].sinks:
            v = g.sink_of(rd.placement.tile(b))
            t = 0.0
            while parent[v] != -1:
                u = parent[v]
                kv, ku = g.kind[v], g.kind[u]
                v_wire = kv == CHANX or kv == CHANY
                u_wire = ku == CHANX or ku == CHANY
                if v_wire:
                    t += d.segment_delay
                if u_wire and v_wire:
                    t += d.switch_delay
                elif (ku == OPIN and v_wire) or (u_wire and kv == IPIN):
                    t += d.conn_delay
                v = u
            out.append((k, b, t))
    return out


def critical_path_delay(rd: RoutedDesign, d: DelayParams = DelayParams()) -> float:
    return max((t for _, _, t in sink_delays(rd, d)), default=0.0)


def estimate_channel_width(pl: Placement) -> int:
    """Starting guess for the width search: twice the mean wirelength per channel."""
    M = pl.M
    return max(1, math.ceil(pl.cost / (M * (M + 1))))


def min_channel_width(nl: Netlist, pl: Placement, p: FabricParams, *, w_cap: int = W_CAP,
                      w_start: int | None = None, max_iters: int = 50, **route_kw):
    """Smallest channel width that routes; returns ``(W_min, RoutedDesign)``.

    Doubles from ``w_start`` (by default :func:`estimate_channel_width`) until
    routing succeeds, then bisects. Every width
    below the answer down to the last failing probe was tried, so routing at
    ``W_min - 1`` is a recorded failure. Designs without nets get ``W_min = 1``.
    Raises :class:`Unroutable` when ``w_cap`` fails too.
    """
    M = pl.M

    def attempt(W):
        g = build_rr_graph(build_fabric(p, M, W))
        try:
            return route(nl, pl, g, max_iters, **route_kw)
        except RoutingError:
            return None

    if not nl.nets:
        return 1, attempt(1)
    if w_start is None:
        w_start = estimate_channel_width(pl)
    fail = 0  # widest known failure (W = 0 always fails)
    W = min(max(1, w_start), w_cap)
    best = None
    while True:
        rd = attempt(W)
        if rd is not None:
            best = (W, rd)
            break
        fail = W
        if W >= w_cap:
            raise Unroutable(f"unroutable at channel width cap {w_cap}", fail)
        W = min(2 * W, w_cap)
    lo, hi = fail + 1, best[0]
    while lo < hi:
        mid = (lo + hi) // 2
        rd = attempt(mid)
        if rd is not None:
            hi = mid
            best = (mid, rd)
        else:
            lo = mid + 1
    return best


def relaxed_critical_path(nl: Netlist, pl: Placement, p: FabricParams, W_min: int,
                          d: DelayParams = DelayParams(), *, factor: float = 1.3,
                          pd_alpha: float = 1.0, max_iters: int = 50) -> float:
    """Critical-path delay of a low-stress reroute at ``ceil(factor * W_min)``.

    Routing at exactly ``W_min`` forces congestion detours, so delay is read
    off a reroute with spare tracks and shortest-path route trees.
    """
    if not nl.nets:
        return 0.0
    W = max(W_min, math.ceil(factor * W_min))
    g = build_rr_graph(build_fabric(p, pl.M, W))
    return critical_path_delay(route(nl, pl, g, max_iters, pd_alpha=pd_alpha), d)


INFINITE_LOSS = math.inf

from itertools import permutations

import numpy as np
import pytest

from fpia.cluster import ClusterParams, ffd_pack
from fpia.corpus import uf_problem
from fpia.fabric import CHANX, CHANY, FabricParams, build_fabric, build_rr_graph
from fpia.pnr import (
    DelayParams,
    Net,
    Netlist,
    RoutingError,
    Unroutable,
    audit_routes,
    build_netlist,
    critical_path_delay,
    min_channel_width,
    place,
    route,
)
from fpia.pnr.placer import PlacementError, placement_cost
from fpia.qubo import Qubo

P = FabricParams(I=8, O=4, F_I=0.5, F_O=0.5, R_tile=1, Fs=3)
PAIR = Netlist(2, (Net(0, 0, (1,)),))


def graph(M, W, p=P):
    return build_rr_graph(build_fabric(p, M, W))


def wires(rd, k=0):
    nodes, _ = rd.routes[k]
    kinds = rd.graph.kind[nodes]
    return int(np.count_nonzero((kinds == CHANX) | (kinds == CHANY)))


# ---------------------------------------------------------------- netlist


def test_single_cluster_has_no_nets(toy):
    c = ffd_pack(toy, ClusterParams(4, 4))
    assert len(build_netlist(c)) == 0


def test_two_cluster_nets_go_both_ways():
    q = Qubo(3, {(1, 2): 1})
    from fpia.cluster import Cluster, Clustering
    c = Clustering((Cluster((0, 1), frozenset({2})), Cluster((2,), frozenset({1}))))
    nets = build_netlist(c).nets
    assert {(n.spin, n.source, n.sinks) for n in nets} == {(1, 0, (1,)), (2, 1, (0,))}
    assert q.n == 3


def test_worked_example_nets(toy):
    c = ffd_pack(toy, ClusterParams(3, 2))  # blocks: {3}, {1,2}, {4} (1-based)
    nets = {n.spin + 1: n.sinks for n in build_netlist(c).nets}
    assert nets == {3: (1, 2), 1: (0,), 2: (0,), 4: (0,)}


# ---------------------------------------------------------------- placement


def test_placement_single_and_pair():
    one = place(Netlist(1, ()), 1, 0)
    assert one.cost == 0 and one.xy == ((0, 0),)
    pl = place(PAIR, 2, 0)
    best = min(placement_cost(PAIR, xy) for xy in permutations([(0, 0), (1, 0), (0, 1), (1, 1)], 2))
    assert best == 1 and pl.cost == 1


def test_placement_deterministic_and_legal():
    c = ffd_pack(uf_problem(20, 0).qubo, ClusterParams(40, 8))
    nl = build_netlist(c)
    a, b = place(nl, 4, 7), place(nl, 4, 7)
    assert a == b
    assert len(set(a.xy)) == nl.num_blocks
    assert a.cost == placement_cost(nl, a.xy)
    with pytest.raises(PlacementError):
        place(nl, 1, 0)


# ---------------------------------------------------------------- routing


def test_zero_nets_route_trivially():
    nl = Netlist(1, ())
    pl = place(nl, 1, 0)
    rd = route(nl, pl, graph(1, 2))
    assert rd.routes == {} and critical_path_delay(rd) == 0
    assert min_channel_width(nl, pl, P)[0] == 1


def test_adjacent_pair_routes_in_one_iteration():
    pl = place(PAIR, 2, 0)
    rd = route(PAIR, pl, graph(2, 2))
    assert rd.iterations == 1 and wires(rd) <= 2
    assert audit_routes(rd) == []


def test_zero_width_fails_immediately():
    pl = place(PAIR, 2, 0)
    with pytest.raises(RoutingError):
        route(PAIR, pl, graph(2, 0))


def test_pair_min_width_is_one():
    pl = place(PAIR, 2, 0)
    W, rd = min_channel_width(PAIR, pl, P)
    assert W == 1 and audit_routes(rd) == []


def test_dense_four_cluster_minimality():
    nets = tuple(Net(4 * s + k, s, tuple(b for b in range(4) if b != s)) for s in range(4) for k in range(2))
    nl = Netlist(4, nets)
    pl = place(nl, 2, 0)
    W, rd = min_channel_width(nl, pl, P)
    assert audit_routes(rd) == []
    assert W > 1
    with pytest.raises(RoutingError):
        route(nl, pl, graph(2, W - 1))


def test_single_segment_delay():
    pl = place(PAIR, 2, 0)
    rd = route(PAIR, pl, graph(2, 2))
    assert wires(rd) == 1
    d = DelayParams()
    assert critical_path_delay(rd, d) == pytest.approx(d.segment_delay + 2 * d.conn_delay)


def test_delay_is_linear_in_params():
    c = ffd_pack(uf_problem(20, 0).qubo, ClusterParams(40, 8))
    nl = build_netlist(c)
    pl = place(nl, 4, 0)
    W, rd = min_channel_width(nl, pl, P.with_(I=40, O=8))
    d = DelayParams()
    assert critical_path_delay(rd, d.scaled(2)) == pytest.approx(2 * critical_path_delay(rd, d))


def test_audit_flags_tampering():
    c = ffd_pack(uf_problem(20, 0).qubo, ClusterParams(40, 8))
    nl = build_netlist(c)
    pl = place(nl, 4, 0)
    _, rd = min_channel_width(nl, pl, P.with_(I=40, O=8))
    assert audit_routes(rd) == []
    nodes, parents = rd.routes[0]
    rd.routes[1] = (np.concatenate([rd.routes[1][0], nodes[2:3]]),
                    np.concatenate([rd.routes[1][1], [rd.routes[1][0][-1]]]))
    assert audit_routes(rd)


def test_routing_is_deterministic():
    c = ffd_pack(uf_problem(20, 1).qubo, ClusterParams(40, 8))
    nl = build_netlist(c)
    pl = place(nl, 4, 3)
    p = P.with_(I=40, O=8)
    a = min_channel_width(nl, pl, p)
    b = min_channel_width(nl, pl, p)
    assert a[0] == b[0] and a[1].to_dict() == b[1].to_dict()


def test_unroutable_reports_widest_failure():
    nets = tuple(Net(4 * s + k, s, tuple(b for b in range(4) if b != s)) for s in range(4) for k in range(2))
    nl = Netlist(4, nets)
    pl = place(nl, 2, 0)
    with pytest.raises(Unroutable) as e:
        min_channel_width(nl, pl, P, w_cap=1, w_start=1)
    assert e.value.widest_failure == 1

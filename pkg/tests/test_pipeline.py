import math

from fpia.cluster import ClusterParams, ffd_pack
from fpia.corpus import Problem, toy_qubo, uf_problem
from fpia.cost import fpia_area, preset, routing_area
from fpia.pipeline import ArchPoint, evaluate, embed
from fpia.pnr import audit_routes, build_netlist, min_channel_width, place

TECH = preset("eflash_optimistic")


def test_evaluate_matches_manual_composition():
    q = toy_qubo()
    point = ArchPoint(3, 2, 0.5, 0.5)
    r = evaluate(Problem("toy", q), point, TECH, 0)
    c = ffd_pack(q, ClusterParams(3, 2))
    nl = build_netlist(c)
    pl = place(nl, 2, 0)
    fp = point.fabric()
    W, _ = min_channel_width(nl, pl, fp)
    area = fpia_area(TECH, 3, 2, 2, routing_area(fp.with_(grid=2, W=W), TECH))
    assert r.feasible and r.loss == float(area)
    assert r.diagnostics["clusters"] == 3 and r.diagnostics["W"] == W


def test_inputs_below_fan_in_are_infinite():
    r = evaluate(Problem("toy", toy_qubo()), ArchPoint(2, 2), TECH, 0)
    assert math.isinf(r.loss) and "packing" in r.diagnostics["reason"]


def test_evaluate_deterministic():
    p = uf_problem(20, 0)
    a = evaluate(p, ArchPoint(140, 40), TECH, 1)
    b = evaluate(p, ArchPoint(140, 40), TECH, 1)
    assert a == b


def test_embed_shared_uf20_is_legal():
    emb = embed(uf_problem(20, 0), ArchPoint(140, 40), TECH, 0)
    assert audit_routes(emb.design) == []
    assert emb.report.W == emb.channel_width and emb.report.M == emb.placement.M

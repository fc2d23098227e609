"""Pack, place, route and cost one problem on one architecture point."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from fpia.cluster import ClusterParams, Clustering, PackingError, ffd_pack, utilization
from fpia.corpus import Problem
from fpia.cost import CostReport, TechParams, cost_report
from fpia.fabric import FabricParams
from fpia.pnr import (
    DelayParams,
    Netlist,
    Placement,
    RoutedDesign,
    Unroutable,
    build_netlist,
    default_grid,
    min_channel_width,
    place,
    relaxed_critical_path,
)
from fpia.pnr.placer import PlacementError
from fpia.pnr.router import W_CAP


@dataclass(frozen=True, order=True)
class ArchPoint:
    """Tunable block and connection-block parameters."""

    I: int
    O: int
    F_I: float = 0.15
    F_O: float = 0.2
    occupancy: float = 1.0

    def cluster_params(self) -> ClusterParams:
        return ClusterParams(self.I, self.O, self.occupancy)

    def fabric(self, R_tile: int = 4, Fs: int = 3) -> FabricParams:
        return FabricParams(self.I, self.O, self.F_I, self.F_O, R_tile, Fs)

    def key(self) -> tuple:
        return (self.I, self.O, self.F_I, self.F_O, self.occupancy)

    def to_dict(self) -> dict:
        return asdict(self)


SHARED_POINT = ArchPoint(140, 40, 0.15, 0.2, 1.0)


@dataclass
class Embedding:
    problem: Problem
    point: ArchPoint
    clustering: Clustering
    netlist: Netlist
    placement: Placement
    channel_width: int
    design: RoutedDesign
    fabric: FabricParams
    report: CostReport


class InfeasibleError(RuntimeError):
    """The problem cannot be embedded on this architecture point."""


def embed(problem: Problem, point: ArchPoint, t: TechParams, seed: int = 0, *,
          w_cap: int = W_CAP, R_tile: int = 4, Fs: int = 3, grid: int | None = None,
          delay: DelayParams | None = None) -> Embedding:
    """Full pipeline; raises :class:`InfeasibleError` with the reason on failure.

    With ``delay`` set, the report's critical path comes from a low-stress
    reroute (see :func:`fpia.pnr.relaxed_critical_path`).
    """
    q = problem.qubo
    try:
        c = ffd_pack(q, point.cluster_params())
    except PackingError as e:
        raise InfeasibleError(f"packing: {e}") from e
    nl = build_netlist(c)
    M = grid if grid is not None else default_grid(len(c))
    try:
        pl = place(nl, M, seed)
    except PlacementError as e:
        raise InfeasibleError(f"placement: {e}") from e
    fp = point.fabric(R_tile, Fs)
    try:
        W, rd = min_channel_width(nl, pl, fp, w_cap=w_cap)
    except Unroutable as e:
        err = InfeasibleError(f"routing: {e}")
        err.widest_failure = e.widest_failure
        err.clustering, err.placement = c, pl
        raise err from e
    f = fp.with_(grid=M, W=W)
    cp = relaxed_critical_path(nl, pl, fp, W, delay) if delay is not None else 0.0
    return Embedding(problem, point, c, nl, pl, W, rd, f, cost_report(t, f, q.n, cp))


@dataclass
class EvalResult:
    problem: str
    point: ArchPoint
    seed: int
    loss: float  # FPIA area in lambda^2, inf when the embedding failed
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.loss)

    def to_dict(self) -> dict:
        return {"problem": self.problem, **self.point.to_dict(), "seed": self.seed,
                "loss": self.loss if self.feasible else "inf", **self.diagnostics}


def evaluate(problem: Problem, point: ArchPoint, t: TechParams, seed: int = 0, *,
             w_cap: int = W_CAP, R_tile: int = 4, Fs: int = 3) -> EvalResult:
    """Loss of one architecture point: FPIA area, or infinity with a reason."""
    try:
        emb = embed(problem, point, t, seed, w_cap=w_cap, R_tile=R_tile, Fs=Fs)
    except InfeasibleError as e:
        return EvalResult(problem.name, point, seed, math.inf, {"reason": str(e)})
    rep = emb.report
    util = utilization(emb.clustering, problem.qubo.n)
    return EvalResult(problem.name, point, seed, float(rep.fpia_area), {
        "N": problem.qubo.n,
        "clusters": len(emb.clustering),
        "nets": len(emb.netlist),
        "M": emb.placement.M,
        "W": emb.channel_width,
        "routing_area": float(rep.routing_area),
        "baseline_area": float(rep.baseline_area),
        "TA": float(rep.tiling_advantage),
        "utilization": float(util.improvement),
    })

"""Area models for the FPIA and the monolithic tiled baseline.

All areas are in units of lambda^2 and computed with exact rational
arithmetic. FPIA die area for an ``M x M`` array of ``I x O`` blocks::

    M^2 (I O A_cell + I A_wl + O (A_bl + A_sense)) + A_routing
        + M I A_pewl / S_pe + M O A_pebl / S_pe

Baseline area for an ``N``-spin machine tiled with ``S x S`` sub-arrays::

    ceil(N/S)^2 (S^2 A_cell + S A_wl + S A_bl + A_ADC)
        + N A_pewl / S_pe + N A_pebl / S_pe
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields, replace
from fractions import Fraction
from typing import Iterable, Sequence

from fpia.fabric import FabricParams, exact, fc_tracks


@dataclass(frozen=True)
class TechParams:
    A_cell: int
    A_sense: int
    A_wl: int
    A_bl: int
    A_pewl: int
    A_pebl: int
    S_pe: int
    S: int
    A_ADC: int = 10**6
    A_fetmin: int = 50
    # routing transistor budgets, in multiples of A_fetmin
    a_buf: int = 10
    a_sw: int = 6
    a_mux: int = 4

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"{f.name} must be positive")

    def with_(self, **kw) -> "TechParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {k: _plain(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, doc) -> "TechParams":
        return cls(**{k: _parse_num(v) for k, v in doc.items()})


def _plain(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else str(v)
    return v


def _parse_num(v):
    if isinstance(v, str):
        f = Fraction(v)
        return int(f) if f.denominator == 1 else f
    return v


PRESETS: dict[str, TechParams] = {
    "eflash_optimistic": TechParams(A_cell=60, A_sense=500, A_wl=1500, A_bl=1550,
                                    A_pewl=11300, A_pebl=7700, S_pe=1000, S=256),
    "eflash_pessimistic": TechParams(A_cell=180, A_sense=2500, A_wl=1500, A_bl=1550,
                                     A_pewl=11300, A_pebl=7700, S_pe=1000, S=256),
    "sram": TechParams(A_cell=600, A_sense=2500, A_wl=1500, A_bl=1550,
                       A_pewl=1550, A_pebl=1550, S_pe=1000, S=256),
}


def preset(name: str) -> TechParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown technology preset {name!r}; choose from {sorted(PRESETS)}") from None


def fpia_area(t: TechParams, I: int, O: int, M: int, routing_area=0) -> Fraction:
    F = exact
    block = I * O * F(t.A_cell) + I * F(t.A_wl) + O * (F(t.A_bl) + F(t.A_sense))
    return (M * M * block + F(routing_area)
            + Fraction(M * I) * F(t.A_pewl) / F(t.S_pe)
            + Fraction(M * O) * F(t.A_pebl) / F(t.S_pe))


def baseline_area(t: TechParams, N: int) -> Fraction:
    if N < 1:
        raise ValueError("N must be >= 1")
    F = exact
    S = t.S
    tiles = math.ceil(Fraction(N, S)) ** 2
    sub = S * S * F(t.A_cell) + S * F(t.A_wl) + S * F(t.A_bl) + F(t.A_ADC)
    return tiles * sub + N * F(t.A_pewl) / F(t.S_pe) + N * F(t.A_pebl) / F(t.S_pe)


def routing_area(f: FabricParams, t: TechParams) -> Fraction:
    """Switch-block, buffer and connection-block mux area of the whole fabric.

    Per tile: ``W`` track buffers each with ``Fs`` switches, plus one mux
    input per pin-to-track connection.
    """
    M, W = f.grid, f.W
    if M is None or W is None:
        raise ValueError("fabric params need grid and W for a routing area")
    fet = exact(t.A_fetmin)
    tracks = M * M * W * (t.a_buf + f.Fs * t.a_sw) * fet
    muxes = M * M * (fc_tracks(f.F_I, W) * f.I + fc_tracks(f.F_O, W) * f.O) * t.a_mux * fet
    return tracks + muxes


def tiling_advantage(baseline, fpia) -> Fraction:
    if fpia <= 0:
        raise ZeroDivisionError("FPIA area must be positive")
    return Fraction(baseline) / Fraction(fpia)


def approx_tiling_advantage(N: int, A_cell, A_ADC_amortized, C, routing) -> Fraction | float:
    """Closed-form estimate ``N^2 (A_cell + A_ADC~) / (N^2 C A_cell + A_routing)``.

    ``C`` is the fraction of coupling cells kept after tiling (the inverse of
    the utilization improvement) and ``A_ADC~`` is ADC area per baseline cell.
    """
    num = N * N * (exact(A_cell) + exact(A_ADC_amortized))
    den = N * N * exact(C) * exact(A_cell) + exact(routing)
    if den <= 0:
        raise ZeroDivisionError("denominator must be positive")
    return num / den


def amortized_adc(t: TechParams) -> Fraction:
    return exact(t.A_ADC) / (t.S * t.S)


@dataclass(frozen=True)
class CostReport:
    fpia_area: Fraction
    baseline_area: Fraction
    routing_area: Fraction
    tiling_advantage: Fraction
    critical_path: float
    W: int
    M: int

    def to_dict(self) -> dict:
        return {
            "fpia_area": float(self.fpia_area),
            "baseline_area": float(self.baseline_area),
            "routing_area": float(self.routing_area),
            "tiling_advantage": float(self.tiling_advantage),
            "critical_path": self.critical_path,
            "W": self.W,
            "M": self.M,
        }


def cost_report(t: TechParams, f: FabricParams, N: int, critical_path: float = 0.0) -> CostReport:
    """Full area report for a routed fabric (``f.grid`` and ``f.W`` set)."""
    r = routing_area(f, t)
    fa = fpia_area(t, f.I, f.O, f.grid, r)
    ba = baseline_area(t, N)
    return CostReport(fa, ba, r, tiling_advantage(ba, fa), critical_path, f.W, f.grid)


SWEEP_HEADER = ["problem", "A_ADC", "A_cell", "W", "M", "fpia_area", "baseline_area", "TA"]


@dataclass(frozen=True)
class Embedded:
    """What the sweep needs from one placed-and-routed problem."""

    problem: str
    N: int
    fabric: FabricParams | None  # None when the embedding failed

    @property
    def routable(self) -> bool:
        return self.fabric is not None


def sweep(t: TechParams, adc_values: Sequence, cell_values: Sequence,
          problems: Iterable[Embedded]) -> list[dict]:
    """Tiling advantage over an (A_ADC, A_cell) grid for each embedded problem.

    Placement and routing do not depend on these two areas, so each problem is
    embedded once and only the area models are re-evaluated.
    """
    rows = []
    for emb in problems:
        for adc in adc_values:
            for cell in cell_values:
                tt = t.with_(A_ADC=adc, A_cell=cell)
                ba = baseline_area(tt, emb.N)
                if not emb.routable:
                    rows.append({"problem": emb.problem, "A_ADC": adc, "A_cell": cell, "W": "",
                                 "M": "", "fpia_area": math.inf, "baseline_area": ba, "TA": 0})
                    continue
                rep = cost_report(tt, emb.fabric, emb.N)
                rows.append({"problem": emb.problem, "A_ADC": adc, "A_cell": cell,
                             "W": emb.fabric.W, "M": emb.fabric.grid, "fpia_area": rep.fpia_area,
                             "baseline_area": ba, "TA": rep.tiling_advantage})
    return rows


def fmt(v) -> str:
    """Stable CSV rendering of exact and float values."""
    if isinstance(v, Fraction):
        return repr(float(v)) if v.denominator != 1 else str(v.numerator)
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def rows_to_csv(rows: Sequence[dict], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(row.get(h, "")) for h in header])
    return buf.getvalue()

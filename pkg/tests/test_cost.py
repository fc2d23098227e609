import math
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpia.cost import (
    PRESETS,
    Embedded,
    amortized_adc,
    approx_tiling_advantage,
    baseline_area,
    cost_report,
    fpia_area,
    preset,
    routing_area,
    sweep,
    tiling_advantage,
)
from fpia.fabric import FabricParams

SRAM = preset("sram")

TABLE = {  # rows of the published parameter table
    "eflash_optimistic": (50, 60, 500, 1500, 1550, 11300, 7700, 1000, 256),
    "eflash_pessimistic": (50, 180, 2500, 1500, 1550, 11300, 7700, 1000, 256),
    "sram": (50, 600, 2500, 1500, 1550, 1550, 1550, 1000, 256),
}


def test_presets_match_table():
    for name, row in TABLE.items():
        t = PRESETS[name]
        assert (t.A_fetmin, t.A_cell, t.A_sense, t.A_wl, t.A_bl, t.A_pewl, t.A_pebl, t.S_pe, t.S) == row
        assert t.A_ADC == 10**6


def test_hand_derived_values():
    assert fpia_area(SRAM, 140, 40, 2, 0) == 14928558
    assert baseline_area(SRAM, 256) == Fraction("41103193.6")


def test_degenerate_fabric_and_linearity():
    assert fpia_area(SRAM, 140, 40, 0) == 0
    t = SRAM.with_(A_sense=1, A_wl=1, A_bl=1, A_pewl=1, A_pebl=1)

    def cross(tt):  # M^2 I O A_cell, isolated by differencing against A_cell = 1
        return fpia_area(tt, 10, 10, 3) - fpia_area(tt.with_(A_cell=1), 10, 10, 3) + 9 * 100

    assert cross(t.with_(A_cell=20)) == 2 * cross(t.with_(A_cell=10))


def test_baseline_ceiling_jump():
    groups = lambda N: (baseline_area(SRAM, N) - N * Fraction(3100, 1000))
    sub = 256 * 256 * 600 + 256 * 1500 + 256 * 1550 + 10**6
    assert groups(256) == sub and groups(257) == 4 * sub


def test_baseline_unit_case():
    t = SRAM.with_(S=1)
    assert baseline_area(t, 1) == 600 + 1500 + 1550 + 10**6 + Fraction(1550 + 1550, 1000)


def test_routing_area_examples():
    f = FabricParams(I=1, O=1, F_I=1, F_O=1, R_tile=1, Fs=3, grid=1, W=1)
    assert routing_area(f, SRAM) == 1800
    assert routing_area(f.with_(W=0), SRAM) == 0
    g = FabricParams(I=10, O=10, F_I=1, F_O=1, grid=3, W=10)
    per_w = routing_area(g.with_(W=11), SRAM) - routing_area(g, SRAM)
    assert routing_area(g.with_(W=12), SRAM) - routing_area(g.with_(W=11), SRAM) == per_w


def test_tiling_advantage():
    assert tiling_advantage(5, 5) == 1
    assert tiling_advantage(60, 1) == 60
    assert tiling_advantage(1, 2) < 1
    with pytest.raises(ZeroDivisionError):
        tiling_advantage(1, 0)


def test_approx_expression():
    assert approx_tiling_advantage(100, 60, 0, 1, 0) == 1
    adc = Fraction(10**6, 256**2)
    assert float(approx_tiling_advantage(4000, 60, adc, Fraction(1, 10), 0)) == pytest.approx(12.54, abs=0.005)
    assert amortized_adc(preset("eflash_optimistic")) == adc
    vals = [approx_tiling_advantage(4000, 60, a, Fraction(1, 10), 10**8) for a in (0, 1, 10, 100)]
    assert vals == sorted(vals) and len(set(vals)) == 4


def oracle_fpia(t, I, O, M, r):
    return (Fraction(M * M) * (I * O * t.A_cell + I * t.A_wl + O * (t.A_bl + t.A_sense))
            + r + Fraction(M * I * t.A_pewl, t.S_pe) + Fraction(M * O * t.A_pebl, t.S_pe))


def oracle_baseline(t, N):
    groups = -(-N // t.S)
    return (groups * groups * (t.S ** 2 * t.A_cell + t.S * t.A_wl + t.S * t.A_bl + t.A_ADC)
            + Fraction(N * t.A_pewl, t.S_pe) + Fraction(N * t.A_pebl, t.S_pe))


pos = st.integers(1, 10**5)


@given(pos, pos, pos, pos, pos, pos, st.integers(1, 5000), st.integers(1, 1024), st.integers(1, 10**7),
       st.integers(1, 512), st.integers(1, 512), st.integers(0, 64), st.integers(0, 10**9), st.integers(1, 10**6))
def test_formulas_match_oracle(cell, sense, wl, bl, pewl, pebl, spe, S, adc, I, O, M, r, N):
    t = SRAM.with_(A_cell=cell, A_sense=sense, A_wl=wl, A_bl=bl, A_pewl=pewl, A_pebl=pebl,
                   S_pe=spe, S=S, A_ADC=adc)
    assert fpia_area(t, I, O, M, r) == oracle_fpia(t, I, O, M, r)
    assert baseline_area(t, N) == oracle_baseline(t, N)


def test_report_consistency():
    f = FabricParams(140, 40, 0.15, 0.2, grid=3, W=30)
    rep = cost_report(SRAM, f, 500)
    assert rep.tiling_advantage == rep.baseline_area / rep.fpia_area
    assert rep.fpia_area == fpia_area(SRAM, 140, 40, 3, rep.routing_area)


LARGE = Embedded("large", 4000, FabricParams(64, 16, 0.15, 0.2, grid=40, W=60))


def test_sweep_single_point_matches_direct_call():
    t = preset("eflash_optimistic")
    (row,) = sweep(t, [10**6], [60], [LARGE])
    assert row["TA"] == cost_report(t, LARGE.fabric, 4000).tiling_advantage


def test_sweep_monotone_in_adc_and_crossover():
    t = preset("eflash_optimistic")
    adcs = [10**3, 10**5, 10**6, 10**7, 10**8]
    cells = [20, 60, 180, 600]
    rows = sweep(t, adcs, cells, [LARGE, Embedded("failed", 4000, None)])
    ta = {(r["A_ADC"], r["A_cell"]): r["TA"] for r in rows if r["problem"] == "large"}
    for cell in cells:
        col = [ta[(a, cell)] for a in adcs]
        assert col == sorted(col)
    slope_low = ta[(adcs[0], cells[-1])] - ta[(adcs[0], cells[0])]
    slope_high = ta[(adcs[-1], cells[-1])] - ta[(adcs[-1], cells[0])]
    assert slope_low > 0 > slope_high
    assert all(r["TA"] == 0 and math.isinf(r["fpia_area"]) for r in rows if r["problem"] == "failed")


def test_random_oracle_draws():
    rng = random.Random(1)
    for _ in range(200):
        t = SRAM.with_(A_cell=rng.randint(1, 1000), S=rng.randint(1, 512), A_ADC=rng.randint(1, 10**7))
        I, O, M, N = rng.randint(1, 300), rng.randint(1, 300), rng.randint(0, 40), rng.randint(1, 10**5)
        assert fpia_area(t, I, O, M) == oracle_fpia(t, I, O, M, 0)
        assert baseline_area(t, N) == oracle_baseline(t, N)

"""Command-line interface: ``fpia analyze|quadratize|pack|embed|solve|campaign``.

Exit codes: 0 success, 1 other errors, 2 infeasible embedding, 3 failed
verification.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from fpia.cluster import ClusterParams, PackingError, ffd_pack, utilization
from fpia.corpus import resolve
from fpia.cost import PRESETS, TechParams, fmt, preset, rows_to_csv
from fpia.pipeline import ArchPoint, InfeasibleError, embed
from fpia.pnr import DelayParams, audit_routes
from fpia.qubo import stats
from fpia.sat import parse_dimacs, quadratize
from fpia.sim import AnnealSchedule, anneal, build_mapped_machine, field_mismatches

log = logging.getLogger("fpia")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_VERIFY = 0, 1, 2, 3
ANALYZE_HEADER = ["problem", "N", "sparsity", "max_fan_in", "mean_fan_in", "nonzero"]
COST_HEADER = ["problem", "I", "O", "F_I", "F_O", "occupancy", "seed", "clusters", "M", "W",
               "routing_area", "fpia_area", "baseline_area", "TA", "critical_path_ns"]
TECH_FIELDS = ("A_cell", "A_sense", "A_wl", "A_bl", "A_pewl", "A_pebl", "S_pe", "S", "A_ADC", "A_fetmin",
               "a_buf", "a_sw", "a_mux")


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _arch_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("architecture")
    g.add_argument("--I", type=int, default=140)
    g.add_argument("--O", type=int, default=40)
    g.add_argument("--F_I", type=float, default=0.15)
    g.add_argument("--F_O", type=float, default=0.2)
    g.add_argument("--R_tile", type=int, default=4)
    g.add_argument("--Fs", type=int, default=3)
    g.add_argument("--grid", type=int, default=None, help="tiles per side (default: ~90%% occupied)")
    g.add_argument("--occupancy", type=float, default=1.0)


def _tech_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("technology")
    g.add_argument("--tech", default="eflash_optimistic", choices=sorted(PRESETS))
    for f in TECH_FIELDS:
        g.add_argument(f"--{f}", type=int, default=None)


def _tech(a) -> TechParams:
    t = preset(a.tech)
    over = {f: getattr(a, f) for f in TECH_FIELDS if getattr(a, f) is not None}
    return t.with_(**over) if over else t


def cmd_analyze(a) -> int:
    rows, failed = [], 0
    for path in a.inputs:
        try:
            p = resolve(path)
        except Exception as e:  # keep going; one bad file must not sink the batch
            log.error("%s: %s", path, e)
            failed += 1
            continue
        s = stats(p.qubo)
        rows.append({"problem": p.name, "N": s.n, "sparsity": s.sparsity, "max_fan_in": s.max_fan_in,
                     "mean_fan_in": s.mean_fan_in, "nonzero": s.nonzero_count})
    _emit(rows_to_csv(rows, ANALYZE_HEADER), a.out)
    return EXIT_ERROR if failed else EXIT_OK


def cmd_quadratize(a) -> int:
    cnf = parse_dimacs(Path(a.cnf).read_text())
    q, qmap = quadratize(cnf, a.penalty)
    _emit(q.dumps() + "\n", a.out)
    if a.map:
        Path(a.map).write_text(json.dumps(qmap.to_dict(), sort_keys=True) + "\n")
    return EXIT_OK


def cmd_pack(a) -> int:
    p = resolve(a.problem, a.seed)
    try:
        c = ffd_pack(p.qubo, ClusterParams(a.I, a.O, a.occupancy))
    except PackingError as e:
        log.error("%s", e)
        return EXIT_INFEASIBLE
    _emit(c.dumps() + "\n", a.out)
    u = utilization(c, p.qubo.n)
    log.info("%s: %d clusters, utilization improvement %s", p.name, len(c), fmt(u.improvement))
    return EXIT_OK


def cmd_embed(a) -> int:
    p = resolve(a.problem, a.seed)
    point = ArchPoint(a.I, a.O, a.F_I, a.F_O, a.occupancy)
    t = _tech(a)
    try:
        emb = embed(p, point, t, a.seed, R_tile=a.R_tile, Fs=a.Fs, grid=a.grid, delay=DelayParams())
    except InfeasibleError as e:
        log.error("%s: %s", p.name, e)
        return EXIT_INFEASIBLE
    problems = audit_routes(emb.design)
    machine = build_mapped_machine(p.qubo, emb.clustering)
    mismatches = field_mismatches(p.qubo, machine, a.states, a.seed)
    verified = not problems and mismatches == 0
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    rep = emb.report
    design = {"problem": p.name, "arch": point.to_dict(), "seed": a.seed,
              "clustering": emb.clustering.to_dict(), **emb.design.to_dict()}
    (out / "design.json").write_text(json.dumps(design, sort_keys=True) + "\n")
    row = {"problem": p.name, **point.to_dict(), "seed": a.seed, "clusters": len(emb.clustering),
           "M": rep.M, "W": rep.W, "routing_area": rep.routing_area, "fpia_area": rep.fpia_area,
           "baseline_area": rep.baseline_area, "TA": rep.tiling_advantage,
           "critical_path_ns": rep.critical_path * 1e9}
    (out / "cost.csv").write_text(rows_to_csv([row], COST_HEADER))
    verdict = {"verified": verified, "audit_problems": problems[:20], "field_mismatches": mismatches,
               "states_checked": a.states}
    (out / "verification.json").write_text(json.dumps(verdict, sort_keys=True) + "\n")
    if not verified:
        log.error("%s: verification failed (%d audit problems, %d field mismatches)",
                  p.name, len(problems), mismatches)
        return EXIT_VERIFY
    log.info("%s: W=%d M=%d TA=%s", p.name, rep.W, rep.M, fmt(rep.tiling_advantage))
    return EXIT_OK


def cmd_solve(a) -> int:
    p = resolve(a.problem, a.seed)
    sched = AnnealSchedule(a.sweeps, a.T_start, a.T_end)
    best = None
    for r in range(a.restarts):
        res = anneal(p.qubo, sched, a.seed + r, target=a.target)
        if best is None or res.energy < best.energy:
            best = res
    satisfied = None
    if p.cnf is not None:
        satisfied = p.cnf.satisfied_by(p.qmap.strip(best.state))
    doc = {"problem": p.name, "seed": a.seed, "restarts": a.restarts,
           "schedule": {"sweeps": sched.sweeps, "T_start": sched.T_start, "T_end": sched.T_end},
           "best_energy": fmt(best.energy), "state": best.state, "satisfied": satisfied}
    _emit(json.dumps(doc, sort_keys=True) + "\n", a.out)
    return EXIT_OK


def cmd_campaign(a) -> int:
    from fpia.campaign import load_campaign, run_campaign

    c = load_campaign(a.file)
    out = a.out or c.config.get("output") or f"campaign-{c.name}"
    manifest = run_campaign(c, out, a.jobs or c.config.get("jobs", 1))
    for f in manifest["failures"]:
        log.error("section %s seed %s failed: %s", f["section"], f["seed"], f["error"])
    return EXIT_ERROR if manifest["failures"] else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fpia", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    problem_help = "DIMACS .cnf, QUBO .json, or toy | uf<n>[:<k>] | random:<N> | factor:<n>"

    p = sub.add_parser("analyze", help="sparsity and fan-in statistics as CSV")
    p.add_argument("inputs", nargs="*", help=problem_help)
    p.add_argument("-o", "--out")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("quadratize", help="DIMACS CNF to QUBO JSON")
    p.add_argument("cnf")
    p.add_argument("--penalty", type=int, default=2)
    p.add_argument("-o", "--out")
    p.add_argument("--map", help="also write the auxiliary-variable map here")
    p.set_defaults(fn=cmd_quadratize)

    p = sub.add_parser("pack", help="FFD packing to clustering JSON")
    p.add_argument("problem", help=problem_help)
    p.add_argument("--I", type=int, default=140)
    p.add_argument("--O", type=int, default=40)
    p.add_argument("--occupancy", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out")
    p.set_defaults(fn=cmd_pack)

    p = sub.add_parser("embed", help="pack, place, route, cost and verify one problem")
    p.add_argument("problem", help=problem_help)
    _arch_args(p)
    _tech_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--states", type=int, default=100, help="random states for the field check")
    p.add_argument("-o", "--out", default="embed-out")
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("solve", help="simulated annealing on the logical QUBO")
    p.add_argument("problem", help=problem_help)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--T_start", type=float, default=3.0)
    p.add_argument("--T_end", type=float, default=0.05)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", type=int, default=None,
                   help="stop once this energy is reached (0 = all clauses satisfied for SAT inputs)")
    p.add_argument("-o", "--out")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("campaign", help="run a TOML/JSON campaign")
    p.add_argument("file")
    p.add_argument("-o", "--out")
    p.add_argument("-j", "--jobs", type=int, default=None)
    p.set_defaults(fn=cmd_campaign)
    return ap


def main(argv: list[str] | None = None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return a.fn(a)
    except (OSError, ValueError) as e:
        log.error("%s", e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

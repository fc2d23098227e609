"""Architecture search: exhaustive grids and random-forest SMBO.

The SMBO loop starts from a Latin-hypercube design, fits a 50-tree random
forest to log losses (infinite losses imputed at ten times the worst finite
one), and evaluates the candidate with the highest expected improvement,
using the spread of the per-tree predictions as the uncertainty.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import norm, qmc
from sklearn.ensemble import RandomForestRegressor

from fpia.cluster import max_fan_in
from fpia.corpus import Problem, derive_seed
from fpia.cost import TechParams
from fpia.pipeline import SHARED_POINT, ArchPoint, EvalResult, evaluate

AXES = ("I", "O", "F_I", "F_O", "occupancy")


@dataclass(frozen=True)
class SearchSpace:
    I: tuple[int, int] = (16, 512)
    O: tuple[int, int] = (8, 256)
    F_I: tuple[float, float] = (0.05, 1.0)
    F_O: tuple[float, float] = (0.05, 1.0)
    occupancy: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        for name in AXES:
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"empty range for {name}: [{lo}, {hi}]")
        if self.I[0] < 1 or self.O[0] < 1:
            raise ValueError("I and O must be >= 1")
        for name in ("F_I", "F_O", "occupancy"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi <= 1:
                raise ValueError(f"{name} range must lie in (0, 1]")

    @property
    def active(self) -> tuple[str, ...]:
        return tuple(a for a in AXES if getattr(self, a)[0] != getattr(self, a)[1])

    def with_min_inputs(self, min_I: int) -> "SearchSpace":
        lo, hi = self.I
        if min_I > hi:
            raise ValueError(f"no I in [{lo}, {hi}] covers fan-in {min_I}")
        return replace(self, I=(max(lo, min_I), hi))

    def decode(self, u: Sequence[float]) -> ArchPoint:
        """Point from unit-cube coordinates over the active axes.

        I and O are log-scaled integers; fractions are rounded to 0.01.
        """
        vals = {}
        it = iter(u)
        for a in AXES:
            lo, hi = getattr(self, a)
            x = next(it) if lo != hi else 0.0
            x = min(1.0, max(0.0, float(x)))
            if a in ("I", "O"):
                v = round(math.exp(math.log(lo) + x * (math.log(hi) - math.log(lo))))
                vals[a] = int(min(hi, max(lo, v)))
            else:
                vals[a] = min(hi, max(lo, round(lo + x * (hi - lo), 2)))
        return ArchPoint(**vals)

    def encode(self, p: ArchPoint) -> np.ndarray:
        out = []
        for a in self.active:
            lo, hi = getattr(self, a)
            v = getattr(p, a)
            if a in ("I", "O"):
                out.append((math.log(v) - math.log(lo)) / (math.log(hi) - math.log(lo)))
            else:
                out.append((v - lo) / (hi - lo))
        return np.clip(np.asarray(out, dtype=float), 0.0, 1.0)


class Evaluator:
    """Memoized :func:`evaluate` with per-(problem, point) derived seeds.

    The same point on the same problem always gets the same seed, so searches
    sharing an evaluator see identical results for points they both visit.
    """

    def __init__(self, tech: TechParams, seed: int = 0, **eval_kw):
        self.tech = tech
        self.seed = seed
        self.eval_kw = eval_kw
        self.cache: dict[tuple, EvalResult] = {}
        self.calls = 0

    def __call__(self, problem: Problem, point: ArchPoint) -> EvalResult:
        key = (problem.name, point.key())
        if key not in self.cache:
            self.calls += 1
            s = derive_seed(self.seed, problem.name, *point.key())
            self.cache[key] = evaluate(problem, point, self.tech, s, **self.eval_kw)
        return self.cache[key]


# ---------------------------------------------------------------- grid


LANDSCAPE_HEADER = ["problem", "I", "O", "F_I", "F_O", "occupancy", "eval_seed", "clusters", "M", "W",
                    "routing_area", "fpia_area", "baseline_area", "TA"]


@dataclass
class GridResult:
    results: list[EvalResult]
    argmin: EvalResult | None

    def rows(self) -> list[dict]:
        out = []
        for r in self.results:
            d = r.diagnostics
            out.append({"problem": r.problem, **r.point.to_dict(), "eval_seed": r.seed,
                        "clusters": d.get("clusters", ""), "M": d.get("M", ""), "W": d.get("W", ""),
                        "routing_area": d.get("routing_area", ""), "fpia_area": r.loss,
                        "baseline_area": d.get("baseline_area", ""), "TA": d.get("TA", 0.0)})
        return out


def grid_points(axes: Mapping[str, Sequence], base: ArchPoint = SHARED_POINT) -> list[ArchPoint]:
    unknown = set(axes) - set(AXES)
    if unknown:
        raise ValueError(f"unknown axes {sorted(unknown)}")
    points = [base]
    for a in AXES:
        if a in axes:
            points = [replace(p, **{a: v}) for p in points for v in axes[a]]
    return points


def argmin_result(results: Iterable[EvalResult]) -> EvalResult | None:
    """Smallest finite loss; ties go to the lexicographically smallest point."""
    feasible = [r for r in results if r.feasible]
    if not feasible:
        return None
    return min(feasible, key=lambda r: (r.loss, r.point.key()))


def grid_search(problem: Problem, axes: Mapping[str, Sequence], t: TechParams, seed: int = 0, *,
                base: ArchPoint = SHARED_POINT, evaluator: Evaluator | None = None) -> GridResult:
    ev = evaluator or Evaluator(t, seed)
    results = [ev(problem, p) for p in grid_points(axes, base)]
    return GridResult(results, argmin_result(results))


# ---------------------------------------------------------------- SMBO


@dataclass
class TraceEntry:
    step: int
    phase: str
    point: ArchPoint
    objective: float  # mean log loss over the problem set, inf if any failed
    losses: dict[str, float]
    incumbent: float

    def to_dict(self) -> dict:
        return {"step": self.step, "phase": self.phase, **self.point.to_dict(),
                "objective": _json_num(self.objective),
                "losses": {k: _json_num(v) for k, v in self.losses.items()},
                "incumbent": _json_num(self.incumbent)}


def _json_num(v: float):
    return v if math.isfinite(v) else "inf"


@dataclass
class SmboResult:
    best: ArchPoint | None
    best_objective: float
    trace: list[TraceEntry] = field(default_factory=list)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in self.trace)


def expected_improvement(mu: np.ndarray, sigma: np.ndarray, best: float) -> np.ndarray:
    sigma = np.maximum(sigma, 1e-12)
    z = (best - mu) / sigma
    return (best - mu) * norm.cdf(z) + sigma * norm.pdf(z)


def _problem_objective(problems: Sequence[Problem], ev: Evaluator):
    def objective(p: ArchPoint) -> tuple[float, dict[str, float]]:
        losses = {pr.name: ev(pr, p).loss for pr in problems}
        if any(not math.isfinite(v) or v <= 0 for v in losses.values()):
            return math.inf, losses
        return sum(math.log(v) for v in losses.values()) / len(losses), losses
    return objective


def smbo_optimize(problems: Sequence[Problem] | None, space: SearchSpace, budget: int, seed: int = 0, *,
                  tech: TechParams | None = None, objective: Callable[[ArchPoint], float] | None = None,
                  evaluator: Evaluator | None = None, inject: Sequence[ArchPoint] = (),
                  n_init: int | None = None, pool_size: int = 500, trees: int = 50) -> SmboResult:
    """Minimize the mean log FPIA area over ``problems`` (or ``objective``).

    ``objective`` replaces the pipeline with a positive analytic loss. Points
    in ``inject`` are evaluated after the search, outside the budget, and
    compete for the incumbent.
    """
    if objective is None:
        if not problems:
            raise ValueError("empty problem set")
        ev = evaluator or Evaluator(tech, seed)
        obj = _problem_objective(problems, ev)
    else:
        def obj(p):
            v = objective(p)
            return (math.log(v) if v > 0 and math.isfinite(v) else math.inf), {"objective": v}
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    dims = len(space.active)
    n0 = min(budget, n_init if n_init is not None else max(1, budget // 5))

    xs: list[np.ndarray] = []
    ys: list[float] = []
    seen: set[tuple] = set()
    trace: list[TraceEntry] = []
    best_y, best_p = math.inf, None

    def record(p: ArchPoint, phase: str):
        nonlocal best_y, best_p
        y, losses = obj(p)
        seen.add(p.key())
        xs.append(space.encode(p))
        ys.append(y)
        if y < best_y or (y == best_y and best_p is not None and p.key() < best_p.key()):
            best_y, best_p = y, p
        trace.append(TraceEntry(len(trace), phase, p, y, losses, best_y))

    if dims:
        design = qmc.LatinHypercube(d=dims, seed=derive_seed(seed, "lhs") % 2**32).random(n0)
    else:
        design = np.zeros((1, 0))
    for u in design:
        p = space.decode(u)
        if p.key() not in seen:
            record(p, "initial")

    while len(trace) < budget and dims:
        y = np.asarray(ys)
        finite = np.isfinite(y)
        if finite.any():
            y = np.where(finite, y, y[finite].max() + math.log(10))
        else:
            y = np.zeros_like(y)
        X = np.vstack(xs)
        forest = RandomForestRegressor(n_estimators=trees, bootstrap=True, max_features=0.7,
                                       random_state=derive_seed(seed, "rf", len(trace)) % 2**32)
        forest.fit(X, y)
        pool = [rng.random((pool_size, dims))]
        order = np.argsort(y, kind="stable")[:5]
        for k in order:
            pool.append(np.clip(X[k] + rng.normal(0, 0.05, (pool_size // 10, dims)), 0, 1))
        cand, keys = [], []
        for u in np.vstack(pool):
            p = space.decode(u)
            k = p.key()
            if k not in seen and k not in keys:
                cand.append(p)
                keys.append(k)
        if not cand:
            break
        C = np.vstack([space.encode(p) for p in cand])
        per_tree = np.stack([t.predict(C) for t in forest.estimators_])
        ei = expected_improvement(per_tree.mean(0), per_tree.std(0), float(y.min()))
        record(cand[int(np.argmax(ei))], "smbo")

    for p in inject:
        if p.key() not in seen:
            record(p, "injected")
    return SmboResult(best_p if math.isfinite(best_y) else None, best_y, trace)


# ---------------------------------------------------------------- shared vs custom


SHARED_HEADER = ["problem", "shared_area", "custom_area", "ratio", "shared_I", "shared_O", "shared_F_I",
                 "shared_F_O", "custom_I", "custom_O", "custom_F_I", "custom_F_O"]


@dataclass
class SharedReport:
    shared: SmboResult
    custom: dict[str, SmboResult]
    rows: list[dict]

    @property
    def worst_ratio(self) -> float:
        return max((r["ratio"] for r in self.rows), default=math.nan)


def shared_vs_custom(problems: Sequence[Problem], space: SearchSpace, budget: int, seed: int,
                     tech: TechParams, *, evaluator: Evaluator | None = None, **smbo_kw) -> SharedReport:
    """One shared architecture for the whole set against per-problem optima.

    The shared input budget must cover the largest fan-in in the set. Each
    custom search runs over the space clamped at its own problem's fan-in and
    has the shared optimum injected, so every ratio is at least 1 up to noise.
    """
    if len(problems) < 2:
        raise ValueError("need at least two problems")
    ev = evaluator or Evaluator(tech, seed)
    fan = {p.name: max_fan_in(p.qubo) for p in problems}
    shared = smbo_optimize(problems, space.with_min_inputs(max(fan.values())), budget, seed,
                           evaluator=ev, **smbo_kw)
    custom: dict[str, SmboResult] = {}
    rows = []
    for p in problems:
        inject = [shared.best] if shared.best is not None else []
        res = smbo_optimize([p], space.with_min_inputs(fan[p.name]), budget, seed,
                            evaluator=ev, inject=inject, **smbo_kw)
        custom[p.name] = res
        s_area = ev(p, shared.best).loss if shared.best is not None else math.inf
        c_area = ev(p, res.best).loss if res.best is not None else math.inf
        ratio = s_area / c_area if math.isfinite(c_area) else math.nan
        sb = shared.best or ArchPoint(0, 0, 0, 0)
        cb = res.best or ArchPoint(0, 0, 0, 0)
        rows.append({"problem": p.name, "shared_area": s_area, "custom_area": c_area, "ratio": ratio,
                     "shared_I": sb.I, "shared_O": sb.O, "shared_F_I": sb.F_I, "shared_F_O": sb.F_O,
                     "custom_I": cb.I, "custom_O": cb.O, "custom_F_I": cb.F_I, "custom_F_O": cb.F_O})
    return SharedReport(shared, custom, rows)

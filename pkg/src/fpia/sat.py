"""DIMACS CNF ingestion, random 3SAT generation and Rosenberg quadratization."""

from __future__ import annotations

import random
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from fpia.qubo import Qubo

MAX_ENUM_VARS = 24


class CnfError(ValueError):
    pass


@dataclass(frozen=True)
class Cnf:
    num_vars: int
    clauses: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for k, clause in enumerate(self.clauses):
            if not clause:
                raise CnfError(f"clause {k} is empty")
            for lit in clause:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise CnfError(f"literal {lit} in clause {k} out of range 1..{self.num_vars}")
            if any(-lit in clause for lit in clause):
                raise CnfError(f"clause {k} contains a literal and its negation")

    def satisfied_by(self, assignment: Sequence[int]) -> bool:
        """``assignment[v - 1]`` is the value of variable ``v``."""
        return self.count_violated(assignment) == 0

    def count_violated(self, assignment: Sequence[int]) -> int:
        bad = 0
        for clause in self.clauses:
            if not any((assignment[abs(l) - 1] == 1) == (l > 0) for l in clause):
                bad += 1
        return bad

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.num_vars} {len(self.clauses)}"]
        lines += [" ".join(map(str, c)) + " 0" for c in self.clauses]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class QuadratizationMap:
    num_vars: int
    aux_vars: dict[int, tuple[int, int]] = field(default_factory=dict)
    penalty: int = 2

    def strip(self, state: Sequence[int]) -> list[int]:
        """Drop auxiliary variables, leaving the CNF assignment."""
        return [int(v) for v in state[: self.num_vars]]

    def to_dict(self) -> dict:
        return {
            "num_vars": self.num_vars,
            "penalty": self.penalty,
            "aux_vars": [[z, a, b] for z, (a, b) in sorted(self.aux_vars.items())],
        }

    @classmethod
    def from_dict(cls, doc) -> "QuadratizationMap":
        aux = {int(z): (int(a), int(b)) for z, a, b in doc["aux_vars"]}
        return cls(int(doc["num_vars"]), aux, int(doc["penalty"]))


def parse_dimacs(text: str | bytes) -> Cnf:
    if isinstance(text, bytes):
        text = text.decode()
    header = None
    clauses: list[tuple[int, ...]] = []
    current: list[int] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            # SATLIB files terminate with "%\n0"
            break
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise CnfError(f"bad header line: {raw!r}")
            header = (int(parts[2]), int(parts[3]))
            continue
        if header is None:
            raise CnfError("clause data before 'p cnf' header")
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                if current:
                    clauses.append(tuple(current))
                current = []
                continue
            if abs(lit) > header[0]:
                raise CnfError(f"literal {lit} out of range 1..{header[0]}")
            current.append(lit)
    if header is None:
        raise CnfError("missing 'p cnf' header")
    if current:
        clauses.append(tuple(current))
    cleaned = []
    for clause in clauses:
        clause = tuple(dict.fromkeys(clause))
        if any(-l in clause for l in clause):
            warnings.warn(f"dropping tautological clause {clause}")
            continue
        cleaned.append(clause)
    if len(clauses) != header[1]:
        warnings.warn(f"header declares {header[1]} clauses, found {len(clauses)}")
    return Cnf(header[0], tuple(cleaned))


def gen_random_3sat(num_vars: int, ratio: float, seed: int) -> Cnf:
    """Uniform random 3SAT with ``round(ratio * num_vars)`` clauses."""
    if num_vars < 3:
        raise CnfError("need at least 3 variables")
    rng = random.Random(seed)
    clauses = []
    for _ in range(round(ratio * num_vars)):
        vs = rng.sample(range(1, num_vars + 1), 3)
        clauses.append(tuple(v if rng.random() < 0.5 else -v for v in vs))
    return Cnf(num_vars, tuple(clauses))


def _clause_polynomial(clause: Sequence[int]) -> dict[tuple[int, ...], int]:
    """Expand prod(1 - lit) over the clause; keys are sorted 0-based var tuples."""
    poly: dict[tuple[int, ...], int] = {(): 1}
    for lit in clause:
        v = abs(lit) - 1
        # positive literal: (1 - x); negative literal: x
        factor = {(): 1, (v,): -1} if lit > 0 else {(v,): 1}
        nxt: dict[tuple[int, ...], int] = {}
        for mono, c in poly.items():
            for fm, fc in factor.items():
                key = tuple(sorted(set(mono) | set(fm)))
                nxt[key] = nxt.get(key, 0) + c * fc
        poly = {k: c for k, c in nxt.items() if c}
    return poly


def quadratize(cnf: Cnf, penalty: int = 2) -> tuple[Qubo, QuadratizationMap]:
    """Penalty QUBO whose value at ``(x, z*)`` counts clauses violated by ``x``.

    Every 3-literal clause gets its own auxiliary ``z`` standing for the product
    of the first two literals' variables ``a*b``; the cubic term ``s*a*b*c``
    becomes ``s*z*c + P*(a*b - 2*a*z - 2*b*z + 3*z)``.
    """
    if penalty < 2:
        raise ValueError("penalty must be >= 2")
    n = cnf.num_vars
    terms: list[tuple[int, int, int]] = []
    linear = [0] * n
    constant = 0
    aux: dict[int, tuple[int, int]] = {}
    for clause in cnf.clauses:
        if len(clause) > 3:
            raise CnfError(f"clause {clause} has more than 3 literals")
        for mono, c in _clause_polynomial(clause).items():
            if len(mono) == 0:
                constant += c
            elif len(mono) == 1:
                linear[mono[0]] += c
            elif len(mono) == 2:
                terms.append((mono[0], mono[1], c))
            else:
                a, b = abs(clause[0]) - 1, abs(clause[1]) - 1
                (c_var,) = set(mono) - {a, b}
                z = n + len(aux)
                aux[z] = (a, b)
                linear.append(3 * penalty)
                terms += [(z, c_var, c), (a, b, penalty), (a, z, -2 * penalty), (b, z, -2 * penalty)]
    q = Qubo.from_polynomial(n + len(aux), terms, linear, constant)
    return q, QuadratizationMap(n, aux, penalty)


# brute-force oracles ----------------------------------------------------


def _bits(count: int, width: int, start: int = 0) -> np.ndarray:
    idx = np.arange(start, start + count, dtype=np.int64)
    return ((idx[:, None] >> np.arange(width, dtype=np.int64)) & 1).astype(np.int8)


def violated_counts(cnf: Cnf) -> np.ndarray:
    """Violated-clause count for every assignment; index bit ``v`` is var ``v+1``."""
    if cnf.num_vars > MAX_ENUM_VARS:
        raise CnfError("too many variables to enumerate")
    size = 1 << cnf.num_vars
    idx = np.arange(size, dtype=np.int64)
    out = np.zeros(size, dtype=np.int32)
    for clause in cnf.clauses:
        sat = np.zeros(size, dtype=bool)
        for lit in clause:
            bit = ((idx >> (abs(lit) - 1)) & 1).astype(bool)
            sat |= bit if lit > 0 else ~bit
        out += ~sat
    return out


def is_satisfiable_bruteforce(cnf: Cnf) -> bool:
    return bool((violated_counts(cnf) == 0).any())


def _branch_literal(cls: list[list[int]]) -> int:
    """Most frequent literal among the shortest clauses."""
    short = min(len(c) for c in cls)
    counts: dict[int, int] = {}
    for c in cls:
        if len(c) == short:
            for lit in c:
                counts[lit] = counts.get(lit, 0) + 1
    return max(sorted(counts), key=lambda lit: counts[lit] + counts.get(-lit, 0))


def solve_dpll(cnf: Cnf) -> list[int] | None:
    """Small DPLL with unit propagation; returns an assignment or None."""
    clauses = [list(c) for c in cnf.clauses]

    def simplify(cls: list[list[int]], lit: int):
        out = []
        for c in cls:
            if lit in c:
                continue
            if -lit in c:
                c = [l for l in c if l != -lit]
                if not c:
                    return None
            out.append(c)
        return out

    def rec(cls: list[list[int]], assigned: dict[int, bool]):
        while True:
            unit = next((c[0] for c in cls if len(c) == 1), None)
            if unit is None:
                break
            assigned[abs(unit)] = unit > 0
            cls = simplify(cls, unit)
            if cls is None:
                return None
        if not cls:
            return assigned
        lit = _branch_literal(cls)
        for choice in (lit, -lit):
            nxt = simplify(cls, choice)
            if nxt is not None:
                res = rec(nxt, {**assigned, abs(choice): choice > 0})
                if res is not None:
                    return res
        return None

    res = rec(clauses, {})
    if res is None:
        return None
    return [1 if res.get(v, False) else 0 for v in range(1, cnf.num_vars + 1)]


def qubo_energies(q: Qubo, start: int, count: int) -> np.ndarray:
    """Energies of states ``start .. start+count-1`` (bit ``i`` is ``x_i``)."""
    if not q.is_integral():
        raise ValueError("brute-force enumeration needs integral weights")
    idx = np.arange(start, start + count, dtype=np.int64)
    x = [((idx >> i) & 1) for i in range(q.n)]
    e = np.full(count, q.constant, dtype=np.int64)
    for i, w in enumerate(q.linear):
        if w:
            e += w * x[i]
    for i, j, w in q.edges():
        e += w * (x[i] & x[j])
    return e


def verify_quadratization(cnf: Cnf, q: Qubo, qmap: QuadratizationMap) -> bool:
    """Exhaustively check that minimizing over auxiliaries counts violated clauses.

    Implies min energy is 0 exactly when the CNF is satisfiable and that every
    satisfying assignment extends to a zero-energy state.
    """
    if q.n > MAX_ENUM_VARS:
        raise CnfError(f"{q.n} variables is too many to enumerate")
    if q.n < cnf.num_vars:
        return False
    nx = cnf.num_vars
    nz = q.n - nx
    xsize = 1 << nx
    best = np.full(xsize, np.iinfo(np.int64).max, dtype=np.int64)
    zchunk = max(1, (1 << 20) >> nx)
    for z0 in range(0, 1 << nz, zchunk):
        zc = min(zchunk, (1 << nz) - z0)
        e = qubo_energies(q, z0 << nx, zc << nx).reshape(zc, xsize)
        np.minimum(best, e.min(axis=0), out=best)
    return bool(np.array_equal(best, violated_counts(cnf).astype(np.int64)))


def clauses_from_lists(num_vars: int, clauses: Iterable[Iterable[int]]) -> Cnf:
    return Cnf(num_vars, tuple(tuple(c) for c in clauses))

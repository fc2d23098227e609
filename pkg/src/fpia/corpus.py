"""Benchmark problems: the 4-spin toy, SATLIB-style uniform 3SAT, random 3SAT
QUBOs of a requested size, and semiprime factoring through a multiplier circuit."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

from fpia.qubo import Qubo
from fpia.sat import (
    Cnf,
    QuadratizationMap,
    gen_random_3sat,
    is_satisfiable_bruteforce,
    parse_dimacs,
    quadratize,
    solve_dpll,
)

# clause counts of the SATLIB uniform random 3SAT families (uf<n>-<m>)
SATLIB_CLAUSES = {20: 91, 50: 218, 75: 325, 100: 430, 125: 538, 150: 645, 175: 753, 200: 860, 225: 960, 250: 1065}

# clause-to-variable ratio used when only the QUBO size is prescribed
DEFAULT_RATIO = 4.26


@dataclass(frozen=True)
class Problem:
    name: str
    qubo: Qubo
    cnf: Cnf | None = None
    qmap: QuadratizationMap | None = None


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary printable parts."""
    digest = hashlib.sha256("/".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def toy_qubo() -> Qubo:
    """Path-plus-star graph on 4 spins: couplings 1-2, 1-3, 2-3, 3-4 (0-based below)."""
    return Qubo(4, {(0, 1): 1, (0, 2): 1, (1, 2): 1, (2, 3): 1}, [-1, -1, -1, -1])


def _satisfiable(cnf: Cnf) -> bool:
    if cnf.num_vars <= 20:
        return is_satisfiable_bruteforce(cnf)
    return solve_dpll(cnf) is not None


def uf_cnf(num_vars: int, index: int, seed: int = 0) -> Cnf:
    """``index``-th satisfiable uniform 3SAT instance with SATLIB's clause count."""
    clauses = SATLIB_CLAUSES.get(num_vars)
    if clauses is None:
        raise ValueError(f"no SATLIB clause count for {num_vars} variables")
    found = -1
    attempt = 0
    while True:
        cnf = gen_random_3sat(num_vars, clauses / num_vars, derive_seed("uf", num_vars, seed, attempt))
        attempt += 1
        if _satisfiable(cnf):
            found += 1
            if found == index:
                return cnf


def from_cnf(name: str, cnf: Cnf) -> Problem:
    q, qmap = quadratize(cnf)
    return Problem(name, q, cnf, qmap)


def uf_problem(num_vars: int, index: int, seed: int = 0) -> Problem:
    return from_cnf(f"uf{num_vars}-{index:02d}", uf_cnf(num_vars, index, seed))


def random_3sat_problem(size: int, seed: int, ratio: float = DEFAULT_RATIO) -> Problem:
    """Quadratized random 3SAT whose QUBO has about ``size`` spins.

    Each clause adds one auxiliary spin, so ``v`` variables give roughly
    ``v (1 + ratio)`` spins.
    """
    v = max(3, round(size / (1 + ratio)))
    return from_cnf(f"r3sat-{size}-s{seed}", gen_random_3sat(v, ratio, seed))


# ---------------------------------------------------------------- factoring


class _Circuit:
    def __init__(self):
        self.num_vars = 0
        self.clauses: list[tuple[int, ...]] = []

    def var(self) -> int:
        self.num_vars += 1
        return self.num_vars

    def and_(self, a: int, b: int) -> int:
        c = self.var()
        self.clauses += [(-c, a), (-c, b), (c, -a, -b)]
        return c

    def or_(self, a: int, b: int) -> int:
        c = self.var()
        self.clauses += [(c, -a), (c, -b), (-c, a, b)]
        return c

    def xor(self, a: int, b: int) -> int:
        c = self.var()
        self.clauses += [(-a, -b, -c), (a, b, -c), (a, -b, c), (-a, b, c)]
        return c

    def half_add(self, a: int, b: int) -> tuple[int, int]:
        return self.xor(a, b), self.and_(a, b)

    def full_add(self, a: int, b: int, cin: int) -> tuple[int, int]:
        t = self.xor(a, b)
        return self.xor(t, cin), self.or_(self.and_(a, b), self.and_(t, cin))


def factoring_cnf(n: int, p_bits: int | None = None, q_bits: int | None = None) -> Cnf:
    """CNF of ``p * q == n`` over an array multiplier.

    Variables ``1..p_bits`` are p's bits and the next ``q_bits`` are q's, least
    significant first. With both widths below the bit length of ``n`` the
    trivial factorization ``1 * n`` is excluded.
    """
    if n < 4:
        raise ValueError("n must be >= 4")
    width = n.bit_length()
    half = (width + 1) // 2
    p_bits = p_bits or half
    q_bits = q_bits or half
    circ = _Circuit()
    p = [circ.var() for _ in range(p_bits)]
    q = [circ.var() for _ in range(q_bits)]
    # column-wise accumulation of partial products
    columns: list[list[int]] = [[] for _ in range(p_bits + q_bits + 1)]
    for i, pi in enumerate(p):
        for j, qj in enumerate(q):
            columns[i + j].append(circ.and_(pi, qj))
    product: list[int] = []
    for k in range(len(columns)):
        col = columns[k]
        while len(col) > 1:
            if len(col) >= 3:
                s, c = circ.full_add(col.pop(), col.pop(), col.pop())
            else:
                s, c = circ.half_add(col.pop(), col.pop())
            col.insert(0, s)
            if k + 1 < len(columns):
                columns[k + 1].append(c)
            else:
                circ.clauses.append((-c,))
        product.append(col[0] if col else 0)
    for k, bit in enumerate(product):
        want = (n >> k) & 1
        if bit == 0:
            if want:
                raise ValueError(f"{n} does not fit a {p_bits}x{q_bits}-bit multiplier")
            continue
        circ.clauses.append((bit,) if want else (-bit,))
    if n >> len(product):
        raise ValueError(f"{n} does not fit a {p_bits}x{q_bits}-bit multiplier")
    return Cnf(circ.num_vars, tuple(circ.clauses))


def decode_factors(cnf_assignment, n: int, p_bits: int | None = None, q_bits: int | None = None):
    """Read ``(p, q)`` back from a satisfying assignment of :func:`factoring_cnf`."""
    half = (n.bit_length() + 1) // 2
    p_bits = p_bits or half
    q_bits = q_bits or half
    p = sum(int(cnf_assignment[i]) << i for i in range(p_bits))
    q = sum(int(cnf_assignment[p_bits + j]) << j for j in range(q_bits))
    return p, q


def factoring_problem(n: int) -> Problem:
    return from_cnf(f"factor{n}", factoring_cnf(n))


# ---------------------------------------------------------------- loading


def load_problem(path: str | Path) -> Problem:
    """Read a DIMACS CNF (quadratized on load) or a QUBO JSON file."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return Problem(path.stem, Qubo.loads(text))
    return from_cnf(path.stem, parse_dimacs(text))


def resolve(spec: str, seed: int = 0) -> Problem:
    """Problem from a file path or a generator spec.

    Generator specs: ``toy``, ``uf<n>[:<index>]``, ``random:<size>``,
    ``factor:<n>``.
    """
    if spec == "toy":
        return Problem("toy", toy_qubo())
    if spec.startswith("uf") and not Path(spec).exists():
        body, _, idx = spec[2:].partition(":")
        return uf_problem(int(body), int(idx or 0), seed)
    if spec.startswith("random:"):
        return random_3sat_problem(int(spec.split(":", 1)[1]), seed)
    if spec.startswith("factor:"):
        return factoring_problem(int(spec.split(":", 1)[1]))
    return load_problem(spec)


def desk_corpus(seed: int = 0) -> list[Problem]:
    """Small problems that place and route in seconds."""
    return [
        Problem("toy", toy_qubo()),
        uf_problem(20, 0, seed),
        uf_problem(50, 0, seed),
        uf_problem(100, 0, seed),
        factoring_problem(143),
    ]

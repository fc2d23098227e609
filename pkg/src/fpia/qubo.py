"""QUBO representation, energy evaluation and sparsity statistics.

Energy convention::

    E(x) = 1/2 * sum_{i != j} W2[i, j] x_i x_j + sum_i W1[i] x_i + W0

with ``W2`` symmetric and zero on the diagonal, so that a pair ``(i, j)``
contributes ``W2[i, j] * x_i * x_j`` exactly once.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Sequence

import numpy as np

INFINITY = math.inf


def _normalize(w):
    """Keep integral weights as ``int``; rationals stay exact."""
    if isinstance(w, bool):
        return int(w)
    if isinstance(w, Fraction):
        return int(w) if w.denominator == 1 else w
    if isinstance(w, Rational):
        return int(w) if w.denominator == 1 else Fraction(w)
    if isinstance(w, (np.integer,)):
        return int(w)
    if isinstance(w, (float, np.floating)):
        w = float(w)
        return int(w) if w.is_integer() else w
    return w


class Qubo:
    """Immutable sparse QUBO.

    ``couplings`` maps ``(i, j)`` to the symmetric matrix element ``W2[i, j]``.
    Supplying only one triangle is fine; supplying both requires equal
    values. Diagonal entries ``(i, i)`` are folded into the linear term
    (``x_i**2 == x_i``), contributing ``W2[i, i] / 2`` per the energy
    convention above.
    """

    __slots__ = ("_n", "_adj", "_linear", "_constant")

    def __init__(
        self,
        n: int,
        couplings: Mapping[tuple[int, int], object] | None = None,
        linear: Sequence | None = None,
        constant=0,
    ):
        if n < 0:
            raise ValueError("n must be non-negative")
        lin = [0] * n if linear is None else [_normalize(v) for v in linear]
        if len(lin) != n:
            raise ValueError(f"linear has length {len(lin)}, expected {n}")
        adj: list[dict[int, object]] = [{} for _ in range(n)]
        for (i, j), w in (couplings or {}).items():
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n):
                raise IndexError(f"coupling ({i}, {j}) outside [0, {n})")
            w = _normalize(w)
            if i == j:
                half = w / 2 if isinstance(w, float) else Fraction(w) / 2
                lin[i] = _normalize(lin[i] + half)
                continue
            prev = adj[i].get(j)
            if prev is not None and prev != w:
                raise ValueError(f"asymmetric coupling ({i}, {j}): {prev} vs {w}")
            adj[i][j] = w
            adj[j][i] = w
        for row in adj:
            for j in [j for j, w in row.items() if w == 0]:
                del row[j]
        self._n = n
        self._adj = adj
        self._linear = tuple(lin)
        self._constant = _normalize(constant)

    @classmethod
    def from_polynomial(cls, n: int, terms: Iterable[tuple[int, int, object]],
                        linear: Sequence | None = None, constant=0) -> "Qubo":
        """Build from polynomial terms ``c * x_i * x_j``; repeated pairs accumulate.

        ``i == j`` adds ``c`` to the linear term.
        """
        lin = [0] * n if linear is None else list(linear)
        acc: dict[tuple[int, int], object] = {}
        for i, j, c in terms:
            if i == j:
                lin[i] += c
                continue
            key = (i, j) if i < j else (j, i)
            acc[key] = acc.get(key, 0) + c
        return cls(n, acc, lin, constant)

    @property
    def n(self) -> int:
        return self._n

    @property
    def linear(self) -> tuple:
        return self._linear

    @property
    def constant(self):
        return self._constant

    @property
    def quadratic(self) -> dict[tuple[int, int], object]:
        """Both triangles of the coupling matrix."""
        return {(i, j): w for i, row in enumerate(self._adj) for j, w in row.items()}

    def neighbors(self, i: int) -> Mapping[int, object]:
        return self._adj[i]

    def edges(self):
        """Yield ``(i, j, w)`` with ``i < j``."""
        for i, row in enumerate(self._adj):
            for j, w in row.items():
                if i < j:
                    yield i, j, w

    def fan_in(self, i: int) -> int:
        return len(self._adj[i])

    def is_integral(self) -> bool:
        vals = [self._constant, *self._linear]
        vals.extend(w for row in self._adj for w in row.values())
        return all(isinstance(v, int) for v in vals)

    def relabel(self, perm: Sequence[int]) -> "Qubo":
        """Return the QUBO with variable ``i`` renamed to ``perm[i]``."""
        if sorted(perm) != list(range(self._n)):
            raise ValueError("perm is not a permutation")
        lin = [0] * self._n
        for i, v in enumerate(self._linear):
            lin[perm[i]] = v
        couplings = {(perm[i], perm[j]): w for i, j, w in self.edges()}
        return Qubo(self._n, couplings, lin, self._constant)

    def to_dense(self) -> np.ndarray:
        dtype = np.int64 if self.is_integral() else object
        mat = np.zeros((self._n, self._n), dtype=dtype)
        for i, row in enumerate(self._adj):
            for j, w in row.items():
                mat[i, j] = w
        return mat

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self._n,
            "constant": _encode(self._constant),
            "linear": [_encode(v) for v in self._linear],
            "quadratic": [[i, j, _encode(w)] for i, j, w in self.edges()],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Qubo":
        n = int(doc["n"])
        couplings = {}
        for i, j, w in doc.get("quadratic", []):
            if i >= j:
                raise ValueError(f"quadratic entries must have i < j, got ({i}, {j})")
            couplings[(i, j)] = _decode(w)
        linear = [_decode(v) for v in doc.get("linear", [0] * n)]
        return cls(n, couplings, linear, _decode(doc.get("constant", 0)))

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "Qubo":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, Qubo):
            return NotImplemented
        return (self._n == other._n and self._linear == other._linear
                and self._constant == other._constant and self._adj == other._adj)

    def __hash__(self):
        return hash((self._n, self._linear, self._constant, tuple(self.edges())))

    def __repr__(self):
        nnz = sum(len(r) for r in self._adj)
        return f"Qubo(n={self._n}, nonzero={nnz})"


def _encode(w):
    if isinstance(w, Fraction):
        return str(w)
    return w


def _decode(w):
    if isinstance(w, str):
        return _normalize(Fraction(w))
    return _normalize(w)


def check_state(q: Qubo, x: Sequence[int]) -> None:
    if len(x) != q.n:
        raise ValueError(f"state has length {len(x)}, QUBO has {q.n} variables")


def energy(q: Qubo, x: Sequence[int]):
    """Energy of binary state ``x``; exact for integral or rational weights."""
    check_state(q, x)
    total = q.constant
    for i, v in enumerate(q.linear):
        if x[i]:
            total += v
    for i, j, w in q.edges():
        if x[i] and x[j]:
            total += w
    return _normalize(total)


def local_field(q: Qubo, x: Sequence[int], i: int):
    """``sum_{j != i} W2[i, j] x_j + W1[i]``, i.e. E(x_i=1) - E(x_i=0)."""
    check_state(q, x)
    if not 0 <= i < q.n:
        raise IndexError(f"spin {i} outside [0, {q.n})")
    total = q.linear[i]
    for j, w in q.neighbors(i).items():
        if x[j]:
            total += w
    return _normalize(total)


@dataclass(frozen=True)
class QuboStats:
    n: int
    sparsity: Fraction | float  # inf when there are no couplings
    max_fan_in: int
    mean_fan_in: Fraction | int
    nonzero_count: int


def stats(q: Qubo) -> QuboStats:
    """Sparsity ``n**2 / nonzero`` (both triangles counted) and fan-in stats.

    An edgeless QUBO reports ``inf`` sparsity.
    """
    fan = [q.fan_in(i) for i in range(q.n)]
    nnz = sum(fan)
    sparsity = INFINITY if nnz == 0 else Fraction(q.n * q.n, nnz)
    return QuboStats(
        n=q.n,
        sparsity=sparsity,
        max_fan_in=max(fan, default=0),
        mean_fan_in=Fraction(nnz, q.n) if q.n else 0,
        nonzero_count=nnz,
    )

"""Lattice geometry, local-term operators, the intensive star norm and
Lieb-Robinson bound evaluators.

Sites carry a linear index in ``[0, N)`` with the last axis running fastest.
Explicit term matrices act on the tensor product of their support sites in
ascending linear-index order, site with the smallest index being the
leftmost tensor factor.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class Lattice:
    """Hypercubic lattice with open or periodic boundaries per axis."""

    def __init__(self, extents: Sequence[int], periodic: Sequence[bool] | bool = False):
        extents = tuple(int(e) for e in extents)
        if not extents or any(e < 1 for e in extents):
            raise ValueError(f"extents must be positive integers, got {extents}")
        if isinstance(periodic, bool):
            periodic = (periodic,) * len(extents)
        periodic = tuple(bool(p) for p in periodic)
        if len(periodic) != len(extents):
            raise ValueError("one periodic flag per axis required")
        self.extents = extents
        self.periodic = periodic

    @classmethod
    def chain(cls, n: int, periodic: bool = False) -> "Lattice":
        return cls((n,), periodic)

    @property
    def dimension(self) -> int:
        return len(self.extents)

    @property
    def n_sites(self) -> int:
        return math.prod(self.extents)

    def coords(self, site: int) -> tuple[int, ...]:
        self._check(site)
        return tuple(int(c) for c in np.unravel_index(site, self.extents))

    def index(self, coords: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(coords), self.extents))

    def _check(self, site: int) -> None:
        if not 0 <= site < self.n_sites:
            raise ValueError(f"site {site} outside lattice of {self.n_sites} sites")

    def distance(self, x: int, y: int) -> int:
        """Manhattan distance, wrapping along periodic axes."""
        cx, cy = self.coords(x), self.coords(y)
        total = 0
        for a, b, n, per in zip(cx, cy, self.extents, self.periodic):
            delta = abs(a - b)
            if per:
                delta = min(delta, n - delta)
            total += delta
        return total

    def neighbours(self, site: int) -> list[int]:
        out = []
        c = self.coords(site)
        for axis, (n, per) in enumerate(zip(self.extents, self.periodic)):
            for step in (-1, 1):
                k = c[axis] + step
                if per:
                    k %= n
                elif not 0 <= k < n:
                    continue
                nb = list(c)
                nb[axis] = k
                j = self.index(nb)
                if j != site and j not in out:
                    out.append(j)
        return out

    def bonds(self) -> list[tuple[int, int]]:
        """Nearest-neighbour pairs ``(i, j)`` with ``i < j``."""
        seen = set()
        for s in range(self.n_sites):
            for nb in self.neighbours(s):
                seen.add((min(s, nb), max(s, nb)))
        return sorted(seen)

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, Lattice) and self.extents == other.extents
                and self.periodic == other.periodic)

    def __hash__(self) -> int:
        return hash((self.extents, self.periodic))

    def __repr__(self) -> str:
        return f"Lattice(extents={self.extents}, periodic={self.periodic})"


class Geometry(NamedTuple):
    distance: int
    diam_a: int
    diam_b: int


def _as_support(lattice: Lattice, sites: Iterable[int]) -> tuple[int, ...]:
    support = tuple(sorted(set(int(s) for s in sites)))
    if not support:
        raise ValueError("empty support")
    for s in support:
        lattice._check(s)
    return support


def diameter(lattice: Lattice, sites: Iterable[int]) -> int:
    support = _as_support(lattice, sites)
    return max((lattice.distance(x, y) for x, y in itertools.combinations(support, 2)),
               default=0)


def set_distance(lattice: Lattice, a: Iterable[int], b: Iterable[int]) -> int:
    a, b = _as_support(lattice, a), _as_support(lattice, b)
    return min(lattice.distance(x, y) for x in a for y in b)


def geometry(lattice: Lattice, a: Iterable[int], b: Iterable[int]) -> Geometry:
    """Set distance between ``a`` and ``b`` plus both diameters."""
    return Geometry(set_distance(lattice, a, b), diameter(lattice, a), diameter(lattice, b))


def _permute_factors(matrix: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Reorder qubit tensor factors: factor ``k`` of the result is factor
    ``order[k]`` of the input."""
    n = len(order)
    t = matrix.reshape((2,) * (2 * n))
    axes = list(order) + [n + o for o in order]
    return t.transpose(axes).reshape(2 ** n, 2 ** n)


def embed(matrix: np.ndarray, support: Sequence[int], target: Sequence[int]) -> np.ndarray:
    """Extend an operator on ``support`` to the sorted site list ``target``
    (a superset) by tensoring identities."""
    support = list(support)
    target = list(target)
    extra = [s for s in target if s not in support]
    if len(extra) + len(support) != len(target):
        raise ValueError("target must contain the support")
    full = np.kron(matrix, np.eye(2 ** len(extra)))
    current = support + extra
    order = [current.index(s) for s in target]
    return _permute_factors(full, order)


@dataclass(frozen=True)
class LocalTerm:
    """One term of a local operator: a support plus either an explicit matrix
    or only its operator norm."""

    support: tuple[int, ...]
    matrix: np.ndarray | None = field(default=None, compare=False, repr=False)
    norm: float = 0.0

    @classmethod
    def from_matrix(cls, support: Sequence[int], matrix: np.ndarray) -> "LocalTerm":
        support = [int(s) for s in support]
        if len(set(support)) != len(support) or not support:
            raise ValueError("support must be non-empty with distinct sites")
        m = np.asarray(matrix, dtype=complex)
        dim = 2 ** len(support)
        if m.shape != (dim, dim):
            raise ValueError(f"matrix shape {m.shape} does not match 2^{len(support)}")
        order = np.argsort(support)
        if list(order) != list(range(len(support))):
            m = _permute_factors(m, list(order))
        m.setflags(write=False)
        return cls(tuple(sorted(support)), m, float(np.linalg.norm(m, 2)))

    @classmethod
    def from_norm(cls, support: Sequence[int], norm: float) -> "LocalTerm":
        if norm < 0:
            raise ValueError("norm must be non-negative")
        support = tuple(sorted(set(int(s) for s in support)))
        if not support and norm > 0:
            raise ValueError("empty support")
        return cls(support, None, float(norm))

    @property
    def explicit(self) -> bool:
        return self.matrix is not None


class LocalOperator:
    """Sum of local terms on a lattice, keeping the stored decomposition.

    ``a``, ``Z`` and ``J`` are the optional declared bounds on term diameter,
    coordination (overlapping terms, the term itself included) and term norm.
    """

    def __init__(self, lattice: Lattice, terms: Iterable[LocalTerm] = (),
                 a: float | None = None, Z: float | None = None, J: float | None = None):
        self.lattice = lattice
        self.terms: tuple[LocalTerm, ...] = tuple(terms)
        for t in self.terms:
            for s in t.support:
                lattice._check(s)
        self.a, self.Z, self.J = a, Z, J

    def __len__(self) -> int:
        return len(self.terms)

    def __add__(self, other: "LocalOperator") -> "LocalOperator":
        if other.lattice != self.lattice:
            raise ValueError("operators live on different lattices")
        return LocalOperator(self.lattice, self.terms + other.terms)

    @property
    def explicit(self) -> bool:
        return all(t.explicit for t in self.terms)

    def site_loads(self) -> np.ndarray:
        """Summed term norms touching each site."""
        loads = np.zeros(self.lattice.n_sites)
        for t in self.terms:
            loads[list(t.support)] += t.norm
        return loads

    def coordination(self) -> list[int]:
        sets = [set(t.support) for t in self.terms]
        return [sum(1 for s2 in sets if s1 & s2) for s1 in sets]

    def validate(self) -> None:
        """Raise ``ValueError`` if the declared (a, Z, J) bounds are violated."""
        if self.a is not None:
            for t in self.terms:
                if diameter(self.lattice, t.support) > self.a:
                    raise ValueError(f"term on {t.support} exceeds diameter bound a={self.a}")
        if self.J is not None:
            for t in self.terms:
                if t.norm > self.J + 1e-12:
                    raise ValueError(f"term on {t.support} has norm {t.norm} > J={self.J}")
        if self.Z is not None:
            for t, z in zip(self.terms, self.coordination()):
                if z > self.Z:
                    raise ValueError(f"term on {t.support} overlaps {z} terms > Z={self.Z}")

    def to_dense(self) -> np.ndarray:
        """Full 2^N matrix (explicit terms only; small lattices)."""
        if not self.explicit:
            raise ValueError("explicit matrices required")
        n = self.lattice.n_sites
        out = np.zeros((2 ** n, 2 ** n), dtype=complex)
        everything = list(range(n))
        for t in self.terms:
            out += embed(t.matrix, t.support, everything)
        return out


def star_norm(op: LocalOperator) -> float:
    """Largest summed term norm over sites for the stored decomposition."""
    if not op.terms:
        return 0.0
    return float(op.site_loads().max())


def commutator_local(A: LocalOperator, B: LocalOperator) -> LocalOperator:
    """Term-wise commutator: ``[a, b]`` for every overlapping pair, placed on
    the union support."""
    if A.lattice != B.lattice:
        raise ValueError("operators live on different lattices")
    if not (A.explicit and B.explicit):
        raise ValueError("explicit matrices required")
    terms = []
    for ta in A.terms:
        sa = set(ta.support)
        for tb in B.terms:
            if not sa.intersection(tb.support):
                continue
            union = sorted(sa.union(tb.support))
            ma = embed(ta.matrix, ta.support, union)
            mb = embed(tb.matrix, tb.support, union)
            terms.append(LocalTerm.from_matrix(union, ma @ mb - mb @ ma))
    return LocalOperator(A.lattice, terms)


def conjugate_local(op: LocalOperator, layer: Sequence[tuple[Sequence[int], np.ndarray]]) -> LocalOperator:
    """Conjugate ``U A U^dagger`` for ``U`` a layer of gates on disjoint supports.

    Each term is carried onto the union of its support with the supports of
    the gates it touches.
    """
    if not op.explicit:
        raise ValueError("explicit matrices required")
    gates = [(tuple(sorted(s)), np.asarray(u, dtype=complex)) for s, u in layer]
    used: set[int] = set()
    for s, _ in gates:
        if used.intersection(s):
            raise ValueError("gate supports must be disjoint")
        used.update(s)
    terms = []
    for t in op.terms:
        touching = [(s, u) for s, u in gates if set(s) & set(t.support)]
        sites = sorted(set(t.support).union(*[set(s) for s, _ in touching]))
        u_full = np.eye(2 ** len(sites), dtype=complex)
        for s, u in touching:
            u_full = embed(u, s, sites) @ u_full
        m = embed(t.matrix, t.support, sites)
        terms.append(LocalTerm.from_matrix(sites, u_full @ m @ u_full.conj().T))
    return LocalOperator(op.lattice, terms)


def lr_velocity(a: float, Z: float, J: float) -> float:
    """Lieb-Robinson velocity ``4 e J Z a``."""
    if a <= 0 or Z <= 0 or J <= 0:
        raise ValueError("a, Z and J must be positive")
    return 4.0 * math.e * J * Z * a


def nu_d(x: float, d: int, a: float = 1.0, tail_tol: float = 1e-12) -> float:
    """Light-cone counting function of the noise perturbation bound.

    Sums ``2^(d+1) e / (d-1)! * sum_n (n+d-1)^(d-1) f_x(n)`` with
    ``f_x(n) = 1`` inside the cone ``n <= x`` and ``exp((x-n)/a)`` outside,
    stopping once a geometric bound on the remaining tail drops below
    ``tail_tol``.
    """
    if x < 0 or d < 1 or a <= 0:
        raise ValueError("need x >= 0, d >= 1, a > 0")
    pref = 2.0 ** (d + 1) * math.e / math.factorial(d - 1)
    inside = int(math.floor(x))
    total = sum(float((n + d - 1) ** (d - 1)) for n in range(inside + 1))
    decay = math.exp(-1.0 / a)
    n = inside + 1
    while True:
        term = (n + d - 1) ** (d - 1) * math.exp((x - n) / a)
        total += term
        n += 1
        # successive-term ratio is ((n+d-1)/(n+d-2))^(d-1) * decay, decreasing in n
        ratio = ((n + d - 1) / (n + d - 2)) ** (d - 1) * decay if d > 1 else decay
        if ratio < 1.0:
            next_term = (n + d - 1) ** (d - 1) * math.exp((x - n) / a)
            if pref * next_term / (1.0 - ratio) < tail_tol:
                break
    return pref * total


def lr_observable_bound(size_x: int, norm_o: float, norm_k: float, t: float, dist: float,
                        a: float, Z: float, c_lr: float) -> float:
    """``(e/Z) |X| |O| |K| exp((c_LR t - dist)/a)``."""
    exponent = (c_lr * t - dist) / a
    if exponent < -745.0:
        return 0.0
    return math.e / Z * size_x * norm_o * norm_k * math.exp(exponent)

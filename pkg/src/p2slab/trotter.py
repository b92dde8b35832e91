"""Product formulas, even/odd splittings, Gaussian Trotter circuits with
depolarizing noise, and the rigorous local-observable Trotter bound.

Slots are 0-based. A stage ``(r, x)`` applies ``exp(-i x eps H_r)``, which on
the Majorana level is the rotation ``exp(x eps A_r)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from . import gaussian as gs
from .lattice import Lattice, LocalOperator, LocalTerm, embed, lr_velocity, nu_d


@dataclass(frozen=True)
class ProductFormula:
    stages: tuple[tuple[int, float], ...]
    order: int
    K: int

    def __post_init__(self):
        stages = tuple((int(r), float(x)) for r, x in self.stages)
        object.__setattr__(self, "stages", stages)
        for r, _ in stages:
            if not 0 <= r < self.K:
                raise ValueError(f"slot {r} outside 0..{self.K - 1}")
        for j in range(self.K):
            total = sum(x for r, x in stages if r == j)
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"coefficients of slot {j} sum to {total}, not 1")

    def __len__(self) -> int:
        return len(self.stages)

    def inverse_stages(self) -> tuple[tuple[int, float], ...]:
        return tuple((r, -x) for r, x in reversed(self.stages))

    def is_palindrome(self) -> bool:
        return all(a[0] == b[0] and a[1] == b[1] for a, b in zip(self.stages, reversed(self.stages)))


def _merge(stages: list[tuple[int, float]]) -> list[tuple[int, float]]:
    out: list[tuple[int, float]] = []
    for r, x in stages:
        if out and out[-1][0] == r:
            out[-1] = (r, out[-1][1] + x)
        else:
            out.append((r, x))
    return out


def _suzuki_stages(p: int, K: int) -> list[tuple[int, float]]:
    if p == 1:
        return [(j, 1.0) for j in range(K)]
    if p == 2:
        half = [(j, 0.5) for j in range(K - 1)]
        return _merge(half + [(K - 1, 1.0)] + half[::-1])
    k = p // 2
    u = 1.0 / (4.0 - 4.0 ** (1.0 / (2 * k - 1)))
    inner = _suzuki_stages(p - 2, K)
    scaled = lambda c: [(r, c * x) for r, x in inner]
    return _merge(scaled(u) * 2 + scaled(1 - 4 * u) + scaled(u) * 2)


def suzuki_formula(p: int, K: int) -> ProductFormula:
    """Lie-Trotter (p=1), Strang (p=2) or the recursive Suzuki formula (even p)."""
    if K < 2:
        raise ValueError("need K >= 2 slots")
    if p < 1 or (p > 2 and p % 2):
        raise ValueError(f"order must be 1, 2 or even, got {p}")
    return ProductFormula(tuple(_suzuki_stages(p, K)), p, K)


@dataclass(frozen=True)
class OrderCheck:
    certified_order: int
    slope: float
    r_squared: float


class InconclusiveFit(RuntimeError):
    pass


def _random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = 0.5 * (g + g.conj().T)
    return h / np.linalg.norm(h, 2)


def apply_formula_dense(f: ProductFormula, slots: Sequence[np.ndarray], eps: float) -> np.ndarray:
    U = np.eye(slots[0].shape[0], dtype=complex)
    for r, x in f.stages:
        U = expm(-1j * x * eps * slots[r]) @ U
    return U


def verify_formula_order(f: ProductFormula, trials: int = 5, seed: int = 0,
                         eps_range: tuple[float, float] = (0.02, 0.2), points: int = 8) -> OrderCheck:
    """Fit the one-step error slope on random 8x8 slot Hamiltonians.

    The error of a formula of order p scales as ``eps^(p+1)``; the certified
    order is the rounded slope minus one.
    """
    if trials < 5:
        raise ValueError("need at least 5 trials")
    eps = np.geomspace(*eps_range, points)
    slopes, r2s = [], []
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        slots = [_random_hermitian(8, rng) for _ in range(f.K)]
        H = sum(slots)
        errs = [np.linalg.norm(apply_formula_dense(f, slots, e) - expm(-1j * H * e), 2) for e in eps]
        fit = np.polyfit(np.log(eps), np.log(errs), 1)
        resid = np.log(errs) - np.polyval(fit, np.log(eps))
        ss = np.sum((np.log(errs) - np.mean(np.log(errs))) ** 2)
        slopes.append(fit[0])
        r2s.append(1 - np.sum(resid ** 2) / ss)
    slope, r2 = float(np.median(slopes)), float(min(r2s))
    if r2 < 0.99:
        raise InconclusiveFit(f"inconclusive order fit (R^2={r2:.4f})")
    certified = int(round(slope)) - 1
    if certified < f.order:
        raise AssertionError(f"formula declared order {f.order} but certified {certified} (slope {slope:.3f})")
    return OrderCheck(certified, slope, r2)


# ---------------------------------------------------------------------------
# Splittings


@dataclass(frozen=True)
class SplitHamiltonian:
    """Slot ``j`` holds ``slots[j]``: a QuadraticHamiltonian on the Gaussian
    path or a LocalOperator of mutually commuting terms."""

    slots: tuple
    members: tuple[tuple[tuple[int, int], ...], ...]

    @property
    def K(self) -> int:
        return len(self.slots)

    def total(self):
        out = self.slots[0]
        for s in self.slots[1:]:
            out = out + s
        return out


def _bond_slot(lattice: Lattice, i: int, j: int) -> int:
    ci, cj = lattice.coords(i), lattice.coords(j)
    diff = [axis for axis in range(lattice.dimension) if ci[axis] != cj[axis]]
    if len(diff) != 1 or lattice.distance(i, j) != 1:
        raise ValueError(f"bond ({i}, {j}) is not nearest-neighbour")
    axis = diff[0]
    lo = min(ci[axis], cj[axis])
    n = lattice.extents[axis]
    if lattice.periodic[axis] and {ci[axis], cj[axis]} == {0, n - 1} and n > 2:
        lo = n - 1
    return 2 * axis + lo % 2


def even_odd_split(bonds: Sequence[tuple[tuple[int, int], object]], d: int,
                   lattice: Lattice | None = None) -> SplitHamiltonian:
    """Group nearest-neighbour bond terms into ``2d`` slots.

    ``bonds`` pairs each site pair with its payload, a ``QuadraticHamiltonian``
    or an explicit ``LocalTerm``. In 1D slot 0 holds bonds starting on even
    sites; in 2D slots are row-even, row-odd, column-even, column-odd with
    rows along the last axis.
    """
    if d not in (1, 2):
        raise ValueError("only 1D and 2D lattices are supported")
    if lattice is None:
        if d != 1:
            raise ValueError("a 2D split needs the lattice")
        n = 1 + max(max(b) for b, _ in bonds)
        lattice = Lattice.chain(n)
    if lattice.dimension != d:
        raise ValueError("lattice dimension does not match d")
    K = 2 * d
    buckets: list[list] = [[] for _ in range(K)]
    names: list[list] = [[] for _ in range(K)]
    for (i, j), payload in bonds:
        slot = _bond_slot(lattice, i, j)
        if d == 2:
            # axis 1 (fastest) varies along a row
            slot = (slot + 2) % 4
        buckets[slot].append(payload)
        names[slot].append((min(i, j), max(i, j)))
    quadratic = bool(bonds) and isinstance(bonds[0][1], gs.QuadraticHamiltonian)
    slots = []
    for j, terms in enumerate(buckets):
        if quadratic:
            dim = bonds[0][1].A.shape[0]
            A = np.zeros((dim, dim))
            sites = names[j]
            for k, t1 in enumerate(terms):
                for m in range(k + 1, len(terms)):
                    # bonds on disjoint sites commute; only shared-site pairs need a check
                    if not set(sites[k]) & set(sites[m]):
                        continue
                    t2 = terms[m]
                    if np.abs(t1.A @ t2.A - t2.A @ t1.A).max() > 1e-12:
                        raise ValueError(f"terms in slot {j} do not commute")
                A = A + t1.A
            slots.append(gs.QuadraticHamiltonian(A, f"slot{j}"))
        else:
            for k, t1 in enumerate(terms):
                for t2 in terms[k + 1:]:
                    if set(t1.support) & set(t2.support):
                        u = sorted(set(t1.support) | set(t2.support))
                        a, b = embed(t1.matrix, t1.support, u), embed(t2.matrix, t2.support, u)
                        if np.abs(a @ b - b @ a).max() > 1e-12:
                            raise ValueError(f"terms in slot {j} do not commute")
            slots.append(LocalOperator(lattice, terms))
    return SplitHamiltonian(tuple(slots), tuple(tuple(n) for n in names))


def chain_bond_terms(N: int, h: float, g: float,
                     periodic: bool = False) -> list[tuple[tuple[int, int], gs.QuadraticHamiltonian]]:
    """Bond decomposition of ``h mu + g iQ`` on a chain; the on-site part of
    each site is shared equally among its bonds.

    ``periodic`` adds the fermionic bond ``(N-1, 0)`` (needs even ``N >= 4``
    so the even/odd split still commutes).
    """
    if N < 2:
        raise ValueError("need N >= 2")
    if periodic and (N < 4 or N % 2):
        raise ValueError("a periodic chain needs even N >= 4")
    pairs = [(i, i + 1) for i in range(N - 1)] + ([(N - 1, 0)] if periodic else [])
    degree = [0] * N
    for i, j in pairs:
        degree[i] += 1
        degree[j] += 1
    out = []
    for k, (i, j) in enumerate(pairs):
        A = gs.iq_matrix(N, [(i, j)]) * g
        for s in (i, j):
            A[2 * s, 2 * s + 1] += h / degree[s]
            A[2 * s + 1, 2 * s] -= h / degree[s]
        out.append(((i, j), gs.QuadraticHamiltonian(A, f"bond{k}")))
    return out


def chain_split(N: int, h: float, g: float, periodic: bool = False) -> SplitHamiltonian:
    return even_odd_split(chain_bond_terms(N, h, g, periodic), 1, Lattice.chain(N, periodic))


# ---------------------------------------------------------------------------
# Gaussian Trotter circuits


PLACEMENTS = ("all", "touched")


@dataclass(frozen=True)
class TrotterRun:
    state: gs.CovarianceState
    observable: float


def _slot_modes(H: gs.QuadraticHamiltonian) -> tuple[int, ...]:
    rows = np.nonzero(np.abs(H.A).sum(axis=1) > 0)[0]
    return tuple(sorted(set(int(r) // 2 for r in rows)))


def step_rotation(split: SplitHamiltonian, f: ProductFormula, eps: float) -> np.ndarray:
    dim = split.slots[0].A.shape[0]
    O = np.eye(dim)
    for r, x in f.stages:
        O = gs.rotation(split.slots[r].A, x * eps) @ O
    return O


def run_trotter(initial: gs.CovarianceState, split: SplitHamiltonian, f: ProductFormula, tau: float,
                T: int, noise: gs.DepolSpec | None = None, placement: str = "all") -> TrotterRun:
    """Apply ``S_p(tau/T)^T``, optionally depolarizing after every stage.

    With ``placement="all"`` every mode in ``noise.modes`` is hit after each
    stage; with ``"touched"`` only the noisy modes acted on by that stage.
    """
    if T < 1:
        raise ValueError("need T >= 1")
    if placement not in PLACEMENTS:
        raise ValueError(f"noise placement must be one of {PLACEMENTS}")
    if split.K != f.K:
        raise ValueError(f"formula has {f.K} slots, split has {split.K}")
    if split.slots[0].N != initial.N:
        raise ValueError("dimension mismatch between state and Hamiltonian")
    eps = tau / T
    if noise is None or noise.p == 0.0:
        O = np.linalg.matrix_power(step_rotation(split, f, eps), T)
        state = gs.conjugate(initial, O)
        return TrotterRun(state, gs.mean_occupation(state))
    cache: dict[tuple[int, float], np.ndarray] = {}
    specs: dict[int, gs.DepolSpec] = {}
    for r, x in f.stages:
        cache.setdefault((r, x), gs.rotation(split.slots[r].A, x * eps))
        if r not in specs:
            if placement == "all":
                specs[r] = noise
            else:
                touched = set(_slot_modes(split.slots[r])) & set(noise.modes)
                specs[r] = gs.DepolSpec(tuple(sorted(touched)), noise.p)
    factors = {r: (1.0 - s.p) ** gs.touch_counts(initial.N, s.modes) for r, s in specs.items()}
    g = np.array(initial.gamma)
    for _ in range(T):
        for r, x in f.stages:
            O = cache[(r, x)]
            g = O @ g @ O.T
            g *= factors[r]
    state = gs.CovarianceState(g)
    return TrotterRun(state, gs.mean_occupation(state))


def replay_dense(rho, split: SplitHamiltonian, f: ProductFormula, tau: float, T: int,
                 noise: gs.DepolSpec | None = None, placement: str = "all"):
    """The same gate and noise schedule on the dense oracle."""
    from . import dense as dn

    state = rho if isinstance(rho, dn.DenseState) else dn.DenseState(rho)
    eps = tau / T
    for _ in range(T):
        for r, x in f.stages:
            H = dn.jordan_wigner_dense(split.slots[r])
            U = expm(-1j * x * eps * H)
            state = dn.DenseState(U @ state.rho @ U.conj().T)
            if noise is not None and noise.p > 0:
                modes = noise.modes if placement == "all" else \
                    tuple(sorted(set(_slot_modes(split.slots[r])) & set(noise.modes)))
                for i in modes:
                    state = dn.depolarize_mode_dense(state, i, noise.p)
    return state


# ---------------------------------------------------------------------------
# Rigorous bound


def trotter_constant(f: ProductFormula, d: int) -> float:
    """Formula constant ``C^(p)``.

    The inner multinomial sum over compositions of ``p`` collapses to
    ``(j-1)!/p! * (sum_{i<j} |x_i|)^p``.
    """
    p = f.order
    xs = [abs(x) for _, x in f.stages]
    total = 0.0
    for j in range(2, len(xs) + 1):
        s = sum(xs[: j - 1])
        total += (math.factorial(j - 1) / math.factorial(p) * s ** p * xs[j - 1]
                  * (2 * p + 2 * j - 1) ** (p * d) * math.exp(p - j + 1))
    return math.exp(-p) / math.factorial(p + 1) * total


def trotter_constant_enumerated(f: ProductFormula, d: int) -> float:
    """``C^(p)`` by explicit enumeration of compositions (small formulas)."""
    p = f.order
    xs = [abs(x) for _, x in f.stages]
    total = 0.0
    for j in range(2, len(xs) + 1):
        for comp in itertools.product(range(p + 1), repeat=j - 1):
            if sum(comp) != p:
                continue
            term = math.factorial(j - 1) / math.prod(math.factorial(n) for n in comp)
            term *= math.prod(xs[i] ** n for i, n in enumerate(comp))
            total += term * xs[j - 1] * (2 * p + 2 * j - 1) ** (p * d) * math.exp(p - j + 1)
    return math.exp(-p) / math.factorial(p + 1) * total


@dataclass(frozen=True)
class TrotterBoundParams:
    p: int
    d: int
    size_x: int
    norm_o: float
    a0: float
    Z: float
    c_lr: float
    tau: float
    T: int
    C: float

    def __post_init__(self):
        for name in ("p", "d", "size_x", "a0", "Z", "c_lr", "T"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.tau < 0 or self.norm_o < 0 or self.C < 0:
            raise ValueError("tau, norm_o and C must be non-negative")


def trotter_bound(q: TrotterBoundParams) -> float:
    eps = q.tau / q.T
    return (q.a0 ** ((q.d - 1) * (q.p - 1)) / q.Z ** 2 * q.C * q.size_x ** 2 * q.norm_o
            * q.c_lr * q.tau * nu_d(q.c_lr * q.tau, q.d, q.a0) * (q.c_lr * eps) ** q.p)


def chain_bound_params(f: ProductFormula, h: float, g: float, tau: float, T: int) -> TrotterBoundParams:
    """Bound inputs for the mean occupation of the open-chain model.

    Each bond term ``g i(c c) + h (n_i + n_j)/2`` has norm at most
    ``|g| + |h|``; bonds have diameter 1 and overlap at most 3 bonds.
    The mean occupation is an average of single-site observables, so
    ``|X| = 1`` and ``|O| = 1``.
    """
    a, Z = 1.0, 3.0
    J = abs(g) + abs(h)
    return TrotterBoundParams(p=f.order, d=1, size_x=1, norm_o=1.0, a0=a, Z=Z,
                              c_lr=lr_velocity(a, Z, J), tau=tau, T=T, C=trotter_constant(f, 1))

"""Free-fermion simulation on Majorana second-moment matrices.

Conventions, shared with :mod:`p2slab.dense`:

* Majoranas ``c_{2i} = a_i + a_i^dagger`` and ``c_{2i+1} = -i (a_i - a_i^dagger)``
  (0-based, so mode ``i`` owns rows ``2i`` and ``2i+1``).
* A quadratic Hamiltonian is ``H = (i/4) sum_jk A_jk c_j c_k`` with real
  antisymmetric ``A``; constants are dropped, so ``mu`` is represented up to
  the shift ``N/2``.
* ``Gamma_jk = (i/2) Tr(rho [c_j, c_k])``. The vacuum has
  ``Gamma_{2i,2i+1} = -1`` and occupations are ``(1 + Gamma_{2i,2i+1}) / 2``.
* Heisenberg evolution gives ``c(t) = exp(A t) c``, hence
  ``Gamma(t) = O Gamma O^T`` with ``O = exp(A t)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm


class IntegrationError(RuntimeError):
    """An adaptive integrator could not meet its tolerance."""


def _antisym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m - m.T)


@dataclass(frozen=True)
class QuadraticHamiltonian:
    A: np.ndarray
    label: str = ""

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 2:
            raise ValueError(f"A must be 2N x 2N, got {A.shape}")
        if np.abs(A + A.T).max(initial=0.0) > 1e-12:
            raise ValueError("A must be antisymmetric")
        A = _antisym(A)
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def N(self) -> int:
        return self.A.shape[0] // 2

    def __add__(self, other: "QuadraticHamiltonian") -> "QuadraticHamiltonian":
        return QuadraticHamiltonian(self.A + other.A)

    def __mul__(self, c: float) -> "QuadraticHamiltonian":
        return QuadraticHamiltonian(c * self.A, self.label)

    __rmul__ = __mul__


@dataclass(frozen=True)
class CovarianceState:
    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] % 2:
            raise ValueError(f"Gamma must be 2N x 2N, got {g.shape}")
        if np.abs(g + g.T).max(initial=0.0) > 1e-10:
            raise ValueError("Gamma must be antisymmetric")
        g = _antisym(g)
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    @property
    def N(self) -> int:
        return self.gamma.shape[0] // 2

    def is_physical(self, tol: float = 1e-9) -> bool:
        return bool(np.linalg.norm(self.gamma, 2) <= 1 + tol)


@dataclass(frozen=True)
class DepolSpec:
    """Single-mode depolarizing on ``modes`` with probability ``p`` per
    application, or rate ``rate`` per unit time."""

    modes: tuple[int, ...]
    p: float = 0.0
    rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"depolarizing probability must lie in [0, 1], got {self.p}")
        if self.rate < 0:
            raise ValueError("depolarizing rate must be non-negative")

    @classmethod
    def all_modes(cls, N: int, p: float = 0.0, rate: float = 0.0) -> "DepolSpec":
        return cls(tuple(range(N)), p, rate)


def majorana_pair(i: int) -> tuple[int, int]:
    return 2 * i, 2 * i + 1


def mu_matrix(N: int) -> np.ndarray:
    """``A`` for the number operator ``sum_i a_i^dagger a_i`` (minus ``N/2``)."""
    A = np.zeros((2 * N, 2 * N))
    for i in range(N):
        A[2 * i, 2 * i + 1] = 1.0
        A[2 * i + 1, 2 * i] = -1.0
    return A


def iq_matrix(N: int, bonds: Iterable[tuple[int, int]] | None = None) -> np.ndarray:
    """``A`` for ``iQ = i sum (a_i + a_i^dag)(a_j + a_j^dag)`` over open-chain
    bonds ``(i, i+1)`` (or the given bonds)."""
    if bonds is None:
        bonds = [(i, i + 1) for i in range(N - 1)]
    A = np.zeros((2 * N, 2 * N))
    for i, j in bonds:
        A[2 * i, 2 * j] += 2.0
        A[2 * j, 2 * i] -= 2.0
    return A


def build_quadratic(N: int, kind: str, c1: float = 1.0, c2: float = 1.0) -> QuadraticHamiltonian:
    """Majorana matrices for the chain model.

    ``kind`` is one of ``"mu"``, ``"iQ"`` (alias ``"Q"``: Q itself is
    anti-Hermitian, so its Hermitian partner ``iQ`` is returned), ``"combo"``
    for ``c1 mu + c2 iQ`` and ``"commutator"`` for the Hermitian ``[mu, Q]``,
    whose ``A`` is the matrix commutator ``[A_mu, A_iQ]``.
    """
    if N < 2:
        raise ValueError("need N >= 2")
    if kind == "mu":
        return QuadraticHamiltonian(mu_matrix(N), "mu")
    if kind in ("iQ", "Q"):
        return QuadraticHamiltonian(iq_matrix(N), "iQ")
    if kind == "combo":
        return QuadraticHamiltonian(c1 * mu_matrix(N) + c2 * iq_matrix(N), "combo")
    if kind == "commutator":
        a, b = mu_matrix(N), iq_matrix(N)
        return QuadraticHamiltonian(a @ b - b @ a, "[mu,Q]")
    raise ValueError(f"unknown quadratic Hamiltonian kind {kind!r}")


def chain_hamiltonian(N: int, h: float, g: float) -> QuadraticHamiltonian:
    """``h sum a^dag a + i g sum (a_i + h.c.)(a_{i+1} + h.c.)`` on an open chain."""
    return QuadraticHamiltonian(h * mu_matrix(N) + g * iq_matrix(N), f"chain(h={h},g={g})")


def vacuum_state(N: int) -> CovarianceState:
    if N < 1:
        raise ValueError("need N >= 1")
    return CovarianceState(-mu_matrix(N))


def particle_hole(state: CovarianceState, modes: Iterable[int] | None = None) -> CovarianceState:
    """Apply ``a_i -> a_i^dagger`` on the given modes (all by default)."""
    modes = range(state.N) if modes is None else modes
    s = np.ones(2 * state.N)
    for i in modes:
        s[2 * i + 1] = -1.0
    return CovarianceState(state.gamma * np.outer(s, s))


def rotation(A: np.ndarray, t: float) -> np.ndarray:
    """Orthogonal single-particle propagator ``exp(A t)``."""
    return expm(np.asarray(A, dtype=float) * t)


def conjugate(state: CovarianceState, O: np.ndarray) -> CovarianceState:
    return CovarianceState(O @ state.gamma @ O.T)


def evolve_exact(state: CovarianceState, H: QuadraticHamiltonian, t: float) -> CovarianceState:
    if H.N != state.N:
        raise ValueError(f"dimension mismatch: state N={state.N}, Hamiltonian N={H.N}")
    if t == 0:
        return state
    return conjugate(state, rotation(H.A, t))


def mode_occupations(state: CovarianceState) -> tuple[np.ndarray, float]:
    """Per-mode occupations and their mean."""
    g = state.gamma
    occ = 0.5 * (1.0 + g[0::2, 1::2].diagonal())
    return occ, float(occ.mean())


def mean_occupation(state: CovarianceState) -> float:
    return mode_occupations(state)[1]


def touch_counts(N: int, modes: Iterable[int]) -> np.ndarray:
    """Number of distinct listed modes touched by each index pair of Gamma."""
    noisy = np.zeros(N)
    noisy[list(modes)] = 1.0
    per_index = np.repeat(noisy, 2)
    same = np.equal.outer(np.arange(2 * N) // 2, np.arange(2 * N) // 2)
    return per_index[:, None] + per_index[None, :] - same * per_index[:, None]


def depolarize_modes(state: CovarianceState, spec: DepolSpec) -> CovarianceState:
    """Replace each listed mode by the maximally mixed mode with probability p.

    Entries touching ``k`` distinct listed modes shrink by ``(1-p)^k``.
    """
    if not 0.0 <= spec.p <= 1.0:
        raise ValueError(f"depolarizing probability must lie in [0, 1], got {spec.p}")
    if spec.p == 0.0 or not spec.modes:
        return state
    counts = touch_counts(state.N, spec.modes)
    return CovarianceState(state.gamma * (1.0 - spec.p) ** counts)


@dataclass(frozen=True)
class QuadraticDrive:
    """``A(t) = sum_k f_k(t) A_k`` over fixed quadratic generators."""

    coefficients: tuple[Callable[[float], float], ...]
    generators: tuple[np.ndarray, ...]
    period: float | None = None
    labels: tuple[str, ...] = field(default=())

    @classmethod
    def constant(cls, H: QuadraticHamiltonian) -> "QuadraticDrive":
        return cls((lambda t: 1.0,), (H.A,))

    @property
    def N(self) -> int:
        return self.generators[0].shape[0] // 2

    def at(self, t: float) -> np.ndarray:
        A = np.zeros_like(self.generators[0])
        for f, G in zip(self.coefficients, self.generators):
            A = A + f(t) * G
        return A


def evolve_noisy_ode(state: CovarianceState, drive: QuadraticDrive, gamma: float,
                     t0: float, t1: float, tol: float = 1e-10,
                     noisy_modes: Sequence[int] | None = None) -> CovarianceState:
    """Integrate ``dGamma/dt = A Gamma - Gamma A - gamma * D(Gamma)``.

    ``D`` multiplies each entry by the number of distinct noisy modes its
    indices touch (all modes by default), the rate form of
    :func:`depolarize_modes`. Uses an adaptive embedded Runge-Kutta pair.
    """
    if t1 < t0:
        raise ValueError("need t1 >= t0")
    if tol <= 0:
        raise ValueError("tol must be positive")
    N = state.N
    if drive.N != N:
        raise ValueError("dimension mismatch between state and drive")
    if t1 == t0:
        return state
    modes = range(N) if noisy_modes is None else noisy_modes
    damp = gamma * touch_counts(N, modes)
    n2 = 2 * N

    def rhs(t, y):
        g = y.reshape(n2, n2)
        A = drive.at(t)
        return (A @ g - g @ A - damp * g).ravel()

    sol = solve_ivp(rhs, (t0, t1), state.gamma.ravel(), method="DOP853",
                    rtol=tol, atol=tol * 1e-2)
    if not sol.success:
        raise IntegrationError(f"noisy covariance integration failed on [{t0}, {t1}]: "
                               f"{sol.message} (tol={tol}, steps={sol.t.size})")
    return CovarianceState(_antisym(sol.y[:, -1].reshape(n2, n2)))


def period_propagator(drive: QuadraticDrive, t0: float, t1: float, tol: float = 1e-12) -> np.ndarray:
    """Noiseless single-particle propagator ``T exp(int A(t) dt)`` on ``[t0, t1]``."""
    n2 = 2 * drive.N

    def rhs(t, y):
        return (drive.at(t) @ y.reshape(n2, n2)).ravel()

    sol = solve_ivp(rhs, (t0, t1), np.eye(n2).ravel(), method="DOP853", rtol=tol, atol=tol * 1e-2)
    if not sol.success:
        raise IntegrationError(f"propagator integration failed: {sol.message}")
    return sol.y[:, -1].reshape(n2, n2)


def noisy_period_map(drive: QuadraticDrive, gamma: float, t0: float, t1: float,
                     tol: float = 1e-11, noisy_modes: Sequence[int] | None = None) -> np.ndarray:
    """Linear map of one noisy interval on the strict upper triangle of Gamma.

    Returns a matrix ``M`` with ``vec(Gamma(t1)) = M vec(Gamma(t0))`` in the
    basis of :func:`upper_indices`.
    """
    N = drive.N
    n2 = 2 * N
    iu = upper_indices(N)
    dim = iu[0].size
    basis = np.zeros((dim, n2, n2))
    basis[np.arange(dim), iu[0], iu[1]] = 1.0
    basis -= basis.transpose(0, 2, 1)
    modes = range(N) if noisy_modes is None else noisy_modes
    damp = gamma * touch_counts(N, modes)

    def rhs(t, y):
        g = y.reshape(dim, n2, n2)
        A = drive.at(t)
        return (A @ g - g @ A - damp * g).ravel()

    sol = solve_ivp(rhs, (t0, t1), basis.ravel(), method="DOP853", rtol=tol, atol=tol * 1e-2)
    if not sol.success:
        raise IntegrationError(f"period map integration failed: {sol.message}")
    out = sol.y[:, -1].reshape(dim, n2, n2)
    return out[:, iu[0], iu[1]].T


def upper_indices(N: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(2 * N, k=1)


def from_upper(N: int, vec: np.ndarray) -> CovarianceState:
    g = np.zeros((2 * N, 2 * N))
    iu = upper_indices(N)
    g[iu] = vec
    return CovarianceState(g - g.T)


def random_quadratic(N: int, rng: np.random.Generator, scale: float = 1.0) -> QuadraticHamiltonian:
    X = rng.normal(size=(2 * N, 2 * N)) * scale
    return QuadraticHamiltonian(X - X.T, "random")

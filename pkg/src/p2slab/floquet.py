"""Floquet-Magnus effective Hamiltonians.

Two independent routes are provided. :func:`magnus_effective_quadratic`
evaluates the nested-commutator Magnus terms through simplex integrals of
the scalar drive coefficients. :func:`fm_recursion_dense` builds the
order-by-order frame rotation ``Omega(t)`` on a periodic time grid and reads
the effective Hamiltonian off as time averages; it also exposes the
remainder ``R(t)`` and the rotated Hamiltonian ``H~(t)``.

``H_F^(p) = sum_{q<=p} uptau^q V^(q)``, so ``V^(q)`` is the order-``q``
coefficient without its power of the period.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from . import gaussian as gs
from ._series import comm, compositions, conj_series, graded_nested


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class PeriodicDrive:
    """``H(t) = sum_k f_k(t) G_k`` with period ``uptau``.

    ``gaussian`` generators are real antisymmetric Majorana matrices;
    otherwise they are dense Hermitian matrices.
    """

    coefficients: tuple[Callable[[float], float], ...]
    generators: tuple[np.ndarray, ...]
    period: float
    gaussian: bool = False
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")
        if len(self.coefficients) != len(self.generators) or not self.generators:
            raise ValueError("need one coefficient function per generator")
        object.__setattr__(self, "generators", tuple(np.asarray(g) for g in self.generators))

    def check_periodic(self, samples: int = 16, tol: float = 1e-10) -> None:
        for t in np.linspace(0, self.period, samples, endpoint=False):
            for f in self.coefficients:
                if abs(f(t) - f(t + self.period)) > tol * max(1.0, abs(f(t))):
                    raise ValueError(f"coefficient not periodic at t={t}")

    def at(self, t: float) -> np.ndarray:
        return sum(f(t) * g for f, g in zip(self.coefficients, self.generators))

    def to_dense(self) -> "PeriodicDrive":
        if not self.gaussian:
            return self
        from .dense import jordan_wigner_dense
        return PeriodicDrive(self.coefficients, tuple(jordan_wigner_dense(g) for g in self.generators),
                             self.period, False, self.labels)

    def to_quadratic_drive(self) -> gs.QuadraticDrive:
        if not self.gaussian:
            raise ValueError("not a Gaussian drive")
        return gs.QuadraticDrive(self.coefficients, self.generators, self.period)


def chain_drive(N: int, h0: float, h1: float, g0: float, g1: float, uptau: float,
                periodic: bool = False) -> PeriodicDrive:
    """``h(t) mu + g(t) iQ`` with ``h = h0 + h1 cos(2 pi t/uptau)`` and
    ``g = g0 + g1 sin(2 pi t/uptau)``; ``periodic`` adds the bond ``(N-1, 0)``."""
    w = 2 * math.pi / uptau
    h = lambda t: h0 + h1 * np.cos(w * t)
    g = lambda t: g0 + g1 * np.sin(w * t)
    bonds = [(i, i + 1) for i in range(N - 1)] + ([(N - 1, 0)] if periodic and N > 2 else [])
    return PeriodicDrive((h, g), (gs.mu_matrix(N), gs.iq_matrix(N, bonds)), uptau, True, ("mu", "iQ"))


def tfim_design(N: int, h: float, c: float, J_y: float, uptau: float,
                F1: float = 1.0) -> tuple[PeriodicDrive, np.ndarray]:
    """Dense drive ``f(t) mu + g(t) iQ`` engineered so that ``H_F`` gains a
    nested-commutator coupling at order ``uptau^2``.

    ``f = h uptau^2 + F1 cos(2 pi t/uptau)`` and ``g = c uptau^2 + G1 cos(4 pi t/uptau)``.
    Only the product of two ``f`` factors with one ``g`` factor is resonant, so
    ``G1`` is fixed by ``F1^2 G1 = 4 pi^2 J_y``. Returns the drive and
    ``H_target = h mu + c iQ + J_y [mu, [mu, iQ]] / 8`` with
    ``H_F = uptau^2 H_target + O(uptau^3)``.
    """
    if uptau <= 0 or F1 == 0:
        raise ValueError("need uptau > 0 and F1 != 0")
    from .dense import jordan_wigner_dense

    G1 = 4 * math.pi ** 2 * J_y / F1 ** 2
    w = 2 * math.pi / uptau
    A = jordan_wigner_dense(gs.QuadraticHamiltonian(gs.mu_matrix(N), "mu"))
    B = jordan_wigner_dense(gs.QuadraticHamiltonian(gs.iq_matrix(N), "iQ"))
    f = lambda t: h * uptau ** 2 + F1 * np.cos(w * t)
    g = lambda t: c * uptau ** 2 + G1 * np.cos(2 * w * t)
    AB = A @ B - B @ A
    target = h * A + c * B + J_y * (A @ AB - AB @ A) / 8
    return PeriodicDrive((f, g), (A, B), uptau, False, ("mu", "iQ")), target


# ---------------------------------------------------------------------------
# Closed-form Magnus terms


def _coeff_values(f: Callable, s: np.ndarray) -> np.ndarray:
    v = np.asarray(f(s), dtype=float)
    if v.shape != s.shape:
        v = np.vectorize(lambda x: float(f(x)))(s)
    return v


def _gl_nodes(panels: int, order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = leggauss(order)
    edges = np.linspace(0, 1, panels + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + h[:, None] * (x[None, :] + 1) / 2).ravel()
    weights = (h[:, None] * w[None, :] / 2).ravel()
    return nodes, weights


def simplex_integrals(coefficients: Sequence[Callable], period: float, depth: int,
                      panels: int) -> np.ndarray:
    """``int_{0<s_depth<...<s_1<period} f_a1(s_1) ... f_ad(s_d)`` for all index tuples.

    Uses the map ``s_1 = period x_1``, ``s_{j+1} = s_j x_{j+1}`` onto the unit cube.
    """
    x, w = _gl_nodes(panels)
    K = len(coefficients)
    if depth == 1:
        s = period * x
        return np.array([period * np.dot(w, _coeff_values(f, s)) for f in coefficients])
    if depth == 2:
        s1 = period * x
        s2 = s1[:, None] * x[None, :]
        jac = period * s1[:, None] * w[:, None] * w[None, :]
        F1 = np.stack([_coeff_values(f, s1) for f in coefficients])
        F2 = np.stack([_coeff_values(f, s2) for f in coefficients])
        return np.einsum("ai,bij,ij->ab", F1, F2, jac)
    if depth == 3:
        s1 = period * x
        s2 = s1[:, None] * x[None, :]
        s3 = s2[:, :, None] * x[None, None, :]
        jac = (period * s1[:, None, None] * s2[:, :, None]
               * w[:, None, None] * w[None, :, None] * w[None, None, :])
        F1 = np.stack([_coeff_values(f, s1) for f in coefficients])
        F2 = np.stack([_coeff_values(f, s2) for f in coefficients])
        F3 = np.stack([_coeff_values(f, s3) for f in coefficients])
        return np.einsum("ai,bij,cijk,ijk->abc", F1, F2, F3, jac)
    raise ValueError("depth must be 1, 2 or 3")


def _adaptive_simplex(coefficients, period, depth, tol, max_panels=64):
    panels = 2
    prev = simplex_integrals(coefficients, period, depth, panels)
    while panels < max_panels:
        panels *= 2
        cur = simplex_integrals(coefficients, period, depth, panels)
        scale = max(1.0, float(np.abs(cur).max()))
        if np.abs(cur - prev).max() <= tol * scale:
            return cur
        prev = cur
    raise QuadratureError(f"simplex quadrature (depth {depth}) not converged to {tol}")


@dataclass(frozen=True)
class MagnusTerms:
    """``V[q]`` are the order coefficients; ``H_F`` sums ``uptau^q V[q]``."""

    V: tuple[np.ndarray, ...]
    period: float
    gaussian: bool

    @property
    def H_F(self) -> np.ndarray:
        return sum(self.period ** q * v for q, v in enumerate(self.V))

    def hamiltonian(self) -> gs.QuadraticHamiltonian:
        if not self.gaussian:
            raise ValueError("dense expansion has no Majorana matrix")
        return gs.QuadraticHamiltonian(self.H_F)


def magnus_terms(drive: PeriodicDrive, p: int, quad_tol: float = 1e-12) -> MagnusTerms:
    """Magnus orders 0..p (p <= 2) via scalar simplex integrals.

    On the Gaussian path operator commutators become ``i`` times matrix
    commutators of Majorana matrices.
    """
    if p not in (0, 1, 2):
        raise ValueError("closed-form Magnus terms are implemented for p in {0, 1, 2}")
    G = drive.generators
    T = drive.period
    if drive.gaussian:
        opc = lambda a, b: 1j * comm(a, b)
    else:
        opc = comm
    I1 = _adaptive_simplex(drive.coefficients, T, 1, quad_tol)
    V = [sum(c * g for c, g in zip(I1, G)) / T]
    if p >= 1:
        I2 = _adaptive_simplex(drive.coefficients, T, 2, quad_tol)
        acc = 0
        for a in range(len(G)):
            for b in range(len(G)):
                if I2[a, b] != 0 and a != b:
                    acc = acc + I2[a, b] * opc(G[a], G[b])
        V.append(acc / (2j * T ** 2) + np.zeros_like(G[0], dtype=complex))
    if p >= 2:
        I3 = _adaptive_simplex(drive.coefficients, T, 3, quad_tol)
        acc = 0
        K = len(G)
        for a in range(K):
            for b in range(K):
                for c in range(K):
                    if I3[a, b, c] == 0:
                        continue
                    term = opc(G[a], opc(G[b], G[c])) + opc(G[c], opc(G[b], G[a]))
                    acc = acc + I3[a, b, c] * term
        V.append(-acc / (6 * T ** 3) + np.zeros_like(G[0], dtype=complex))
    if drive.gaussian:
        out = []
        for v in V:
            v = np.asarray(v)
            if np.abs(np.imag(v)).max(initial=0.0) > 1e-9 * max(1.0, np.abs(v).max()):
                raise QuadratureError("Majorana Magnus term acquired an imaginary part")
            out.append(np.real(v))
        V = out
    return MagnusTerms(tuple(np.asarray(v) for v in V), T, drive.gaussian)


def magnus_effective_quadratic(drive: PeriodicDrive, p: int, quad_tol: float = 1e-12) -> MagnusTerms:
    if not drive.gaussian:
        raise ValueError("drive generators must be quadratic")
    return magnus_terms(drive, p, quad_tol)


# ---------------------------------------------------------------------------
# Dense recursion


class FMRecursion:
    """Order-by-order frame rotation for a dense periodic drive.

    ``Omega^(q)`` for ``q = 1..p+1`` are stored as Fourier series on a
    uniform grid, so their cumulative integrals are exact for band-limited
    drives. Carrying ``Omega`` one order beyond ``p`` makes the remainder
    ``R^(p)(t) = H~(t) - H_F^(p)`` start at order ``p+1``.
    """

    def __init__(self, drive: PeriodicDrive, p: int, grid: int = 64):
        if drive.gaussian:
            drive = drive.to_dense()
        if not 0 <= p <= 3:
            raise ValueError("dense recursion supports p in 0..3")
        if grid < 8 or grid % 2:
            raise ValueError("grid must be an even integer >= 8")
        self.drive = drive
        self.p = p
        self.grid = grid
        self.period = drive.period
        self.omega_freq = 2 * math.pi / drive.period
        self.times = np.arange(grid) * drive.period / grid
        k = np.fft.fftfreq(grid, 1.0 / grid)
        k[grid // 2] = 0  # drop the ambiguous Nyquist mode
        self._k = k
        self._coef: dict[int, np.ndarray] = {}  # Fourier coefficients of Omega^(m)-dot
        self.Gbar: list[np.ndarray] = []
        H_grid = np.stack([drive.at(t) for t in self.times]).astype(complex)
        self._H_grid = H_grid
        G_grid = H_grid
        for q in range(p + 1):
            if q > 0:
                G_grid = np.stack([self._G_from(q, j) for j in range(grid)])
            Gbar = G_grid.mean(axis=0)
            self.Gbar.append(Gbar)
            self._store_omega(q + 1, -1j * (G_grid - Gbar))
            self._cache_grid_omega(q + 1)

    # Omega^(m)(t) = int_0^t dOmega^(m), with dOmega^(m) = -i (G^(m-1) - Gbar^(m-1))
    def _store_omega(self, m: int, dom_grid: np.ndarray) -> None:
        c = np.fft.fft(dom_grid, axis=0) / self.grid
        c[self.grid // 2] = 0
        c[0] = 0
        self._coef[m] = c

    def _cache_grid_omega(self, m: int) -> None:
        if not hasattr(self, "_grid_om"):
            self._grid_om, self._grid_dom = {}, {}
        vals = [self._omega_eval(m, t) for t in self.times]
        dvals = [self._domega_eval(m, t) for t in self.times]
        self._grid_om[m] = np.stack(vals)
        self._grid_dom[m] = np.stack(dvals)

    def _phase(self, t: float):
        k = self._k
        with np.errstate(divide="ignore", invalid="ignore"):
            integ = np.where(k != 0, (np.exp(1j * self.omega_freq * k * t) - 1) / (1j * self.omega_freq * k), 0)
        return integ, np.exp(1j * self.omega_freq * k * t)

    def _omega_eval(self, m: int, t: float) -> np.ndarray:
        integ, _ = self._phase(t)
        return np.einsum("k,kij->ij", integ, self._coef[m])

    def _domega_eval(self, m: int, t: float) -> np.ndarray:
        _, ph = self._phase(t)
        return np.einsum("k,kij->ij", ph, self._coef[m])

    def _G_generic(self, q: int, H: np.ndarray, om: dict, dom: dict) -> np.ndarray:
        out = np.zeros_like(H)
        for k in range(1, q + 1):
            out = out + (-1) ** k / math.factorial(k) * graded_nested(om, H, q, k)
        for m in range(1, q + 1):
            for k in range(1, q + 2 - m):
                out = out - 1j * (-1) ** k / math.factorial(k + 1) * graded_nested(om, dom[m], q + 1 - m, k)
        return out

    def _G_from(self, q: int, j: int) -> np.ndarray:
        om = {m: self._grid_om[m][j] for m in range(1, q + 1)}
        dom = {m: self._grid_dom[m][j] for m in range(1, q + 1)}
        return self._G_generic(q, self._H_grid[j], om, dom)

    # public evaluators -------------------------------------------------
    def omega(self, q: int, t: float) -> np.ndarray:
        if q not in self._coef:
            raise ValueError(f"Omega^({q}) not available (orders 1..{self.p + 1})")
        return self._omega_eval(q, t % self.period if t != self.period else t)

    def omega_dot(self, q: int, t: float) -> np.ndarray:
        return self._domega_eval(q, t)

    def omega_total(self, t: float) -> np.ndarray:
        return sum(self._omega_eval(m, t) for m in self._coef)

    def omega_dot_total(self, t: float) -> np.ndarray:
        return sum(self._domega_eval(m, t) for m in self._coef)

    def G(self, q: int, t: float) -> np.ndarray:
        H = self.drive.at(t).astype(complex)
        if q == 0:
            return H
        om = {m: self._omega_eval(m, t) for m in range(1, q + 1)}
        dom = {m: self._domega_eval(m, t) for m in range(1, q + 1)}
        return self._G_generic(q, H, om, dom)

    @property
    def V(self) -> tuple[np.ndarray, ...]:
        return tuple(g / self.period ** q for q, g in enumerate(self.Gbar))

    @property
    def H_F(self) -> np.ndarray:
        return sum(self.Gbar)

    def H_tilde_exact(self, t: float, nodes: int = 32) -> np.ndarray:
        """``e^{-Om} H e^{Om} - i int_0^1 e^{-s Om} dOm e^{s Om} ds``."""
        Om = self.omega_total(t)
        dOm = self.omega_dot_total(t)
        H = self.drive.at(t).astype(complex)
        # Om is anti-Hermitian: diagonalise the Hermitian -i Om
        lam, V = np.linalg.eigh(0.5 * (-1j * Om + (-1j * Om).conj().T))
        Vh = V.conj().T

        def rot(s):  # e^{s Om}
            return (V * np.exp(1j * s * lam)) @ Vh

        U = rot(1.0)
        first = U.conj().T @ H @ U
        x, w = leggauss(nodes)
        s = 0.5 * (x + 1)
        second = sum(wi / 2 * rot(-si) @ dOm @ rot(si) for si, wi in zip(s, w))
        return first - 1j * second

    def H_tilde_series(self, t: float, tol: float = 1e-12) -> tuple[np.ndarray, int]:
        Om = self.omega_total(t)
        dOm = self.omega_dot_total(t)
        H = self.drive.at(t).astype(complex)
        a, ka = conj_series(Om, H, lambda k: (-1) ** k / math.factorial(k), tol)
        b, kb = conj_series(Om, dOm, lambda k: (-1) ** k / math.factorial(k + 1), tol)
        return a - 1j * b, max(ka, kb)

    def remainder(self, t: float, tol: float = 1e-12) -> np.ndarray:
        """``R^(p)(t)`` from the truncated commutator series."""
        Ht, _ = self.H_tilde_series(t, tol)
        return Ht - self.H_F

    def remainder_exact(self, t: float) -> np.ndarray:
        return self.H_tilde_exact(t) - self.H_F

    def period_unitary(self, which: str = "H", tol: float = 1e-12) -> np.ndarray:
        """Time-ordered exponential over one period of ``H`` or ``H~``."""
        gen = self.drive.at if which == "H" else self.H_tilde_exact
        dim = self.drive.generators[0].shape[0]

        def rhs(t, y):
            return (-1j * gen(t) @ y.reshape(dim, dim)).ravel()

        sol = solve_ivp(rhs, (0.0, self.period), np.eye(dim, dtype=complex).ravel(),
                        method="DOP853", rtol=tol, atol=tol * 1e-2)
        if not sol.success:
            raise gs.IntegrationError(sol.message)
        return sol.y[:, -1].reshape(dim, dim)


def fm_recursion_dense(drive: PeriodicDrive, p: int, grid: int = 64) -> FMRecursion:
    return FMRecursion(drive, p, grid)


# ---------------------------------------------------------------------------
# Remainder constants


@dataclass(frozen=True)
class FMConstants:
    gammas: tuple[float, ...]
    C: float


def fm_gammas(star_norm_H: float, p: int) -> list[float]:
    """Solve the order-by-order local-norm recursion for ``Gamma_0..Gamma_p``."""
    if star_norm_H <= 0:
        raise ValueError("star norm must be positive")
    g = [float(star_norm_H)]
    for q in range(1, p + 1):
        total = 0.0
        for k in range(1, q + 1):
            for comp in compositions(q, k):
                total += 2 ** k / math.factorial(k) * math.prod(g[i - 1] for i in comp) * g[0]
        for m in range(1, q + 1):
            for k in range(1, q + 2 - m):
                for comp in compositions(q + 1 - m, k):
                    total += 2 ** (k + 1) / math.factorial(k + 1) * math.prod(g[i - 1] for i in comp) * g[m - 1]
        g.append(total)
    return g


def fm_constants(star_norm_H: float, p: int) -> FMConstants:
    """Recursion values and the remainder prefactor ``(G~ + 1) exp(4 p G~)``
    with ``G~`` the largest of ``Gamma_0..Gamma_{p-1}`` (``Gamma_0`` for p=0)."""
    if p < 0:
        raise ValueError("p must be non-negative")
    g = fm_gammas(star_norm_H, p)
    gt = max(g[: max(p, 1)])
    return FMConstants(tuple(g), (gt + 1) * math.exp(4 * p * gt))


# ---------------------------------------------------------------------------
# Gaussian Floquet runs


@dataclass(frozen=True)
class FloquetRun:
    observable_sim: float
    observable_target: float
    abs_error: float
    t_sim: float
    periods: int


def floquet_target(N: int, h0: float, h1: float, g0: float, g1: float, p: int,
                   quad_tol: float = 1e-12, periodic: bool = False) -> gs.QuadraticHamiltonian:
    """The order-``p`` Magnus coefficient of the chain drive.

    It is independent of the period for these trigonometric drives, so it
    serves as the target Hamiltonian: ``h0 mu + g0 iQ`` at p=0 and the
    certified multiple of ``[mu, Q]`` at p=1.
    """
    if p not in (0, 1):
        raise ValueError("Floquet runs support p in {0, 1}")
    terms = magnus_effective_quadratic(chain_drive(N, h0, h1, g0, g1, 1.0, periodic), p, quad_tol)
    return gs.QuadraticHamiltonian(terms.V[p], f"V_F^({p})")


def run_floquet(N: int, h0: float, h1: float, g0: float, g1: float, p: int, tau: float, uptau: float,
                gamma: float = 0.0, tol: float = 1e-11, target: gs.QuadraticHamiltonian | None = None,
                initial: gs.CovarianceState | None = None, periodic: bool = False) -> FloquetRun:
    """Simulate the driven chain for ``t_sim ~ tau / uptau^p`` and compare with
    ``exp(-i H_0 tau)``.

    The number of periods is ``round(tau / uptau^(p+1))`` so the run ends on a
    stroboscopic time; the achieved ``t_sim`` is reported.
    """
    if uptau <= 0 or tau <= 0:
        raise ValueError("tau and uptau must be positive")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    drive = chain_drive(N, h0, h1, g0, g1, uptau, periodic).to_quadratic_drive()
    periods = max(1, int(round(tau / uptau ** (p + 1))))
    t_sim = periods * uptau
    state0 = initial if initial is not None else gs.vacuum_state(N)
    if target is None:
        target = floquet_target(N, h0, h1, g0, g1, p, periodic=periodic)
    obs_target = gs.mean_occupation(gs.evolve_exact(state0, target, tau))
    if gamma == 0:
        O = gs.period_propagator(drive, 0.0, uptau, tol=min(tol, 1e-12))
        final = gs.conjugate(state0, np.linalg.matrix_power(O, periods))
    else:
        M = gs.noisy_period_map(drive, gamma, 0.0, uptau, tol=tol)
        iu = gs.upper_indices(N)
        vec = np.linalg.matrix_power(M, periods) @ state0.gamma[iu]
        final = gs.from_upper(N, vec)
    obs = gs.mean_occupation(final)
    return FloquetRun(obs, obs_target, abs(obs - obs_target), t_sim, periods)

"""Perturbative (Schrieffer-Wolff type) expansion of ``uptau M + P`` for a
sum ``P`` of commuting projectors, plus noisy dense runs of the resulting
effective dynamics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from . import dense as dn
from ._series import compositions, conj_series, graded_nested


class ProjectorFamily:
    """Commuting orthogonal projectors with integer-spectrum sum ``P``."""

    def __init__(self, projectors: Sequence[np.ndarray], tol: float = 1e-10):
        self.projectors = tuple(np.asarray(p, dtype=complex) for p in projectors)
        if not self.projectors:
            raise ValueError("need at least one projector")
        for a in self.projectors:
            if np.abs(a @ a - a).max() > tol or np.abs(a - a.conj().T).max() > tol:
                raise ValueError("not an orthogonal projector")
        for i, a in enumerate(self.projectors):
            for b in self.projectors[i + 1:]:
                if np.abs(a @ b - b @ a).max() > tol:
                    raise ValueError("projectors do not commute")
        self.P = sum(self.projectors)
        lam, V = np.linalg.eigh(self.P)
        rounded = np.round(lam)
        if np.abs(lam - rounded).max() > 1e-8:
            raise ValueError("P spectrum is not integer")
        self.eigenvalues = rounded
        self.eigenvectors = V

    def to_eigenbasis(self, A: np.ndarray) -> np.ndarray:
        V = self.eigenvectors
        return V.conj().T @ A @ V

    def from_eigenbasis(self, A: np.ndarray) -> np.ndarray:
        V = self.eigenvectors
        return V @ A @ V.conj().T

    @property
    def gaps(self) -> np.ndarray:
        """``lambda_b - lambda_a`` for every eigenbasis entry ``(a, b)``."""
        lam = self.eigenvalues
        return lam[None, :] - lam[:, None]


def project_time_average(A: np.ndarray, P: ProjectorFamily) -> np.ndarray:
    """``int_0^1 e^{2 pi i s P} A e^{-2 pi i s P} ds``: keep only the blocks
    within a single eigenvalue sector of ``P``."""
    B = P.to_eigenbasis(np.asarray(A, dtype=complex))
    B = np.where(P.gaps == 0, B, 0)
    return P.from_eigenbasis(B)


def time_average_quadrature(A: np.ndarray, P: ProjectorFamily, nodes: int = 64) -> np.ndarray:
    x, w = leggauss(nodes)
    s = 0.5 * (x + 1)
    lam, V = P.eigenvalues, P.eigenvectors
    B = V.conj().T @ A @ V
    acc = np.zeros_like(B)
    for si, wi in zip(s, w):
        ph = np.exp(2j * math.pi * si * lam)
        acc += 0.5 * wi * (ph[:, None] * B * ph.conj()[None, :])
    return V @ acc @ V.conj().T


def solve_omega(X: np.ndarray, P: ProjectorFamily, uptau: float) -> np.ndarray:
    """``Omega`` with ``[Omega, P] = uptau X`` for ``X`` free of diagonal blocks."""
    B = P.to_eigenbasis(X)
    gaps = P.gaps
    off = gaps != 0
    if np.abs(B[~off]).max(initial=0.0) > 1e-9 * max(1.0, np.abs(B).max()):
        raise ValueError("right-hand side has a component inside a P sector")
    Om = np.zeros_like(B)
    Om[off] = uptau * B[off] / gaps[off]
    return P.from_eigenbasis(Om)


def solve_omega_integral(X: np.ndarray, P: ProjectorFamily, uptau: float, nodes: int = 48) -> np.ndarray:
    """The double-integral representation
    ``i uptau int_0^1 int_0^{s1} e^{2 pi i s2 P} X e^{-2 pi i s2 P} ds2 ds1``
    evaluated by tensor Gauss-Legendre quadrature.

    Its value is ``solve_omega(X) / (2 pi)``.
    """
    x, w = leggauss(nodes)
    s1 = 0.5 * (x + 1)
    lam, V = P.eigenvalues, P.eigenvectors
    B = V.conj().T @ X @ V
    dl = lam[:, None] - lam[None, :]
    acc = np.zeros_like(B)
    for a, wa in zip(s1, w):
        s2 = a * s1
        for b, wb in zip(s2, w):
            acc += 0.25 * wa * wb * a * np.exp(2j * math.pi * b * dl) * B
    return V @ (1j * uptau * acc) @ V.conj().T


@dataclass
class SWExpansion:
    p: int
    uptau: float
    M: np.ndarray
    P: ProjectorFamily
    omegas: dict[int, np.ndarray]
    G: list[np.ndarray]
    M_tilde: np.ndarray
    series_terms: int = 0

    @property
    def omega(self) -> np.ndarray:
        return sum(self.omegas.values())

    def rotated(self) -> np.ndarray:
        """``e^{-Omega} (uptau M + P) e^{Omega}`` by matrix exponentials."""
        U = expm(self.omega)
        return U.conj().T @ (self.uptau * self.M + self.P.P) @ U

    def remainder(self, tol: float = 1e-12) -> np.ndarray:
        """``R^(p)`` from the commutator series of the rotation, truncated once the
        tail bound falls below ``tol``."""
        H = self.uptau * self.M + self.P.P
        rot, k = conj_series(self.omega, H, lambda k: (-1) ** k / math.factorial(k), tol * self.uptau)
        self.series_terms = k
        return (rot - self.P.P) / self.uptau - self.M_tilde

    def remainder_exact(self) -> np.ndarray:
        return (self.rotated() - self.P.P) / self.uptau - self.M_tilde


def _G(q: int, M: np.ndarray, P: np.ndarray, omegas: dict, uptau: float) -> np.ndarray:
    out = np.zeros_like(M)
    for k in range(1, q + 1):
        out = out + (-1) ** k / math.factorial(k) * graded_nested(omegas, M, q, k)
    # compositions of q+1 into k >= 2 parts exist up to k = q+1
    for k in range(2, q + 2):
        out = out + (-1) ** k / math.factorial(k) / uptau * graded_nested(omegas, P, q + 1, k)
    return out


def sw_recursion_dense(M: np.ndarray, P: ProjectorFamily, uptau: float, p: int) -> SWExpansion:
    """Order-``p`` expansion with ``Omega = Omega^(1) + ... + Omega^(p+1)``.

    Each ``Omega^(q)`` solves ``[Omega^(q), P] = uptau (G^(q-1) - E(G^(q-1)))``
    exactly in the eigenbasis of ``P``; carrying one extra order makes the
    remainder start at ``uptau^(p+1)``.
    """
    if uptau <= 0:
        raise ValueError("uptau must be positive")
    if not 0 <= p <= 2:
        raise ValueError("p must be 0, 1 or 2")
    M = np.asarray(M, dtype=complex)
    omegas: dict[int, np.ndarray] = {}
    Gs = [M]
    for q in range(1, p + 2):
        prev = Gs[q - 1]
        omegas[q] = solve_omega(prev - project_time_average(prev, P), P, uptau)
        if q <= p:
            Gs.append(_G(q, M, P.P, omegas, uptau))
    M_tilde = sum(project_time_average(g, P) for g in Gs)
    return SWExpansion(p, uptau, M, P, omegas, Gs, M_tilde)


# ---------------------------------------------------------------------------
# Constants


@dataclass(frozen=True)
class SWConstants:
    gammas: tuple[float, ...]
    W: tuple[float, ...]
    C: float


def sw_constants(star_norm_M: float, star_norm_P: float, w: float, p: int) -> SWConstants:
    """Local-norm recursion for ``Gamma_q``, the rotation constants ``W_q``
    and the remainder prefactor ``2 G~ exp(2 p G~)``."""
    if star_norm_M <= 0 or star_norm_P <= 0 or w <= 0 or p < 0:
        raise ValueError("norms and w must be positive, p non-negative")
    g = [float(star_norm_M)]
    for q in range(1, p + 1):
        total = 0.0
        for k in range(1, q + 1):
            for comp in compositions(q, k):
                total += (2 * w) ** k / math.factorial(k) * g[0] * math.prod(g[i - 1] for i in comp)
        for k in range(2, q + 2):
            for comp in compositions(q + 1, k):
                total += (2 * w) ** k / math.factorial(k) * math.prod(g[i - 1] for i in comp) * star_norm_P
        g.append(total)
    W = tuple(w * max(g[:q]) for q in range(1, p + 1))
    gt = max((star_norm_P, star_norm_M) + W)
    return SWConstants(tuple(g), W, 2 * gt * math.exp(2 * p * gt))


# ---------------------------------------------------------------------------
# Demonstration model and runs


@dataclass(frozen=True)
class SWModel:
    n: int
    M: np.ndarray
    P: ProjectorFamily
    O: np.ndarray
    initial: dn.DenseState


def sw_demo(n: int = 6, occupied: Sequence[int] = (0, 3), field: float = 0.5) -> SWModel:
    """Chain of ``n`` qubits with ``P`` counting even bonds in ``|01>``/``|10>``.

    ``M`` is nearest-neighbour ``XX + YY`` plus a transverse field ``field * X``
    on every site, the observable is ``n_0 = (1 - Z_0)/2`` and the initial
    product state has excitations on ``occupied``. Without the field the
    first-order response of ``n_0`` cancels and errors scale as ``uptau^2``.
    """
    if n < 2 or n % 2:
        raise ValueError("n must be even and >= 2")
    Zs = [dn.site_op(dn.Z, i, n) for i in range(n)]
    eye = np.eye(2 ** n)
    projectors = [0.5 * (eye - Zs[i] @ Zs[i + 1]) for i in range(0, n - 1, 2)]
    M = sum(dn.site_op(dn.X, i, n) @ dn.site_op(dn.X, i + 1, n)
            + dn.site_op(dn.Y, i, n) @ dn.site_op(dn.Y, i + 1, n) for i in range(n - 1))
    M = M + field * sum(dn.site_op(dn.X, i, n) for i in range(n))
    O = dn.number_op(0, n)
    bits = [1 if i in occupied else 0 for i in range(n)]
    return SWModel(n, M, ProjectorFamily(projectors), O, dn.DenseState.basis(bits))


def sw_target(model: SWModel, p: int) -> tuple[np.ndarray, np.ndarray]:
    """``(M_design, H_0)`` with ``M~^(p) = uptau^p H_0 + O(uptau^(p+1))``.

    Order 0 uses ``M`` itself and ``H_0 = E(M)``. Order 1 removes the
    sector-diagonal part, ``M' = M - E(M)``, so the leading effective term is
    the second-order exchange ``E(G^(1)) / uptau``, independent of ``uptau``.
    """
    if p == 0:
        return model.M, project_time_average(model.M, model.P)
    if p == 1:
        Md = model.M - project_time_average(model.M, model.P)
        exp1 = sw_recursion_dense(Md, model.P, 1.0, 1)
        return Md, project_time_average(exp1.G[1], model.P)
    raise ValueError("SW runs support p in {0, 1}")


@dataclass(frozen=True)
class SWRun:
    observable_sim: float
    observable_target: float
    abs_error: float
    t_sim: float


def run_sw(M: np.ndarray, P: ProjectorFamily, H0: np.ndarray, tau: float, uptau: float, gamma: float,
           O: np.ndarray, initial: dn.DenseState, p: int, kind: str = "qubit") -> SWRun:
    """Evolve ``uptau M + P`` with depolarizing at rate ``gamma`` for
    ``t_sim = tau / uptau^(p+1)`` and compare with ``exp(-i H0 tau)``."""
    if np.abs(O @ P.P - P.P @ O).max() > 1e-8:
        raise ValueError("observable must commute with P")
    if uptau <= 0 or tau <= 0 or gamma < 0:
        raise ValueError("need uptau, tau > 0 and gamma >= 0")
    t_sim = tau / uptau ** (p + 1)
    H = uptau * np.asarray(M, dtype=complex) + P.P
    rho0 = initial.rho
    if gamma == 0:
        lam, V = np.linalg.eigh(H)
        U = (V * np.exp(-1j * lam * t_sim)) @ V.conj().T
        rho = U @ rho0 @ U.conj().T
    else:
        L = dn.sparse_liouvillian(H, gamma, initial.n, range(initial.n), kind)
        rho = dn.unvec(expm_multiply(L * t_sim, dn.vec(rho0)), rho0.shape[0])
    lam0, V0 = np.linalg.eigh(H0)
    U0 = (V0 * np.exp(-1j * lam0 * tau)) @ V0.conj().T
    target = dn.expectation(dn.DenseState(U0 @ rho0 @ U0.conj().T), O)
    sim = dn.expectation(dn.DenseState(0.5 * (rho + rho.conj().T)), O)
    return SWRun(sim, target, abs(sim - target), t_sim)

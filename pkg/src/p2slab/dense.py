"""Exact density-matrix reference for small systems.

Qubit 0 is the leftmost tensor factor and Jordan-Wigner strings run over
lower indices, so ``c_{2i} = Z...Z X_i`` and ``c_{2i+1} = Z...Z Y_i``. The
state ``|1>`` of a qubit is the occupied mode.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from .gaussian import CovarianceState, IntegrationError, QuadraticHamiltonian
from .lattice import Lattice, LocalOperator, LocalTerm, diameter

DENSE_CAP = 12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, X, Y, Z)


def _check_size(n: int) -> None:
    if n < 1 or n > DENSE_CAP:
        raise ValueError(f"dense oracle supports 1..{DENSE_CAP} qubits, got {n}")


def kron_all(factors: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, factors)


def site_op(op: np.ndarray, site: int, n: int) -> np.ndarray:
    _check_size(n)
    return kron_all([op if k == site else I2 for k in range(n)])


@lru_cache(maxsize=None)
def _majoranas(n: int) -> tuple[np.ndarray, ...]:
    out = []
    for i in range(n):
        for p in (X, Y):
            m = kron_all([Z] * i + [p] + [I2] * (n - i - 1))
            m.setflags(write=False)
            out.append(m)
    return tuple(out)


def majoranas(n: int) -> tuple[np.ndarray, ...]:
    """The ``2n`` Jordan-Wigner Majorana operators."""
    _check_size(n)
    return _majoranas(n)


def annihilation(i: int, n: int) -> np.ndarray:
    c = majoranas(n)
    return 0.5 * (c[2 * i] + 1j * c[2 * i + 1])


def number_op(i: int, n: int) -> np.ndarray:
    return site_op(0.5 * (I2 - Z), i, n)


def mean_number_op(n: int) -> np.ndarray:
    return sum(number_op(i, n) for i in range(n)) / n


def jordan_wigner_dense(H: QuadraticHamiltonian | np.ndarray) -> np.ndarray:
    """Dense ``(i/4) sum A_jk c_j c_k`` for a Majorana coefficient matrix."""
    A = H.A if isinstance(H, QuadraticHamiltonian) else np.asarray(H, dtype=float)
    n = A.shape[0] // 2
    c = majoranas(n)
    out = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for j in range(2 * n):
        for k in range(2 * n):
            if A[j, k] != 0.0:
                out += A[j, k] * (c[j] @ c[k])
    return 0.25j * out


def covariance_from_dense(rho: np.ndarray) -> CovarianceState:
    """``Gamma_jk = (i/2) Tr(rho [c_j, c_k])``."""
    n = int(round(np.log2(rho.shape[0])))
    c = majoranas(n)
    g = np.zeros((2 * n, 2 * n))
    for j in range(2 * n):
        for k in range(j + 1, 2 * n):
            v = 0.5j * np.trace(rho @ (c[j] @ c[k] - c[k] @ c[j]))
            g[j, k] = v.real
            g[k, j] = -v.real
    return CovarianceState(g)


@dataclass(frozen=True)
class DenseState:
    rho: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rho, dtype=complex)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError("density matrix must be square")
        object.__setattr__(self, "rho", r)

    @property
    def n(self) -> int:
        return int(round(np.log2(self.rho.shape[0])))

    def check(self, tol: float = 1e-10) -> None:
        r = self.rho
        if abs(np.trace(r) - 1) > tol:
            raise ValueError("trace deviates from 1")
        if np.abs(r - r.conj().T).max() > tol:
            raise ValueError("density matrix not Hermitian")
        if np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min() < -1e-8:
            raise ValueError("density matrix not positive")

    @classmethod
    def basis(cls, bits: Sequence[int]) -> "DenseState":
        n = len(bits)
        _check_size(n)
        idx = int("".join(str(int(b)) for b in bits), 2)
        rho = np.zeros((2 ** n, 2 ** n), dtype=complex)
        rho[idx, idx] = 1.0
        return cls(rho)

    @classmethod
    def vacuum(cls, n: int) -> "DenseState":
        return cls.basis([0] * n)


def expectation(state: DenseState, O: np.ndarray) -> float:
    v = np.trace(O @ state.rho)
    if abs(v.imag) > 1e-9:
        raise ValueError(f"expectation has imaginary part {v.imag:.3e}; is O Hermitian?")
    return float(v.real)


def _fermionic_mix(rho: np.ndarray, i: int, n: int) -> np.ndarray:
    c = majoranas(n)
    c1, c2 = c[2 * i], c[2 * i + 1]
    parity = 1j * c1 @ c2
    return 0.25 * (rho + c1 @ rho @ c1 + c2 @ rho @ c2 + parity @ rho @ parity)


def _qubit_mix(rho: np.ndarray, i: int, n: int) -> np.ndarray:
    acc = np.zeros_like(rho)
    for p in PAULIS:
        P = site_op(p, i, n)
        acc += P @ rho @ P
    return 0.25 * acc


MIXERS = {"fermionic": _fermionic_mix, "qubit": _qubit_mix}


def depolarize_mode_dense(state: DenseState, i: int, p: float, kind: str = "fermionic") -> DenseState:
    """``(1-p) rho + p * mix_i(rho)``.

    ``kind="fermionic"`` twirls over the mode's Majorana pair, which replaces
    the mode by a maximally mixed mode without disturbing correlations
    carried by the Jordan-Wigner strings of other modes. ``kind="qubit"`` is
    the plain qubit partial trace ``Tr_i rho (x) I/2``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability must lie in [0, 1], got {p}")
    mix = MIXERS[kind]
    return DenseState((1 - p) * state.rho + p * mix(state.rho, i, state.n))


def _mix_superop(n: int, i: int, kind: str) -> np.ndarray:
    """Column-stacked superoperator of ``mix_i``."""
    dim = 2 ** n
    if kind == "fermionic":
        c = majoranas(n)
        ops = [np.eye(dim), c[2 * i], c[2 * i + 1], 1j * c[2 * i] @ c[2 * i + 1]]
    else:
        ops = [site_op(p, i, n) for p in PAULIS]
    # vec(K rho K^dag) = (conj(K) kron K) vec(rho) for column stacking
    return 0.25 * sum(np.kron(K.conj(), K) for K in ops)


def dissipator_superop(n: int, modes: Sequence[int], kind: str = "fermionic") -> np.ndarray:
    """Generator ``sum_i (mix_i - id)`` in column-stacked form."""
    dim = 2 ** n
    L = np.zeros((dim * dim, dim * dim), dtype=complex)
    ident = np.eye(dim * dim)
    for i in modes:
        L += _mix_superop(n, i, kind) - ident
    return L


def sparse_liouvillian(H: np.ndarray, gamma: float, n: int, modes: Sequence[int],
                       kind: str = "fermionic") -> sparse.csr_matrix:
    """Sparse column-stacked generator ``-i[H, .] + gamma sum_i (mix_i - id)``."""
    dim = H.shape[0]
    Hs = sparse.csr_matrix(H)
    eye = sparse.identity(dim, format="csr")
    L = -1j * (sparse.kron(eye, Hs) - sparse.kron(Hs.T, eye))
    if gamma:
        ident = sparse.identity(dim * dim, format="csr")
        c = majoranas(n)
        for i in modes:
            if kind == "fermionic":
                ops = [np.eye(dim), c[2 * i], c[2 * i + 1], 1j * c[2 * i] @ c[2 * i + 1]]
            else:
                ops = [site_op(p, i, n) for p in PAULIS]
            mixs = sum(sparse.kron(sparse.csr_matrix(K.conj()), sparse.csr_matrix(K)) for K in ops)
            L = L + gamma * (0.25 * mixs - ident)
    return L.tocsr()


def hamiltonian_superop(H: np.ndarray) -> np.ndarray:
    """Column-stacked ``rho -> -i [H, rho]``."""
    dim = H.shape[0]
    eye = np.eye(dim)
    return -1j * (np.kron(eye, H) - np.kron(H.T, eye))


def vec(rho: np.ndarray) -> np.ndarray:
    return rho.reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return v.reshape(dim, dim, order="F")


HamiltonianLike = np.ndarray | Callable[[float], np.ndarray]


def evolve_lindblad_dense(state: DenseState, H: HamiltonianLike, gamma: float, t0: float, t1: float,
                          tol: float = 1e-10, modes: Sequence[int] | None = None,
                          kind: str = "fermionic") -> DenseState:
    """Integrate ``d rho/dt = -i[H(t), rho] + gamma sum_i (mix_i - id) rho``.

    A constant ``H`` with ``gamma == 0`` uses exact unitary conjugation; a
    constant generator otherwise uses one matrix exponential of the
    Liouvillian; a callable ``H`` goes through an adaptive Runge-Kutta pair.
    """
    if t1 < t0:
        raise ValueError("need t1 >= t0")
    n = state.n
    dim = 2 ** n
    modes = list(range(n)) if modes is None else list(modes)
    if t1 == t0:
        return state
    if not callable(H):
        Hm = np.asarray(H, dtype=complex)
        if gamma == 0:
            U = expm(-1j * Hm * (t1 - t0))
            return DenseState(U @ state.rho @ U.conj().T)
        L = sparse_liouvillian(Hm, gamma, n, modes, kind)
        r = unvec(expm_multiply(L * (t1 - t0), vec(state.rho.astype(complex))), dim)
        return DenseState(0.5 * (r + r.conj().T))

    mix = MIXERS[kind]

    def rhs(t, y):
        r = y.reshape(dim, dim)
        Ht = H(t)
        out = -1j * (Ht @ r - r @ Ht)
        if gamma:
            for i in modes:
                out = out + gamma * (mix(r, i, n) - r)
        return out.ravel()

    sol = solve_ivp(rhs, (t0, t1), state.rho.astype(complex).ravel(), method="DOP853",
                    rtol=tol, atol=tol * 1e-2)
    if not sol.success:
        raise IntegrationError(f"dense Lindblad integration failed: {sol.message}")
    r = sol.y[:, -1].reshape(dim, dim)
    return DenseState(0.5 * (r + r.conj().T))


# ---------------------------------------------------------------------------
# Pauli decompositions and local decompositions of dense operators


def pauli_coefficients(M: np.ndarray) -> np.ndarray:
    """Tensor ``c[a_0, ..., a_{n-1}]`` with ``M = sum c_a sigma_a0 (x) ... ``."""
    n = int(round(np.log2(M.shape[0])))
    basis = np.stack(PAULIS)  # (4, 2, 2)
    coeffs = np.asarray(M, dtype=complex).reshape((2,) * (2 * n))
    for k in range(n):
        # axes so far: k Pauli labels, rows k..n-1, columns k..n-1
        coeffs = np.tensordot(coeffs, basis, axes=([k, n], [2, 1]))
        coeffs = np.moveaxis(coeffs, -1, k)
    return coeffs / 2 ** n


def support_groups(M: np.ndarray, tol: float = 1e-12) -> dict[tuple[int, ...], np.ndarray]:
    """Group the Pauli expansion of ``M`` by support (identity dropped)."""
    n = int(round(np.log2(M.shape[0])))
    coeffs = pauli_coefficients(M)
    groups: dict[tuple[int, ...], np.ndarray] = {}
    for idx in zip(*np.nonzero(np.abs(coeffs) > tol)):
        support = tuple(k for k, a in enumerate(idx) if a)
        if not support:
            continue
        local = kron_all([PAULIS[idx[k]] for k in support])
        groups[support] = groups.get(support, 0) + coeffs[idx] * local
    return groups


def local_decomposition(M: np.ndarray, lattice: Lattice | None = None, tol: float = 1e-12) -> LocalOperator:
    """Local-operator form of a dense matrix, one term per Pauli support."""
    n = int(round(np.log2(M.shape[0])))
    lattice = lattice or Lattice.chain(n)
    terms = [LocalTerm.from_matrix(s, m) for s, m in sorted(support_groups(M, tol).items())]
    return LocalOperator(lattice, terms)


def dense_star_norm(M: np.ndarray, tol: float = 1e-12) -> float:
    """Star norm of the Pauli-support decomposition of ``M``."""
    from .lattice import star_norm
    return star_norm(local_decomposition(M, tol=tol))


# ---------------------------------------------------------------------------
# Random local operators for property tests


def _candidate_supports(lattice: Lattice, a: float) -> list[tuple[int, ...]]:
    cands = [(s,) for s in range(lattice.n_sites)]
    if a >= 1:
        cands += list(lattice.bonds())
    if a >= 2:
        for s in range(lattice.n_sites):
            c = lattice.coords(s)
            for axis, n in enumerate(lattice.extents):
                if c[axis] + 2 < n:
                    mid, end = list(c), list(c)
                    mid[axis] += 1
                    end[axis] += 2
                    cands.append((s, lattice.index(mid), lattice.index(end)))
    return [tuple(sorted(x)) for x in cands if diameter(lattice, x) <= a]


def _random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (g + g.conj().T)


def random_local_operator(lattice: Lattice, a: float, Z: int, J: float, seed: int,
                          max_terms: int | None = None) -> LocalOperator:
    """Random explicit Hermitian local operator obeying the declared (a, Z, J).

    Term ``k`` draws from its own generator seeded by ``(seed, k)`` so the
    result does not depend on evaluation order. Supports are accepted
    greedily, skipping any that would push a coordination count above ``Z``.
    """
    if a <= 0 or Z < 1 or J <= 0:
        raise ValueError("a, Z, J must be positive")
    picker = np.random.default_rng([seed, 0xC0FFEE])
    cands = _candidate_supports(lattice, a)
    order = picker.permutation(len(cands))
    limit = max_terms if max_terms is not None else len(cands)
    chosen: list[tuple[int, ...]] = []
    counts: list[int] = []
    for k in order:
        if len(chosen) >= limit:
            break
        s = set(cands[k])
        hits = [j for j, c in enumerate(chosen) if s & set(c)]
        if len(hits) + 1 > Z or any(counts[j] + 1 > Z for j in hits):
            continue
        for j in hits:
            counts[j] += 1
        chosen.append(cands[k])
        counts.append(len(hits) + 1)
    terms = []
    for k, support in enumerate(chosen):
        rng = np.random.default_rng([seed, k])
        h = _random_hermitian(2 ** len(support), rng)
        h *= J * rng.uniform(0.1, 1.0) / np.linalg.norm(h, 2)
        terms.append(LocalTerm.from_matrix(support, h))
    op = LocalOperator(lattice, terms, a=a, Z=Z, J=J)
    op.validate()
    return op

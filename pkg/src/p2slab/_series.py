"""Helpers shared by the Floquet-Magnus and Schrieffer-Wolff expansions."""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np


@lru_cache(maxsize=None)
def compositions(total: int, parts: int, largest: int | None = None) -> tuple[tuple[int, ...], ...]:
    """Ordered tuples of ``parts`` integers in ``[1, largest]`` summing to ``total``."""
    largest = total if largest is None else largest
    if parts == 0:
        return ((),) if total == 0 else ()
    out = []
    for first in range(1, min(largest, total - parts + 1) + 1):
        for rest in compositions(total - first, parts - 1, largest):
            out.append((first,) + rest)
    return tuple(out)


def comm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def graded_nested(omegas: Mapping[int, np.ndarray], X: np.ndarray, order: int, k: int) -> np.ndarray:
    """``sum over i_1+...+i_k = order`` of ``C_{Om^(i_1)} ... C_{Om^(i_k)} X``.

    ``omegas`` maps grading index to matrix; missing indices count as zero.
    """
    # layer[o] holds the sum of all j-fold nested commutators of total index o
    layer = {0: X}
    for _ in range(k):
        nxt: dict[int, np.ndarray] = {}
        for o, Y in layer.items():
            for i, Om in omegas.items():
                if o + i > order:
                    continue
                Z = comm(Om, Y)
                nxt[o + i] = nxt[o + i] + Z if o + i in nxt else Z
        layer = nxt
    return layer.get(order, np.zeros_like(X))


def conj_series(Om: np.ndarray, X: np.ndarray, weight: Callable[[int], float], tol: float = 1e-12,
                max_terms: int = 400) -> tuple[np.ndarray, int]:
    """``sum_k weight(k) C_Om^k X`` truncated once ``(2|Om|)^k |X| / k!`` falls below ``tol``.

    Returns the sum and the number of commutator terms used.
    """
    norm_om = np.linalg.norm(Om, 2)
    norm_x = np.linalg.norm(X, 2)
    out = weight(0) * X
    if norm_om == 0.0 or norm_x == 0.0:
        return out, 0
    term = X
    for k in range(1, max_terms):
        term = comm(Om, term)
        out = out + weight(k) * term
        log_tail = (k + 1) * math.log(2 * norm_om) - math.lgamma(k + 2) + math.log(norm_x)
        if log_tail < math.log(tol):
            return out, k
    raise RuntimeError(f"series truncation not converged after {max_terms} terms (|Omega|={norm_om:.3g})")

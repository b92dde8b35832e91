import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from p2slab import dense as dn
from p2slab import lattice as lt


def test_chain_geometry():
    lat = lt.Lattice.chain(5)
    assert lat.n_sites == 5 and lat.dimension == 1
    assert lat.distance(0, 4) == 4
    assert lt.Lattice.chain(5, periodic=True).distance(0, 4) == 1
    assert lat.bonds() == [(0, 1), (1, 2), (2, 3), (3, 4)]
    assert lt.diameter(lat, [1, 3]) == 2


def test_square_lattice_neighbours():
    lat = lt.Lattice([3, 3])
    centre = lat.index((1, 1))
    assert sorted(lat.neighbours(centre)) == sorted(lat.index(c) for c in [(0, 1), (2, 1), (1, 0), (1, 2)])


def test_embed_places_factors():
    X, Z = dn.X, dn.Z
    m = np.kron(X, Z)
    # support (2, 0) onto target (0, 1, 2): Z on site 0, identity on 1, X on 2
    out = lt.embed(m, (2, 0), (0, 1, 2))
    assert np.allclose(out, np.kron(np.kron(Z, np.eye(2)), X))


def test_star_norm_is_max_site_load():
    lat = lt.Lattice.chain(4)
    A = lt.LocalOperator(lat, [lt.LocalTerm.from_norm((0, 1), 1.0), lt.LocalTerm.from_norm((1, 2), 2.0)])
    assert lt.star_norm(A) == 3.0
    assert lt.star_norm(lt.LocalOperator(lat)) == 0.0


def test_commutator_bound_counterexample_for_general_operators():
    # the factor-two commutator estimate fails for arbitrary local operators:
    # A = XX on (0,1), B = Z0 + Z1 gives |[A,B]|_* = 4 > 2 |A|_* |B|_* = 2
    lat = lt.Lattice.chain(2)
    A = lt.LocalOperator(lat, [lt.LocalTerm.from_matrix((0, 1), np.kron(dn.X, dn.X))])
    B = lt.LocalOperator(lat, [lt.LocalTerm.from_matrix((0,), dn.Z), lt.LocalTerm.from_matrix((1,), dn.Z)])
    C = lt.commutator_local(A, B)
    assert lt.star_norm(C) == pytest.approx(4.0)
    assert lt.star_norm(A) * lt.star_norm(B) == pytest.approx(1.0)
    # the dense commutator confirms the explicit terms
    assert np.allclose(C.to_dense(), A.to_dense() @ B.to_dense() - B.to_dense() @ A.to_dense())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_triangle_and_unitary_invariance(seed):
    lat = lt.Lattice.chain(5)
    A = dn.random_local_operator(lat, 1, 3, 1.0, seed=seed)
    B = dn.random_local_operator(lat, 1, 3, 1.0, seed=seed + 1)
    assert lt.star_norm(A + B) <= lt.star_norm(A) + lt.star_norm(B) + 1e-12
    rng = np.random.default_rng(seed)
    layer = []
    for s in range(5):
        q, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        layer.append(((s,), q))
    assert lt.star_norm(lt.conjugate_local(A, layer)) == pytest.approx(lt.star_norm(A), abs=1e-10)


def test_random_operator_respects_coordination():
    lat = lt.Lattice.chain(6)
    A = dn.random_local_operator(lat, 1, 2, 0.5, seed=3)
    A.validate()
    assert max(A.coordination()) <= 2
    assert lt.star_norm(A) <= 0.5 * 2 + 1e-12


def test_nu_d_values():
    # inside the cone the sum is exact; the tail adds e^{-1}/(1-e^{-1})
    x = 3.0
    expected = 4 * math.e * (4 + math.exp(-1) / (1 - math.exp(-1)))
    assert lt.nu_d(x, 1) == pytest.approx(expected, rel=1e-10)
    with pytest.raises(ValueError):
        lt.nu_d(-1.0, 1)


def test_lr_velocity_and_observable_bound():
    assert lt.lr_velocity(1.0, 2.0, 0.5) == pytest.approx(4 * math.e)
    assert lt.lr_observable_bound(1, 1, 1, 0.0, 1e5, 1.0, 2.0, 1.0) == 0.0


SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


@pytest.mark.parametrize("seed", range(20))
def test_nearest_neighbour_layer_bound(seed):
    # a layer of two-site gates spreads supports by r0 = 1; in 1D the load grows at most by (2 r0)^d = 2
    lat = lt.Lattice.chain(6)
    A = dn.random_local_operator(lat, 1, 3, 1.0, seed=seed)
    rng = np.random.default_rng(seed)
    for offset in (0, 1):
        swaps = [((i, i + 1), SWAP) for i in range(offset, 5, 2)]
        assert lt.star_norm(lt.conjugate_local(A, swaps)) <= 2 * lt.star_norm(A) + 1e-10
        gates = []
        for i in range(offset, 5, 2):
            q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
            gates.append(((i, i + 1), q))
        assert lt.star_norm(lt.conjugate_local(A, gates)) <= 2 * lt.star_norm(A) + 1e-10


def test_distance_is_a_metric_on_square_lattice():
    lat = lt.Lattice([5, 5])
    n = lat.n_sites
    D = np.array([[lat.distance(x, y) for y in range(n)] for x in range(n)])
    assert np.array_equal(D, D.T)
    assert np.all(np.diag(D) == 0) and np.all(D[~np.eye(n, dtype=bool)] > 0)
    assert np.all(D[:, :, None] <= D[:, None, :] + D.T[None, :, :])
    assert lt.set_distance(lat, [0], [n - 1]) == 8


@pytest.mark.parametrize("d", [1, 2, 3])
def test_nu_d_polynomial_growth(d):
    xs = np.linspace(50, 200, 16)
    ratios = [lt.nu_d(x, d) / x ** d for x in xs]
    assert max(ratios) <= 1.5 * min(ratios)
    assert lt.nu_d(5, 1) <= lt.nu_d(6, 1)


def test_lr_observable_bound_examples():
    base = lt.lr_observable_bound(3, 2.0, 0.5, 0.0, 0.0, 1.0, 2.0, 1.5)
    assert base == pytest.approx(math.e / 2 * 3)
    doubled = lt.lr_observable_bound(3, 2.0, 0.5, 2.0, 5.0, 1.0, 2.0, 1.5)
    single = lt.lr_observable_bound(3, 2.0, 0.5, 1.0, 5.0, 1.0, 2.0, 1.5)
    assert doubled / single == pytest.approx(math.exp(1.5))
    assert lt.lr_observable_bound(3, 2.0, 0.5, 1.0, 1e5, 1.0, 2.0, 1.5) < 1e-300

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicomm.dyadic import average, largest_dyadic_subcube, martingale_difference, maximal_function
from bicomm.lattice import Cube, DyadicGrid, LatticeFunction, bounding_cube
from bicomm.sparse import (SparseFamily, reflect_family, sparse_decompose, stopping_family,
                           verify_sparse)

U = Cube((0.0,), 1.0)


def lf(fn, box=U, h=2.0**-8):
    return LatticeFunction.from_callable(fn, box, h)


# geometry

def test_cube_half_open():
    assert U.contains_points(0.0) and not U.contains_points(1.0)
    assert not Cube((0.0,), 0.5).intersects(Cube((0.5,), 0.5))


@settings(max_examples=200, deadline=None)
@given(st.integers(-4, 2), st.integers(-20, 20), st.integers(-4, 2), st.integers(-20, 20))
def test_grid_cubes_nested_or_disjoint(k1, i1, k2, i2):
    G = DyadicGrid(1)
    a, b = G.cube(k1, [i1]), G.cube(k2, [i2])
    if a.intersects(b):
        small, big = (a, b) if a.side <= b.side else (b, a)
        assert big.contains(small, tol=0.0)


def test_grid_level_tiles_box():
    G = DyadicGrid(2, origin_shift=(1 / 3, 0.0), label="shifted")
    box = Cube((1 / 3, 0.0), 2.0)
    cubes = G.cubes_in(box, -1)
    assert len(cubes) == 16
    assert sum(c.volume for c in cubes) == pytest.approx(box.volume)
    for c in cubes:
        label, level, index = c.grid_ref
        assert G.cube(level, index) == c


def test_lattice_function_shape_and_zero_outside():
    f = LatticeFunction.indicator(Cube((0.0,), 0.5), U, 0.125)
    assert f.shape == (8,)
    out = f.values_on(Cube((1.0,), 0.5))
    assert np.all(out == 0)
    with pytest.raises(ValueError):
        LatticeFunction(U, 0.3, np.zeros(3))


def test_serialization_roundtrip(tmp_path):
    f = LatticeFunction.from_callable(lambda x, y: np.sin(x) * y, Cube((0.0, -1.0), 1.0), 0.125)
    g = LatticeFunction.from_bytes(f.to_bytes())
    assert g.box == f.box and g.h == f.h and np.array_equal(g.samples, f.samples)
    f.save(tmp_path / "f.latf")
    assert np.array_equal(LatticeFunction.load(tmp_path / "f.latf").samples, f.samples)
    data = f.to_bytes()
    assert data[:4] == b"LATF" and len(data) == 4 + 4 + 8 * 4 + 8 * 64


def test_csv_roundtrip():
    f = lf(lambda x: x**2, h=1 / 16)
    g = LatticeFunction.from_csv(f.to_csv())
    assert g.box == f.box and np.array_equal(g.samples, f.samples)


def test_bounding_cube_aligned():
    B = bounding_cube([Cube((0.25,), 0.25), Cube((-3.0,), 0.5)], 0.125)
    assert B.corner == (-3.0,) and B.side == 3.5


# averages and martingale differences

def test_average_examples():
    assert average(LatticeFunction.indicator(U, U, 2**-4), U) == 1.0
    assert average(LatticeFunction.indicator(Cube((0.0,), 0.5), U, 2**-4), U) == 0.5
    assert abs(average(lf(lambda x: x), U) - 0.5) <= 2**-8


def test_average_under_resolved():
    f = lf(lambda x: x)
    with pytest.raises(ValueError, match="cube under-resolved"):
        average(f, Cube((0.0,), 2**-10))


def test_martingale_difference_examples():
    h = 2**-8
    md = martingale_difference(lf(lambda x: x), U)
    assert np.allclose(md.samples[:128], -0.25) and np.allclose(md.samples[128:], 0.25)
    assert np.all(martingale_difference(lf(lambda x: 3.0 + 0 * x), U).samples == 0)
    md = martingale_difference(LatticeFunction.indicator(Cube((0.0,), 0.5), U, h), U)
    assert np.all(md.samples[:128] == 0.5) and np.all(md.samples[128:] == -0.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(-6, 0))
def test_martingale_difference_integrates_to_zero(seed, k):
    rng = np.random.default_rng(seed)
    h = 2.0**-7
    f = LatticeFunction(U, h, rng.integers(-8, 8, 128).astype(float))
    G = DyadicGrid(1)
    for Q in G.cubes_in(U, k):
        md = martingale_difference(f, Q)
        assert md.samples[f.mask(Q)].sum() == 0.0  # dyadic integer data: exact


# maximal function

def test_maximal_function_examples():
    box = Cube((0.0,), 2.0)
    f = LatticeFunction.indicator(U, box, 2**-6)
    M = maximal_function(f)
    assert np.all(M.samples[:64] == 1.0)
    v = M.samples[int(1.5 / 2**-6)]
    assert 0.5 <= v <= 1.0
    assert np.all(maximal_function(LatticeFunction.zeros(box, 2**-6)).samples == 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.25, 2.0, 8.0]))
def test_maximal_function_dominates_and_homogeneous(seed, lam):
    rng = np.random.default_rng(seed)
    f = LatticeFunction(Cube((0.0, 0.0), 1.0), 1 / 16, rng.standard_normal((16, 16)))
    M = maximal_function(f)
    assert np.all(M.samples >= np.abs(f.samples))
    # scaling by a power of two is exact in floating point
    assert np.array_equal(maximal_function(f * lam).samples, lam * M.samples)


def test_maximal_function_custom_sampler():
    f = LatticeFunction.indicator(Cube((0.0,), 0.5), U, 1 / 8)
    M = maximal_function(f, cube_sampler=[U])
    assert np.all(M.samples[4:] == 0.5)


# largest dyadic subcube

def test_largest_dyadic_subcube_examples():
    G = DyadicGrid(1)
    assert largest_dyadic_subcube(G, Cube((0.5,), 0.25)) == Cube((0.5,), 0.25)
    assert largest_dyadic_subcube(G, Cube((0.3,), 0.6)) == Cube((0.5,), 0.25)


def test_largest_dyadic_subcube_ratio():
    rng = np.random.default_rng(7)
    G = DyadicGrid(2, resolution=2.0**-20)
    for _ in range(1000):
        side = 2.0 ** rng.uniform(-6, 3)
        T = Cube(tuple(rng.uniform(-5, 5, 2)), side)
        R = largest_dyadic_subcube(G, T)
        assert T.contains(R, tol=0.0) and G.contains_cube(R)
        assert 0.25 <= R.side / T.side <= 1.0


def test_largest_dyadic_subcube_errors():
    with pytest.raises(ValueError):
        largest_dyadic_subcube(DyadicGrid(1, resolution=0.5), Cube((0.1,), 0.6))


# stopping families and sparse decompositions

def test_stopping_family_examples():
    h = 2**-6
    S = stopping_family(LatticeFunction.indicator(Cube((0.0,), 0.25), U, h), U)
    assert S.cubes == [U, Cube((0.0,), 0.25)]
    assert stopping_family(LatticeFunction.indicator(U, U, h), U).cubes == [U]
    Z = stopping_family(LatticeFunction.zeros(U, h), U)
    assert Z.cubes == [U] and Z.majors[U].all()


def random_zero_mean(seed, n=256, d=1):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n,) * d) * np.exp(3 * rng.standard_normal((n,) * d) * (rng.random((n,) * d) < 0.05))
    a -= a.mean()
    return LatticeFunction(Cube((0.0,) * d, 1.0), 1.0 / n, a)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_stopping_family_half_sparse(seed):
    f = random_zero_mean(seed)
    S = stopping_family(f, U)
    rep = verify_sparse(S)
    assert rep.gamma_actual >= 0.5
    # exact cell counts
    for Q in S.cubes:
        assert 2 * np.count_nonzero(S.majors[Q]) >= round(Q.side / f.h)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sparse_decompose_properties(seed):
    f = random_zero_mean(seed)
    dec = sparse_decompose(f, U)
    assert dec.residual <= 2.0**-40 * f.sup_norm()
    for P, fP in dec.items():
        assert abs(fP.integral()) <= 1e-12 * f.sup_norm()
        assert fP.sup_norm() <= dec.constant * dec.averages[P] * (1 + 1e-12)
    # the bound that fixes the constant: pieces are at most 2^(d+1) + 1 times the local average
    assert dec.constant <= 2 ** (1 + 1) + 1


def test_sparse_pieces_dominated_by_maximal_function():
    consts = {0.5: 0.0, 1.0: 0.0, 2.0: 0.0}
    for seed in range(10):
        f = random_zero_mean(seed)
        dec = sparse_decompose(f, U)
        M = maximal_function(f).samples
        for s in consts:
            acc = np.zeros(f.shape)
            for P, fP in dec.items():
                acc += fP.sup_norm() ** s * f.mask(P)
            consts[s] = max(consts[s], float(np.max(acc / M**s)))
    # a single constant per exponent across the suite
    assert all(np.isfinite(c) and c < 50 for c in consts.values())


def test_sparse_decompose_examples():
    h = 2**-6
    haar = lf(lambda x: np.where(x < 0.5, 1.0, -1.0), h=h)
    dec = sparse_decompose(haar, U)
    assert list(dec) == [U]
    assert np.array_equal(dec[U].samples, haar.samples)
    md = martingale_difference(lf(lambda x: x, h=h), U)
    assert list(sparse_decompose(md, U)) == [U]
    with pytest.raises(ValueError, match="nonzero mean"):
        sparse_decompose(lf(lambda x: x, h=h), U)


def test_sparse_decompose_2d_residual():
    f = random_zero_mean(3, n=64, d=2)
    dec = sparse_decompose(f, f.box)
    assert dec.residual <= 2.0**-40 * f.sup_norm()


def test_verify_sparse_examples():
    h = 0.25
    frame = LatticeFunction.zeros(U, h)
    half = Cube((0.0,), 0.5)
    S = SparseFamily([U, half], {U: frame.mask(Cube((0.5,), 0.5)), half: frame.mask(half)}, 0.5,
                     {U: None, half: U}, U, h)
    rep = verify_sparse(S)
    assert rep.gamma_actual == 0.5 and rep.carleson_constant == 1.5
    one = SparseFamily([U], {U: frame.mask(U)}, 1.0, {U: None}, U, h)
    assert verify_sparse(one) == type(rep)(1.0, 1.0)
    bad = SparseFamily([U, half], {U: frame.mask(U), half: frame.mask(half)}, 0.5, {U: None, half: U}, U, h)
    with pytest.raises(ValueError, match="majors not disjoint"):
        verify_sparse(bad)


def test_reflect_family():
    f = random_zero_mean(11)
    S = stopping_family(f, U)
    G = DyadicGrid(1)
    same = reflect_family(S, G, lambda Q: Q)
    assert same.cubes == sorted(S.cubes, key=lambda c: (-c.side, c.corner))
    moved = reflect_family(S, G, lambda Q: Q.translate(Q.side))
    rep = verify_sparse(moved)
    assert rep.gamma_actual > 0
    with pytest.raises(ValueError, match="distance constraint"):
        reflect_family(S, G, lambda Q: Q.translate(100 * Q.side), dist_factor=4)
    with pytest.raises(ValueError, match="size constraint"):
        reflect_family(S, G, lambda Q: Cube(Q.corner, Q.side / 8))

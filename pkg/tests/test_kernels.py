import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicomm.kernels import (KernelSingularity, ModulusOfContinuity, NoWitnessFound, adjoint_kernel,
                            bootstrap_cubes, calibrate_A, custom, eval_kernel, kernel_from_config,
                            lebesgue_modulus, probe_nondegeneracy, regularity_ratio, riesz, rough,
                            swap_inputs, verify_regularity, verify_size)
from bicomm.lattice import Cube, DyadicGrid

R1 = riesz(1)
ONE = rough(lambda p: np.ones(p.shape[:-1]), (1.0, 0.0))


def test_riesz_values():
    assert eval_kernel(R1, 1.0, 0.0, 0.0) == 0.125
    assert eval_kernel(R1, 0.0, 1.0, 1.0) == -0.125
    R2 = riesz(2, component=2)
    x, y, z = np.array([0.0, 3.0]), np.array([0.0, 0.0]), np.array([4.0, 3.0])
    assert eval_kernel(R2, x, y, z) == pytest.approx(3.0 / (3 + 4) ** 5)


def test_rough_values():
    assert eval_kernel(ONE, 1.0, 0.0, 1.0) == 1.0
    assert eval_kernel(ONE, 2.0, 0.0, 0.0) == pytest.approx(1 / 8)  # |(2, 2)|^-2


def test_singularity():
    with pytest.raises(KernelSingularity, match="kernel singularity"):
        eval_kernel(R1, 0.5, 0.5, 0.5)


def triples(seed, n=100, d=1):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((n, d)) for _ in range(3))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 2.0, 8.0]), st.sampled_from([1, 2]))
def test_homogeneity_exact(seed, lam, d):
    # powers of two scale every operation exactly
    x, y, z = triples(seed, 50, d)
    for K in (riesz(d), rough(lambda p: p[..., 0] + 2, (1.0,) + (0.0,) * (2 * d - 1), d=d)):
        assert np.array_equal(K(lam * x, lam * y, lam * z), lam ** (-2 * d) * K(x, y, z))


def test_adjoints():
    assert adjoint_kernel(R1, 1)(0.0, 1.0, 0.0) == R1(1.0, 0.0, 0.0) == 0.125
    x, y, z = triples(1)
    assert np.array_equal(adjoint_kernel(R1, 2)(x, y, z), R1(z, y, x))
    for s in (1, 2):
        assert np.array_equal(adjoint_kernel(adjoint_kernel(R1, s), s)(x, y, z), R1(x, y, z))
    # transpositions satisfy the braid relation s1 s2 s1 = s2 s1 s2
    a = adjoint_kernel(adjoint_kernel(adjoint_kernel(R1, 1), 2), 1)
    b = adjoint_kernel(adjoint_kernel(adjoint_kernel(R1, 2), 1), 2)
    assert np.array_equal(a(x, y, z), b(x, y, z))
    assert np.array_equal(swap_inputs(R1)(x, y, z), R1(x, z, y))


def test_adjoint_at_bootstrap_anchors():
    tri = bootstrap_cubes(R1, Cube((0.0,), 1.0), 32)
    K1 = adjoint_kernel(R1, 1)
    assert abs(K1(tri.c1, tri.c0, tri.c2)) == abs(R1(tri.c0, tri.c1, tri.c2))


def test_verify_size():
    assert verify_size(R1, triples=([1.0], [0.0], [0.0])).worst_ratio == 0.5
    rep = verify_size(R1, 5000, rng=3)
    assert rep.worst_ratio <= 1.0 + 1e-12 and rep.ok
    rep = verify_size(riesz(2), 2000, rng=4)
    assert rep.worst_ratio <= 1.0 + 1e-12
    # the rough ratio for constant Omega is (|u|+|v|)^2 / |(u,v)|^2, between 1 and 2
    assert verify_size(ONE, triples=([1.0], [0.0], [1.0])).worst_ratio == 1.0
    rep = verify_size(ONE, 2000, rng=5)
    assert 1.0 <= rep.worst_ratio <= 2.0 + 1e-12 and rep.ok


def test_verify_regularity():
    r, valid = regularity_ratio(R1, [[1.0]], [[1.0]], [[0.0]], [[0.3]])
    assert valid[0] and r[0] == 0.0
    a = verify_regularity(R1, 1000, rng=0).worst_modulus_ratio
    b = verify_regularity(R1, 10000, rng=1).worst_modulus_ratio
    assert np.isfinite(a) and abs(b / a - 1) <= 0.2
    x, y, z = triples(9, 200)
    xp = x + 0.1 * np.abs(x - y)
    r1, v1 = regularity_ratio(R1, x, xp, y, z)
    r2, v2 = regularity_ratio(R1, 2 * x, 2 * xp, 2 * y, 2 * z)
    assert np.array_equal(v1, v2)
    assert np.allclose(r1[v1], r2[v2], rtol=1e-12, atol=0)


def test_verify_regularity_skips():
    far = (np.array([[0.0]]), np.array([[10.0]]), np.array([[1.0]]), np.array([[1.0]]))
    rep = verify_regularity(R1, samples=far)
    assert rep.skipped == 1 and rep.samples == 0 and rep.worst_modulus_ratio == 0.0


def test_modulus():
    w = ModulusOfContinuity("power", 0.5)
    assert w(0.25) == 0.5 and w.dini_integral == 2.0
    t = ModulusOfContinuity("tabulated", table=((0, 0.5, 1), (0, 0.5, 1)))
    assert t.dini_integral == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(ValueError):
        ModulusOfContinuity("power", 2.0)


def test_probe_riesz():
    w = probe_nondegeneracy(R1, 0.0, 1.0)
    assert w.x[0] == 2.0 and w.z[0] == 0.0 and w.value == 2 / 4**3
    for r in (0.25, 0.5, 2.0, 8.0):
        assert probe_nondegeneracy(R1, 0.0, r).value * r**2 == w.value


def test_probe_rough_placement():
    A = 32.0
    tri = bootstrap_cubes(ONE, Cube((0.0,), 1.0), A)
    rho = A * 1.0
    assert abs(ONE(tri.c0, tri.c1, tri.c2)) == pytest.approx(rho ** (-2))


def test_probe_custom_strongly_nondegenerate():
    # a strongly non-degenerate kernel written out by hand: found through the z = y reduction
    K = custom(lambda x, y, z: (x[..., 0] - y[..., 0]) / (np.abs(x[..., 0] - y[..., 0])
                                                          + np.abs(x[..., 0] - z[..., 0])) ** 3)
    for r in (0.1, 1.0, 10.0):
        w = probe_nondegeneracy(K, 0.3, r)
        assert abs(w.value) >= 1e-3 * r**-2
        assert abs(w.x[0] - 0.3) > r and w.z[0] == 0.3


def test_probe_custom_failure():
    K = custom(lambda x, y, z: 0.0 * x[..., 0])
    with pytest.raises(NoWitnessFound, match="no witness found"):
        probe_nondegeneracy(K, 0.0, 1.0)


def test_bootstrap_riesz_example():
    Q1 = Cube((0.0,), 1.0)
    tri = bootstrap_cubes(R1, Q1, 32)
    assert tri.c1[0] == 0.5 and tri.c0[0] == 16.5 and tri.c2[0] == 0.5
    assert tri.diagnostics["kernel_at_anchors"] == pytest.approx(1 / 2048)
    assert tri.Q0.side == tri.Q1.side == tri.Q2.side
    assert 16 <= tri.max_anchor_distance() <= 64
    for Q, c in zip(tri.cubes, tri.anchors):
        assert Q.contains_points(c)


def test_bootstrap_oscillation_decays():
    Q1 = Cube((0.0,), 1.0)
    ratios = []
    for A in (8, 16, 32, 64):
        dg = bootstrap_cubes(R1, Q1, A).diagnostics
        ratios.append(dg["oscillation_integral"] / dg["absolute_integral"])
    slope = np.polyfit(np.log([8, 16, 32, 64]), np.log(ratios), 1)[0]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert slope == pytest.approx(-1.0, abs=0.25)


def test_bootstrap_with_grids():
    G0 = DyadicGrid(1, origin_shift=(1 / 3,), label="D0")
    G2 = DyadicGrid(1, origin_shift=(-1 / 3,), label="D2")
    Q1 = Cube((0.0,), 0.25)
    tri = bootstrap_cubes(rough(lambda p: np.ones(p.shape[:-1]), (1.0, 1.0)), Q1, 16, grids=(G0, G2))
    assert G0.contains_cube(tri.Q0) and G2.contains_cube(tri.Q2)
    assert tri.Q0.contains_points(tri.c0) and tri.Q2.contains_points(tri.c2)
    assert tri.Q0.side >= Q1.side / 4 and tri.Q2.side >= Q1.side / 4


def test_calibrate_A():
    tri = calibrate_A(R1, Cube((0.0,), 1.0))
    dg = tri.diagnostics
    assert dg["calibrated"] and dg["oscillation_integral"] <= 0.25 * dg["absolute_integral"]
    assert dg["sign_ratio"] >= 0.5


def test_rough_lebesgue_modulus():
    step = rough(lambda p: (p[..., 0] > 0).astype(float), (1.0, 0.0))
    assert lebesgue_modulus(step, 32, rng=0) == 0.0
    wiggle = rough(lambda p: p[..., 1], (1.0, 0.0))
    a, b = lebesgue_modulus(wiggle, 16, rng=0), lebesgue_modulus(wiggle, 64, rng=0)
    assert b < a


def test_kernel_from_config(tmp_path):
    K = kernel_from_config({"variant": "riesz", "d": 2, "component": 2})
    assert K.d == 2 and K.component == 2
    u = np.linspace(-4, 4, 81)
    U, V = np.meshgrid(u, u, indexing="ij")
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.nan_to_num(U / (np.abs(U) + np.abs(V)) ** 3)
    np.savez(tmp_path / "k.npz", u=u, v=u, values=vals)
    doc = json.loads(json.dumps({"variant": "custom", "custom": {"table": "k.npz"}}))
    T = kernel_from_config(doc, base_dir=tmp_path)
    assert T(1.0, 0.0, 0.0) == pytest.approx(0.125)
    with pytest.raises(ValueError):
        kernel_from_config({"variant": "nope"})

"""Kernels, non-degeneracy witnesses and separated cube triples.

Run: python demos/01_kernels_and_triples.py
"""

import numpy as np

from bicomm import Cube, bootstrap_cubes, calibrate_A, probe_nondegeneracy, riesz, rough, verify_size

K = riesz(1)

# The Riesz-type kernel (x - y) / (|x - y| + |x - z|)^3 obeys the size bound with C_K = 1.
size = verify_size(K, 5000, rng=0)
print(f"size bound: worst |K| (|x-y|+|x-z|)^2 = {size.worst_ratio:.4f} over {size.samples} samples")

# Non-degeneracy: at every scale r there is a separated (x, z) where |K| ~ r^-2.
for r in (0.25, 1.0, 4.0):
    w = probe_nondegeneracy(K, 0.0, r)
    print(f"r = {r:5}: witness x = {w.x[0]:6.2f}, z = {w.z[0]:5.2f}, |K| r^2 = {abs(w.value) * r**2:.4f}")

# The bootstrap places Q0 and Q2 at distance ~ A diam(Q1) so the kernel barely varies on the triple.
Q1 = Cube((0.0,), 1.0)
for A in (8, 16, 32, 64):
    dg = bootstrap_cubes(K, Q1, A).diagnostics
    print(f"A = {A:3}: K(c0,c1,c2) = {dg['kernel_at_anchors']:.3e}, "
          f"oscillation / absolute integral = {dg['oscillation_integral'] / dg['absolute_integral']:.4f}")

# A rough kernel Omega(u/|u|)/|u|^2 is placed along its non-degenerate direction theta.
Omega = rough(lambda p: 1.0 + 0.5 * np.tanh(p[..., 0] - p[..., 1]), (0.8, 0.6))
tri = calibrate_A(Omega, Q1)
print(f"rough kernel: calibrated A = {tri.A:g}, sign ratio {tri.diagnostics['sign_ratio']:.3f}")

"""Bilinear Calderon-Zygmund kernels, axiom checks, non-degeneracy probes and the cube bootstrap.

Points are arrays whose last axis has length ``d``; in one dimension plain
scalars and 1-d arrays are accepted and treated as points of the line.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import RegularGridInterpolator

from .lattice import Cube
from .dyadic import largest_dyadic_subcube

__all__ = [
    "ModulusOfContinuity",
    "KernelSpec",
    "CubeTriple",
    "KernelSingularity",
    "NoWitnessFound",
    "riesz",
    "rough",
    "custom",
    "eval_kernel",
    "adjoint_kernel",
    "swap_inputs",
    "verify_size",
    "verify_regularity",
    "regularity_ratio",
    "probe_nondegeneracy",
    "bootstrap_cubes",
    "calibrate_A",
    "lebesgue_modulus",
    "kernel_from_config",
]


class KernelSingularity(ValueError):
    pass


class NoWitnessFound(RuntimeError):
    def __init__(self, msg, best):
        super().__init__(f"{msg} (scanned maximum {best:.6g})")
        self.best = best


@dataclass(frozen=True)
class ModulusOfContinuity:
    """Increasing, subadditive ``omega`` with ``omega(0) = 0``."""

    form: str = "linear"
    delta: float = 1.0
    table: tuple | None = None  # ((t...), (omega...)) for the tabulated form

    def __post_init__(self):
        if self.form not in ("power", "linear", "tabulated"):
            raise ValueError(f"unknown modulus form {self.form!r}")
        if self.form == "power" and not 0 < self.delta <= 1:
            raise ValueError("power modulus needs 0 < delta <= 1")
        if self.form == "tabulated":
            if self.table is None:
                raise ValueError("tabulated modulus needs a table")
            t, w = (np.asarray(a, dtype=float) for a in self.table)
            if t[0] != 0 or w[0] != 0 or np.any(np.diff(t) <= 0) or np.any(np.diff(w) < 0):
                raise ValueError("table must start at (0, 0) and be increasing")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.form == "linear":
            return t
        if self.form == "power":
            return t**self.delta
        ts, ws = (np.asarray(a, dtype=float) for a in self.table)
        return np.interp(t, ts, ws, right=ws[-1])

    @property
    def dini_integral(self) -> float:
        if self.form == "linear":
            return 1.0
        if self.form == "power":
            return 1.0 / self.delta
        val, _ = integrate.quad(lambda t: float(self(t)) / t, 0.0, 1.0, limit=200)
        return float(val)


_PERMS = {1: (1, 0, 2), 2: (2, 1, 0)}


@dataclass(frozen=True)
class KernelSpec:
    """A bilinear kernel ``K(x, y, z)`` on ``R^d``.

    ``variant`` is ``"riesz"`` (with 1-based ``component``), ``"rough"``
    (with ``Omega`` on the unit sphere of ``R^{2d}`` and a Lebesgue point
    ``theta``) or ``"custom"`` (``evaluator(x, y, z)``).  ``perm`` records
    argument exchanges, so adjoints are the same kernel read through a
    permutation.
    """

    variant: str
    d: int = 1
    component: int = 1
    C_K: float = 1.0
    omega: ModulusOfContinuity = field(default_factory=ModulusOfContinuity)
    Omega: Callable | None = field(default=None, compare=False)
    theta: tuple | None = None
    evaluator: Callable | None = field(default=None, compare=False)
    perm: tuple = (0, 1, 2)
    name: str = ""

    def __post_init__(self):
        if self.variant not in ("riesz", "rough", "custom"):
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        if self.variant == "riesz" and not 1 <= self.component <= self.d:
            raise ValueError("Riesz component must lie in 1..d")
        if self.variant == "rough":
            if self.Omega is None or self.theta is None:
                raise ValueError("rough kernels need Omega and a Lebesgue point theta")
            th = np.asarray(self.theta, dtype=float)
            if th.shape != (2 * self.d,):
                raise ValueError("theta must be a vector in R^{2d}")
            object.__setattr__(self, "theta", tuple(th / np.linalg.norm(th)))
        if self.variant == "custom" and self.evaluator is None:
            raise ValueError("custom kernels need an evaluator")

    def __call__(self, x, y, z):
        return eval_kernel(self, x, y, z)

    @property
    def base(self) -> "KernelSpec":
        return replace(self, perm=(0, 1, 2))


def riesz(d: int = 1, component: int = 1) -> KernelSpec:
    """``(x_i - y_i) / (|x - y| + |x - z|)^{2d + 1}``."""
    return KernelSpec("riesz", d=d, component=component, C_K=1.0,
                      omega=ModulusOfContinuity("linear"), name=f"riesz{component}")


def rough(Omega: Callable, theta, d: int = 1, C_K: float | None = None,
          omega: ModulusOfContinuity | None = None, sup_omega: float = 1.0) -> KernelSpec:
    """``Omega(u / |u|) / |u|^{2d}`` with ``u = (x - y, x - z)``."""
    if C_K is None:
        C_K = 2.0**d * sup_omega  # |u| >= (|x-y| + |x-z|) / sqrt 2
    return KernelSpec("rough", d=d, C_K=C_K, omega=omega or ModulusOfContinuity("linear"),
                      Omega=Omega, theta=tuple(theta), name="rough")


def custom(evaluator: Callable, d: int = 1, C_K: float = 1.0,
           omega: ModulusOfContinuity | None = None, name: str = "custom") -> KernelSpec:
    return KernelSpec("custom", d=d, C_K=C_K, omega=omega or ModulusOfContinuity("linear"),
                      evaluator=evaluator, name=name)


def _pts(a, d):
    a = np.asarray(a, dtype=float)
    if d == 1 and (a.ndim == 0 or a.shape[-1] != 1):
        a = a[..., None]
    return a


def _raw(K: KernelSpec, x, y, z) -> np.ndarray:
    """Base-kernel values, NaN/inf on the diagonal; no permutation applied."""
    d = K.d
    if K.variant == "custom":
        return np.asarray(K.evaluator(x, y, z), dtype=float)
    u = x - y
    v = x - z
    if K.variant == "riesz":
        nu = np.sqrt(np.sum(u * u, axis=-1))
        nv = np.sqrt(np.sum(v * v, axis=-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            return u[..., K.component - 1] / (nu + nv) ** (2 * d + 1)
    w = np.concatenate(np.broadcast_arrays(u, v), axis=-1)
    nw = np.sqrt(np.sum(w * w, axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.asarray(K.Omega(w / nw[..., None]), dtype=float) / nw ** (2 * d)


def kernel_values(K: KernelSpec, x, y, z) -> np.ndarray:
    """Vectorized evaluation without the diagonal check (points already shaped (..., d))."""
    s = (x, y, z)
    p = K.perm
    return _raw(K, s[p[0]], s[p[1]], s[p[2]])


def eval_kernel(K: KernelSpec, x, y, z):
    """Closed-form kernel value; raises ``KernelSingularity`` on ``x = y = z``."""
    d = K.d
    x, y, z = (_pts(a, d) for a in (x, y, z))
    x, y, z = np.broadcast_arrays(x, y, z)
    diag = np.all(x == y, axis=-1) & np.all(x == z, axis=-1)
    if np.any(diag):
        raise KernelSingularity("kernel singularity: x = y = z")
    out = kernel_values(K, x, y, z)
    return float(out) if out.ndim == 0 else out


def adjoint_kernel(K: KernelSpec, slot: int) -> KernelSpec:
    """Exchange ``x`` with the ``slot``-th input: ``K^{1*}(x,y,z) = K(y,x,z)``, ``K^{2*}(x,y,z) = K(z,y,x)``."""
    if slot not in _PERMS:
        raise ValueError("slot must be 1 or 2")
    q = _PERMS[slot]
    new = tuple(q[K.perm[j]] for j in range(3))
    return replace(K, perm=new)


def swap_inputs(K: KernelSpec) -> KernelSpec:
    """``K'(x, y, z) = K(x, z, y)``; turns the second slot into the first."""
    q = (0, 2, 1)
    return replace(K, perm=tuple(q[K.perm[j]] for j in range(3)))


# axiom checks

def _random_triples(rng, n, d, scale_range=(1e-3, 1e3)):
    y = rng.uniform(-1, 1, size=(n, d))
    lo, hi = np.log(scale_range[0]), np.log(scale_range[1])

    def offsets():
        v = rng.standard_normal((n, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return v * np.exp(rng.uniform(lo, hi, size=(n, 1)))

    x = y + offsets()
    z = x - offsets()
    # a fraction of degenerate-looking placements (z = y, z = x) probes the edges
    k = n // 8
    z[:k] = y[:k]
    z[k:2 * k] = x[k:2 * k]
    return x, y, z


@dataclass(frozen=True)
class SizeReport:
    worst_ratio: float
    samples: int
    C_K: float

    @property
    def ok(self) -> bool:
        return self.worst_ratio <= self.C_K * (1 + 1e-12)


def verify_size(K: KernelSpec, sample_count: int = 1000, rng=None, triples=None) -> SizeReport:
    """Largest sampled ``|K(x,y,z)| (|x-y| + |x-z|)^{2d}``; a lower estimate of the size constant."""
    if sample_count < 1:
        raise ValueError("sample_count must be positive")
    rng = np.random.default_rng(rng)
    x, y, z = triples if triples is not None else _random_triples(rng, sample_count, K.d)
    x, y, z = (_pts(a, K.d) for a in (x, y, z))
    dist = np.linalg.norm(x - y, axis=-1) + np.linalg.norm(x - z, axis=-1)
    ok = dist > 0
    r = np.abs(kernel_values(K, x, y, z)[ok]) * dist[ok] ** (2 * K.d)
    return SizeReport(float(r.max(initial=0.0)), int(ok.sum()), K.C_K)


def regularity_ratio(G: KernelSpec, x, xp, y, z):
    """``|G(x,y,z) - G(x',y,z)| (|x-y| + |x-z|)^{2d} / omega(|x-x'| / (|x-y| + |x-z|))`` and a validity mask."""
    d = G.d
    x, xp, y, z = (_pts(a, d) for a in (x, xp, y, z))
    dxy = np.linalg.norm(x - y, axis=-1)
    dxz = np.linalg.norm(x - z, axis=-1)
    dx = np.linalg.norm(x - xp, axis=-1)
    valid = (dx <= 0.5 * np.maximum(dxy, dxz)) & (np.maximum(dxy, dxz) > 0)
    s = dxy + dxz
    num = np.abs(kernel_values(G, x, y, z) - kernel_values(G, xp, y, z)) * s ** (2 * d)
    den = G.omega(np.where(s > 0, dx / np.where(s > 0, s, 1.0), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(num == 0, 0.0, num / den)
    return np.where(valid, ratio, np.nan), valid


@dataclass(frozen=True)
class RegularityReport:
    worst_modulus_ratio: float
    samples: int
    skipped: int
    per_kernel: dict


def verify_regularity(K: KernelSpec, sample_count: int = 1000, rng=None, samples=None) -> RegularityReport:
    """Worst sampled regularity ratio over ``K`` and both adjoints.

    Explicit ``samples = (x, x', y, z)`` that violate
    ``|x - x'| <= max(|x-y|, |x-z|) / 2`` are skipped and counted.
    """
    rng = np.random.default_rng(rng)
    if samples is None:
        x, y, z = _random_triples(rng, sample_count, K.d)
        rad = 0.5 * np.maximum(np.linalg.norm(x - y, axis=1), np.linalg.norm(x - z, axis=1))
        v = rng.standard_normal(x.shape)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        xp = x + v * (rad * rng.uniform(0, 1, size=rad.shape) ** 2)[:, None]
    else:
        x, xp, y, z = samples
    worst, per, skipped, used = 0.0, {}, 0, 0
    for name, G in (("K", K), ("K1*", adjoint_kernel(K, 1)), ("K2*", adjoint_kernel(K, 2))):
        r, valid = regularity_ratio(G, x, xp, y, z)
        m = float(np.nanmax(r)) if valid.any() else 0.0
        per[name] = m
        worst = max(worst, m)
        skipped = int((~valid).sum())
        used = int(valid.sum())
    return RegularityReport(worst, used, skipped, per)


# non-degeneracy

@dataclass(frozen=True)
class Witness:
    x: np.ndarray
    z: np.ndarray
    value: float

    def __iter__(self):
        return iter((self.x, self.z, self.value))


def _sphere_lattice(d2, k):
    """Points of the unit sphere in R^{d2} from an integer lattice of radius k."""
    g = np.arange(-k, k + 1)
    mesh = np.stack(np.meshgrid(*([g] * d2), indexing="ij"), axis=-1).reshape(-1, d2)
    mesh = mesh[np.any(mesh != 0, axis=1)].astype(float)
    return mesh / np.linalg.norm(mesh, axis=1, keepdims=True)


def probe_nondegeneracy(K: KernelSpec, y, r: float, slot: int = 1, c: float = 1e-3,
                        resolution: int = 6) -> Witness:
    """Points ``x, z`` with max pairwise distance above ``r`` and ``|K(x,y,z)| >= c r^{-2d}``.

    With ``slot = 2`` the given point plays the role of ``z`` and the
    returned pair is ``(x, y)``.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    d = K.d
    y = _pts(y, d).reshape(d)
    G = swap_inputs(K) if slot == 2 else K
    base = G.base
    if base.variant == "riesz" and K.perm == (0, 1, 2):
        e = np.zeros(d)
        e[K.component - 1] = 1.0
        x = y + 2 * r * e
        z = y.copy()
        return Witness(x, z, float(abs(eval_kernel(G, x, y, z))))
    if base.variant == "rough" and K.perm == (0, 1, 2):
        th = np.asarray(K.theta)
        t0, t2 = th[:d], th[d:]
        if slot == 2:
            t0, t2 = t2, t0
        rho = 2 * r / max(np.linalg.norm(t0), np.linalg.norm(t2), np.linalg.norm(t0 - t2))
        x = y + rho * t0
        z = x - rho * t2
        return Witness(x, z, float(abs(eval_kernel(G, x, y, z))))
    # lattice search, first with z = y, then over (x - y, x - z) directions
    need = c * r ** (-2 * d)
    radii = np.linspace(1.0, 3.0, 9) * r * 1.0001
    best = (0.0, None, None)
    dirs = _sphere_lattice(d, resolution) if d > 1 else np.array([[1.0], [-1.0]])
    for rad in radii:
        xs = y + rad * dirs
        vals = np.abs(kernel_values(G, xs, y[None, :], y[None, :]))
        i = int(np.nanargmax(vals))
        if vals[i] > best[0]:
            best = (float(vals[i]), xs[i], y.copy())
    if best[0] >= need:
        return Witness(best[1], best[2], best[0])
    dirs2 = _sphere_lattice(2 * d, resolution)
    for rad in radii:
        u = rad * dirs2
        xs = y + u[:, :d]
        zs = xs - u[:, d:]
        sep = np.maximum.reduce([np.linalg.norm(u[:, :d], axis=1), np.linalg.norm(u[:, d:], axis=1),
                                 np.linalg.norm(u[:, :d] - u[:, d:], axis=1)])
        vals = np.where(sep > r, np.abs(kernel_values(G, xs, y[None, :], zs)), 0.0)
        i = int(np.nanargmax(vals))
        if vals[i] > best[0]:
            best = (float(vals[i]), xs[i], zs[i])
    if best[0] >= need:
        return Witness(best[1], best[2], best[0])
    raise NoWitnessFound("no witness found", best[0] * r ** (2 * d))


# cube bootstrap

@dataclass
class CubeTriple:
    """Cubes ``Q0, Q1, Q2`` (by kernel argument) with declared anchors and diagnostics."""

    Q0: Cube
    Q1: Cube
    Q2: Cube
    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    A: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def cubes(self):
        return (self.Q0, self.Q1, self.Q2)

    @property
    def anchors(self):
        return (self.c0, self.c1, self.c2)

    def max_anchor_distance(self) -> float:
        c = self.anchors
        return float(max(np.linalg.norm(c[i] - c[j]) for i in range(3) for j in range(i)))

    def to_record(self) -> dict:
        return {
            "Q0": {"corner": list(self.Q0.corner), "side": self.Q0.side},
            "Q1": {"corner": list(self.Q1.corner), "side": self.Q1.side},
            "Q2": {"corner": list(self.Q2.corner), "side": self.Q2.side},
            "anchors": [list(map(float, c)) for c in self.anchors],
            "A": self.A,
            "diagnostics": {k: v for k, v in self.diagnostics.items() if np.isscalar(v)},
        }


def _cell_midpoints(Q: Cube, n: int) -> np.ndarray:
    step = Q.side / n
    axes = [a + (np.arange(n) + 0.5) * step for a in Q.corner]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, Q.d)


def _snap(Q: Cube, h: float | None, ref) -> Cube:
    if h is None:
        return Q
    ref = np.asarray(ref, dtype=float)
    corner = ref + np.round((np.asarray(Q.corner) - ref) / h) * h
    return Cube(tuple(corner), Q.side)


def _pair_integrals(K, cubes, free, anchor_val, n_free, n_quad):
    """For points of the cube ``free`` (an argument slot), integrate over the other two cubes."""
    d = K.d
    others = [i for i in range(3) if i != free]
    P = _cell_midpoints(cubes[free], n_free)
    U = _cell_midpoints(cubes[others[0]], n_quad)
    V = _cell_midpoints(cubes[others[1]], n_quad)
    w = (cubes[others[0]].side / n_quad) ** d * (cubes[others[1]].side / n_quad) ** d
    osc, ab, sg = [], [], []
    for p in P:
        args = [None, None, None]
        args[free] = p[None, None, :]
        args[others[0]] = U[:, None, :]
        args[others[1]] = V[None, :, :]
        vals = kernel_values(K, *args)
        if not np.all(np.isfinite(vals)):
            raise ValueError("quadrature hit the kernel singularity; cubes overlap on the diagonal")
        osc.append(np.abs(vals - anchor_val).sum() * w)
        ab.append(np.abs(vals).sum() * w)
        sg.append(abs(vals.sum()) * w)
    return np.array(osc), np.array(ab), np.array(sg)


def bootstrap_cubes(K: KernelSpec, Q1: Cube, A: float = 32.0, grids=None, h: float | None = None,
                    n_quad: int = 16, n_free: int = 8, diagnostics: bool = True) -> CubeTriple:
    """Separated cubes around ``Q1`` on which ``K`` has a definite sign and size ``A^{-2d} |Q1|^{-2}``.

    Riesz kernels place ``c0 = c1 + (A diam(Q1) / 2) e_i`` and ``c2 = c1``;
    rough kernels place ``c0 - c1 = A diam(Q1) theta_0`` and
    ``c0 - c2 = A diam(Q1) theta_2``; custom kernels use the witness of
    :func:`probe_nondegeneracy` at radius ``A diam(Q1) / 4``.  Without
    ``grids`` the outer cubes are translates of ``Q1`` (snapped to the
    lattice of spacing ``h`` when given); with ``grids = (G0, G2)`` each is
    replaced by the largest cube of its grid inside the translate that still
    contains the anchor.
    """
    if A < 3:
        raise ValueError("A must be at least 3")
    if n_quad < 2 or n_free < 1:
        raise ValueError("quadrature under-resolution: need n_quad >= 2")
    d = K.d
    c1 = Q1.center
    diam = Q1.diameter
    base = K.base
    if base.variant == "riesz" and K.perm == (0, 1, 2):
        w = probe_nondegeneracy(K, c1, A * diam / 4)
        c0, c2 = w.x, w.z
    elif base.variant == "rough" and K.perm == (0, 1, 2):
        th = np.asarray(K.theta)
        rho = A * diam
        c0 = c1 + rho * th[:d]
        c2 = c0 - rho * th[d:]
    else:
        w = probe_nondegeneracy(K, c1, A * diam / 4)
        c0, c2 = w.x, w.z
    T0 = _snap(Q1.translate(c0 - c1), h, Q1.corner)
    T2 = _snap(Q1.translate(c2 - c1), h, Q1.corner)
    if grids is not None:
        G0, G2 = grids
        T0 = largest_dyadic_subcube(G0, T0, containing=c0)
        T2 = largest_dyadic_subcube(G2, T2, containing=c2)
    tri = CubeTriple(T0, Q1, T2, np.asarray(c0, float), np.asarray(c1, float), np.asarray(c2, float), float(A))
    if not diagnostics:
        return tri
    kc = float(eval_kernel(K, tri.c0, tri.c1, tri.c2))
    cubes = tri.cubes
    osc, ab, sg = _pair_integrals(K, cubes, 1, kc, n_free, n_quad)
    diag = {
        "kernel_at_anchors": kc,
        "normalized_anchor_value": abs(kc) * A ** (2 * d) * Q1.volume**2,
        "oscillation_integral": float(osc.max()),
        "absolute_integral": float(ab.min()),
        "signed_integral": float(sg.min()),
        "sign_ratio": float((sg / ab).min()),
        "anchor_times_volume": abs(kc) * T0.volume * T2.volume,
        "max_anchor_distance": tri.max_anchor_distance(),
        "side_ratios": (T0.side / Q1.side, T2.side / Q1.side),
        "n_quad": n_quad,
    }
    for free in (0, 2):
        o, a, s = _pair_integrals(K, cubes, free, kc, n_free, n_quad)
        diag[f"oscillation_integral_free{free}"] = float(o.max())
        diag[f"absolute_integral_free{free}"] = float(a.min())
        diag[f"sign_ratio_free{free}"] = float((s / a).min())
    tri.diagnostics = diag
    return tri


def calibrate_A(K: KernelSpec, Q1: Cube, A0: float = 8.0, A_max: float = 4096.0, factor: float = 0.25,
                **kw) -> CubeTriple:
    """Double ``A`` until the oscillation integral is at most ``factor`` times the absolute integral."""
    A = A0
    while True:
        tri = bootstrap_cubes(K, Q1, A=A, **kw)
        dg = tri.diagnostics
        if dg["oscillation_integral"] <= factor * dg["absolute_integral"]:
            tri.diagnostics["calibrated"] = True
            return tri
        if A * 2 > A_max:
            tri.diagnostics["calibrated"] = False
            return tri
        A *= 2


def lebesgue_modulus(K: KernelSpec, A: float, samples: int = 4000, rng=None) -> float:
    """Monte Carlo mean of ``|Omega((theta + u) / |theta + u|) - Omega(theta)|`` over ``u`` in the ball of radius ``2 / A``."""
    if K.variant != "rough":
        raise ValueError("only rough kernels carry a Lebesgue point")
    rng = np.random.default_rng(rng)
    n = 2 * K.d
    th = np.asarray(K.theta)
    g = rng.standard_normal((samples, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = (2.0 / A) * rng.uniform(0, 1, size=(samples, 1)) ** (1.0 / n)
    p = th + g * rad
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    vals = np.asarray(K.Omega(p), dtype=float)
    ref = float(np.asarray(K.Omega(th[None, :]), dtype=float).reshape(-1)[0])
    return float(np.mean(np.abs(vals - ref)))


def _table_kernel(path, d):
    data = np.load(path)
    if d != 1:
        raise ValueError("tabulated kernels are only supported for d = 1")
    u, v, vals = data["u"], data["v"], data["values"]
    interp = RegularGridInterpolator((u, v), vals, bounds_error=False, fill_value=0.0)

    def ev(x, y, z):
        a = np.broadcast_arrays(x[..., 0] - y[..., 0], x[..., 0] - z[..., 0])
        pts = np.stack(a, axis=-1)
        return interp(pts.reshape(-1, 2)).reshape(pts.shape[:-1])

    return ev


def kernel_from_config(doc: dict, base_dir=None) -> KernelSpec:
    """Kernel from ``{variant, d, component, omega: {form, delta}, custom: {table}}``."""
    from pathlib import Path

    variant = doc.get("variant", "riesz")
    d = int(doc.get("d", 1))
    om = doc.get("omega", {}) or {}
    omega = ModulusOfContinuity(om.get("form", "linear"), float(om.get("delta", 1.0)))
    if variant == "riesz":
        K = riesz(d, int(doc.get("component", 1)))
        return replace(K, omega=omega)
    if variant == "rough":
        name = doc.get("Omega", "one")
        funcs = {
            "one": lambda p: np.ones(p.shape[:-1]),
            "first": lambda p: p[..., 0],
            "sign_first": lambda p: np.sign(p[..., 0]),
        }
        if name not in funcs:
            raise ValueError(f"unknown Omega {name!r}")
        theta = doc.get("theta", [1.0] + [0.0] * (2 * d - 1))
        return rough(funcs[name], theta, d=d, omega=omega)
    if variant == "custom":
        cust = doc.get("custom", {}) or {}
        table = cust.get("table")
        if table is None:
            raise ValueError("custom kernels need custom.table")
        p = Path(table)
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        return custom(_table_kernel(p, d), d=d, C_K=float(doc.get("C_K", 1.0)), omega=omega,
                      name=f"table:{p.name}")
    raise ValueError(f"unknown kernel variant {variant!r}")

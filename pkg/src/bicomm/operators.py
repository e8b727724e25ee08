"""Midpoint quadrature for truncated bilinear operators, pairings and commutators.

A value at ``x`` is the double sum over lattice cells ``(y, z)`` of
``K(x, y, z) f(y) g(z) h^{2d}`` restricted to cells with
``max(|x - y|, |x - z|) > eps``.  The cost is ``O(N^{2d})`` kernel
evaluations per point (``N`` cells per axis), so one dimension with a few
hundred cells is the working range; two dimensions are supported at small
``N``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .budget import charge
from .dyadic import maximal_function
from .kernels import KernelSpec, custom, kernel_values
from .lattice import Cube, LatticeFunction, bounding_cube

__all__ = [
    "TruncationPolicy",
    "PairingValue",
    "apply_truncated",
    "pairing",
    "commutator",
    "commutator_pairing",
    "contract_kernel",
    "maximal_truncation",
    "fractional_integral",
    "support_points",
]

_CHUNK = 1 << 21  # tensor entries per batch


@dataclass(frozen=True)
class TruncationPolicy:
    """Drop cells with ``max(|x - y|, |x - z|) <= epsilon``; ``epsilon`` must be at least ``2h``."""

    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def check(self, h: float) -> None:
        if self.epsilon < 2 * h * (1 - 1e-12):
            raise ValueError(f"epsilon = {self.epsilon:g} is below 2h = {2 * h:g}")


@dataclass(frozen=True)
class PairingValue:
    value: float
    quadrature_cells: int
    policy: TruncationPolicy | None
    truncated: bool = False

    def __float__(self):
        return self.value


def support_points(f: LatticeFunction, keep_zeros: bool = False):
    """Cell midpoints ``(n, d)`` and values of the nonzero cells of ``f`` (row-major)."""
    pts = f.centers().reshape(-1, f.d)
    vals = f.samples.reshape(-1)
    if keep_zeros:
        return pts, vals
    nz = vals != 0
    return pts[nz], vals[nz]


def _check_lattices(*fs: LatticeFunction) -> float:
    h = fs[0].h
    for g in fs[1:]:
        if not fs[0].compatible(g):
            raise ValueError("incompatible lattices")
    return h


def _dist(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _tri_sum(K: KernelSpec, X, Y, fy, Z, gz, eps, mode="plain", bx=None, by=None, bz=None):
    """Per-point sums over ``(y, z)``; weights ``fy, gz`` already carry ``h^d``.

    ``mode`` is ``"plain"``, ``"comm1"`` (weight ``b(x) - b(y)``) or
    ``"comm2"`` (weight ``b(x) - b(z)``).
    """
    nx, ny, nz = len(X), len(Y), len(Z)
    out = np.zeros(nx)
    if nx == 0 or ny == 0 or nz == 0:
        return out
    step = max(1, _CHUNK // (ny * nz))
    for s in range(0, nx, step):
        Xc = X[s:s + step]
        charge(len(Xc) * ny * nz)
        D = kernel_values(K, Xc[:, None, None, :], Y[None, :, None, :], Z[None, None, :, :])
        keep = np.isfinite(D)
        if eps is not None:
            e = eps[s:s + step, None, None] if np.ndim(eps) else eps
            far = (_dist(Xc, Y)[:, :, None] > e) | (_dist(Xc, Z)[:, None, :] > e)
            keep &= far
        D = np.where(keep, D, 0.0)
        if mode == "plain":
            out[s:s + step] = (D @ gz) @ fy
        elif mode == "comm1":
            J = D @ gz
            out[s:s + step] = ((bx[s:s + step, None] - by[None, :]) * J) @ fy
        elif mode == "comm2":
            J = np.einsum("cyz,y->cz", D, fy)
            out[s:s + step] = ((bx[s:s + step, None] - bz[None, :]) * J) @ gz
        else:
            raise ValueError(mode)
    return out


def _eval_targets(eval_points, ref: LatticeFunction):
    """Normalize evaluation targets: (points, builder of the result)."""
    if eval_points is None:
        eval_points = ref.box
    if isinstance(eval_points, LatticeFunction):
        eval_points = eval_points.box
    if isinstance(eval_points, Cube):
        if not ref.is_aligned(eval_points):
            raise ValueError("incompatible lattices: evaluation cube is not aligned")
        frame = LatticeFunction.zeros(eval_points, ref.h)
        pts = frame.centers().reshape(-1, ref.d)
        return pts, lambda v: frame.with_samples(v.reshape(frame.shape))
    pts = np.asarray(eval_points, dtype=float)
    if ref.d == 1 and (pts.ndim <= 1):
        pts = pts.reshape(-1, 1)
    return pts.reshape(-1, ref.d), lambda v: v


def _cell_gap(X, C, h):
    """Distance from each point of ``X`` to the union of the closed cells centred at ``C``."""
    out = np.empty(len(X))
    step = max(1, _CHUNK // max(1, len(C)))
    for s in range(0, len(X), step):
        g = np.maximum(np.abs(X[s:s + step, None, :] - C[None, :, :]) - h / 2, 0.0)
        out[s:s + step] = np.sqrt(np.sum(g * g, axis=-1)).min(1)
    return out


def _epsilons(pol, h, X, Y, Z):
    """Truncation radius per evaluation point.

    An explicit policy applies everywhere.  Without one, a point lying at
    least one cell away from the support of either input sees a bounded
    kernel and is left untruncated; other points get the ``2h`` floor.
    """
    if pol is not None:
        pol.check(h)
        return pol.epsilon
    out = np.full(len(X), 2 * h)
    if len(X) and len(Y) and len(Z):
        tol = h * (1 - 1e-9)
        sep = (_cell_gap(X, Y, h) >= tol) | (_cell_gap(X, Z, h) >= tol)
        out[sep] = 0.0
    return out


def apply_truncated(K: KernelSpec, f: LatticeFunction, g: LatticeFunction,
                    pol: TruncationPolicy | None = None, eval_points=None):
    """``T_eps(f, g)`` at the evaluation targets.

    ``eval_points`` is a cube aligned with the lattice (result is a
    :class:`LatticeFunction` on it; default ``f.box``) or an array of points
    (result is an array).  Without ``pol`` only points within ``2h`` of both
    supports are truncated, at ``eps = 2h``.
    """
    h = _check_lattices(f, g)
    X, build = _eval_targets(eval_points, f)
    Y, fy = support_points(f)
    Z, gz = support_points(g)
    eps = _epsilons(pol, h, X, Y, Z)
    w = h**f.d
    return build(_tri_sum(K, X, Y, fy * w, Z, gz * w, eps))


def _separated(a: LatticeFunction, b: LatticeFunction, gap: float) -> bool:
    ma, mb = a.support_mask(), b.support_mask()
    if not ma.any() or not mb.any():
        return True
    ca = a.centers()[ma]
    cb = b.centers()[mb]
    lo_a, hi_a = ca.min(0) - a.h / 2, ca.max(0) + a.h / 2
    lo_b, hi_b = cb.min(0) - b.h / 2, cb.max(0) + b.h / 2
    g = np.maximum(0.0, np.maximum(lo_a - hi_b, lo_b - hi_a))
    return float(np.sqrt(np.sum(g**2))) >= gap * (1 - 1e-12)


def pairing(K: KernelSpec, f1: LatticeFunction, f2: LatticeFunction, f0: LatticeFunction,
            pol: TruncationPolicy | None = None) -> PairingValue:
    """``<T(f1, f2), f0>`` as a triple midpoint sum.

    The sum is always taken in the frame of the unpermuted kernel, with the
    functions reassigned to its arguments, so ``<T(f1,f2),f0>``,
    ``<T^{1*}(f0,f2),f1>`` and ``<T^{2*}(f1,f0),f2>`` share one summand set
    and one summation order.  When some pair of supports is at least ``2h``
    apart the kernel is bounded on the summands and the policy is ignored;
    otherwise cells are truncated in that frame.
    """
    h = _check_lattices(f0, f1, f2)
    fun = (f0, f1, f2)
    p = K.perm
    F0, F1, F2 = fun[p[0]], fun[p[1]], fun[p[2]]
    base = K.base
    sep = _separated(F0, F1, 2 * h) or _separated(F0, F2, 2 * h) or _separated(F1, F2, 2 * h)
    eps = None
    if not sep:
        pol = pol or TruncationPolicy(2 * h)
        pol.check(h)
        eps = pol.epsilon
    X, wx = support_points(F0)
    Y, fy = support_points(F1)
    Z, gz = support_points(F2)
    w = h**f0.d
    vals = _tri_sum(base, X, Y, fy * w, Z, gz * w, eps)
    val = float(vals @ (wx * w))
    return PairingValue(val, len(X) * len(Y) * len(Z), pol, truncated=not sep)


def _symbol_at(b, pts: np.ndarray, h: float) -> np.ndarray:
    """Values of the symbol at ``pts``.

    A callable symbol is evaluated exactly.  A lattice symbol is read as the
    piecewise-constant function of its cells (half-open), and its box must
    cover every point.
    """
    if callable(b) and not isinstance(b, LatticeFunction):
        return np.asarray(b(*pts.T), dtype=float).reshape(len(pts))
    if abs(b.h - h) > 1e-12 * h:
        raise ValueError("incompatible lattices: symbol spacing differs")
    rel = (pts - np.asarray(b.box.corner)) / b.h
    idx = np.floor(rel + 1e-9).astype(int)
    if np.any(idx < 0) or np.any(idx >= b.n):
        raise ValueError("symbol box too small: it must cover the evaluation points and the support")
    return b.samples[tuple(idx.T)]


def commutator(slot: int, b: LatticeFunction, f: LatticeFunction, g: LatticeFunction, K: KernelSpec,
               pol: TruncationPolicy | None = None, eval_points=None):
    """``[b, T]_slot(f, g)`` through its closed form.

    Slot 1 sums ``(b(x) - b(y)) K(x, y, z) f(y) g(z)``; slot 2 uses
    ``b(x) - b(z)``.  Every summand carries its own difference, so a constant
    symbol gives exact zeros.
    """
    if slot not in (1, 2):
        raise ValueError("slot must be 1 or 2")
    h = _check_lattices(f, g)
    X, build = _eval_targets(eval_points, f)
    Y, fy = support_points(f)
    Z, gz = support_points(g)
    eps = _epsilons(pol, h, X, Y, Z)
    bx = _symbol_at(b, X, h)
    w = h**f.d
    if slot == 1:
        by = _symbol_at(b, Y, h)
        v = _tri_sum(K, X, Y, fy * w, Z, gz * w, eps, "comm1", bx=bx, by=by)
    else:
        bz = _symbol_at(b, Z, h)
        v = _tri_sum(K, X, Y, fy * w, Z, gz * w, eps, "comm2", bx=bx, bz=bz)
    return build(v)


def commutator_pairing(slot: int, b: LatticeFunction, K: KernelSpec, f1: LatticeFunction,
                       f2: LatticeFunction, f0: LatticeFunction,
                       pol: TruncationPolicy | None = None) -> float:
    """``<[b, T]_slot(f1, f2), f0>`` summed over the support of ``f0``."""
    X, w0 = support_points(f0)
    vals = commutator(slot, b, f1, f2, K, pol, eval_points=X)
    return float(vals @ (w0 * f0.h**f0.d))


def contract_kernel(K: KernelSpec, X, Y, Z, gz, eps: float | None = None) -> np.ndarray:
    """``J[x, y] = sum_z K(x, y, z) g(z)`` for point sets ``X, Y, Z``; ``gz`` carries its cell volume."""
    X, Y, Z = (np.asarray(a, dtype=float) for a in (X, Y, Z))
    nx, ny, nz = len(X), len(Y), len(Z)
    J = np.zeros((nx, ny))
    step = max(1, _CHUNK // max(1, ny * nz))
    for s in range(0, nx, step):
        Xc = X[s:s + step]
        charge(len(Xc) * ny * nz)
        D = kernel_values(K, Xc[:, None, None, :], Y[None, :, None, :], Z[None, None, :, :])
        keep = np.isfinite(D)
        if eps is not None:
            keep &= (_dist(Xc, Y)[:, :, None] > eps) | (_dist(Xc, Z)[:, None, :] > eps)
        J[s:s + step] = np.where(keep, D, 0.0) @ gz
    return J


@dataclass
class MaximalTruncation:
    values: LatticeFunction
    cotlar_constant: float
    epsilons: tuple

    @property
    def samples(self):
        return self.values.samples


def maximal_truncation(K: KernelSpec, f: LatticeFunction, g: LatticeFunction, epsilon_list,
                       eval_points=None) -> MaximalTruncation:
    """``max_eps |T_eps(f, g)|`` over the list, with the measured Cotlar constant.

    The constant is the largest ratio ``T^*(f,g) / (|T_{eps_min}(f,g)| + Mf Mg)``
    over the evaluation lattice, ``M`` being the sampled maximal function.
    """
    eps = sorted(float(e) for e in epsilon_list)
    if list(epsilon_list) != eps:
        raise ValueError("epsilon_list must be sorted")
    h = _check_lattices(f, g)
    if eps[0] < 2 * h * (1 - 1e-12):
        raise ValueError("smallest epsilon is below 2h")
    eval_cube = eval_points if isinstance(eval_points, Cube) else f.box
    vals = [apply_truncated(K, f, g, TruncationPolicy(e), eval_cube) for e in eps]
    star = np.max([np.abs(v.samples) for v in vals], axis=0)
    box = bounding_cube([f.box, g.box, eval_cube], h, anchor=f.box)
    Mf = maximal_function(f.embed(box)).crop(eval_cube).samples
    Mg = maximal_function(g.embed(box)).crop(eval_cube).samples
    den = np.abs(vals[0].samples) + Mf * Mg
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(star > 0, star / den, 0.0)
    return MaximalTruncation(vals[0].with_samples(star), float(np.nanmax(ratio)), tuple(eps))


def _fractional_kernel(alpha: float, d: int) -> KernelSpec:
    def ev(x, y, z):
        a = np.sqrt(np.sum((x - y) ** 2, axis=-1))
        c = np.sqrt(np.sum((x - z) ** 2, axis=-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            return a**alpha / (a + c) ** (2 * d)

    return custom(ev, d=d, name=f"fractional{alpha:g}")


def fractional_integral(alpha: float, f: LatticeFunction, g: LatticeFunction, eval_points=None,
                        pol: TruncationPolicy | None = None):
    """``I^alpha(|f|, |g|)`` with kernel ``|x - y|^alpha / (|x - y| + |x - z|)^{2d}``."""
    d = f.d
    if not 0 < alpha < 2 * d:
        raise ValueError(f"alpha must lie in (0, {2 * d}), got {alpha}")
    return apply_truncated(_fractional_kernel(alpha, d), abs(f), abs(g), pol, eval_points)

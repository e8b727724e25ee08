"""Averages, martingale differences, the sampled maximal function and dyadic fitting."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .lattice import Cube, DyadicGrid, LatticeFunction

__all__ = [
    "average",
    "martingale_difference",
    "maximal_function",
    "largest_dyadic_subcube",
]


def _check_resolved(f: LatticeFunction, Q: Cube) -> None:
    if Q.side < f.h * (1 - 1e-12):
        raise ValueError(f"cube under-resolved: side {Q.side:g} < h = {f.h:g}")


def average(f: LatticeFunction, Q: Cube) -> float:
    """Midpoint-rule mean of ``f`` over ``Q``.

    Cells outside ``f.box`` count as zeros, so the mass is divided by the full
    cell count of ``Q``.
    """
    _check_resolved(f, Q)
    if f.is_aligned(Q):
        return float(f.values_on(Q).mean())
    # unaligned cube: the cells whose midpoints fall inside, counted beyond the box too
    cells = 1
    for a, c in zip(f.box.corner, Q.corner):
        cells *= math.ceil((c + Q.side - a) / f.h - 0.5) - math.ceil((c - a) / f.h - 0.5)
    if cells <= 0:
        raise ValueError("cube under-resolved: no cell midpoint inside")
    return float(f.samples[f.slices(Q)].sum()) / cells


def martingale_difference(f: LatticeFunction, Q: Cube) -> LatticeFunction:
    """``sum over children P of (<f>_P - <f>_Q) 1_P`` on the lattice of ``f``."""
    if Q.side / 2 < f.h * (1 - 1e-12):
        raise ValueError("cube under-resolved: children are smaller than one cell")
    if not f.is_aligned(Q) or not f.is_aligned(Q.children()[-1]):
        raise ValueError(f"{Q!r} is not resolvable on the lattice")
    parent = average(f, Q)
    out = np.zeros(f.shape)
    for P in Q.children():
        out[f.slices(P)] = average(f, P) - parent
    return f.with_samples(out)


def _summed_area(a: np.ndarray) -> np.ndarray:
    s = a
    for ax in range(a.ndim):
        s = np.cumsum(s, axis=ax)
    return np.pad(s, [(1, 0)] * a.ndim)


def _box_sums(S: np.ndarray, lo: list[np.ndarray], hi: list[np.ndarray]) -> np.ndarray:
    """Sum of the array behind summed-area table ``S`` over per-axis ranges, via inclusion-exclusion."""
    d = len(lo)
    out = 0.0
    for bits in np.ndindex(*(2,) * d):
        idx = [(hi[k] if b else lo[k]) for k, b in enumerate(bits)]
        sign = (-1) ** (d - sum(bits))
        out = out + sign * S[np.ix_(*idx)]
    return out


def _dyadic_sampled_max(f: LatticeFunction, grid: DyadicGrid) -> np.ndarray:
    a = np.abs(f.samples)
    S = _summed_area(a)
    n, h, d = f.n, f.h, f.d
    best = a.copy()  # single cells are always witnesses
    kmin = math.ceil(math.log2(h) - 1e-9)
    kmax = math.ceil(math.log2(2 * f.box.side) + 1e-9)
    for k in range(kmin, kmax + 1):
        side = 2.0**k
        L = side / h
        if abs(L - round(L)) > 1e-9:
            continue
        L = int(round(L))
        shifts = [0] if L < 2 else [0, L // 2]
        for shift in np.ndindex(*(len(shifts),) * d):
            lo, hi = [], []
            for ax in range(d):
                off = (grid.origin_shift[ax] - f.box.corner[ax]) / h + shifts[shift[ax]]
                i = np.arange(n)
                m = np.floor((i + 0.5 - off) / L)
                start = off + m * L
                lo.append(np.clip(np.round(start).astype(int), 0, n))
                hi.append(np.clip(np.round(start).astype(int) + L, 0, n))
            avg = _box_sums(S, lo, hi) / float(L**d)
            np.maximum(best, avg, out=best)
    return best


def maximal_function(f: LatticeFunction, cube_sampler: Iterable[Cube] | None = None,
                     grid: DyadicGrid | None = None) -> LatticeFunction:
    """Sampled Hardy-Littlewood maximal function of ``f``.

    By default the sup runs over all cubes of the dyadic grid and of its
    translates by half a side at every level from one cell up to twice the
    box, plus the single lattice cells.  A custom ``cube_sampler`` replaces
    the grid cubes.  The result is a lower estimate of ``M f`` and dominates
    ``|f|``.
    """
    if cube_sampler is None:
        grid = grid or DyadicGrid(f.d)
        return f.with_samples(_dyadic_sampled_max(f, grid))
    best = np.abs(f.samples).copy()
    for Q in cube_sampler:
        m = f.mask(Q)
        if m.any():
            np.maximum(best, np.where(m, abs(average(abs(f), Q)), 0.0), out=best)
    return f.with_samples(best)


def largest_dyadic_subcube(grid: DyadicGrid, target: Cube, containing=None) -> Cube:
    """Largest cube of ``grid`` inside ``target``.

    Ties go to the lexicographically smallest corner.  With ``containing`` the
    cube must also contain that point.
    """
    if target.side < 2 * grid.resolution:
        raise ValueError("target is below twice the grid resolution")
    k = math.floor(math.log2(target.side) + 1e-12)
    kmin = math.floor(math.log2(grid.resolution) + 1e-12)
    pt = None if containing is None else np.asarray(containing, dtype=float).reshape(-1)
    while k >= kmin:
        cands = grid.cubes_in(target, k)
        if pt is not None:
            cands = [c for c in cands if c.contains_points(pt[None, :])[0]]
        if cands:
            return min(cands, key=lambda c: c.corner)
        k -= 1
    raise ValueError(f"no grid cube fits inside {target!r}")

"""Stopping-time sparse families, sparse decompositions and reflected families."""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lattice import Cube, DyadicGrid, LatticeFunction, bounding_cube

__all__ = [
    "SparseFamily",
    "SparseDecomposition",
    "SparsityReport",
    "stopping_family",
    "sparse_decompose",
    "verify_sparse",
    "reflect_family",
]


@dataclass
class SparseFamily:
    """Dyadic cubes with pairwise disjoint major subsets.

    ``majors[Q]`` is a boolean mask over the lattice of ``box`` (spacing
    ``h``).  ``parent[Q]`` is the smallest family cube strictly containing
    ``Q`` (``None`` for tops).
    """

    cubes: list[Cube]
    majors: dict
    gamma: float
    parent: dict
    box: Cube
    h: float
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)

    def __contains__(self, Q):
        return Q in self.majors

    def children(self, Q: Cube) -> list[Cube]:
        return self.children_map().get(Q, [])

    def children_map(self) -> dict:
        out = {}
        for P in self.cubes:
            par = self.parent.get(P)
            if par is not None:
                out.setdefault(par, []).append(P)
        return out

    def pi(self, R: Cube) -> Cube | None:
        """Smallest family cube containing ``R``."""
        best = None
        for P in self.cubes:
            if P.contains(R) and (best is None or P.side < best.side):
                best = P
        return best

    def _frame(self) -> LatticeFunction:
        return LatticeFunction.zeros(self.box, self.h)

    def cube_mask(self, Q: Cube) -> np.ndarray:
        return self._frame().mask(Q)

    def major_measure(self, Q: Cube) -> float:
        return float(np.count_nonzero(self.majors[Q])) * self.h ** self.box.d


def _block_view(a: np.ndarray, L: int) -> np.ndarray:
    """Block sums of a cubic array over blocks of side ``L``."""
    m = a.shape[0] // L
    shape = []
    for _ in range(a.ndim):
        shape += [m, L]
    return a.reshape(shape).sum(axis=tuple(range(1, 2 * a.ndim, 2)))


def _expand(b: np.ndarray, L: int) -> np.ndarray:
    for ax in range(b.ndim):
        b = np.repeat(b, L, axis=ax)
    return b


def _children_of(a: np.ndarray, avg_parent: float, threshold: float):
    """Maximal dyadic sub-blocks of ``a`` (not ``a`` itself) whose mean exceeds ``threshold * avg_parent``.

    Returns (level side in cells, multi-index) pairs, largest first.
    """
    m = a.shape[0]
    d = a.ndim
    covered = np.zeros(a.shape, dtype=bool)
    found = []
    L = m // 2
    while L >= 1:
        sums = _block_view(a, L)
        means = sums / float(L**d)
        cov = _block_view(covered.astype(np.int64), L) > 0
        hit = (means > threshold * avg_parent) & ~cov
        for idx in zip(*np.nonzero(hit)):
            found.append((L, tuple(int(i) for i in idx)))
        if hit.any():
            covered |= _expand(hit, L)
        L //= 2
    return found


def stopping_family(f: LatticeFunction, Q: Cube, grid: DyadicGrid | None = None,
                    max_depth: int | None = None, threshold: float = 2.0) -> SparseFamily:
    """Principal stopping family of ``|f|`` inside ``Q``.

    A cube ``R`` below a stopping cube ``P`` is a stopping child when
    ``<|f|>_R > threshold * <|f|>_P`` and ``R`` is maximal with that property.
    The search runs down to single cells; ``max_depth`` caps the number of
    generations.
    """
    grid = grid or DyadicGrid(Q.d)
    if not grid.contains_cube(Q):
        raise ValueError(f"{Q!r} is not a cube of grid {grid.label!r}")
    Q = grid.as_member(Q)
    n = Q.side / f.h
    N = int(round(n))
    if abs(n - N) > 1e-9 or N & (N - 1) or not f.is_aligned(Q):
        raise ValueError("Q must span a power-of-two number of aligned cells")
    if np.any(f.samples[~f.mask(Q)] != 0):
        raise ValueError("f is not supported in Q")
    a = np.abs(f.values_on(Q))
    h, d = f.h, Q.d

    cubes = [Q]
    parent = {Q: None}
    local = {Q: ((0,) * d, None, N)}  # offset in cells, side in cells
    majors_local = {}
    depth = {Q: 0}
    queue = [Q]
    while queue:
        P = queue.pop(0)
        off, _, m = local[P]
        sub = a[tuple(slice(o, o + m) for o in off)]
        avg = float(sub.mean())
        E = np.ones(sub.shape, dtype=bool)
        if m >= 2 and avg > 0 and (max_depth is None or depth[P] < max_depth):
            for L, idx in _children_of(sub, avg, threshold):
                corner = tuple(P.corner[k] + idx[k] * L * h for k in range(d))
                R = grid.as_member(Cube(corner, L * h))
                R_off = tuple(off[k] + idx[k] * L for k in range(d))
                E[tuple(slice(i * L, (i + 1) * L) for i in idx)] = False
                cubes.append(R)
                parent[R] = P
                local[R] = (R_off, None, L)
                depth[R] = depth[P] + 1
                queue.append(R)
        majors_local[P] = (off, E)

    majors = {}
    for P, (off, E) in majors_local.items():
        mask = np.zeros((N,) * d, dtype=bool)
        mask[tuple(slice(o, o + s) for o, s in zip(off, E.shape))] = E
        majors[P] = mask
    return SparseFamily(cubes, majors, 0.5, parent, Q, h,
                        meta={"threshold": threshold, "max_depth": max_depth,
                              "depth": max(depth.values())})


class SparseDecomposition(Mapping):
    """Mapping ``P -> f_P`` with the stopping family, constant and residual attached."""

    def __init__(self, pieces: dict, family: SparseFamily, constant: float, residual: float,
                 averages: dict):
        self._pieces = pieces
        self.family = family
        self.constant = constant
        self.residual = residual
        self.averages = averages

    def __getitem__(self, key):
        return self._pieces[key]

    def __iter__(self):
        return iter(self._pieces)

    def __len__(self):
        return len(self._pieces)

    def total(self) -> LatticeFunction:
        it = iter(self._pieces.values())
        out = next(it)
        for g in it:
            out = out + g
        return out


def sparse_decompose(f: LatticeFunction, Q: Cube, family: SparseFamily | None = None,
                     tol: float = 1e-10, **kw) -> SparseDecomposition:
    """Split a zero-mean ``f`` into pieces ``f_P`` indexed by its stopping family.

    ``f_P`` collects the martingale differences of every dyadic cube whose
    smallest containing stopping cube is ``P``.  Telescoping gives the closed
    form ``(f - <f>_P) 1_{E_P} + sum_S (<f>_S - <f>_P) 1_S`` over the stopping
    children ``S`` of ``P``, which is what is evaluated.  The (tolerated) mean
    of ``f`` is carried by the top piece.
    """
    fQ = f.crop(Q)
    scale = fQ.sup_norm() * Q.volume
    if abs(fQ.integral()) > tol * scale:
        raise ValueError(f"nonzero mean: |integral| = {abs(fQ.integral()):.3e}")
    S = family if family is not None else stopping_family(fQ, Q, **kw)
    frame = LatticeFunction.zeros(Q, f.h)
    vals = fQ.samples
    absv = np.abs(vals)
    pieces, ratios, averages = {}, [], {}
    kids = S.children_map()
    for P in S.cubes:
        mP = frame.mask(P)
        avg = float(vals[mP].mean())
        out = np.where(S.majors[P], vals - avg, 0.0)
        for C in kids.get(P, []):
            mC = frame.mask(C)
            out[mC] = float(vals[mC].mean()) - avg
        if P == S.cubes[0]:
            out = out + avg * mP
        pieces[P] = frame.with_samples(out).embed(f.box) if f.box != Q else frame.with_samples(out)
        a = float(absv[mP].mean())
        averages[P] = a
        sup = float(np.abs(out).max())
        if a > 0:
            ratios.append(sup / a)
    dec = SparseDecomposition(pieces, S, max(ratios, default=0.0), 0.0, averages)
    resid = (f - dec.total()).sup_norm() if pieces else f.sup_norm()
    dec.residual = resid
    return dec


@dataclass(frozen=True)
class SparsityReport:
    gamma_actual: float
    carleson_constant: float


def verify_sparse(S: SparseFamily) -> SparsityReport:
    """Exact lattice counts of the sparseness and Carleson constants."""
    stack = np.zeros(next(iter(S.majors.values())).shape, dtype=np.int64)
    gam = math.inf
    cells = {}
    for Q in S.cubes:
        cm = S.cube_mask(Q)
        cells[Q] = round(Q.side / S.h) ** Q.d
        E = S.majors[Q]
        if np.any(E & ~cm):
            raise ValueError(f"major of {Q!r} leaves its cube")
        stack += E
        gam = min(gam, np.count_nonzero(E) / cells[Q])
    if stack.max(initial=0) > 1:
        raise ValueError("majors not disjoint")
    carl = 0.0
    for P in S.cubes:
        tot = sum(cells[H] for H in S.cubes if P.contains(H))
        carl = max(carl, tot / cells[P])
    return SparsityReport(float(gam), float(carl))


def _parents(cubes: list[Cube]) -> dict:
    parent = {}
    for Q in cubes:
        best = None
        for P in cubes:
            if P is not Q and P != Q and P.contains(Q) and P.side > Q.side:
                if best is None or P.side < best.side:
                    best = P
        parent[Q] = best
    return parent


def reflect_family(S: SparseFamily, target_grid: DyadicGrid, cube_map,
                   dist_factor: float = 64.0, size_ratio: float = 4.0) -> SparseFamily:
    """Image of a sparse family under ``cube_map`` with freshly built majors.

    ``cube_map`` is a callable or mapping sending each cube to a cube of
    ``target_grid`` with ``dist <= dist_factor * side`` and side ratio within
    ``[1/size_ratio, size_ratio]``.  Majors are chosen bottom-up: each cube
    takes ``floor(|Q| / Lambda)`` cells (at least one) not yet used by smaller
    cubes, ``Lambda`` being the Carleson constant of the image.
    """
    fmap: Callable = cube_map if callable(cube_map) else cube_map.__getitem__
    images = []
    for Q in S.cubes:
        R = fmap(Q)
        if not target_grid.contains_cube(R):
            raise ValueError(f"image {R!r} of {Q!r} is not a cube of the target grid")
        ratio = R.side / Q.side
        if not (1 / size_ratio - 1e-12 <= ratio <= size_ratio + 1e-12):
            raise ValueError(f"size constraint violated by the pair {Q!r} -> {R!r}")
        if Q.distance(R) > dist_factor * Q.side * (1 + 1e-12):
            raise ValueError(f"distance constraint violated by the pair {Q!r} -> {R!r}")
        images.append(target_grid.as_member(R))
    cubes = sorted(set(images), key=lambda c: (-c.side, c.corner))
    box = bounding_cube(cubes, S.h, anchor=S.box)
    frame = LatticeFunction.zeros(box, S.h)
    for c in cubes:
        if not frame.is_aligned(c):
            raise ValueError(f"{c!r} is not resolvable on the lattice")
    cells = {c: round(c.side / S.h) ** c.d for c in cubes}
    lam = max(sum(cells[H] for H in cubes if P.contains(H)) / cells[P] for P in cubes)
    used = np.zeros(frame.shape, dtype=bool)
    majors = {}
    for c in sorted(cubes, key=lambda c: (c.side, c.corner)):
        avail = frame.mask(c) & ~used
        want = max(1, math.floor(cells[c] / lam + 1e-9))
        flat = np.flatnonzero(avail)[:want]
        E = np.zeros(frame.shape, dtype=bool)
        E.flat[flat] = True
        used |= E
        majors[c] = E
    return SparseFamily(cubes, majors, 1.0 / lam, _parents(cubes), box, S.h,
                        meta={"carleson": lam, "source_size": len(S.cubes)})

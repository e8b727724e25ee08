"""Cubes, dyadic grids and functions sampled on uniform lattices.

Every cube is half-open, ``[a_1, a_1 + l) x ... x [a_d, a_d + l)``, and a
lattice function stores one sample per cell at the cell midpoint.  A cell
belongs to a cube when its midpoint does, so measures are always exact cell
counts times ``h**d``.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Cube",
    "DyadicGrid",
    "LatticeFunction",
    "bounding_cube",
]

_ALIGN_TOL = 1e-9


def _as_tuple(v, d=None) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if d is not None and arr.size == 1 and d > 1:
        arr = np.full(d, float(arr[0]))
    return tuple(float(a) for a in arr)


@dataclass(frozen=True)
class Cube:
    """Axis-aligned half-open cube.

    ``grid_ref`` is ``(grid label, level, index)`` when the cube was produced
    by a :class:`DyadicGrid`; it does not take part in equality or hashing.
    """

    corner: tuple[float, ...]
    side: float
    grid_ref: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "corner", _as_tuple(self.corner))
        object.__setattr__(self, "side", float(self.side))
        if not self.side > 0:
            raise ValueError(f"cube side must be positive, got {self.side}")

    @classmethod
    def interval(cls, a: float, b: float) -> "Cube":
        return cls((a,), b - a)

    @property
    def d(self) -> int:
        return len(self.corner)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.corner)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.corner) + self.side

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.corner) + 0.5 * self.side

    @property
    def volume(self) -> float:
        return self.side ** self.d

    @property
    def diameter(self) -> float:
        return self.side * math.sqrt(self.d)

    def contains_points(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.d == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
            pts = pts[..., None]
        lo, hi = self.lower, self.upper
        return np.all((pts >= lo) & (pts < hi), axis=-1)

    def contains(self, other: "Cube", tol: float = 1e-12) -> bool:
        s = tol * max(self.side, other.side)
        return bool(np.all(other.lower >= self.lower - s) and np.all(other.upper <= self.upper + s))

    def intersects(self, other: "Cube") -> bool:
        return bool(np.all(self.lower < other.upper) and np.all(other.lower < self.upper))

    def distance(self, other: "Cube") -> float:
        """Euclidean distance between the closures of two cubes."""
        gap = np.maximum(0.0, np.maximum(self.lower - other.upper, other.lower - self.upper))
        return float(np.sqrt(np.sum(gap**2)))

    def translate(self, v) -> "Cube":
        return Cube(tuple(np.asarray(self.corner) + np.asarray(_as_tuple(v, self.d))), self.side)

    def dilate(self, factor: float, about=None) -> "Cube":
        about = np.zeros(self.d) if about is None else np.asarray(_as_tuple(about, self.d))
        corner = about + factor * (np.asarray(self.corner) - about)
        return Cube(tuple(corner), factor * self.side)

    def children(self) -> list["Cube"]:
        half = 0.5 * self.side
        out = []
        for bits in np.ndindex(*(2,) * self.d):
            out.append(Cube(tuple(np.asarray(self.corner) + half * np.asarray(bits)), half))
        return out

    def __repr__(self):
        if self.d == 1:
            a = self.corner[0]
            return f"Cube[{a:g}, {a + self.side:g})"
        return f"Cube(corner={tuple(round(c, 12) for c in self.corner)}, side={self.side:g})"


@dataclass(frozen=True)
class DyadicGrid:
    """Dyadic grid ``{origin_shift + 2**k (m + [0,1)^d)}``.

    ``resolution`` is the finest side length the grid is asked to produce.
    """

    d: int = 1
    origin_shift: tuple[float, ...] = ()
    label: str = "standard"
    resolution: float = 2.0**-30

    def __post_init__(self):
        shift = self.origin_shift if len(self.origin_shift) else (0.0,) * self.d
        object.__setattr__(self, "origin_shift", _as_tuple(shift, self.d))
        if len(self.origin_shift) != self.d:
            raise ValueError("origin_shift has the wrong dimension")

    def cube(self, level: int, index: Sequence[int]) -> Cube:
        index = tuple(int(i) for i in np.atleast_1d(index))
        s = 2.0**level
        corner = tuple(o + s * i for o, i in zip(self.origin_shift, index))
        return Cube(corner, s, grid_ref=(self.label, int(level), index))

    def locate(self, point, level: int) -> Cube:
        p = np.asarray(_as_tuple(point, self.d))
        s = 2.0**level
        index = np.floor((p - np.asarray(self.origin_shift)) / s).astype(int)
        return self.cube(level, index)

    def level_of(self, cube: Cube) -> int | None:
        k = math.log2(cube.side)
        if abs(k - round(k)) > 1e-12:
            return None
        return int(round(k))

    def contains_cube(self, cube: Cube) -> bool:
        """Whether ``cube`` is a member of this grid."""
        if cube.d != self.d:
            return False
        k = self.level_of(cube)
        if k is None:
            return False
        t = (np.asarray(cube.corner) - np.asarray(self.origin_shift)) / cube.side
        return bool(np.all(np.abs(t - np.round(t)) < _ALIGN_TOL))

    def as_member(self, cube: Cube) -> Cube:
        """Return ``cube`` with its grid reference filled in."""
        if not self.contains_cube(cube):
            raise ValueError(f"{cube!r} is not a cube of grid {self.label!r}")
        k = self.level_of(cube)
        t = (np.asarray(cube.corner) - np.asarray(self.origin_shift)) / cube.side
        return self.cube(k, np.round(t).astype(int))

    def cubes_in(self, box: Cube, level: int) -> list[Cube]:
        """All grid cubes of the given level contained in ``box``."""
        s = 2.0**level
        ranges = []
        for o, a in zip(self.origin_shift, box.corner):
            lo = math.ceil((a - o) / s - _ALIGN_TOL)
            hi = math.floor((a + box.side - o) / s + _ALIGN_TOL) - 1
            ranges.append(range(lo, hi + 1))
        return [self.cube(level, idx) for idx in _product(ranges)]


def _product(ranges):
    if not ranges:
        yield ()
        return
    for i in ranges[0]:
        for rest in _product(ranges[1:]):
            yield (i,) + rest


def _is_integer(t, tol=_ALIGN_TOL) -> bool:
    t = np.asarray(t, dtype=float)
    return bool(np.all(np.abs(t - np.round(t)) < tol * np.maximum(1.0, np.abs(t))))


class LatticeFunction:
    """Real function sampled at the cell midpoints of a cube-shaped lattice.

    Outside ``box`` the function is identically zero.
    """

    __array_priority__ = 1000

    def __init__(self, box: Cube, h: float, samples):
        h = float(h)
        if not h > 0:
            raise ValueError("spacing must be positive")
        n_float = box.side / h
        n = int(round(n_float))
        if n < 1 or abs(n - n_float) > 1e-9 * max(1.0, n_float):
            raise ValueError(f"box side {box.side} is not an integer multiple of h={h}")
        samples = np.array(samples, dtype=float)
        if samples.shape != (n,) * box.d:
            raise ValueError(f"expected samples of shape {(n,) * box.d}, got {samples.shape}")
        samples.setflags(write=False)
        self.box = box
        self.h = h
        self.n = n
        self.samples = samples

    # construction

    @classmethod
    def zeros(cls, box: Cube, h: float) -> "LatticeFunction":
        n = int(round(box.side / h))
        return cls(box, h, np.zeros((n,) * box.d))

    @classmethod
    def from_callable(cls, fn: Callable, box: Cube, h: float) -> "LatticeFunction":
        """Sample ``fn(x_1, ..., x_d)`` at the cell midpoints."""
        n = int(round(box.side / h))
        axes = [a + (np.arange(n) + 0.5) * h for a in box.corner]
        grids = np.meshgrid(*axes, indexing="ij")
        vals = np.broadcast_to(np.asarray(fn(*grids), dtype=float), (n,) * box.d)
        return cls(box, h, vals)

    @classmethod
    def indicator(cls, cube: Cube, box: Cube, h: float, value: float = 1.0) -> "LatticeFunction":
        out = cls.zeros(box, h)
        return out.with_samples(value * out.mask(cube))

    def with_samples(self, samples) -> "LatticeFunction":
        return LatticeFunction(self.box, self.h, samples)

    # geometry

    @property
    def d(self) -> int:
        return self.box.d

    @property
    def shape(self) -> tuple[int, ...]:
        return self.samples.shape

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    def axes(self) -> list[np.ndarray]:
        return [a + (np.arange(self.n) + 0.5) * self.h for a in self.box.corner]

    def centers(self) -> np.ndarray:
        """Cell midpoints, shape ``shape + (d,)``."""
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(grids, axis=-1)

    def index_range(self, cube: Cube) -> list[tuple[int, int]]:
        """Per-axis ``[lo, hi)`` index ranges of cells whose midpoints lie in ``cube``."""
        out = []
        for a, c in zip(self.box.corner, cube.corner):
            lo = math.ceil((c - a) / self.h - 0.5)
            hi = math.ceil((c + cube.side - a) / self.h - 0.5)
            out.append((min(max(lo, 0), self.n), min(max(hi, 0), self.n)))
        return out

    def slices(self, cube: Cube) -> tuple[slice, ...]:
        return tuple(slice(lo, hi) for lo, hi in self.index_range(cube))

    def mask(self, cube: Cube) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[self.slices(cube)] = True
        return m

    def is_aligned(self, cube: Cube) -> bool:
        """Whether ``cube`` is a union of whole lattice cells (possibly beyond the box)."""
        off = (np.asarray(cube.corner) - np.asarray(self.box.corner)) / self.h
        return _is_integer(off) and _is_integer(cube.side / self.h)

    def cells_in(self, cube: Cube) -> int:
        """Number of lattice cells of ``cube`` counting cells beyond the box."""
        return int(round(cube.side / self.h)) ** self.d

    def compatible(self, other: "LatticeFunction | Cube") -> bool:
        if isinstance(other, LatticeFunction):
            if abs(other.h - self.h) > 1e-12 * self.h:
                return False
            other = other.box
        return self.is_aligned(Cube(other.corner, self.h))

    # values

    def values_on(self, cube: Cube, strict: bool = False) -> np.ndarray:
        """Samples on the lattice of an aligned ``cube``; zero beyond this box.

        With ``strict`` the cube must lie inside the box.
        """
        if not self.is_aligned(cube):
            raise ValueError(f"{cube!r} is not aligned with the lattice of {self.box!r}")
        if strict and not self.box.contains(cube):
            raise ValueError(f"{cube!r} is not covered by {self.box!r}")
        m = int(round(cube.side / self.h))
        off = np.round((np.asarray(cube.corner) - np.asarray(self.box.corner)) / self.h).astype(int)
        out = np.zeros((m,) * self.d)
        src, dst = [], []
        for o in off:
            lo, hi = max(o, 0), min(o + m, self.n)
            if hi <= lo:
                return out
            src.append(slice(lo, hi))
            dst.append(slice(lo - o, hi - o))
        out[tuple(dst)] = self.samples[tuple(src)]
        return out

    def crop(self, cube: Cube, strict: bool = False) -> "LatticeFunction":
        return LatticeFunction(cube, self.h, self.values_on(cube, strict=strict))

    def embed(self, box: Cube) -> "LatticeFunction":
        """The same function represented on a larger (or smaller) aligned box."""
        return self.crop(box)

    def restrict(self, cube: Cube) -> "LatticeFunction":
        return self.with_samples(self.samples * self.mask(cube))

    def integral(self) -> float:
        return float(self.samples.sum() * self.cell_volume)

    def sup_norm(self) -> float:
        return float(np.abs(self.samples).max()) if self.samples.size else 0.0

    def lp_norm(self, p: float) -> float:
        if math.isinf(p):
            return self.sup_norm()
        return float((np.sum(np.abs(self.samples) ** p) * self.cell_volume) ** (1.0 / p))

    def support_mask(self) -> np.ndarray:
        return self.samples != 0

    def support_measure(self) -> float:
        return float(np.count_nonzero(self.samples) * self.cell_volume)

    def __abs__(self):
        return self.with_samples(np.abs(self.samples))

    def __neg__(self):
        return self.with_samples(-self.samples)

    def _other(self, other):
        if isinstance(other, LatticeFunction):
            if other.box != self.box or abs(other.h - self.h) > 1e-12 * self.h:
                raise ValueError("lattice functions live on different lattices")
            return other.samples
        return other

    def __add__(self, other):
        return self.with_samples(self.samples + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_samples(self.samples - self._other(other))

    def __rsub__(self, other):
        return self.with_samples(self._other(other) - self.samples)

    def __mul__(self, other):
        return self.with_samples(self.samples * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.with_samples(self.samples / self._other(other))

    def __repr__(self):
        return f"LatticeFunction(box={self.box!r}, h={self.h:g}, n={self.n})"

    # serialization

    _MAGIC = b"LATF"

    def to_bytes(self) -> bytes:
        """Little-endian container: magic, d, then box corner, side and h as f64, then samples."""
        head = self._MAGIC + struct.pack("<I", self.d)
        head += struct.pack(f"<{self.d + 2}d", *self.box.corner, self.box.side, self.h)
        return head + np.ascontiguousarray(self.samples, dtype="<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> "LatticeFunction":
        if data[:4] != cls._MAGIC:
            raise ValueError("not a lattice-function container")
        (d,) = struct.unpack_from("<I", data, 4)
        vals = struct.unpack_from(f"<{d + 2}d", data, 8)
        corner, side, h = vals[:d], vals[d], vals[d + 1]
        start = 8 + 8 * (d + 2)
        n = int(round(side / h))
        samples = np.frombuffer(data, dtype="<f8", offset=start).reshape((n,) * d)
        return cls(Cube(corner, side), h, samples)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "LatticeFunction":
        return cls.from_bytes(Path(path).read_bytes())

    def to_csv(self) -> str:
        if self.d != 1:
            raise ValueError("CSV export is only defined for d = 1")
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["x", "value"])
        for x, v in zip(self.axes()[0], self.samples):
            w.writerow([repr(float(x)), repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "LatticeFunction":
        rows = list(csv.reader(io.StringIO(text)))[1:]
        x = np.array([float(r[0]) for r in rows])
        v = np.array([float(r[1]) for r in rows])
        h = (x[-1] - x[0]) / (len(x) - 1) if len(x) > 1 else 1.0
        return cls(Cube((x[0] - 0.5 * h,), h * len(x)), h, v)


def bounding_cube(cubes: Iterable[Cube], h: float, anchor: Cube | None = None) -> Cube:
    """Smallest cube aligned with the lattice of ``anchor`` (spacing h) covering ``cubes``."""
    cubes = list(cubes)
    lo = np.min([c.lower for c in cubes], axis=0)
    hi = np.max([c.upper for c in cubes], axis=0)
    ref = np.asarray(anchor.corner) if anchor is not None else np.zeros(cubes[0].d)
    lo = ref + np.floor((lo - ref) / h + 1e-9) * h
    hi = ref + np.ceil((hi - ref) / h - 1e-9) * h
    side = float(np.max(hi - lo))
    return Cube(tuple(lo), side)

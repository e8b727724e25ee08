"""Test symbols ``b`` for the three exponent regimes."""

from __future__ import annotations

import re

import numpy as np

from .lattice import Cube, LatticeFunction

__all__ = ["SYMBOL_IDS", "parse_symbol_id", "symbol_library"]

SYMBOL_IDS = ("constant", "step", "linear", "power", "log_truncated", "random_dyadic_bmo")

_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\(\s*([^)]*)\s*\))?\s*$")
_POSITIONAL = {"constant": "value", "power": "beta", "random_dyadic_bmo": "seed",
               "log_truncated": "L", "linear": "slope", "step": "at"}


def parse_symbol_id(sid: str) -> tuple[str, dict]:
    """``"power(0.25)"`` -> ``("power", {"beta": 0.25})``; bare names give empty params."""
    m = _CALL.match(sid)
    if not m or m.group(1) not in SYMBOL_IDS:
        raise ValueError(f"unknown symbol id {sid!r}; expected one of {', '.join(SYMBOL_IDS)}")
    name, arg = m.group(1), m.group(2)
    if not arg:
        return name, {}
    val = float(arg)
    if name == "random_dyadic_bmo":
        val = int(val)
    return name, {_POSITIONAL[name]: val}


def _radius(X, x0):
    return np.sqrt(sum((x - c) ** 2 for x, c in zip(X, x0)))


def _haar_bmo(X, seed: int, levels: int, support: Cube, amplitude: float):
    # sum over dyadic I in the support, down `levels` generations, of eps_I (1_{I_left} - 1_{I_right})
    # along the first axis; eps_I uniform in [-amplitude, amplitude]
    rng = np.random.default_rng(seed)
    d = len(X)
    t = [(x - a) / support.side for x, a in zip(X, support.corner)]
    inside = np.ones(np.shape(X[0]), dtype=bool)
    for c in t:
        inside &= (c >= 0) & (c < 1)
    out = np.zeros(np.shape(X[0]))
    for k in range(levels):
        n = 2**k
        eps = rng.uniform(-amplitude, amplitude, size=(n,) * d)
        idx = tuple(np.clip(np.floor(c * n).astype(int), 0, n - 1) for c in t)
        half = np.where(np.mod(t[0] * n, 1.0) < 0.5, 1.0, -1.0)
        out += eps[idx] * half
    return np.where(inside, out, 0.0)


def symbol_library(sid: str, params: dict | None = None, box: Cube | None = None,
                   h: float | None = None) -> LatticeFunction:
    """Sample a named symbol on ``box`` at spacing ``h``.

    Ids and their parameters (all optional):

    - ``constant``: ``value`` (1.0).
    - ``step``: ``1`` on ``at <= x_1 < at + width``; ``at`` (box corner) and
      ``width`` (half the box side).  With ``period`` the step repeats with
      that period inside ``|x_1 - at| < extent``.
    - ``linear``: ``slope * (x_1 - at)``.
    - ``power``: ``|x - x0|^beta``.
    - ``log_truncated``: ``max(log|x - x0|, -L)`` with ``L = 10``.
    - ``random_dyadic_bmo``: random bounded Haar coefficients over ``levels``
      generations of dyadic subcubes of ``support`` (default: the box).

    Every id accepts ``dilation`` ``lam``: the result is ``b(x0 + (x - x0)/lam)``.
    """
    name, pos = parse_symbol_id(sid)
    p = {**pos, **(params or {})}
    if box is None or h is None:
        raise ValueError("symbol_library needs the box and the lattice spacing")
    d = box.d
    x0 = tuple(float(v) for v in np.broadcast_to(np.asarray(p.get("x0", 0.0), dtype=float), (d,)))
    lam = float(p.get("dilation", 1.0))
    if lam <= 0:
        raise ValueError("dilation must be positive")

    def fn(*X):
        X = [c + (x - c) / lam for x, c in zip(X, x0)]
        if name == "constant":
            return np.full(np.shape(X[0]), float(p.get("value", 1.0)))
        if name == "step":
            at = float(p.get("at", box.corner[0]))
            width = float(p.get("width", box.side / 2))
            if "period" in p:
                per = float(p["period"])
                ext = float(p.get("extent", np.inf))
                ph = np.mod(X[0] - at, per)
                return ((ph < width) & (np.abs(X[0] - at) < ext)).astype(float)
            return ((X[0] >= at) & (X[0] < at + width)).astype(float)
        if name == "linear":
            return float(p.get("slope", 1.0)) * (X[0] - float(p.get("at", 0.0)))
        if name == "power":
            beta = float(p.get("beta", 0.5))
            return _radius(X, x0) ** beta
        if name == "log_truncated":
            L = float(p.get("L", 10.0))
            with np.errstate(divide="ignore"):
                return np.maximum(np.log(_radius(X, x0)), -L)
        sup = p.get("support")
        support = Cube(tuple(sup[0]), float(sup[1])) if sup is not None else box
        return _haar_bmo(X, int(p.get("seed", 0)), int(p.get("levels", 6)), support,
                         float(p.get("amplitude", 1.0)))

    return LatticeFunction.from_callable(fn, box, h)

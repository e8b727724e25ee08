"""Experiment configuration: a TOML document mapped onto :class:`ExperimentConfig`.

Grammar (every key optional unless noted)::

    seed = 0                  # u64
    out = "report.json"
    slot = 1                  # commutator slot, 1 or 2
    A = 32.0                  # or "auto" (calibrated per cube)
    eval_cap = 5e9            # kernel evaluations; inf disables the cap

    [kernel]                  # see bicomm.kernels.kernel_from_config
    variant = "riesz"

    [lattice]
    d = 1
    N = 256                   # cells per side
    h = 0.015625              # spacing; N * h is the box side
    corner = [-2.0]           # default centres the box at the origin

    [exponents]               # required
    p = 2.0
    q = 2.0
    r = 1.0
    s = 2.0                   # super-diagonal only; must match the regime

    [symbol]
    id = "step"               # or "power(0.25)", "random_dyadic_bmo(3)", ...
    [symbol.params]
    width = 0.5

    [sampler]
    levels = [-4, -3]         # dyadic levels of Q1 for the off-support scan
    symbol_levels = [-6, -1]  # level range for BMO / Hoelder sampling
    dilations = [0]           # the symbol is rerun at b(x / 2^j)
    stride = 4
    max_triples = 64
    draws = 2
    ascent = 2
    gamma = 0.75
    mirror = true
    region = { corner = [-0.5], side = 1.0 }

    [ledger]                  # super-diagonal only
    domain = { corner = [0.0], side = 1.0 }
    max_depth = 4
    M = 100.0
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .lattice import Cube
from .norms import classify_exponents
from .symbols import parse_symbol_id

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config", "emit_config"]


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps it to exit code 2."""


def _cube_doc(c):
    if c is None:
        return None
    return {"corner": [float(v) for v in c[0]], "side": float(c[1])}


def _cube_tuple(doc, d, what):
    if doc is None:
        return None
    try:
        corner = tuple(float(v) for v in doc["corner"])
        side = float(doc["side"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{what} needs corner (list) and side") from exc
    if len(corner) != d or side <= 0:
        raise ConfigError(f"{what}: corner must have {d} entries and side must be positive")
    return corner, side


@dataclass
class ExperimentConfig:
    p: float
    q: float
    r: float
    s: float | None = None
    kernel: dict = field(default_factory=lambda: {"variant": "riesz"})
    d: int = 1
    N: int = 256
    h: float = 1.0 / 64
    corner: tuple | None = None
    symbol: str = "step"
    symbol_params: dict = field(default_factory=dict)
    A: float | str = 32.0
    levels: tuple = (-4, -3)
    symbol_levels: tuple | None = None
    dilations: tuple = (0,)
    stride: int | None = None
    max_triples: int = 64
    draws: int = 2
    ascent: int = 2
    gamma: float = 0.75
    mirror: bool = True
    region: tuple | None = None
    ledger_domain: tuple | None = None
    ledger_max_depth: int | None = None
    ledger_M: float | None = None
    slot: int = 1
    eval_cap: float = 5e9             # math.inf disables the cap
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        self.validate()

    @property
    def box(self) -> Cube:
        corner = self.corner if self.corner is not None else (-self.N * self.h / 2,) * self.d
        return Cube(tuple(corner), self.N * self.h)

    @property
    def regime(self):
        return classify_exponents(self.p, self.q, self.r, self.d)

    def validate(self) -> None:
        if self.d < 1 or self.N < 1 or not self.h > 0:
            raise ConfigError("lattice needs d >= 1, N >= 1 and h > 0")
        if int(self.kernel.get("d", self.d)) != self.d:
            raise ConfigError("kernel dimension differs from the lattice dimension")
        if self.corner is not None and len(self.corner) != self.d:
            raise ConfigError(f"corner must have {self.d} entries")
        try:
            reg = classify_exponents(self.p, self.q, self.r, self.d)
        except ValueError as exc:
            raise ConfigError(f"exponents: {exc}") from exc
        if reg.name == "super-diagonal":
            if self.r < 1:
                raise ConfigError("super-diagonal with r < 1 is not supported")
            if self.s is not None and abs(1 / self.s - 1 / reg.s) > 1e-9:
                raise ConfigError(f"s = {self.s} inconsistent with 1/r - 1/p - 1/q (s = {reg.s:.6g})")
        elif self.s is not None:
            raise ConfigError(f"s is only meaningful in the super-diagonal regime, not {reg.name}")
        if reg.name == "sub-diagonal" and reg.alpha > 1:
            raise ConfigError(f"sub-diagonal exponent alpha = {reg.alpha:.4g} exceeds 1")
        if isinstance(self.A, str):
            if self.A != "auto":
                raise ConfigError("A must be a number or \"auto\"")
        elif not self.A >= 3:
            raise ConfigError("A must be at least 3")
        if self.slot not in (1, 2):
            raise ConfigError("slot must be 1 or 2")
        if not 0 < self.gamma <= 1:
            raise ConfigError("gamma must lie in (0, 1]")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        try:
            parse_symbol_id(self.symbol)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.eval_cap > 0:
            raise ConfigError("eval_cap must be positive")

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def to_doc(self) -> dict:
        doc = {"seed": int(self.seed), "slot": self.slot,
               "A": self.A if isinstance(self.A, str) else float(self.A)}
        if self.out is not None:
            doc["out"] = self.out
        doc["eval_cap"] = float(self.eval_cap)
        doc["kernel"] = dict(self.kernel)
        lat = {"d": self.d, "N": self.N, "h": float(self.h)}
        if self.corner is not None:
            lat["corner"] = [float(v) for v in self.corner]
        doc["lattice"] = lat
        ex = {"p": float(self.p), "q": float(self.q), "r": float(self.r)}
        if self.s is not None:
            ex["s"] = float(self.s)
        doc["exponents"] = ex
        doc["symbol"] = {"id": self.symbol, "params": dict(self.symbol_params)}
        sm = {"levels": list(self.levels), "dilations": list(self.dilations),
              "max_triples": self.max_triples, "draws": self.draws, "ascent": self.ascent,
              "gamma": float(self.gamma), "mirror": self.mirror}
        if self.symbol_levels is not None:
            sm["symbol_levels"] = list(self.symbol_levels)
        if self.stride is not None:
            sm["stride"] = self.stride
        if self.region is not None:
            sm["region"] = _cube_doc(self.region)
        doc["sampler"] = sm
        led = {}
        if self.ledger_domain is not None:
            led["domain"] = _cube_doc(self.ledger_domain)
        if self.ledger_max_depth is not None:
            led["max_depth"] = self.ledger_max_depth
        if self.ledger_M is not None:
            led["M"] = float(self.ledger_M)
        if led:
            doc["ledger"] = led
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "ExperimentConfig":
        known = {"seed", "out", "slot", "A", "eval_cap", "kernel", "lattice", "exponents", "symbol",
                 "sampler", "ledger"}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown keys: {', '.join(sorted(extra))}")
        lat = doc.get("lattice", {})
        d = int(lat.get("d", 1))
        if "exponents" not in doc:
            raise ConfigError("missing [exponents] table")
        ex = doc["exponents"]
        sym = doc.get("symbol", {})
        sm = doc.get("sampler", {})
        led = doc.get("ledger", {})
        N = int(lat.get("N", 256))
        h = float(lat.get("h", 1.0 / 64))
        if "side" in lat and not math.isclose(float(lat["side"]), N * h, rel_tol=1e-12):
            raise ConfigError(f"N * h = {N * h} differs from the box side {lat['side']}")
        kernel = dict(doc.get("kernel", {"variant": "riesz"}))
        kernel.setdefault("d", d)
        A = doc.get("A", 32.0)
        try:
            return cls(
                p=float(ex["p"]), q=float(ex["q"]), r=float(ex["r"]),
                s=float(ex["s"]) if "s" in ex else None,
                kernel=kernel, d=d, N=N, h=h,
                corner=tuple(float(v) for v in lat["corner"]) if "corner" in lat else None,
                symbol=str(sym.get("id", "step")), symbol_params=dict(sym.get("params", {})),
                A=A if isinstance(A, str) else float(A),
                levels=tuple(int(k) for k in sm.get("levels", (-4, -3))),
                symbol_levels=tuple(int(k) for k in sm["symbol_levels"]) if "symbol_levels" in sm else None,
                dilations=tuple(int(k) for k in sm.get("dilations", (0,))),
                stride=int(sm["stride"]) if "stride" in sm else None,
                max_triples=int(sm.get("max_triples", 64)), draws=int(sm.get("draws", 2)),
                ascent=int(sm.get("ascent", 2)), gamma=float(sm.get("gamma", 0.75)),
                mirror=bool(sm.get("mirror", True)),
                region=_cube_tuple(sm.get("region"), d, "sampler.region"),
                ledger_domain=_cube_tuple(led.get("domain"), d, "ledger.domain"),
                ledger_max_depth=int(led["max_depth"]) if "max_depth" in led else None,
                ledger_M=float(led["M"]) if "M" in led else None,
                slot=int(doc.get("slot", 1)),
                eval_cap=float(doc.get("eval_cap", 5e9)),
                seed=int(doc.get("seed", 0)),
                out=str(doc["out"]) if "out" in doc else None,
            )
        except KeyError as exc:
            raise ConfigError(f"missing key {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def parse_config(text: str) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return ExperimentConfig.from_doc(doc)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def emit_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(cfg.to_doc())

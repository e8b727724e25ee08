"""Symbol-side and operator-side norm functionals.

Every sup-type quantity here is a sampled lower estimate: the sup is taken
over a finite, deterministic family of cubes or configurations, and the
maximizing configuration is returned as the witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .budget import charge
from .kernels import KernelSpec, bootstrap_cubes, kernel_values, swap_inputs
from .lattice import Cube, LatticeFunction, bounding_cube
from .operators import commutator_pairing

__all__ = [
    "Estimate",
    "sigma_exponent",
    "classify_exponents",
    "CubeSampler",
    "oscillation",
    "bmo_norm_est",
    "holder_seminorm_est",
    "LsNorm",
    "dot_ls_norm",
    "weak_lr_quasinorm",
    "OffSupportConfig",
    "TripleTerm",
    "offsupport_norm_est",
    "weak_offsupport_est",
    "offsupport_scan",
    "superdiag_offsupport_est",
    "normalization_N",
    "major_subset",
]


@dataclass
class Estimate:
    """A sampled lower estimate with its witness configuration."""

    norm: str
    value: float
    witness: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)

    def to_record(self) -> dict:
        return {"norm": self.norm, "value": float(self.value), "witness": _jsonable(self.witness),
                "sampler_stats": _jsonable(self.stats), "lower_estimate": True}


def _jsonable(obj):
    if isinstance(obj, Cube):
        return {"corner": list(obj.corner), "side": obj.side}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None  # JSON has no nan / inf
    return obj


# exponents

def sigma_exponent(exponents: Sequence[float]) -> float:
    """``sigma`` with ``sigma^{-1} = sum 1 / p_i``."""
    exps = list(exponents)
    if any(not e > 0 for e in exps):
        raise ValueError("exponents must be positive")
    return 1.0 / sum(1.0 / e for e in exps)


@dataclass(frozen=True)
class Regime:
    name: str
    alpha: float | None = None
    s: float | None = None


def classify_exponents(p: float, q: float, r: float, d: int = 1, tol: float = 1e-12) -> Regime:
    """Diagonal when ``1/r = 1/p + 1/q``, sub-diagonal when smaller, super-diagonal when larger.

    Sub-diagonal carries ``alpha = d (1/p + 1/q - 1/r)``; super-diagonal
    carries ``s`` with ``1/r = 1/s + 1/p + 1/q``.
    """
    inv = 1.0 / sigma_exponent([p, q])
    ir = 1.0 / sigma_exponent([r])
    if abs(ir - inv) <= tol * max(1.0, inv):
        return Regime("diagonal", alpha=0.0)
    if ir < inv:
        return Regime("sub-diagonal", alpha=d * (inv - ir))
    return Regime("super-diagonal", s=1.0 / (ir - inv))


# cube sampling

@dataclass
class CubeSampler:
    """Cubes of side ``2**k`` for ``k_min <= k <= k_max`` inside ``box``.

    Corners step by ``stride`` cells (default half a side, at least one
    cell), anchored at the box corner.  When the count exceeds ``cap`` the
    list is thinned to ``cap`` evenly spaced members per side.
    """

    box: Cube
    h: float
    k_min: int
    k_max: int
    stride: int | None = None
    cap: int = 4096

    def cubes(self) -> list[Cube]:
        out = []
        d = self.box.d
        levels = [k for k in range(self.k_min, self.k_max + 1) if 2.0**k <= self.box.side + 1e-12]
        per = max(1, self.cap // max(1, len(levels)))
        for k in levels:
            side = 2.0**k
            L = side / self.h
            if L < 1 - 1e-9 or abs(L - round(L)) > 1e-9:
                continue
            L = int(round(L))
            st = self.stride or max(1, L // 2)
            n = int(round(self.box.side / self.h))
            starts = range(0, n - L + 1, st)
            level = []
            for idx in np.ndindex(*(len(starts),) * d):
                corner = tuple(self.box.corner[a] + starts[idx[a]] * self.h for a in range(d))
                level.append(Cube(corner, side))
            if len(level) > per:
                pick = np.unique(np.linspace(0, len(level) - 1, per).round().astype(int))
                level = [level[i] for i in pick]
            out.extend(level)
        return out

    def __iter__(self):
        return iter(self.cubes())


def _sampler_for(b: LatticeFunction, sampler) -> Iterable[Cube]:
    if sampler is None:
        return CubeSampler(b.box, b.h, int(math.floor(math.log2(b.h))) + 1,
                           int(math.floor(math.log2(b.box.side)))).cubes()
    if isinstance(sampler, CubeSampler):
        return sampler.cubes()
    return list(sampler)


# symbol norms

def oscillation(b: LatticeFunction, Q: Cube) -> float:
    """Mean absolute deviation of ``b`` from its mean over ``Q``."""
    if Q.side < b.h * (1 - 1e-12):
        raise ValueError("cube under-resolved")
    v = b.values_on(Q) if b.is_aligned(Q) else b.samples[b.slices(Q)]
    if v.size == 0:
        raise ValueError("cube under-resolved")
    return float(np.mean(np.abs(v - v.mean())))


def bmo_norm_est(b: LatticeFunction, sampler=None) -> Estimate:
    """``max_Q osc(b; Q)`` over the sampled cubes."""
    return holder_seminorm_est(b, 0.0, sampler, _name="bmo")


def holder_seminorm_est(b: LatticeFunction, alpha: float, sampler=None, _name: str = "holder") -> Estimate:
    """``max_Q side(Q)^{-alpha} osc(b; Q)`` over the sampled cubes."""
    if _name == "holder" and not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    best, wit, count = 0.0, None, 0
    for Q in _sampler_for(b, sampler):
        count += 1
        v = Q.side ** (-alpha) * oscillation(b, Q) if alpha else oscillation(b, Q)
        if v > best:
            best, wit = v, Q
    return Estimate(_name, best, {"cube": wit}, {"cubes": count, "alpha": alpha})


@dataclass(frozen=True)
class LsNorm:
    value: float
    c: float
    bracket: tuple
    evaluations: int

    def __iter__(self):
        return iter((self.value, self.c))


def dot_ls_norm(b: LatticeFunction, s: float, domain: Cube | None = None, rtol: float = 1e-8) -> LsNorm:
    """``inf_c ||b - c||_{L^s(domain)}`` over real ``c`` by golden-section search.

    The objective is convex, so the minimizer lies in ``[min b, max b]``.
    ``bracket`` is the final interval, whose width is at most
    ``rtol * max(1, |c|)`` and which contains a minimizer.
    """
    if s < 1:
        raise ValueError("nonconvex objective out of v1 scope")
    v = b.values_on(domain) if domain is not None else b.samples
    v = v.reshape(-1)
    w = b.h**b.d

    def F(c):
        return float(np.sum(np.abs(v - c) ** s) * w) ** (1.0 / s)

    lo, hi = float(v.min()), float(v.max())
    if hi - lo == 0:
        return LsNorm(F(lo), lo, (lo, hi), 1)
    g = (math.sqrt(5) - 1) / 2
    a, bb = lo, hi
    x1, x2 = bb - g * (bb - a), a + g * (bb - a)
    f1, f2 = F(x1), F(x2)
    n = 2
    while bb - a > rtol * max(1.0, abs(a), abs(bb)):
        if f1 <= f2:
            bb, x2, f2 = x2, x1, f1
            x1 = bb - g * (bb - a)
            f1 = F(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (bb - a)
            f2 = F(x2)
        n += 1
    c = 0.5 * (a + bb)
    cands = [(F(c), c), (f1, x1), (f2, x2)]
    val, c = min(cands)
    return LsNorm(val, c, (a, bb), n + 1)


def weak_lr_quasinorm(u: LatticeFunction, r: float) -> float:
    """``sup_lambda lambda |{|u| > lambda}|^{1/r}``, attained at a sample value."""
    if not r > 0:
        raise ValueError("r must be positive")
    a = np.sort(np.abs(u.samples).reshape(-1))[::-1]
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    # count of samples >= a[k], ties included
    uniq, first = np.unique(-a, return_index=True)
    counts = np.searchsorted(-a, uniq, side="right")
    vals = -uniq
    meas = counts * u.h**u.d
    return float(np.max(vals * meas ** (1.0 / r)))


# off-support norms

@dataclass
class OffSupportConfig:
    """Sampling plan for off-support norms.

    Triples come from the bootstrap placement around each cube of the
    ``Q1`` sampler (and its mirror image), restricted to triples inside the
    symbol's box.  Functions are indicators, ``draws`` random fillings, and
    ``ascent`` rounds of sign optimization.
    """

    p: float
    q: float
    r: float
    s: float | None = None
    A: float = 32.0
    levels: tuple = (-4, -3)
    stride: int | None = None
    max_triples: int = 64
    draws: int = 2
    ascent: int = 2
    gamma: float = 0.75
    seed: int = 0
    slot: int = 1
    mirror: bool = True
    region: Cube | None = None

    def __post_init__(self):
        if self.A < 3:
            raise ValueError("A must be at least 3")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        sigma_exponent([self.p, self.q, self.r])

    @property
    def exponent_sum(self) -> float:
        """``1/p + 1/q + 1/r'`` with ``1/r' = 1 - 1/r``."""
        return 1.0 / self.p + 1.0 / self.q + 1.0 - 1.0 / self.r


def major_subset(u: np.ndarray, gamma: float) -> np.ndarray:
    """Mask of the ``gamma``-major subset where ``|u|`` is smallest (ties by index)."""
    n = u.size
    k = min(n, int(math.floor(gamma * n)) + 1)
    order = np.argsort(np.abs(u).reshape(-1), kind="stable")
    m = np.zeros(n, dtype=bool)
    m[order[:k]] = True
    return m.reshape(u.shape)


def _triples(b: LatticeFunction, K: KernelSpec, cfg: OffSupportConfig):
    region = cfg.region or b.box
    out = []
    for k in cfg.levels:
        samp = CubeSampler(region, b.h, k, k, stride=cfg.stride)
        for Q1 in samp.cubes():
            tri = bootstrap_cubes(K, Q1, cfg.A, h=b.h, diagnostics=False)
            cands = [tri]
            if cfg.mirror:
                c1 = Q1.center
                Q0m = Q1.translate(-(tri.Q0.center - c1))
                Q2m = Q1.translate(-(tri.Q2.center - c1))
                cands.append(type(tri)(Q0m, Q1, Q2m, 2 * c1 - tri.c0, c1, 2 * c1 - tri.c2, tri.A))
            for t in cands:
                if all(b.box.contains(Q) and b.is_aligned(Q) for Q in t.cubes):
                    out.append(t)
    if len(out) > cfg.max_triples:
        pick = np.unique(np.linspace(0, len(out) - 1, cfg.max_triples).round().astype(int))
        out = [out[i] for i in pick]
    return out


class _TripleData:
    """Kernel tensor and symbol values for one triple (slot-1 form)."""

    def __init__(self, b, K, tri, h):
        d = K.d
        self.tri = tri
        self.h = h
        self.w = h**d
        P = [LatticeFunction.zeros(Q, h).centers().reshape(-1, d) for Q in tri.cubes]
        self.shape1 = (int(round(tri.Q1.side / h)),) * d
        self.shape2 = (int(round(tri.Q2.side / h)),) * d
        self.shape0 = (int(round(tri.Q0.side / h)),) * d
        charge(len(P[0]) * len(P[1]) * len(P[2]))
        Kt = kernel_values(K, P[0][:, None, None, :], P[1][None, :, None, :], P[2][None, None, :, :])
        self.Kt = np.where(np.isfinite(Kt), Kt, 0.0)
        self.bx = b.values_on(tri.Q0).reshape(-1)
        self.by = b.values_on(tri.Q1).reshape(-1)
        self.B = self.bx[:, None] - self.by[None, :]

    def u(self, f1, f2):
        """``[b,T]_1(f1, f2)`` on the cells of ``Q0``."""
        J = (self.Kt @ f2) * self.w
        return ((self.B * J) @ f1) * self.w

    def grad_f1(self, f0, f2):
        J = (self.Kt @ f2) * self.w
        return (f0 @ (self.B * J)) * self.w

    def grad_f2(self, f0, f1):
        M = np.einsum("x,xy,xyz->z", f0, self.B * f1[None, :], self.Kt)
        return M * self.w * self.w


def offsupport_scan(b: LatticeFunction, K: KernelSpec, cfg: OffSupportConfig, triples=None) -> dict:
    """Strong and weak off-support estimates from one shared set of candidates.

    For each triple and candidate ``(f1, f2)`` the commutator ``u`` on
    ``Q0`` is formed once; the strong value takes ``f0 = sign(u)`` on all of
    ``Q0`` and the weak value takes it on the ``gamma``-major subset where
    ``|u|`` is smallest.  Both are exact sups over ``f0`` for the given
    ``(f1, f2)``, so the weak value never exceeds the strong one.
    """
    G = swap_inputs(K) if cfg.slot == 2 else K
    trips = triples if triples is not None else _triples(b, G, cfg)
    rng = np.random.default_rng(cfg.seed)
    norm = cfg.exponent_sum
    best = {"strong": (0.0, None), "weak": (0.0, None)}
    n_cand = 0
    raw_strong = []
    for ti, tri in enumerate(trips):
        T = _TripleData(b, G, tri, b.h)
        n1, n2 = int(np.prod(T.shape1)), int(np.prod(T.shape2))
        cands = [("indicator", np.ones(n1), np.ones(n2))]
        for j in range(cfg.draws):
            cands.append((f"uniform{j}", rng.uniform(-1, 1, n1), rng.uniform(-1, 1, n2)))
            cands.append((f"signs{j}", rng.choice([-1.0, 1.0], n1), rng.choice([-1.0, 1.0], n2)))
        scale = tri.Q0.volume ** (-norm)
        tri_best = 0.0
        for name, f1, f2 in cands:
            for weak_mode in (False, True):
                g1, g2 = f1, f2
                for it in range(cfg.ascent + 1):
                    u = T.u(g1, g2)
                    n_cand += 1
                    F = major_subset(u, cfg.gamma)
                    s_val = float(np.abs(u).sum() * T.w) * scale
                    w_val = float(np.abs(u[F]).sum() * T.w) * scale
                    tag = {"triple": ti, "cubes": tri.cubes, "functions": name, "ascent": it,
                           "weak_mode": weak_mode}
                    if s_val > best["strong"][0]:
                        best["strong"] = (s_val, tag)
                    if w_val > best["weak"][0]:
                        best["weak"] = (w_val, tag)
                    tri_best = max(tri_best, s_val)
                    if it == cfg.ascent:
                        break
                    f0 = np.sign(u) * (F if weak_mode else 1.0)
                    gr = T.grad_f1(f0, g2)
                    g1 = np.where(gr != 0, np.sign(gr), g1)
                    gr = T.grad_f2(f0, g1)
                    g2 = np.where(gr != 0, np.sign(gr), g2)
        raw_strong.append(tri_best / scale)
    stats = {"triples": len(trips), "candidates": n_cand, "A": cfg.A, "gamma": cfg.gamma,
             "exponent_sum": norm, "slot": cfg.slot}
    return {
        "strong": Estimate("offsupport", best["strong"][0], best["strong"][1] or {}, stats),
        "weak": Estimate("weak_offsupport", best["weak"][0], best["weak"][1] or {}, stats),
        "triples": trips,
        "raw_strong": raw_strong,
    }


def offsupport_norm_est(b: LatticeFunction, K: KernelSpec, cfg: OffSupportConfig, triples=None) -> Estimate:
    """Sampled off-support norm: normalized ``|<[b,T](f1,f2), f0>|`` with ``|f_a| <= 1_{Q^a}``."""
    return offsupport_scan(b, K, cfg, triples)["strong"]


def weak_offsupport_est(b: LatticeFunction, K: KernelSpec, cfg: OffSupportConfig, triples=None) -> Estimate:
    """Sampled weak off-support norm with ``f0`` restricted to a ``gamma``-major subset of ``Q0``."""
    return offsupport_scan(b, K, cfg, triples)["weak"]


@dataclass
class TripleTerm:
    """One summand ``<[b,T]_slot(f1, f2), f0>`` of a super-diagonal configuration."""

    f1: LatticeFunction
    f2: LatticeFunction
    f0: LatticeFunction
    cubes: tuple = ()
    slot: int = 1
    value: float | None = None  # cached pairing


def _stack(funcs: list[LatticeFunction], box: Cube, h: float) -> LatticeFunction:
    acc = np.zeros((int(round(box.side / h)),) * box.d)
    frame = LatticeFunction.zeros(box, h)
    for f in funcs:
        e = f.embed(box)
        acc += e.sup_norm() * (e.samples != 0)
    return frame.with_samples(acc)


def normalization_N(terms: list[TripleTerm], p: float, q: float, r: float) -> tuple[float, dict]:
    """``||sum ||f1||_inf 1_{supp f1}||_p  ||... f2 ...||_q  ||... f0 ...||_{r'}`` (``r' = inf`` at ``r = 1``)."""
    h = terms[0].f0.h
    box = bounding_cube([t.f0.box for t in terms] + [t.f1.box for t in terms] + [t.f2.box for t in terms],
                        h, anchor=terms[0].f0.box)
    S1 = _stack([t.f1 for t in terms], box, h)
    S2 = _stack([t.f2 for t in terms], box, h)
    S0 = _stack([t.f0 for t in terms], box, h)
    rp = math.inf if r == 1 else r / (r - 1)
    n1, n2, n0 = S1.lp_norm(p), S2.lp_norm(q), S0.lp_norm(rp)
    return n1 * n2 * n0, {"N1_p": n1, "N2_q": n2, "N0_rprime": n0, "r_prime": rp}


def superdiag_offsupport_est(b: LatticeFunction, K: KernelSpec, cfg: OffSupportConfig,
                             ledger: list[TripleTerm]) -> Estimate:
    """``sum_k |<[b,T](f1k, f2k), f0k>| / N_{p,q,r'}`` for one configuration."""
    if not ledger:
        raise ValueError("empty ledger")
    if cfg.r < 1:
        raise ValueError("the super-diagonal norm needs r >= 1")
    total = 0.0
    vals = []
    for t in ledger:
        v = t.value
        if v is None:
            v = commutator_pairing(t.slot, b, K, t.f1, t.f2, t.f0)
        vals.append(v)
        total += abs(v)
    N, parts = normalization_N(ledger, cfg.p, cfg.q, cfg.r)
    value = total / N if N > 0 else 0.0
    return Estimate("superdiag_offsupport", value, {"terms": len(ledger)},
                    {"sum_abs_pairings": total, "N": N, **parts, "pairings": vals})

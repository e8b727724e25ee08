"""Approximate weak factorization, the oscillation lower bound and the super-diagonal ledger.

All three work in the slot-1 form.  Slot 2 is handled by callers through
:func:`bicomm.kernels.swap_inputs`, which exchanges the roles of the inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import maximal_function
from .kernels import CubeTriple, KernelSpec, bootstrap_cubes
from .lattice import Cube, DyadicGrid, LatticeFunction, bounding_cube
from .norms import TripleTerm, classify_exponents, major_subset, normalization_N
from .operators import contract_kernel
from .sparse import reflect_family, sparse_decompose, stopping_family

__all__ = [
    "DegenerateConfiguration",
    "AwfDecomposition",
    "factorize",
    "oscillation_dual",
    "oscillation_lower_bound",
    "LedgerEntry",
    "SuperdiagLedger",
    "build_superdiag_ledger",
]


class DegenerateConfiguration(ValueError):
    def __init__(self, minimum, threshold, where):
        super().__init__(f"A too small / degenerate configuration: min |{where}| = {minimum:.3e} "
                         f"below threshold {threshold:.3e}")
        self.minimum = minimum
        self.threshold = threshold


@dataclass
class AwfDecomposition:
    """``f = [h1 T^{1*}(g0,g2) - g0 T(h1,g2)] + [h0 T(g1,g2) - g1 T^{1*}(h0,g2)] + f_tilde``.

    ``h1`` and ``f_tilde`` live on ``Q1``; ``h0`` and ``w_tilde`` on ``Q0``.
    ``J`` is the contracted kernel ``sum_z K(x, y, z) g2(z) h^{2d}`` on
    ``Q0 x Q1`` cells, from which every operator value above is read.
    """

    h1: LatticeFunction
    h0: LatticeFunction
    w_tilde: LatticeFunction
    f_tilde: LatticeFunction
    cubes: CubeTriple
    bounds_report: dict
    J: np.ndarray = field(repr=False)
    parts: dict = field(default_factory=dict, repr=False)

    def reconstruction(self, box: Cube | None = None) -> LatticeFunction:
        """The right-hand side of the decomposition on ``box`` (default: covering Q0 and Q1)."""
        box = box or self.parts["box"]
        p = self.parts
        total = (p["h1T1s"].embed(box) - self.w_tilde.embed(box)) \
            + (p["h0Tg"].embed(box) - p["g1T1s_h0"].embed(box)) + self.f_tilde.embed(box)
        return total


def _on(f: LatticeFunction, Q: Cube) -> np.ndarray:
    return f.values_on(Q).reshape(-1)


def factorize(K: KernelSpec, triple: CubeTriple, f: LatticeFunction, g0: LatticeFunction,
              g1: LatticeFunction, g2: LatticeFunction, mean_tol: float = 1e-10,
              threshold_factor: float = 1e-3) -> AwfDecomposition:
    """Factorize a zero-mean ``f`` supported in ``Q1``.

    ``h1 = f / T^{1*}(g0, g2)`` on ``Q1``, ``w_tilde = g0 T(h1, g2)``,
    ``h0 = w_tilde / T(g1, g2)`` on ``Q0`` and
    ``f_tilde = g1 T^{1*}(h0, g2)``.  Denominators must exceed
    ``threshold_factor * A^{-2d} ||g0||_inf ||g2||_inf`` on the supports they
    divide.
    """
    Q0, Q1, Q2 = triple.cubes
    h, d = f.h, f.d
    w = h**d
    for F, Q, name in ((f, Q1, "f"), (g0, Q0, "g0"), (g1, Q1, "g1"), (g2, Q2, "g2")):
        if np.any(F.samples[~F.mask(Q)] != 0):
            raise ValueError(f"{name} is not supported in its cube")
    fv, g0v, g1v, g2v = _on(f, Q1), _on(g0, Q0), _on(g1, Q1), _on(g2, Q2)
    fsup = float(np.abs(fv).max(initial=0.0))
    if abs(fv.sum() * w) > mean_tol * max(fsup, 1e-300) * Q1.volume:
        raise ValueError("f must have zero mean on Q1")

    X = LatticeFunction.zeros(Q0, h).centers().reshape(-1, d)
    Y = LatticeFunction.zeros(Q1, h).centers().reshape(-1, d)
    Z = LatticeFunction.zeros(Q2, h).centers().reshape(-1, d)
    nz = g2v != 0
    J = contract_kernel(K, X, Y, Z[nz], g2v[nz] * w) * w  # J[x, y] includes the y cell volume

    T1s = g0v @ J                      # T^{1*}(g0, g2)(y)
    A = triple.A
    thr = threshold_factor * A ** (-2 * d) * float(np.abs(g0v).max(initial=0)) * float(np.abs(g2v).max(initial=0))
    supp_f = fv != 0
    if supp_f.any():
        m = float(np.abs(T1s[supp_f]).min())
        if not m > thr:
            raise DegenerateConfiguration(m, thr, "T^{1*}(g0,g2)")
    h1v = np.zeros_like(fv)
    h1v[supp_f] = fv[supp_f] / T1s[supp_f]
    Th1 = J @ h1v                       # T(h1, g2)(x)
    wv = g0v * Th1
    Tg = J @ g1v                        # T(g1, g2)(x)
    supp_w = wv != 0
    h0v = np.zeros_like(wv)
    if supp_w.any():
        m = float(np.abs(Tg[supp_w]).min())
        if not m > thr:
            raise DegenerateConfiguration(m, thr, "T(g1,g2)")
        h0v[supp_w] = wv[supp_w] / Tg[supp_w]
    T1s_h0 = h0v @ J                   # T^{1*}(h0, g2)(y)
    ftv = g1v * T1s_h0

    shape0, shape1 = (int(round(Q0.side / h)),) * d, (int(round(Q1.side / h)),) * d
    L0 = lambda v: LatticeFunction(Q0, h, v.reshape(shape0))  # noqa: E731
    L1 = lambda v: LatticeFunction(Q1, h, v.reshape(shape1))  # noqa: E731
    h1, h0, wt, ft = L1(h1v), L0(h0v), L0(wv), L1(ftv)

    # the two computations of the mean of f_tilde traverse different sums
    mean_direct = float(ftv.sum() * w)
    mean_adjoint = float((h0v * Tg).sum() * w)
    scale = max(float(np.abs(ftv).sum()), float(np.abs(h0v * Tg).sum())) * w
    om = float(K.omega(1.0 / A))
    fs = fsup if fsup > 0 else math.nan
    report = {
        "ratio_h1": float(np.abs(h1v).max(initial=0)) / (A ** (2 * d) * fs),
        "ratio_h0": float(np.abs(h0v).max(initial=0)) / (A ** (2 * d) * om * fs),
        "ratio_err": float(np.abs(ftv).max(initial=0)) / (om * fs),
        "err_relative": float(np.abs(ftv).max(initial=0)) / fs,
        "mean_f_tilde": mean_direct,
        "mean_f_tilde_adjoint": mean_adjoint,
        "mean_scale": scale,
        "mean_agreement": abs(mean_direct - mean_adjoint) / scale if scale > 0 else 0.0,
        "min_T1s": float(np.abs(T1s[supp_f]).min()) if supp_f.any() else math.nan,
        "min_Tg": float(np.abs(Tg[supp_w]).min()) if supp_w.any() else math.nan,
        "threshold": thr,
        "g_ratios": [_g_ratio(g0v), _g_ratio(g1v), _g_ratio(g2v)],
        "omega_inv_A": om,
        "A": A,
    }
    box = bounding_cube([Q0, Q1], h, anchor=Q1)
    parts = {"h1T1s": L1(h1v * T1s), "h0Tg": L0(h0v * Tg), "g1T1s_h0": L1(g1v * T1s_h0),
             "T1s": L1(T1s), "Tg": L0(Tg), "Th1": L0(Th1), "box": box}
    dec = AwfDecomposition(h1, h0, wt, ft, triple, report, J, parts)
    resid = (dec.reconstruction(box) - f.embed(box)).sup_norm()
    report["residual"] = resid
    report["residual_relative"] = resid / fs if fsup > 0 else resid
    return dec


def _g_ratio(g: np.ndarray) -> float:
    s = float(np.abs(g).max(initial=0))
    return float(np.abs(g).mean()) / s if s > 0 else math.nan


def oscillation_dual(b: LatticeFunction, Q: Cube) -> LatticeFunction:
    """``f = s - <s>_Q`` with ``s = sign(b - <b>_Q)`` on ``Q``.

    ``f`` has zero mean, ``|f| <= 2`` and ``int b f = |Q| osc(b; Q)``.
    """
    v = b.values_on(Q)
    s = np.sign(v - v.mean())
    f = s - s.mean()
    return LatticeFunction(Q, b.h, f)


def _comm_pairings(b, tri, J, h1v, g0v, g1v, h0v, h):
    """``<[b,T]_1(h1, g2), g0>`` and ``<[b,T]_1(g1, g2), h0>`` from the contracted kernel."""
    w = h ** b.d
    bx = _on(b, tri.Q0)
    by = _on(b, tri.Q1)
    B = bx[:, None] - by[None, :]
    p1 = float(g0v @ ((B * J) @ h1v) * w)
    p2 = float(h0v @ ((B * J) @ g1v) * w)
    return p1, p2


def oscillation_lower_bound(b: LatticeFunction, K: KernelSpec, Q1: Cube, gamma: float = 1.0,
                            A: float = 32.0, triple: CubeTriple | None = None) -> dict:
    """``|Q1| osc(b; Q1)`` against the two commutator pairings of its factorization.

    ``g1 = 1_{Q1}``, ``g2 = 1_{Q2}``, and ``g0`` is the indicator of ``Q0``
    (``gamma = 1``) or of the ``gamma``-major subset of ``Q0`` on which
    ``|[b,T]_1(g1, g2)|`` is smallest.
    """
    h = b.h
    tri = triple or bootstrap_cubes(K, Q1, A, h=h, diagnostics=False)
    for Q in tri.cubes:
        if not b.box.contains(Q):
            raise ValueError("symbol box too small: it must cover the bootstrap triple")
    f = oscillation_dual(b, Q1)
    bv = _on(b, Q1)
    w = h ** b.d
    osc = float(np.mean(np.abs(bv - bv.mean())))
    osc_mass = osc * Q1.volume
    g1 = LatticeFunction.indicator(Q1, Q1, h)
    g2 = LatticeFunction.indicator(tri.Q2, tri.Q2, h)
    g0 = LatticeFunction.indicator(tri.Q0, tri.Q0, h)
    if gamma < 1:
        X = LatticeFunction.zeros(tri.Q0, h).centers().reshape(-1, b.d)
        Y = LatticeFunction.zeros(Q1, h).centers().reshape(-1, b.d)
        Z = LatticeFunction.zeros(tri.Q2, h).centers().reshape(-1, b.d)
        Jg = contract_kernel(K, X, Y, Z, np.full(len(Z), w)) * w
        B = _on(b, tri.Q0)[:, None] - bv.reshape(-1)[None, :]
        u = (B * Jg) @ np.ones(len(Y))
        F = major_subset(u, gamma)
        g0 = g0.with_samples(F.reshape(g0.shape).astype(float))
    dec = factorize(K, tri, f, g0, g1, g2)
    g0v, g1v = _on(g0, tri.Q0), _on(g1, Q1)
    p1, p2 = _comm_pairings(b, tri, dec.J, _on(dec.h1, Q1), g0v, g1v, _on(dec.h0, tri.Q0), h)
    int_bf = float((bv.reshape(-1) * _on(f, Q1)).sum() * w)
    int_bft = float((bv.reshape(-1) * _on(dec.f_tilde, Q1)).sum() * w)
    denom = abs(p1) + abs(p2)
    const = osc_mass / denom if denom > 0 else math.nan
    om = float(K.omega(1.0 / tri.A))
    return {
        "osc": osc,
        "osc_mass": osc_mass,
        "pairing1": p1,
        "pairing2": p2,
        "constant": const,
        "int_bf": int_bf,
        "int_b_ftilde": int_bft,
        "identity_residual": abs(int_bf - (-p1 + p2 + int_bft)),
        "absorbed_term": abs(int_bft),
        "absorption_ok": abs(int_bft) <= 0.5 * osc_mass + 1e-300 if osc_mass > 0 else True,
        "omega_bound_term": om * osc_mass,
        "h1_constant": float(np.abs(dec.h1.samples).max()) / tri.A ** (2 * b.d),
        "h0_constant": (float(np.abs(dec.h0.samples).max()) / (tri.A ** (2 * b.d) * om)),
        "gamma": gamma,
        "g0_fraction": float(_on(g0, tri.Q0).mean()),
        "triple": tri,
        "decomposition": dec,
    }


@dataclass
class LedgerEntry:
    """One stopping cube ``P1`` of the super-diagonal ledger with its two scaled pairings."""

    P1: Cube
    P0: Cube
    P2: Cube
    alphas: tuple
    pairings: tuple
    f_P: LatticeFunction
    terms: tuple = ()
    unscaled: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        c = lambda Q: {"corner": list(Q.corner), "side": Q.side}  # noqa: E731
        return {"P1": c(self.P1), "P0": c(self.P0), "P2": c(self.P2), "alphas": list(self.alphas),
                "pairings": list(self.pairings), "unscaled": list(self.unscaled),
                "sup_f_P": self.f_P.sup_norm(), "diagnostics": self.diagnostics}


@dataclass
class SuperdiagLedger:
    entries: list
    estimate: float
    normalization: dict
    report: dict

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def terms(self, which: str = "all") -> list:
        out = []
        for e in self.entries:
            if which in ("all", "a"):
                out.append(e.terms[0])
            if which in ("all", "b"):
                out.append(e.terms[1])
        return out

    def to_record(self) -> dict:
        return {"entries": [e.to_record() for e in self.entries], "estimate": self.estimate,
                "normalization": self.normalization,
                "report": {k: v for k, v in self.report.items() if np.isscalar(v) or isinstance(v, (list, dict))}}


def build_superdiag_ledger(b: LatticeFunction, K: KernelSpec, Q: Cube, exponents: dict,
                           f: LatticeFunction, A: float = 32.0, M: float | None = None,
                           max_depth: int | None = None, grid: DyadicGrid | None = None,
                           tol: float = 1e-9) -> SuperdiagLedger:
    """Stopping-family factorization of ``f`` and the super-diagonal pairings it produces.

    ``f`` must satisfy ``1_Q f = f``, ``int f = 0``, ``||f||_inf <= M`` and
    ``||f||_{s'} <= 1``.  Each stopping cube ``P1`` receives a bootstrap triple
    in the same dyadic grid, ``g0 = 1_{E_{P0}}`` from the reflected family,
    ``g1 = 1_{P1}``, ``g2 = 1_{P2}`` and the scalings
    ``alpha0 = m^{s'/r' - 1}``, ``alpha1 = m^{s'/p}``, ``alpha2 = m^{s'/q}``
    with ``m = ||f_P||_inf``.
    """
    p, q, r = float(exponents["p"]), float(exponents["q"]), float(exponents["r"])
    reg = classify_exponents(p, q, r, Q.d)
    if reg.name != "super-diagonal" or r < 1:
        raise ValueError(f"exponent regime mismatch: {reg.name} with r = {r}")
    s = float(exponents.get("s", reg.s))
    if abs(1 / r - (1 / s + 1 / p + 1 / q)) > 1e-9:
        raise ValueError("exponent regime mismatch: 1/r != 1/s + 1/p + 1/q")
    sp = s / (s - 1)
    rp_inv = 1.0 - 1.0 / r   # s'/r' uses 1/r'
    h, d = f.h, f.d
    w = h**d
    grid = grid or DyadicGrid(d)
    # the function class
    if np.any(f.samples[~f.mask(Q)] != 0):
        raise ValueError("f violates the function class: not supported in Q")
    fQ = f.crop(Q)
    if abs(fQ.integral()) > tol * max(fQ.sup_norm(), 1e-300) * Q.volume:
        raise ValueError("f violates the function class: nonzero mean")
    if fQ.lp_norm(sp) > 1 + tol:
        raise ValueError(f"f violates the function class: ||f||_(s') = {fQ.lp_norm(sp):.6g} > 1")
    if M is not None and fQ.sup_norm() > M * (1 + tol):
        raise ValueError("f violates the function class: ||f||_inf > M")

    dec = sparse_decompose(fQ, Q, tol=max(tol, 1e-10), max_depth=max_depth)
    S = dec.family
    tris = {P: bootstrap_cubes(K, P, A, grids=(grid, grid), h=h, diagnostics=False) for P in S.cubes}
    dist_factor = A * math.sqrt(d) + 2
    R = reflect_family(S, grid, lambda P: tris[P].Q0, dist_factor=dist_factor, size_ratio=4.0)
    work = bounding_cube([R.box, Q] + [t.Q2 for t in tris.values()], h, anchor=Q)
    if not b.box.contains(work):
        raise ValueError("symbol box too small: it must cover every ledger triple")

    entries = []
    sum_bft = 0.0
    sum_bfP = 0.0
    fts = []
    for P in S.cubes:
        tri = tris[P]
        fP = dec[P].crop(P)
        m = fP.sup_norm()
        if m == 0:
            continue
        E = R.majors[tri.Q0]
        g0 = LatticeFunction(R.box, h, E.astype(float)).crop(tri.Q0)
        g1 = LatticeFunction.indicator(P, P, h)
        g2 = LatticeFunction.indicator(tri.Q2, tri.Q2, h)
        fa = factorize(K, tri, fP, g0, g1, g2, mean_tol=1e-8)
        a0, a1, a2 = m ** (sp * rp_inv - 1), m ** (sp / p), m ** (sp / q)
        g0v, g1v = _on(g0, tri.Q0), _on(g1, P)
        h1v, h0v = _on(fa.h1, P), _on(fa.h0, tri.Q0)
        pa, pb = _comm_pairings(b, tri, fa.J, h1v, g0v, g1v, h0v, h)
        # scaled forms; the pairing is trilinear so the values agree up to rounding
        sa = _comm_pairings(b, tri, fa.J * a2, h1v * (a1 / m), g0v * (a0 * m), g1v, h0v, h)[0]
        sb = _comm_pairings(b, tri, fa.J * a2, h1v, g0v, g1v * a1, h0v * a0, h)[1]
        ta = TripleTerm(fa.h1 * (a1 / m), g2 * a2, g0 * (a0 * m), tri.cubes, 1, sa)
        tb = TripleTerm(g1 * a1, g2 * a2, fa.h0 * a0, tri.cubes, 1, sb)
        bP = _on(b, P)
        ibft = float((bP * _on(fa.f_tilde, P)).sum() * w)
        ibfP = float((bP * _on(fP, P)).sum() * w)
        sum_bft += ibft
        sum_bfP += abs(ibfP)
        fts.append(fa.f_tilde)
        entries.append(LedgerEntry(P, tri.Q0, tri.Q2, (a0, a1, a2), (sa, sb), fP, (ta, tb), (pa, pb),
                                   {"residual": fa.bounds_report["residual"],
                                    "ratio_err": fa.bounds_report["ratio_err"],
                                    "err_relative": fa.bounds_report["err_relative"],
                                    "mean_agreement": fa.bounds_report["mean_agreement"],
                                    "int_b_f_tilde": ibft, "int_b_f_P": ibfP,
                                    "alpha_product": a0 * a1 * a2}))
    if not entries:
        raise ValueError("f is identically zero")

    terms_a = [e.terms[0] for e in entries]
    terms_b = [e.terms[1] for e in entries]
    Na, pa_ = normalization_N(terms_a, p, q, r)
    Nb, pb_ = normalization_N(terms_b, p, q, r)
    Nall, pall = normalization_N(terms_a + terms_b, p, q, r)
    Sa = sum(abs(t.value) for t in terms_a)
    Sb = sum(abs(t.value) for t in terms_b)
    est = max(Sa / Na if Na > 0 else 0.0, Sb / Nb if Nb > 0 else 0.0,
              (Sa + Sb) / Nall if Nall > 0 else 0.0)

    bQ = _on(b, Q)
    int_bf = float((bQ * fQ.samples.reshape(-1)).sum() * w)
    ft_sum = LatticeFunction.zeros(Q, h)
    for ft in fts:
        ft_sum = ft_sum + ft.embed(Q)
    identity = sum(e.unscaled[1] - e.unscaled[0] for e in entries) + sum_bft
    # the error function against the maximal-function bound
    Mf = maximal_function(fQ)
    stack = np.zeros(fQ.shape)
    for e in entries:
        stack += e.f_P.sup_norm() * fQ.mask(e.P1)
    # sparse bound: ||sum a 1_{P^i}||_v against ||sum a 1_{E_{P1}}||_v
    sparse_ratio = {}
    for label, u, v in (("P1", sp / p, p), ("P2", sp / q, q)):
        lhs = np.zeros(LatticeFunction.zeros(work, h).shape)
        rhs = np.zeros_like(lhs)
        frame = LatticeFunction.zeros(work, h)
        for e in entries:
            a = e.f_P.sup_norm() ** u
            cube = e.P1 if label == "P1" else e.P2
            lhs += a * frame.mask(cube)
            rhs += a * LatticeFunction(S.box, h, S.majors[e.P1].astype(float)).embed(work).samples
        nl = float((np.sum(lhs**v) * w) ** (1 / v))
        nr = float((np.sum(rhs**v) * w) ** (1 / v))
        sparse_ratio[label] = nl / nr if nr > 0 else math.nan
    tail = 0.0
    if max_depth is not None:
        full = stopping_family(fQ, Q)
        capped = set(S.cubes)
        deeper = [P for P in full.cubes if P not in capped]
        mask = np.zeros(fQ.shape, dtype=bool)
        for P in deeper:
            mask |= fQ.mask(P)
        tail = float(mask.sum() * w)
    om = float(K.omega(1.0 / A))
    E_stack = sum(R.majors[e.P0].astype(int) for e in entries)
    report = {
        "int_bf": int_bf,
        "identity_residual": abs(int_bf - identity),
        "int_b_f_tilde_sigma": float((bQ * ft_sum.samples.reshape(-1)).sum() * w),
        "error_bound_rhs": om * sum_bfP,
        "f_tilde_sigma_sup": ft_sum.sup_norm(),
        "f_tilde_sigma_vs_Mf": float(np.max(np.abs(ft_sum.samples) / np.where(Mf.samples > 0, Mf.samples, np.inf))),
        "sparse_stack_vs_Mf": float(np.max(stack / np.where(Mf.samples > 0, Mf.samples, np.inf))),
        "sparse_bound_ratio": sparse_ratio,
        "majors_disjoint": bool(np.max(E_stack, initial=0) <= 1),
        "reflected_gamma": float(min(R.majors[e.P0].sum() / round(e.P0.side / h) ** d for e in entries)),
        "family_size": len(S.cubes),
        "decomposition_constant": dec.constant,
        "tail_mass": tail,
        "sum_a": Sa, "sum_b": Sb, "N_a": Na, "N_b": Nb, "N_all": Nall,
        "omega_inv_A": om,
        "max_alpha_product_error": max(abs(e.diagnostics["alpha_product"] - 1) for e in entries),
        "max_residual": max(e.diagnostics["residual"] for e in entries),
    }
    norm = {"a": pa_, "b": pb_, "all": pall}
    return SuperdiagLedger(entries, est, norm, report)

"""Experiment orchestration for the three exponent regimes and the smaller CLI tasks.

Reports are plain dicts made of JSON types.  The only field that changes
between identical runs is ``timestamp``; :func:`report_json` sorts keys so
equal reports serialize to equal bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .awf import build_superdiag_ledger, factorize, oscillation_lower_bound
from .budget import ResourceCapExceeded, evaluation_budget, evaluations
from .config import ExperimentConfig
from .kernels import (KernelSpec, bootstrap_cubes, calibrate_A, kernel_from_config, probe_nondegeneracy,
                      swap_inputs, verify_regularity, verify_size)
from .lattice import Cube, LatticeFunction
from .norms import (CubeSampler, Estimate, OffSupportConfig, _jsonable, _triples, _TripleData,
                    bmo_norm_est, dot_ls_norm, holder_seminorm_est, offsupport_scan, weak_lr_quasinorm)
from .operators import contract_kernel
from .sparse import stopping_family
from .symbols import symbol_library

__all__ = [
    "ExperimentReport",
    "build_kernel",
    "build_symbol",
    "resolve_A",
    "estimate_evaluations",
    "run_experiment",
    "run_probe",
    "run_bootstrap",
    "run_awf",
    "run_norms",
    "report_json",
    "ratio_table_csv",
    "write_report",
    "ls_dual_function",
    "holder_chain",
]


@dataclass
class ExperimentReport:
    regime: str
    estimates: dict
    ratios: list
    witnesses: dict
    runtime: dict
    config: dict
    extra: dict

    def to_record(self) -> dict:
        return {"regime": self.regime, "estimates": self.estimates, "ratios": self.ratios,
                "witnesses": self.witnesses, "runtime": self.runtime, "config": self.config,
                **self.extra}


# building blocks

def build_kernel(cfg: ExperimentConfig, base_dir=None) -> KernelSpec:
    doc = dict(cfg.kernel)
    doc.setdefault("d", cfg.d)
    return kernel_from_config(doc, base_dir)


def _dilate(c, lam):
    if c is None:
        return None
    return Cube(tuple(v * lam for v in c[0]), c[1] * lam)


def build_symbol(cfg: ExperimentConfig, dilation_exp: int = 0) -> LatticeFunction:
    params = dict(cfg.symbol_params)
    params["dilation"] = params.get("dilation", 1.0) * 2.0**dilation_exp
    if "support" in params:  # the Haar support dilates with the symbol
        corner, side = params["support"]
        params["support"] = (tuple(v * 2.0**dilation_exp for v in corner), side * 2.0**dilation_exp)
    return symbol_library(cfg.symbol, params, cfg.box, cfg.h)


def _q1_for(cfg: ExperimentConfig) -> Cube:
    if cfg.region is not None:
        return Cube(tuple(cfg.region[0]), cfg.region[1])
    return Cube((0.0,) * cfg.d, 2.0 ** cfg.levels[0])


def resolve_A(cfg: ExperimentConfig, K: KernelSpec) -> tuple[float, dict]:
    """Numeric ``A``; ``"auto"`` calibrates on the first scan level."""
    if not isinstance(cfg.A, str):
        return float(cfg.A), {"calibrated": False}
    Q1 = Cube((0.0,) * cfg.d, 2.0 ** cfg.levels[0])
    tri = calibrate_A(K, Q1, h=cfg.h)
    return tri.A, {"calibrated": bool(tri.diagnostics.get("calibrated")),
                   "oscillation_integral": tri.diagnostics["oscillation_integral"],
                   "absolute_integral": tri.diagnostics["absolute_integral"]}


def _scan_config(cfg: ExperimentConfig, A: float, j: int) -> OffSupportConfig:
    return OffSupportConfig(p=cfg.p, q=cfg.q, r=cfg.r, s=cfg.s, A=A,
                            levels=tuple(k + j for k in cfg.levels), stride=cfg.stride,
                            max_triples=cfg.max_triples, draws=cfg.draws, ascent=cfg.ascent,
                            gamma=cfg.gamma, seed=cfg.seed, slot=cfg.slot, mirror=cfg.mirror,
                            region=_dilate(cfg.region, 2.0**j))


def _symbol_sampler(cfg: ExperimentConfig, b: LatticeFunction, j: int) -> CubeSampler:
    if cfg.symbol_levels is not None:
        lo, hi = (k + j for k in cfg.symbol_levels)
    else:
        lo = int(math.floor(math.log2(cfg.h))) + 1
        hi = int(math.floor(math.log2(b.box.side)))
    region = _dilate(cfg.region, 2.0**j) or b.box
    return CubeSampler(region, b.h, lo, hi, stride=cfg.stride)


def _ledger_domain(cfg: ExperimentConfig, j: int) -> Cube:
    dom = cfg.ledger_domain or ((0.0,) * cfg.d, 1.0)
    return _dilate(dom, 2.0**j)


def estimate_evaluations(cfg: ExperimentConfig, K: KernelSpec, A: float) -> int:
    """Kernel evaluations the run will request, computed without evaluating the kernel on lattices."""
    G = swap_inputs(K) if cfg.slot == 2 else K
    total = 0
    for j in cfg.dilations:
        if cfg.regime.name == "super-diagonal":
            b = build_symbol(cfg, j)
            dom = _ledger_domain(cfg, j)
            f = ls_dual_function(b, cfg.regime.s, dom)
            if f is None:
                continue
            S = stopping_family(f, dom, max_depth=cfg.ledger_max_depth)
            # one contraction per factorization plus two per Hoelder-chain term
            total += 3 * sum(round(P.side / cfg.h) ** (3 * cfg.d) for P in S.cubes)
        else:
            b = LatticeFunction.zeros(cfg.box, cfg.h)
            costs = [int(np.prod([round(Q.side / cfg.h) ** cfg.d for Q in tri.cubes]))
                     for tri in _triples(b, G, _scan_config(cfg, A, j))]
            # the scan, then one more tensor for the operator lower bound at the witness triple
            total += sum(costs) + max(costs, default=0)
    return int(total)


# super-diagonal pieces

def ls_dual_function(b: LatticeFunction, s: float, domain: Cube, rtol: float = 1e-12):
    """Zero-mean ``f`` on ``domain`` with ``||f||_{s'} = 1`` and ``int b f = ||b||_{dot L^s}``.

    ``f = |b - c|^{s-1} sign(b - c) / ||b - c||_s^{s-1}`` at the minimizing
    ``c``; the small mean left by the finite-precision minimizer is
    projected out and the result renormalized.  ``None`` for constant ``b``.
    """
    ls = dot_ls_norm(b, s, domain, rtol=rtol)
    if ls.value == 0:
        return None
    v = b.values_on(domain)
    g = np.abs(v - ls.c) ** (s - 1) * np.sign(v - ls.c)
    g = g - g.mean()
    f = LatticeFunction(domain, b.h, g)
    return f / f.lp_norm(s / (s - 1))


def holder_chain(b: LatticeFunction, K: KernelSpec, term, c: float, s: float) -> dict:
    """``|<[b,T]_1(f1,f2), f0>| <= ||b - c||_{L^s(U)} (||f0 T(f1,f2)||_{s'} + ||f1 T^{1*}(f0,f2)||_{s'})``.

    ``U`` is the union of the supports of ``f0`` and ``f1``; the two
    summands come from writing ``[b,T]_1 = [b - c, T]_1``.
    """
    h, d = b.h, b.d
    w = h**d
    Q0, Q1, Q2 = term.f0.box, term.f1.box, term.f2.box
    pts = [LatticeFunction.zeros(Q, h).centers().reshape(-1, d) for Q in (Q0, Q1, Q2)]
    f0, f1, f2 = (t.samples.reshape(-1) for t in (term.f0, term.f1, term.f2))
    J = contract_kernel(K, pts[0], pts[1], pts[2], f2 * w) * w
    T12 = J @ f1
    T02 = f0 @ J
    bx, by = b.values_on(Q0).reshape(-1), b.values_on(Q1).reshape(-1)
    lhs = abs(float(f0 @ (((bx[:, None] - by[None, :]) * J) @ f1) * w))
    sp = s / (s - 1)
    m0, m1 = f0 != 0, f1 != 0
    bc = np.concatenate([np.abs(bx[m0] - c), np.abs(by[m1] - c)])
    factor = float((np.sum(bc**s) * w) ** (1 / s))
    n0 = float((np.sum(np.abs(f0 * T12) ** sp) * w) ** (1 / sp))
    n1 = float((np.sum(np.abs(f1 * T02) ** sp) * w) ** (1 / sp))
    rhs = factor * (n0 + n1)
    return {"lhs": lhs, "rhs": rhs, "factor": factor, "holds": bool(lhs <= rhs * (1 + 1e-12) + 1e-300)}


# regimes

def _ratio_row(j, num: Estimate | dict, den: Estimate | dict, label: str) -> dict:
    rec = lambda e: e.to_record() if isinstance(e, Estimate) else _jsonable(e)  # noqa: E731
    nv = float(num.value if isinstance(num, Estimate) else num["value"])
    dv = float(den.value if isinstance(den, Estimate) else den["value"])
    degenerate = not (dv > 0 and nv > 0)
    return {"dilation": j, "ratio_name": label, "numerator": rec(num), "denominator": rec(den),
            "ratio": None if degenerate else nv / dv, "degenerate": degenerate}


def _operator_lower_bound(b, G, tri, p, q, r) -> dict:
    """``||[b,T]_1(1_{Q1}, 1_{Q2}) 1_{Q0}||_{L^{r,inf}} / (|Q1|^{1/p} |Q2|^{1/q})``."""
    T = _TripleData(b, G, tri, b.h)
    u = T.u(np.ones(int(np.prod(T.shape1))), np.ones(int(np.prod(T.shape2))))
    U = LatticeFunction(tri.Q0, b.h, u.reshape(T.shape0))
    val = weak_lr_quasinorm(U, r) / (tri.Q1.volume ** (1 / p) * tri.Q2.volume ** (1 / q))
    return {"value": val, "cubes": tri.cubes, "functions": "indicators"}


def _run_sub_or_diag(cfg, K, A):
    reg = cfg.regime
    est, ratios, wit, scaling = {}, [], {}, None
    for j in cfg.dilations:
        b = build_symbol(cfg, j)
        samp = _symbol_sampler(cfg, b, j)
        sym = bmo_norm_est(b, samp) if reg.name == "diagonal" else holder_seminorm_est(b, reg.alpha, samp)
        scan = offsupport_scan(b, K, _scan_config(cfg, A, j))
        strong, weak = scan["strong"], scan["weak"]
        if strong.witness:
            G = swap_inputs(K) if cfg.slot == 2 else K
            tri = scan["triples"][strong.witness["triple"]]
            op = _operator_lower_bound(b, G, tri, cfg.p, cfg.q, cfg.r)
        else:
            op = {"value": 0.0}
        key = f"dilation_{j}"
        est[key] = {"symbol": sym.to_record(), "offsupport": strong.to_record(),
                    "weak_offsupport": weak.to_record(), "operator_lower_bound": _jsonable(op)}
        ratios.append(_ratio_row(j, sym, weak, f"{sym.norm}/weak_offsupport"))
        ratios.append(_ratio_row(j, sym, strong, f"{sym.norm}/offsupport"))
        ratios.append(_ratio_row(j, weak, strong, "weak_offsupport/offsupport"))
        ratios.append(_ratio_row(j, strong, op, "offsupport/operator_lower_bound"))
        wit[key] = {"triples": len(scan["triples"])}
        if reg.name == "sub-diagonal" and j == cfg.dilations[0]:
            scaling = _scaling_fit(scan, reg.alpha)
    extra = {"scaling": scaling} if scaling is not None else {}
    return est, ratios, wit, extra


def _scaling_fit(scan, alpha) -> dict:
    """Largest raw pairing per cube side against the side, fitted on log-log axes."""
    per = {}
    for tri, raw in zip(scan["triples"], scan["raw_strong"]):
        ell = tri.Q1.side
        per[ell] = max(per.get(ell, 0.0), raw / tri.Q1.volume)
    sides = sorted(per)
    rows = [{"side": ell, "pairing_per_volume": per[ell]} for ell in sides]
    ok = [ell for ell in sides if per[ell] > 0]
    slope = None
    if len(ok) >= 2:
        x = np.log([ell for ell in ok])
        y = np.log([per[ell] for ell in ok])
        slope = float(np.polyfit(x, y, 1)[0])
    return {"rows": rows, "slope": slope, "expected_slope": alpha}


def _run_super(cfg, K, A):
    reg = cfg.regime
    s = reg.s
    G = swap_inputs(K) if cfg.slot == 2 else K
    est, ratios, wit = {}, [], {}
    for j in cfg.dilations:
        b = build_symbol(cfg, j)
        dom = _ledger_domain(cfg, j)
        ls = dot_ls_norm(b, s, dom)
        ls_rec = {"norm": "dot_ls", "value": ls.value, "witness": {"c": ls.c, "bracket": list(ls.bracket)},
                  "sampler_stats": {"evaluations": ls.evaluations, "domain": dom}}
        key = f"dilation_{j}"
        f = ls_dual_function(b, s, dom)
        if f is None:
            led_rec = {"norm": "ledger", "value": 0.0, "witness": {}, "sampler_stats": {}}
            est[key] = {"symbol": _jsonable(ls_rec), "ledger": led_rec}
            ratios.append(_ratio_row(j, ls_rec, led_rec, "dot_ls/ledger"))
            continue
        L = build_superdiag_ledger(b, G, dom, {"p": cfg.p, "q": cfg.q, "r": cfg.r, "s": s}, f, A=A,
                                   M=cfg.ledger_M, max_depth=cfg.ledger_max_depth)
        chain = [holder_chain(b, G, t, ls.c, s) for t in L.terms()]
        led_rec = {"norm": "ledger", "value": L.estimate,
                   "witness": {"entries": len(L), "normalization": L.normalization},
                   "sampler_stats": {k: v for k, v in L.report.items()
                                     if k in ("int_bf", "identity_residual", "tail_mass", "family_size",
                                              "majors_disjoint", "int_b_f_tilde_sigma", "error_bound_rhs",
                                              "sparse_bound_ratio", "max_alpha_product_error")}}
        int_rec = {"norm": "int_bf", "value": L.report["int_bf"], "witness": {"dual": "ls"}}
        est[key] = {"symbol": _jsonable(ls_rec), "ledger": _jsonable(led_rec),
                    "holder_chain": {"all_hold": all(c["holds"] for c in chain),
                                     "max_lhs_over_rhs": max((c["lhs"] / c["rhs"] for c in chain if c["rhs"] > 0),
                                                             default=0.0),
                                     "terms": chain}}
        ratios.append(_ratio_row(j, ls_rec, led_rec, "dot_ls/ledger"))
        ratios.append(_ratio_row(j, int_rec, led_rec, "int_bf/ledger"))
        wit[key] = {"ledger": L.to_record()}
    return est, ratios, wit, {}


def run_experiment(cfg: ExperimentConfig, base_dir=None) -> dict:
    """Run the regime's chain for every dilation and return a JSON-ready report."""
    t0 = time.perf_counter()
    K = build_kernel(cfg, base_dir)
    A, A_info = resolve_A(cfg, K)
    reg = cfg.regime
    need = estimate_evaluations(cfg, K, A)
    if need > cfg.eval_cap:
        raise ResourceCapExceeded(f"estimated {need:.3g} kernel evaluations exceed the cap {cfg.eval_cap:.3g}")
    cap = None if math.isinf(cfg.eval_cap) else cfg.eval_cap
    with evaluation_budget(cap):
        if reg.name == "super-diagonal":
            est, ratios, wit, extra = _run_super(cfg, K, A)
        else:
            est, ratios, wit, extra = _run_sub_or_diag(cfg, K, A)
        used = evaluations()
    rep = ExperimentReport(
        regime=reg.name,
        estimates=est,
        ratios=ratios,
        witnesses=wit,
        runtime={"kernel_evaluations": used, "estimated_evaluations": need, "A": A, "A_calibration": A_info},
        config=cfg.to_doc(),
        extra={"alpha": reg.alpha, "s": reg.s, **extra},
    )
    out = _jsonable(rep.to_record())
    out["timestamp"] = {"utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                        "elapsed_s": round(time.perf_counter() - t0, 3)}
    return out


# smaller tasks behind the CLI

def run_probe(cfg: ExperimentConfig, base_dir=None) -> dict:
    K = build_kernel(cfg, base_dir)
    rng = np.random.default_rng(cfg.seed)
    size = verify_size(K, rng=rng)
    reg = verify_regularity(K, rng=rng)
    Q1 = _q1_for(cfg)
    A, _ = resolve_A(cfg, K)
    wits = {}
    for slot in (1, 2):
        w = probe_nondegeneracy(K, Q1.center, A * Q1.diameter / 4, slot=slot)
        wits[f"slot{slot}"] = {"x": w.x, "z": w.z, "value": w.value,
                               "normalized": abs(w.value) * (A * Q1.diameter / 4) ** (2 * cfg.d)}
    return _jsonable({"kernel": K.name, "size": {"worst_ratio": size.worst_ratio, "samples": size.samples,
                                                 "C_K": size.C_K},
                      "regularity": {"worst_modulus_ratio": reg.worst_modulus_ratio, "samples": reg.samples,
                                     "skipped": reg.skipped},
                      "nondegeneracy": wits, "config": cfg.to_doc()})


def run_bootstrap(cfg: ExperimentConfig, base_dir=None) -> dict:
    K = build_kernel(cfg, base_dir)
    Q1 = _q1_for(cfg)
    if isinstance(cfg.A, str):
        tri = calibrate_A(K, Q1, h=cfg.h)
    else:
        tri = bootstrap_cubes(K, Q1, cfg.A, h=cfg.h)
    return _jsonable({"triple": tri.to_record(), "config": cfg.to_doc()})


def run_awf(cfg: ExperimentConfig, base_dir=None) -> dict:
    """Factorize the Haar function of ``Q1`` and run the oscillation bound for the configured symbol."""
    K = build_kernel(cfg, base_dir)
    Q1 = _q1_for(cfg)
    A, _ = resolve_A(cfg, K)
    G = swap_inputs(K) if cfg.slot == 2 else K
    tri = bootstrap_cubes(G, Q1, A, h=cfg.h, diagnostics=False)
    mid = Q1.corner[0] + Q1.side / 2
    f = LatticeFunction.from_callable(lambda *X: np.where(X[0] < mid, 1.0, -1.0), Q1, cfg.h)
    ind = [LatticeFunction.indicator(Q, Q, cfg.h) for Q in tri.cubes]
    dec = factorize(G, tri, f, ind[0], ind[1], ind[2])
    b = build_symbol(cfg)
    osc = oscillation_lower_bound(b, G, Q1, gamma=cfg.gamma, A=A, triple=tri)
    osc = {k: v for k, v in osc.items() if k not in ("triple", "decomposition")}
    return _jsonable({"triple": tri.to_record(), "bounds_report": dec.bounds_report, "oscillation": osc,
                      "config": cfg.to_doc()})


def run_norms(cfg: ExperimentConfig, base_dir=None) -> dict:
    K = build_kernel(cfg, base_dir)
    A, _ = resolve_A(cfg, K)
    b = build_symbol(cfg)
    reg = cfg.regime
    samp = _symbol_sampler(cfg, b, 0)
    out = {"regime": reg.name, "bmo": bmo_norm_est(b, samp).to_record()}
    if reg.name == "sub-diagonal":
        out["holder"] = holder_seminorm_est(b, reg.alpha, samp).to_record()
    if reg.name == "super-diagonal":
        ls = dot_ls_norm(b, reg.s, _ledger_domain(cfg, 0))
        out["dot_ls"] = {"value": ls.value, "c": ls.c, "bracket": list(ls.bracket)}
    else:
        with evaluation_budget(None if math.isinf(cfg.eval_cap) else cfg.eval_cap):
            scan = offsupport_scan(b, K, _scan_config(cfg, A, 0))
        out["offsupport"] = scan["strong"].to_record()
        out["weak_offsupport"] = scan["weak"].to_record()
    out["config"] = cfg.to_doc()
    return _jsonable(out)


# persistence

def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def ratio_table_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dilation", "ratio_name", "numerator", "denominator", "ratio", "degenerate"])
    for row in report.get("ratios", []):
        w.writerow([row["dilation"], row["ratio_name"], repr(row["numerator"]["value"]),
                    repr(row["denominator"]["value"]), "" if row["ratio"] is None else repr(row["ratio"]),
                    row["degenerate"]])
    return buf.getvalue()


def write_report(report: dict, path, with_csv: bool = True) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report_json(report))
    if with_csv and report.get("ratios"):
        path.with_suffix(".csv").write_text(ratio_table_csv(report))

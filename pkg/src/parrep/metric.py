"""Moment-map equations and metric flow for weighted pairs.

The equations are the King normal form from the quiver translation: one
Hermitian metric per quiver vertex, natural-embedding arm maps, and at each
vertex

    sum_in x x*  -  sum_out x* x  =  -w_v Id

with adjoints taken in the vertex metrics.  ``residuals(wp, h)`` evaluates
them with the arm metrics restricted from h, which reproduces the single-h
form (the compression of the h-orthogonal projection onto the next flag
subspace, against the weight gap plus one); the solver flows all vertex
metrics, since for generic weight gaps the restricted-metric system has
constant-trace obstructions and no solution even on polystable pairs.  The
index-shifted reading of the arm equations is recorded alongside as a
diagnostic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .linalg import HermitianMetric, frob
from .pairs import WeightedPair
from .quiver import QuiverRep, StarQuiver, encode_weighted


@dataclass
class SolverOptions:
    tol: float = 1e-8
    max_steps: int = 100_000
    eta: float = 1e-2
    eta_max: float = 1.0
    cond_limit: float = 1e12
    stall_window: int = 500
    stall_improvement: float = 1e-14
    initial_h: HermitianMetric | None = None
    record_history: bool = True


@dataclass
class MomentResiduals:
    central: np.ndarray
    arm: dict  # (puncture, level) -> residual matrix
    total_norm: float
    arm_statement: dict = field(default_factory=dict)  # index-shifted reading
    trace_defect: float = 0.0

    def all_blocks(self):
        yield "u", self.central
        for key, m in sorted(self.arm.items()):
            yield key, m


@dataclass
class MetricState:
    h: HermitianMetric
    arm_metrics: dict  # (puncture, level) -> gram matrix
    step_count: int
    residual_history: list
    total_norm: float
    converged: bool
    max_trace_defect: float


@dataclass
class DivergenceCertificate:
    reason: str  # "condition_blowup" | "stalled"
    best_total_norm: float
    condition_number: float
    steps: int
    residual_history: list
    best_h: HermitianMetric


class _KingSystem:
    """Arrow maps, vertex weights, and residual evaluation on metric tuples."""

    def __init__(self, wp: WeightedPair):
        self.wp = wp
        x, w = encode_weighted(wp)
        self.quiver: StarQuiver = x.quiver
        self.rep: QuiverRep = x
        self.dims = self.quiver.dimension_vector()
        self.theta = {v: -float(w[v]) for v in self.dims}
        self.vertices = list(self.dims)
        self.in_arrows = {v: [] for v in self.vertices}
        self.out_arrows = {v: [] for v in self.vertices}
        for a in self.quiver.arrows:
            self.in_arrows[a.tgt].append(a)
            self.out_arrows[a.src].append(a)

    def identity_metrics(self, h0: HermitianMetric | None = None) -> dict:
        metrics = {}
        for v, d in self.dims.items():
            metrics[v] = np.eye(d, dtype=complex)
        if h0 is not None:
            metrics["u"] = h0.gram.copy()
            metrics.update(self.restrict_central(h0.gram, only_arms=True))
        return metrics

    def restrict_central(self, h_gram, only_arms: bool = False) -> dict:
        """Arm metrics induced by a central metric through the flag chain."""
        out = {} if only_arms else {"u": h_gram}
        for i, f in enumerate(self.wp.pair.flags, start=1):
            chain = f.orthonormal_chain()
            for l in range(1, f.levels + 1):
                q = chain[l]
                out[StarQuiver.vertex(i, l)] = q.conj().T @ h_gram @ q
        return out

    def adjoint(self, arrow, metrics):
        x = self.rep.maps[arrow.name]
        hs, ht = metrics[arrow.src], metrics[arrow.tgt]
        return np.linalg.solve(hs, x.conj().T @ ht)

    def vertex_residual(self, v: str, metrics) -> np.ndarray:
        d = self.dims[v]
        out = -self.theta[v] * np.eye(d, dtype=complex)
        for a in self.in_arrows[v]:
            out = out + self.rep.maps[a.name] @ self.adjoint(a, metrics)
        for a in self.out_arrows[v]:
            out = out - self.adjoint(a, metrics) @ self.rep.maps[a.name]
        return out

    def residual_map(self, metrics) -> dict:
        return {v: self.vertex_residual(v, metrics) for v in self.vertices}

    @staticmethod
    def total_norm(res: dict) -> float:
        return float(np.sqrt(sum(frob(m) ** 2 for m in res.values())))

    @staticmethod
    def trace_defect(res: dict) -> float:
        return abs(sum(np.trace(m) for m in res.values()))


def _arm_key(vertex: str):
    i, l = vertex[1:].split("_")
    return int(i), int(l)


def residuals(wp: WeightedPair, h: HermitianMetric, arm_metrics: dict | None = None) -> MomentResiduals:
    """Moment-map residuals at a metric.

    With ``arm_metrics`` omitted the arm metrics are the restrictions of h, so
    the arm residual at level l is exactly
    [rho|_{V_l}, (rho|_{V_l})^{*h}] + P^h_{V_{l+1}}|_{V_l} - (w_{l-1} - w_l + 1) Id.
    Passing the solver's arm metrics (keyed (puncture, level)) evaluates the
    full King system instead.
    """
    sys = _KingSystem(wp)
    metrics = {"u": h.gram}
    if arm_metrics is None:
        metrics = sys.restrict_central(h.gram)
    else:
        for v in sys.vertices:
            if v == "u":
                continue
            metrics[v] = arm_metrics[_arm_key(v)]
    res = sys.residual_map(metrics)
    central = res.pop("u")
    arm = {_arm_key(v): m for v, m in res.items()}
    statement = {}
    for v in sys.vertices:
        if v == "u":
            continue
        i, l = _arm_key(v)
        c = sys.rep.maps[f"c{i}_{l}"]
        hl = metrics[v]
        c_star = np.linalg.solve(hl, c.conj().T @ hl)
        gap = float(sys.wp.weights[i - 1][l] - sys.wp.weights[i - 1][l - 1])
        statement[(i, l)] = c @ c_star - c_star @ c + gap * np.eye(c.shape[0], dtype=complex)
    full = dict(arm)
    full["central"] = central
    total = float(np.sqrt(sum(frob(m) ** 2 for m in full.values())))
    defect = abs(np.trace(central) + sum(np.trace(m) for m in arm.values()))
    return MomentResiduals(central, arm, total, statement, float(defect))


def solve_metric(wp: WeightedPair, opts: SolverOptions | None = None):
    """Kempf-Ness-style descent on the vertex metrics.

    Each step conjugates every vertex metric by exp(-eta * residual_v), which
    is the metric gradient direction of the King functional; the step size
    backtracks on the total residual norm.  Success: total norm below tol.
    Failure modes return a divergence certificate: condition-number blowup of
    a vertex metric (Kempf-Ness degeneration on non-polystable orbits) or a
    stalled residual floor.
    """
    opts = opts or SolverOptions()
    if wp.degree() != 0:
        warnings.warn(
            f"weighted degree is {wp.degree()} != 0; the moment-map equations "
            "are normalized but existence is weight-shift sensitive",
            stacklevel=2,
        )
    sys = _KingSystem(wp)
    metrics = sys.identity_metrics(opts.initial_h)
    res = sys.residual_map(metrics)
    norm = sys.total_norm(res)
    history = [norm] if opts.record_history else []
    max_trace = sys.trace_defect(res)
    eta = opts.eta
    best = (norm, {v: m.copy() for v, m in metrics.items()}, 0)
    steps = 0

    def condition_number(ms):
        worst = 1.0
        for m in ms.values():
            w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
            if w[0] <= 0:
                return np.inf
            worst = max(worst, float(w[-1] / w[0]))
        return worst

    while norm >= opts.tol and steps < opts.max_steps:
        stepped = False
        while eta > 1e-16:
            cand = {}
            for v in sys.vertices:
                e = scipy.linalg.expm(-eta * res[v])
                m = e.conj().T @ metrics[v] @ e
                cand[v] = 0.5 * (m + m.conj().T)
            cand_res = sys.residual_map(cand)
            cand_norm = sys.total_norm(cand_res)
            if np.isfinite(cand_norm) and cand_norm < norm:
                metrics, res, norm = cand, cand_res, cand_norm
                max_trace = max(max_trace, sys.trace_defect(res))
                eta = min(eta * 1.25, opts.eta_max)
                stepped = True
                break
            eta *= 0.5
        steps += 1
        if opts.record_history:
            history.append(norm)
        if norm < best[0]:
            best = (norm, {v: m.copy() for v, m in metrics.items()}, steps)
        cond = condition_number(metrics)
        if cond > opts.cond_limit:
            return DivergenceCertificate(
                "condition_blowup", best[0], cond, steps, history,
                HermitianMetric(best[1]["u"]),
            )
        if not stepped:
            return DivergenceCertificate(
                "stalled", best[0], cond, steps, history, HermitianMetric(best[1]["u"]),
            )
        if (
            len(history) > opts.stall_window
            and norm > 100 * opts.tol
            and history[-opts.stall_window] - norm < opts.stall_improvement
        ):
            return DivergenceCertificate(
                "stalled", best[0], cond, steps, history, HermitianMetric(best[1]["u"]),
            )

    if norm < opts.tol:
        arm = {_arm_key(v): m for v, m in metrics.items() if v != "u"}
        return MetricState(
            HermitianMetric(metrics["u"]), arm, steps, history, norm, True, max_trace
        )
    cond = condition_number(metrics)
    return DivergenceCertificate(
        "stalled", best[0], cond, steps, history, HermitianMetric(best[1]["u"])
    )


def state_residuals(wp: WeightedPair, state: MetricState) -> MomentResiduals:
    """Re-evaluate the solved system's residuals from scratch."""
    return residuals(wp, state.h, state.arm_metrics)


def gauge_compare(h: HermitianMetric, h2: HermitianMetric, pair, tol: float = 1e-7):
    """Find g in the intersection of the flag parabolics with
    h(u, v) = h2(g u, g v), i.e. g^* H2 g = H.

    All solutions of the metric identity are g = H2^{-1/2} u H^{1/2} with u
    unitary; g preserves the flags iff u maps each H^{1/2} V to H2^{1/2} V.
    Tries the positive square-root ansatz (u = Id), then per-puncture unitary
    frame alignments.  Returns (g, diagnostics) with g = None on failure.
    """
    from .linalg import membership_residual, orthonormal_basis

    h_sqrt = h.sqrt()
    h2_inv_sqrt = h2.inv_sqrt()
    r = h.dim

    def check(g):
        metric_gap = frob(g.conj().T @ h2.gram @ g - h.gram) / max(1.0, frob(h.gram))
        member_gap = max(membership_residual(g, f) for f in pair.flags)
        return metric_gap, member_gap

    def aligned_unitary(i):
        """Unitary mapping the H^{1/2}-frame of puncture i's chain onto the
        H2^{1/2}-frame (deepest subspace first, then completing)."""
        f = pair.flags[i]
        chain = [b for b in reversed(f.subspaces)] + [np.eye(r, dtype=complex)]
        def frame(transform):
            cols = np.zeros((r, 0), dtype=complex)
            for b in chain:
                tb = transform @ b
                extra = tb - cols @ (cols.conj().T @ tb)
                cols = np.hstack([cols, orthonormal_basis(extra)])
            return cols
        f1 = frame(h_sqrt)
        f2 = frame(np.linalg.inv(h2_inv_sqrt))
        return f2 @ f1.conj().T

    candidates = [np.eye(r, dtype=complex)]
    for i in range(len(pair.flags)):
        try:
            candidates.append(aligned_unitary(i))
        except Exception:
            continue
    diagnostics = []
    for u in candidates:
        g = h2_inv_sqrt @ u @ h_sqrt
        metric_gap, member_gap = check(g)
        diagnostics.append({"metric_gap": metric_gap, "membership_gap": member_gap})
        if metric_gap <= tol and member_gap <= tol:
            return g, diagnostics
    return None, diagnostics

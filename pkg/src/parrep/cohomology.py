"""Group-cohomology deformation calculus at a parabolic representation pair.

First-order data: bases of the twisted 1-cocycles Z^1(Gamma, gl_r), the
tangent space of the pair variety (cocycle plus per-puncture flag
displacement), and the tangent space of the fixed-flag variety.  Second-order
data: membership in the quadratic cones, decided as linear feasibility
problems over the values of a 1-cochain V with dV = [X, X].

The group is free on a1..bg, g1..g_{n-1}; the last puncture generator is a
word in the others, so every cochain condition is finite linear algebra.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .linalg import (
    frob,
    nullspace,
    parabolic_dimension,
    parabolic_subalgebra_basis,
)
from .pairs import RepPair
from .surface import Word, last_puncture_word, relator

FEAS_RTOL = 1e-7
TANGENT_TOL = 1e-8


class FormulaViolation(AssertionError):
    """Computed rank disagrees with the unconditional dimension formula."""

    def __init__(self, computed, predicted):
        self.computed = computed
        self.predicted = predicted
        super().__init__(f"tangent dimension {computed} != predicted {predicted}")


class ConeError(ValueError):
    pass


def _vec(m):
    return np.asarray(m, dtype=complex).reshape(-1)


def _unvec(v, r):
    return np.asarray(v, dtype=complex).reshape(r, r)


def _ad_operator(m):
    """vec(M X M^{-1}) = (M ⊗ M^{-T}) vec(X), row-major vec convention."""
    minv = np.linalg.inv(m)
    return np.kron(m, minv.T)


def _bracket_operator(y, r):
    """vec([Y, X]) = (Y ⊗ I - I ⊗ Y^T) vec(X)."""
    eye = np.eye(r, dtype=complex)
    return np.kron(y, eye) - np.kron(eye, np.asarray(y, dtype=complex).T)


class DeformationContext:
    """Immutable cache of adjoint operators and parabolic subalgebra bases."""

    def __init__(self, pair: RepPair):
        self.pair = pair
        p = pair.presentation
        self.r = pair.rank
        self.free_names = p.free_generator_names()
        self.last_name = f"g{p.punctures}"
        self.gamma_n_word = last_puncture_word(p)
        self.images = dict(pair.images)
        self.inverses = {n: np.linalg.inv(m) for n, m in self.images.items()}
        self.adjoints = {n: _ad_operator(m) for n, m in self.images.items()}
        # per-puncture parabolic subalgebras as vec-column bases, and complements
        self.par_bases = []
        self.par_complements = []
        eye = np.eye(self.r * self.r, dtype=complex)
        for f in pair.flags:
            pb = parabolic_subalgebra_basis(f)
            self.par_bases.append(pb)
            self.par_complements.append(nullspace(pb.conj().T))

    @property
    def n_free(self) -> int:
        return len(self.free_names)

    def puncture_adjoint(self, i: int):
        return self.adjoints[f"g{i}"]

    def cocycle_coefficients(self, word: Word):
        """Linear operators C_f with vec X(word) = sum_f C_f vec X(f), for a
        word over the free generators, together with the word's image."""
        r2 = self.r * self.r
        coeffs = {f: np.zeros((r2, r2), dtype=complex) for f in self.free_names}
        m = np.eye(self.r, dtype=complex)
        for name, e in word.letters:
            if name == self.last_name:
                raise ConeError("word must be rewritten over the free generators first")
            if e == 1:
                coeffs[name] += _ad_operator(m)
                m = m @ self.images[name]
            else:
                m = m @ self.inverses[name]
                coeffs[name] -= _ad_operator(m)
        return coeffs, m

    def gamma_n_coefficients(self):
        return self.cocycle_coefficients(self.gamma_n_word)


class Cocycle1:
    """Twisted 1-cocycle stored by its values on every generator."""

    def __init__(self, values: dict):
        self.values = {n: np.asarray(v, dtype=complex) for n, v in values.items()}

    def value(self, images: dict, word: Word) -> np.ndarray:
        """X(word) via the extension rule X(uv) = X(u) + Ad_{rho(u)} X(v)."""
        some = next(iter(self.values.values()))
        r = some.shape[0]
        out = np.zeros((r, r), dtype=complex)
        m = np.eye(r, dtype=complex)
        for name, e in word.letters:
            g = np.asarray(images[name], dtype=complex)
            if e == 1:
                out = out + m @ self.values[name] @ np.linalg.inv(m)
                m = m @ g
            else:
                m = m @ np.linalg.inv(g)
                out = out - m @ self.values[name] @ np.linalg.inv(m)
        return out

    def relator_defect(self, ctx: DeformationContext) -> float:
        return frob(self.value(ctx.images, relator(ctx.pair.presentation)))

    def scaled(self, t) -> "Cocycle1":
        return Cocycle1({n: t * v for n, v in self.values.items()})


@dataclass
class TangentVectorPRP:
    cocycle: Cocycle1
    flag_displacements: list  # lift Y-tilde_i in gl_r, one per puncture

    def scaled(self, t) -> "TangentVectorPRP":
        return TangentVectorPRP(
            self.cocycle.scaled(t), [t * y for y in self.flag_displacements]
        )


def _cocycle_from_free_values(ctx: DeformationContext, free_values: dict) -> Cocycle1:
    """Extend values on the free generators to all generators (solves gn)."""
    values = dict(free_values)
    partial = Cocycle1(values)
    values[ctx.last_name] = partial.value(ctx.images, ctx.gamma_n_word)
    return Cocycle1(values)


def z1_basis(ctx: DeformationContext) -> list:
    """r^2 (2g + n - 1) independent cocycles: free values on the free
    generators, the last puncture value solved from the relator condition."""
    r = ctx.r
    basis = []
    for f in ctx.free_names:
        for k in range(r * r):
            e = np.zeros((r, r), dtype=complex)
            e.flat[k] = 1.0
            vals = {name: np.zeros((r, r), dtype=complex) for name in ctx.free_names}
            vals[f] = e
            basis.append(_cocycle_from_free_values(ctx, vals))
    return basis


@dataclass
class TangentPRPResult:
    dimension: int
    predicted: int
    basis: list  # TangentVectorPRP


@dataclass
class TangentRelativeResult:
    dimension: int
    predicted: int
    f_halved: list  # halved per-puncture count (r^2 + sum d_l)/2; non-integral in general
    matches_formula: bool
    basis: list  # Cocycle1


def _solution_basis(a: np.ndarray) -> np.ndarray:
    return nullspace(a) if a.shape[0] else np.eye(a.shape[1], dtype=complex)


def tangent_prp(ctx: DeformationContext) -> TangentPRPResult:
    """Solve the joint system for (X, Y_1..Y_n): the restriction of X to the
    i-th boundary circle is a coboundary of Y_i modulo the parabolic.

    Lifts are parametrized in the orthocomplement of each parabolic, which is
    exactly one representative per coset, so the nullity is the dimension.
    """
    p = ctx.pair.presentation
    r, r2 = ctx.r, ctx.r * ctx.r
    n = p.punctures
    q_dims = [k.shape[1] for k in ctx.par_complements]
    nx = ctx.n_free * r2
    cols = nx + sum(q_dims)

    gamma_coeffs, _ = ctx.gamma_n_coefficients()
    rows = []
    for i in range(1, n + 1):
        ki = ctx.par_complements[i - 1]
        proj = ki.conj().T  # q_i x r^2
        block = np.zeros((q_dims[i - 1], cols), dtype=complex)
        if i < n:
            j = ctx.free_names.index(f"g{i}")
            block[:, j * r2 : (j + 1) * r2] = proj
        else:
            for j, f in enumerate(ctx.free_names):
                block[:, j * r2 : (j + 1) * r2] = proj @ gamma_coeffs[f]
        # minus (Id - Ad) applied to the lift
        op = np.eye(r2, dtype=complex) - ctx.puncture_adjoint(i)
        off = nx + sum(q_dims[: i - 1])
        block[:, off : off + q_dims[i - 1]] = -proj @ op @ ki
        rows.append(block)

    a = np.vstack(rows) if rows else np.zeros((0, cols), dtype=complex)
    null = _solution_basis(a)
    dim = null.shape[1]
    predicted = r2 * (2 * p.genus + n - 1)
    if dim != predicted:
        raise FormulaViolation(dim, predicted)

    basis = []
    for k in range(dim):
        v = null[:, k]
        free_vals = {
            f: _unvec(v[j * r2 : (j + 1) * r2], r) for j, f in enumerate(ctx.free_names)
        }
        lifts = []
        for i in range(n):
            off = nx + sum(q_dims[:i])
            lifts.append(_unvec(ctx.par_complements[i] @ v[off : off + q_dims[i]], r))
        basis.append(TangentVectorPRP(_cocycle_from_free_values(ctx, free_vals), lifts))
    return TangentPRPResult(dim, predicted, basis)


def tangent_relative(ctx: DeformationContext) -> TangentRelativeResult:
    """Cocycles whose boundary values lie in the parabolic subalgebras.

    The reported prediction counts each parabolic subalgebra's dimension; the
    halved variant of the per-puncture count is returned alongside for
    comparison (it is non-integral in general).
    """
    p = ctx.pair.presentation
    r, r2 = ctx.r, ctx.r * ctx.r
    n = p.punctures
    gamma_coeffs, _ = ctx.gamma_n_coefficients()
    rows = []
    for i in range(1, n + 1):
        proj = ctx.par_complements[i - 1].conj().T
        if proj.shape[0] == 0:
            continue
        block = np.zeros((proj.shape[0], ctx.n_free * r2), dtype=complex)
        if i < n:
            j = ctx.free_names.index(f"g{i}")
            block[:, j * r2 : (j + 1) * r2] = proj
        else:
            for j, f in enumerate(ctx.free_names):
                block[:, j * r2 : (j + 1) * r2] = proj @ gamma_coeffs[f]
        rows.append(block)
    a = np.vstack(rows) if rows else np.zeros((0, ctx.n_free * r2), dtype=complex)
    null = _solution_basis(a)
    dim = null.shape[1]

    predicted = r2 * (2 * p.genus - 1) + sum(
        parabolic_dimension(f.type) for f in ctx.pair.flags
    )
    halved = [
        Fraction(r2 + sum(f.type.dims[1:]), 2) for f in ctx.pair.flags
    ]
    basis = []
    for k in range(null.shape[1]):
        v = null[:, k]
        free_vals = {
            f: _unvec(v[j * r2 : (j + 1) * r2], r) for j, f in enumerate(ctx.free_names)
        }
        basis.append(_cocycle_from_free_values(ctx, free_vals))
    return TangentRelativeResult(dim, predicted, halved, dim == predicted, basis)


# ---------------------------------------------------------------------------
# second order: quadratic cones
# ---------------------------------------------------------------------------

def cochain_affine(ctx: DeformationContext, word: Word, cocycle: Cocycle1):
    """Affine expression of V(word) in the free values of V, under the twisted
    Leibniz rule V(uv) = V(u) + Ad_u V(v) - [X(u), Ad_u X(v)] (i.e. dV = [X,X]).

    Returns (coeffs, const): vec V(word) = sum_f coeffs[f] vec V(f) + vec const.
    """
    r, r2 = ctx.r, ctx.r * ctx.r
    coeffs = {f: np.zeros((r2, r2), dtype=complex) for f in ctx.free_names}
    const = np.zeros((r, r), dtype=complex)
    m = np.eye(r, dtype=complex)
    xu = np.zeros((r, r), dtype=complex)
    for name, e in word.letters:
        if e == 1:
            ad_m = _ad_operator(m)
            xt = m @ cocycle.values[name] @ np.linalg.inv(m)
            coeffs[name] += ad_m
            const -= xu @ xt - xt @ xu
            xu = xu + xt
            m = m @ ctx.images[name]
        else:
            m = m @ ctx.inverses[name]
            xt = -(m @ cocycle.values[name] @ np.linalg.inv(m))
            coeffs[name] -= _ad_operator(m)
            const -= xu @ xt - xt @ xu
            xu = xu + xt
    return coeffs, const


def _tangent_residual_prp(v: TangentVectorPRP, ctx: DeformationContext) -> float:
    """Tangent-condition defect, relative to the vector's own scale."""
    scale = max(
        [frob(m) for m in v.cocycle.values.values()]
        + [frob(y) for y in v.flag_displacements]
        + [1.0]
    )
    worst = v.cocycle.relator_defect(ctx) / scale
    for i in range(1, ctx.pair.presentation.punctures + 1):
        y = v.flag_displacements[i - 1]
        x_g = v.cocycle.values[f"g{i}"]
        rho = ctx.images[f"g{i}"]
        defect = x_g - (y - rho @ y @ np.linalg.inv(rho))
        proj = ctx.par_complements[i - 1].conj().T @ _vec(defect)
        worst = max(worst, float(np.linalg.norm(proj)) / scale)
    return worst


def _stack_cone_system_prp(ctx: DeformationContext, v: TangentVectorPRP, lifts):
    """Least-squares system for the pair-variety cone conditions with the given
    lifts: per puncture, V(g_i) - [Y_i, Ad Y_i] must lie in
    Im(Ad - Id) + p_i + [Y_i, p_i]."""
    p = ctx.pair.presentation
    r, r2 = ctx.r, ctx.r * ctx.r
    n = p.punctures
    nfree = ctx.n_free

    gn_coeffs, gn_const = cochain_affine(ctx, ctx.gamma_n_word, v.cocycle)

    par_dims = [b.shape[1] for b in ctx.par_bases]
    # unknown layout: [V_free | a_1..a_n | p_1..p_n | q_1..q_n]
    off_a = nfree * r2
    off_p = off_a + n * r2
    off_q = off_p + sum(par_dims)
    cols = off_q + sum(par_dims)

    rows = []
    rhs = []
    for i in range(1, n + 1):
        y = lifts[i - 1]
        rho = ctx.images[f"g{i}"]
        ad = ctx.puncture_adjoint(i)
        pb = ctx.par_bases[i - 1]
        block = np.zeros((r2, cols), dtype=complex)
        target = y @ (rho @ y @ np.linalg.inv(rho)) - (rho @ y @ np.linalg.inv(rho)) @ y
        if i < n:
            j = ctx.free_names.index(f"g{i}")
            block[:, j * r2 : (j + 1) * r2] = np.eye(r2)
        else:
            for j, f in enumerate(ctx.free_names):
                block[:, j * r2 : (j + 1) * r2] = gn_coeffs[f]
            target = target - gn_const
        block[:, off_a + (i - 1) * r2 : off_a + i * r2] = -(ad - np.eye(r2))
        poff = off_p + sum(par_dims[: i - 1])
        block[:, poff : poff + par_dims[i - 1]] = -pb
        qoff = off_q + sum(par_dims[: i - 1])
        block[:, qoff : qoff + par_dims[i - 1]] = -_bracket_operator(y, r) @ pb
        rows.append(block)
        rhs.append(_vec(target))
    return np.vstack(rows), np.concatenate(rhs)


def _solve_feasibility(a, b, rtol=FEAS_RTOL):
    """Least-squares feasibility: returns the minimizer when the stacked
    residual is below rtol * (|b| + 1), else None.

    Singular values are truncated with an absolute floor tied to the system
    scale: coefficient columns that are pure roundoff (e.g. cancellations at
    special representations) must not fake feasibility through astronomically
    large solutions."""
    if a.shape[0] == 0 or a.shape[1] == 0:
        sol = np.zeros(a.shape[1], dtype=complex)
    else:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
        scale = max(1.0, float(s[0]) if s.size else 0.0, float(np.linalg.norm(b)))
        cutoff = 1e-12 * scale
        keep = s > cutoff
        inv = np.zeros_like(s)
        inv[keep] = 1.0 / s[keep]
        sol = vh.conj().T @ (inv * (u.conj().T @ b))
    resid = np.linalg.norm(a @ sol - b)
    if resid <= rtol * (np.linalg.norm(b) + 1.0):
        return sol
    return None


def _feasible(a, b, rtol=FEAS_RTOL) -> bool:
    return _solve_feasibility(a, b, rtol) is not None


def cone_membership_prp(
    v: TangentVectorPRP,
    ctx: DeformationContext,
    lift_attempts: int = 8,
    seed: int = 0,
) -> bool:
    """Does the first-order deformation extend to second order?

    Feasibility of the stacked linear system in the free values of V, the
    coboundary slot, and the two parabolic slots.  If infeasible with the
    stored lifts, the parabolic coset of lifts is searched (the condition's
    dependence on the lift is not pinned down, so membership is existential).
    """
    if _tangent_residual_prp(v, ctx) > TANGENT_TOL * 10:
        raise ConeError("vector does not satisfy the tangent conditions")
    a, b = _stack_cone_system_prp(ctx, v, v.flag_displacements)
    if _feasible(a, b):
        return True
    # search the parabolic coset of lifts
    rng = np.random.default_rng(seed)
    r = ctx.r
    n = ctx.pair.presentation.punctures
    scale = max(frob(y) for y in v.flag_displacements) + 1.0
    for attempt in range(lift_attempts):
        lifts = []
        for i in range(n):
            pb = ctx.par_bases[i]
            if pb.shape[1] == 0:
                lifts.append(v.flag_displacements[i])
                continue
            coeff = rng.standard_normal(pb.shape[1]) + 1j * rng.standard_normal(pb.shape[1])
            pert = _unvec(pb @ coeff, r)
            lifts.append(v.flag_displacements[i] + scale * 0.5 ** attempt * pert)
        a, b = _stack_cone_system_prp(ctx, v, lifts)
        if _feasible(a, b):
            return True
    return False


def _stack_cone_system_relative(x: Cocycle1, ctx: DeformationContext):
    n = ctx.pair.presentation.punctures
    r2 = ctx.r * ctx.r
    gn_coeffs, gn_const = cochain_affine(ctx, ctx.gamma_n_word, x)
    rows = []
    rhs = []
    for i in range(1, n + 1):
        proj = ctx.par_complements[i - 1].conj().T
        if proj.shape[0] == 0:
            continue
        block = np.zeros((proj.shape[0], ctx.n_free * r2), dtype=complex)
        if i < n:
            j = ctx.free_names.index(f"g{i}")
            block[:, j * r2 : (j + 1) * r2] = proj
            rows.append(block)
            rhs.append(np.zeros(proj.shape[0], dtype=complex))
        else:
            for j, f in enumerate(ctx.free_names):
                block[:, j * r2 : (j + 1) * r2] = proj @ gn_coeffs[f]
            rows.append(block)
            rhs.append(-proj @ _vec(gn_const))
    if not rows:
        return np.zeros((0, ctx.n_free * r2), dtype=complex), np.zeros(0, dtype=complex)
    return np.vstack(rows), np.concatenate(rhs)


def cone_solution_relative(x: Cocycle1, ctx: DeformationContext):
    """Free V-values solving the fixed-flag cone conditions, or None.

    The returned dict maps free generator names to matrices; the last puncture
    value follows from ``cochain_values``.
    """
    n = ctx.pair.presentation.punctures
    r, r2 = ctx.r, ctx.r * ctx.r
    scale = max([frob(m) for m in x.values.values()] + [1.0])
    for i in range(1, n + 1):
        resid = np.linalg.norm(ctx.par_complements[i - 1].conj().T @ _vec(x.values[f"g{i}"]))
        if resid > TANGENT_TOL * 10 * scale:
            raise ConeError(f"cocycle boundary value at puncture {i} is not parabolic")
    a, b = _stack_cone_system_relative(x, ctx)
    if a.shape[0] == 0:
        return {f: np.zeros((r, r), dtype=complex) for f in ctx.free_names}
    sol = _solve_feasibility(a, b)
    if sol is None:
        return None
    return {
        f: _unvec(sol[j * r2 : (j + 1) * r2], r) for j, f in enumerate(ctx.free_names)
    }


def cone_membership_relative(x: Cocycle1, ctx: DeformationContext) -> bool:
    """Fixed-flag cone: a 1-cochain V with dV = [X, X] and parabolic boundary
    values must exist.  Linear feasibility in the free values of V."""
    return cone_solution_relative(x, ctx) is not None


# ---------------------------------------------------------------------------
# order-2 jets: exact coefficient extraction for curve checks
# ---------------------------------------------------------------------------

class Jet2:
    """Matrix polynomial truncated at t^3: a0 + a1 t + a2 t^2."""

    def __init__(self, a0, a1=None, a2=None):
        self.a0 = np.asarray(a0, dtype=complex)
        r = self.a0.shape[0]
        self.a1 = np.zeros((r, r), dtype=complex) if a1 is None else np.asarray(a1, dtype=complex)
        self.a2 = np.zeros((r, r), dtype=complex) if a2 is None else np.asarray(a2, dtype=complex)

    def __matmul__(self, other: "Jet2") -> "Jet2":
        return Jet2(
            self.a0 @ other.a0,
            self.a0 @ other.a1 + self.a1 @ other.a0,
            self.a0 @ other.a2 + self.a1 @ other.a1 + self.a2 @ other.a0,
        )

    def inv(self) -> "Jet2":
        i0 = np.linalg.inv(self.a0)
        i1 = -i0 @ self.a1 @ i0
        i2 = i0 @ (self.a1 @ i0 @ self.a1 - self.a2) @ i0
        return Jet2(i0, i1, i2)

    @staticmethod
    def exp_curve(base, x, v) -> "Jet2":
        """exp(x t + v t^2) @ base, truncated at t^3."""
        base = np.asarray(base, dtype=complex)
        x = np.asarray(x, dtype=complex)
        v = np.asarray(v, dtype=complex)
        return Jet2(base, x @ base, (v + 0.5 * (x @ x)) @ base)


def relator_jet_defect(ctx: DeformationContext, x_values: dict, v_values: dict):
    """Norms of the t and t^2 coefficients of rho_t(relator) - Id for the curve
    rho_t(gen) = exp(X(gen) t + V(gen) t^2) rho(gen)."""
    jets = {
        n: Jet2.exp_curve(ctx.images[n], x_values[n], v_values[n]) for n in x_values
    }
    r = ctx.r
    acc = Jet2(np.eye(r, dtype=complex))
    for name, e in relator(ctx.pair.presentation).letters:
        j = jets[name]
        acc = acc @ (j if e == 1 else j.inv())
    return frob(acc.a1), frob(acc.a2)


def cochain_values(ctx: DeformationContext, cocycle: Cocycle1, free_v_values: dict) -> dict:
    """Extend free V-values to all generators by the twisted Leibniz rule."""
    values = dict(free_v_values)
    coeffs, const = cochain_affine(ctx, ctx.gamma_n_word, cocycle)
    r = ctx.r
    gn = const.copy()
    for f in ctx.free_names:
        gn = gn + _unvec(coeffs[f] @ _vec(values[f]), r)
    values[ctx.last_name] = gn
    return values


def curve_coefficients(ctx: DeformationContext, x: Cocycle1, free_v_values: dict):
    """Generator jets of an order-2 curve from a cone solution.

    The cone solver works with the convention dV = [X, X]; the exponential
    curve exp(X t + W t^2) rho needs W = -V/2 (the two second-order cochains
    differ by that factor).  Returns (x_values, w_values) over all generators.
    """
    v_all = cochain_values(ctx, x, free_v_values)
    w_values = {n: -0.5 * v for n, v in v_all.items()}
    return dict(x.values), w_values

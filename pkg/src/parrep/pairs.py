"""Parabolic representation pairs: validation, weighted degree and slope,
invariant-subspace discovery with an honest completeness flag, induced
sub-pairs, and the genus-zero product-of-matrices certificate."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .linalg import (
    MEMBERSHIP_TOL,
    RANK_RTOL,
    as_matrix,
    frob,
    induced_flag,
    membership_residual,
    nullspace,
    orthonormal_basis,
    subspace_intersection,
    subspace_sum,
)
from .surface import Presentation, Word, evaluate, relator

RELATOR_TOL = 1e-8
INVARIANCE_TOL = 1e-8


class PairError(ValueError):
    pass


@dataclass
class SearchBudget:
    """Knobs for the randomized part of the subspace search; deterministic per seed."""

    seed: int = 0
    random_vectors: int = 12
    gradient_starts: int = 4
    gradient_iters: int = 200
    closure_rounds: int = 6


@dataclass
class ValidationReport:
    relator_residual: float
    memberships: list
    membership_residuals: list

    @property
    def valid(self) -> bool:
        return self.relator_residual < RELATOR_TOL and all(self.memberships)


@dataclass
class InvariantSubspaceReport:
    subspaces: list  # list of (orthonormal basis, dimension), proper and nonzero
    lattice_status: str  # "complete" | "sampled"

    def dimensions(self):
        return sorted(d for _, d in self.subspaces)


class RepPair:
    """A representation of the punctured-surface group plus one flag per puncture.

    ``images`` maps every generator name (including gn) to an invertible matrix;
    ``flags`` lists one Flag per puncture, in puncture order.
    """

    def __init__(self, presentation: Presentation, images: dict, flags):
        self.presentation = presentation
        names = presentation.generator_names()
        missing = [n for n in names if n not in images]
        if missing:
            raise PairError(f"missing generator images: {missing}")
        self.images = {n: as_matrix(images[n]) for n in names}
        r = self.images[names[0]].shape[0]
        for n, m in self.images.items():
            if m.shape != (r, r):
                raise PairError(f"image of {n} has shape {m.shape}, expected ({r}, {r})")
            if abs(np.linalg.det(m)) < RANK_RTOL:
                raise PairError(f"image of {n} is numerically singular")
        flags = list(flags)
        if len(flags) != presentation.punctures:
            raise PairError(
                f"need {presentation.punctures} flags, got {len(flags)}"
            )
        for f in flags:
            if f.ambient_dim != r:
                raise PairError("flag ambient dimension does not match the rank")
        self.flags = flags
        self.rank = r

    def evaluate(self, w: Word) -> np.ndarray:
        return evaluate(self.images, w)

    def puncture_image(self, i: int) -> np.ndarray:
        """Image of gamma_i, 1-indexed."""
        return self.images[f"g{i}"]

    def generator_matrices(self) -> list:
        return [self.images[n] for n in self.presentation.generator_names()]

    def validate(self) -> ValidationReport:
        rel = self.evaluate(relator(self.presentation))
        resid = frob(rel - np.eye(self.rank))
        residuals = [
            membership_residual(self.puncture_image(i + 1), self.flags[i])
            for i in range(self.presentation.punctures)
        ]
        return ValidationReport(resid, [x <= MEMBERSHIP_TOL for x in residuals], residuals)

    def conjugate(self, g) -> "RepPair":
        g = as_matrix(g)
        ginv = np.linalg.inv(g)
        images = {n: g @ m @ ginv for n, m in self.images.items()}
        flags = [f.conjugate(g) for f in self.flags]
        return RepPair(self.presentation, images, flags)


@dataclass
class WeightedPair:
    pair: RepPair
    weights: list  # one WeightVector per puncture

    def __post_init__(self):
        if len(self.weights) != self.pair.presentation.punctures:
            raise PairError("need one weight vector per puncture")
        for f, w in zip(self.pair.flags, self.weights):
            if len(w) != f.levels + 1:
                raise PairError(
                    f"weight vector has {len(w)} entries for a flag with {f.levels + 1} levels"
                )

    def degree(self) -> Fraction:
        total = Fraction(0)
        for f, w in zip(self.pair.flags, self.weights):
            for d, wl in zip(f.type.dims, w.weights):
                total += d * wl
        return total

    def slope(self) -> Fraction:
        return self.degree() / self.pair.rank


def degree_slope(wp: WeightedPair):
    return wp.degree(), wp.slope()


# ---------------------------------------------------------------------------
# invariant subspaces
# ---------------------------------------------------------------------------

def _vec(m):
    return m.reshape(-1)


def _unvec(v, r):
    return v.reshape(r, r)


def algebra_closure(mats, r: int):
    """Span of the unital algebra generated by ``mats``, as an orthonormal
    matrix of vec-columns.  Burnside-style closure, stable in <= r^2 rounds."""
    basis = orthonormal_basis(
        np.column_stack([_vec(np.eye(r, dtype=complex))] + [_vec(m) for m in mats])
    )
    for _ in range(r * r * r * r):
        cols = [basis]
        stack = basis.T.reshape(-1, r, r)
        for m in mats:
            # left-multiply every basis element by every generator
            prods = np.einsum("ij,tjl->til", m, stack)
            cols.append(prods.reshape(basis.shape[1], -1).T)
        new_basis = orthonormal_basis(np.hstack(cols))
        if new_basis.shape[1] == basis.shape[1]:
            return new_basis
        basis = new_basis
    return basis


def commutant_basis(mats, r: int) -> list:
    """Basis of {A : [A, M] = 0 for all M}, as r x r matrices."""
    rows = []
    eye = np.eye(r, dtype=complex)
    for m in mats:
        # row-major vec: vec(MA - AM) = (M ⊗ I - I ⊗ M^T) vec(A)
        rows.append(np.kron(m, eye) - np.kron(eye, m.T))
    null = nullspace(np.vstack(rows)) if rows else np.eye(r * r, dtype=complex)
    return [_unvec(null[:, k], r) for k in range(null.shape[1])]


def _is_commutative(basis_mats, tol: float = 1e-8) -> bool:
    for i, a in enumerate(basis_mats):
        for b in basis_mats[i + 1 :]:
            if frob(a @ b - b @ a) > tol * max(1.0, frob(a) * frob(b)):
                return False
    return True


def invariance_residual(mats, basis) -> float:
    """max over generators of ||(I - P) M B|| with B orthonormal."""
    q = orthonormal_basis(basis)
    if q.shape[1] == 0:
        return 0.0
    p = q @ q.conj().T
    eye = np.eye(q.shape[0], dtype=complex)
    return max(frob((eye - p) @ m @ q) / max(1.0, frob(m)) for m in mats)


def cyclic_submodule(mats, v, r: int) -> np.ndarray:
    """Smallest invariant subspace containing v: the algebra orbit of v."""
    basis = orthonormal_basis(np.asarray(v, dtype=complex).reshape(r, 1))
    for _ in range(r):
        cols = [basis] + [m @ basis for m in mats]
        new_basis = orthonormal_basis(np.hstack(cols))
        if new_basis.shape[1] == basis.shape[1]:
            return basis
        basis = new_basis
    return basis


def _dedupe(subspaces, r: int):
    seen = []
    out = []
    for q in subspaces:
        k = q.shape[1]
        if k == 0 or k == r:
            continue
        p = q @ q.conj().T
        if any(k == q2.shape[1] and frob(p - p2) < 1e-7 for q2, p2 in seen):
            continue
        seen.append((q, p))
        out.append(q)
    return out


def _joint_eigenlines(mats, r: int):
    """All lines invariant under every matrix, by intersecting eigenspaces over
    joint eigenvalue tuples.  Returns (lines, saw_thick_intersection)."""
    lines = []
    thick = False
    eyes = np.eye(r, dtype=complex)
    current = [eyes]  # bases of candidate intersections
    for m in mats:
        eigvals = np.linalg.eigvals(m)
        # cluster equal eigenvalues to avoid duplicated work
        reps = []
        for lam in eigvals:
            if not any(abs(lam - mu) <= 1e-9 * max(1.0, abs(mu)) for mu in reps):
                reps.append(lam)
        scale = float(np.linalg.norm(m, 2))
        nxt = []
        for q in current:
            for lam in reps:
                eigsp = nullspace(m - lam * eyes, atol=RANK_RTOL * (scale + abs(lam)))
                inter = subspace_intersection(q, eigsp)
                if inter.shape[1] > 0:
                    nxt.append(inter)
        current = nxt
        if not current:
            return [], False
    for q in current:
        if q.shape[1] == 1:
            lines.append(q)
        else:
            thick = True
            # every line inside is invariant; sample a few representatives
            for k in range(q.shape[1]):
                lines.append(q[:, k : k + 1])
    return lines, thick


def _gradient_subspace_search(mats, r: int, dim: int, rng, starts: int, iters: int):
    """Projected-gradient descent of the invariance residual on the Stiefel
    manifold; returns candidate bases with residual near zero."""
    found = []
    eye = np.eye(r, dtype=complex)
    for _ in range(starts):
        b = orthonormal_basis(rng.standard_normal((r, dim)) + 1j * rng.standard_normal((r, dim)))
        if b.shape[1] < dim:
            continue
        step = 0.1
        for _ in range(iters):
            p = b @ b.conj().T
            grad = np.zeros_like(b)
            val = 0.0
            for m in mats:
                res = (eye - p) @ m @ b
                val += np.linalg.norm(res) ** 2
                grad += m.conj().T @ res - (m @ b) @ (b.conj().T @ (m.conj().T @ res))
            if val < 1e-22:
                break
            cand = orthonormal_basis(b - step * grad)
            if cand.shape[1] < dim:
                step *= 0.5
                continue
            new_val = sum(
                np.linalg.norm((eye - cand @ cand.conj().T) @ m @ cand) ** 2 for m in mats
            )
            if new_val < val:
                b = cand
                step = min(step * 1.5, 1.0)
            else:
                step *= 0.5
                if step < 1e-12:
                    break
        if invariance_residual(mats, b) < INVARIANCE_TOL:
            found.append(b)
    return found


def submodule_lattice(mats, r: int, budget: SearchBudget | None = None):
    """All invariant subspaces of the matrix family, with a completeness flag.

    Complete cases: r = 1; irreducible families certified by Burnside closure
    (algebra dimension r^2); and r <= 3 families where every joint eigenvalue
    tuple cuts out at most a line (then lines and, via duality, hyperplanes
    exhaust the proper lattice).  Everything else is reported as sampled.
    """
    budget = budget or SearchBudget()
    rng = np.random.default_rng(budget.seed)
    mats = [as_matrix(m) for m in mats]
    if r == 1:
        return InvariantSubspaceReport([], "complete")

    alg = algebra_closure(mats, r)
    if alg.shape[1] == r * r:
        return InvariantSubspaceReport([], "complete")

    comm = commutant_basis(mats, r)
    commutative = _is_commutative(comm)

    lines, thick = _joint_eigenlines(mats, r)
    dual_mats = [m.T for m in mats]
    dual_lines, dual_thick = _joint_eigenlines(dual_mats, r)
    # annihilator of a transpose-eigenline q is an invariant hyperplane {v : q^T v = 0}
    hyperplanes = [nullspace(q.T) for q in dual_lines]

    found = list(lines) + list(hyperplanes)

    complete = commutative and not thick and not dual_thick and r <= 3

    if not complete:
        # (a) generalized eigenspace seeding: eigenvectors plus kernels of
        # (m - lambda)^r for clustered eigenvalues of generators and a random
        # commutant element
        seed_vectors = []
        eyes = np.eye(r, dtype=complex)
        for m in mats + [sum(rng.standard_normal() * c for c in comm)]:
            vals, vecs = np.linalg.eig(m)
            seed_vectors += [vecs[:, k] for k in range(r)]
            reps = []
            for lam in vals:
                if not any(abs(lam - mu) <= 1e-7 * max(1.0, abs(mu)) for mu in reps):
                    reps.append(lam)
            scale = float(np.linalg.norm(m, 2)) + 1.0
            for lam in reps:
                power = np.linalg.matrix_power(m - lam * eyes, r)
                gen_space = nullspace(power, atol=RANK_RTOL * scale**r)
                seed_vectors += [gen_space[:, k] for k in range(gen_space.shape[1])]
        # (b) random vectors
        for _ in range(budget.random_vectors):
            seed_vectors.append(rng.standard_normal(r) + 1j * rng.standard_normal(r))
        for v in seed_vectors:
            found.append(cyclic_submodule(mats, v, r))
        # (c) projected-gradient search over the remaining dimensions
        for dim in range(2, r - 1):
            found += _gradient_subspace_search(
                mats, r, dim, rng, budget.gradient_starts, budget.gradient_iters
            )

    found = [q for q in found if invariance_residual(mats, q) < INVARIANCE_TOL]
    found = _dedupe(found, r)

    # close under sum and intersection (meets and joins of the lattice)
    for _ in range(budget.closure_rounds):
        extra = []
        for i in range(len(found)):
            for j in range(i + 1, len(found)):
                extra.append(subspace_sum(found[i], found[j]))
                extra.append(subspace_intersection(found[i], found[j]))
        merged = _dedupe(found + extra, r)
        if len(merged) == len(found):
            break
        found = merged

    found = [q for q in found if invariance_residual(mats, q) < INVARIANCE_TOL]
    subs = [(q, q.shape[1]) for q in sorted(found, key=lambda q: q.shape[1])]
    return InvariantSubspaceReport(subs, "complete" if complete else "sampled")


def invariant_subspaces(pair: RepPair, budget: SearchBudget | None = None) -> InvariantSubspaceReport:
    """Proper nonzero rho-invariant subspaces of C^r, with lattice status."""
    return submodule_lattice(pair.generator_matrices(), pair.rank, budget)


def induced_subpair(wp: WeightedPair, sub) -> WeightedPair:
    """Restrict a weighted pair to an invariant subspace (new ambient = dim sub)."""
    pair = wp.pair
    mats = pair.generator_matrices()
    if invariance_residual(mats, sub) >= INVARIANCE_TOL:
        raise PairError("subspace is not invariant under the representation")
    q = orthonormal_basis(sub)
    images = {n: q.conj().T @ m @ q for n, m in pair.images.items()}
    flags = []
    weights = []
    for f, w in zip(pair.flags, wp.weights):
        nf, nw, _ = induced_flag(f, q, w)
        flags.append(nf)
        weights.append(nw)
    return WeightedPair(RepPair(pair.presentation, images, flags), weights)


# ---------------------------------------------------------------------------
# parabolic Deligne--Simpson certificate (genus zero)
# ---------------------------------------------------------------------------

@dataclass
class DSCertificate:
    memberships: list
    membership_residuals: list
    product_residual: float
    invariant_report: InvariantSubspaceReport
    reasons: list = field(default_factory=list)

    @property
    def is_solution(self) -> bool:
        return not self.reasons


def deligne_simpson_certificate(matrices, flags, budget: SearchBudget | None = None) -> DSCertificate:
    """Check a proposed genus-zero solution: memberships, product = Id, and no
    common proper invariant subspace (irreducibility needs a complete lattice)."""
    matrices = [as_matrix(m) for m in matrices]
    if len(matrices) != len(flags) or not matrices:
        raise PairError("need equally many matrices and flags, at least one each")
    r = matrices[0].shape[0]
    residuals = [membership_residual(m, f) for m, f in zip(matrices, flags)]
    memberships = [x <= MEMBERSHIP_TOL for x in residuals]
    prod = np.eye(r, dtype=complex)
    for m in matrices:
        prod = prod @ m
    prod_resid = frob(prod - np.eye(r))
    report = submodule_lattice(matrices, r, budget)

    reasons = []
    for i, ok in enumerate(memberships):
        if not ok:
            reasons.append(f"membership fails at puncture {i + 1} (residual {residuals[i]:.2e})")
    if prod_resid >= RELATOR_TOL:
        reasons.append(f"product is not the identity (residual {prod_resid:.2e})")
    if report.subspaces:
        reasons.append("common proper invariant subspace found (reducible)")
    elif report.lattice_status != "complete":
        reasons.append("irreducibility not certified: subspace lattice only sampled")
    return DSCertificate(memberships, residuals, prod_resid, report, reasons)

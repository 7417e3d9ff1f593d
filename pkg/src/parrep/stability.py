"""Stability of weighted pairs by direct slope comparison over induced
sub-pairs, polystable decompositions through commutant idempotents, and the
Mumford weight of a one-parameter subgroup against the weighted line bundle.

Slope comparisons are exact rational arithmetic; only subspace identification
is numerical.  Verdict soundness: unstable and polystable always carry a
checkable certificate; stable/semistable need a complete subspace lattice."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .linalg import (
    as_matrix,
    orthonormal_basis,
    subspace_intersection,
    subspace_sum,
)
from .pairs import (
    INVARIANCE_TOL,
    SearchBudget,
    WeightedPair,
    commutant_basis,
    induced_subpair,
    invariant_subspaces,
    invariance_residual,
)


class StabilityError(ValueError):
    pass


@dataclass
class StabilityVerdict:
    status: str  # stable | semistable_not_stable | unstable | polystable | undecided
    slope: Fraction
    witness: np.ndarray | None = None
    witness_slope: Fraction | None = None
    lattice_status: str = "complete"
    decomposition: list | None = None  # bases of equal-slope stable summands
    summand_slopes: list | None = None

    @property
    def decided(self) -> bool:
        return self.status != "undecided"

    @property
    def semistable(self) -> bool | None:
        if self.status in ("stable", "semistable_not_stable", "polystable"):
            return True
        if self.status == "unstable":
            return False
        return None


def semistable(wp: WeightedPair, budget: SearchBudget | None = None) -> StabilityVerdict:
    """Compare the slope of every induced sub-pair with the total slope.

    A destabilizer is sound regardless of lattice status; stable and strictly
    semistable verdicts require the complete lattice."""
    mu = wp.slope()
    report = invariant_subspaces(wp.pair, budget)
    equal_slope_witness = None
    for basis, _dim in report.subspaces:
        sub = induced_subpair(wp, basis)
        mu_sub = sub.slope()
        if mu_sub > mu:
            return StabilityVerdict(
                "unstable", mu, basis, mu_sub, report.lattice_status
            )
        if mu_sub == mu and equal_slope_witness is None:
            equal_slope_witness = (basis, mu_sub)
    if report.lattice_status != "complete":
        return StabilityVerdict("undecided", mu, lattice_status="sampled")
    if equal_slope_witness is not None:
        basis, mu_sub = equal_slope_witness
        return StabilityVerdict("semistable_not_stable", mu, basis, mu_sub, "complete")
    return StabilityVerdict("stable", mu, lattice_status="complete")


def _commutant_split(mats, basis, rng, rounds: int = 6):
    """Split the restriction of the module to span(basis) into indecomposable
    invariant summands using spectral projectors of random commutant elements."""
    q = orthonormal_basis(basis)
    restricted = [q.conj().T @ m @ q for m in mats]
    k = q.shape[1]
    comm = commutant_basis(restricted, k)
    if len(comm) <= 1:
        return [q]
    for _ in range(rounds):
        coeff = rng.standard_normal(len(comm)) + 1j * rng.standard_normal(len(comm))
        t = sum(c * m for c, m in zip(coeff, comm))
        vals, vecs = np.linalg.eig(t)
        # cluster eigenvalues, then spectral subspaces are invariant summands
        clusters = []
        for idx, lam in enumerate(vals):
            for cl in clusters:
                if abs(lam - cl[0]) <= 1e-7 * max(1.0, abs(lam)):
                    cl[1].append(idx)
                    break
            else:
                clusters.append((lam, [idx]))
        if len(clusters) == 1:
            continue
        pieces = []
        ok = True
        for _, idxs in clusters:
            piece = orthonormal_basis(vecs[:, idxs])
            if piece.shape[1] != len(idxs):
                ok = False
                break
            if invariance_residual(restricted, piece) > INVARIANCE_TOL:
                ok = False
                break
            pieces.append(piece)
        if not ok:
            continue
        out = []
        for piece in pieces:
            out.extend(_commutant_split(mats, q @ piece, rng, rounds))
        return out
    return [q]


def polystable(wp: WeightedPair, budget: SearchBudget | None = None) -> StabilityVerdict:
    """Exhibit a direct-sum decomposition into equal-slope stable summands, or
    explain why none exists (unstable / strictly semistable / undecided)."""
    budget = budget or SearchBudget()
    base = semistable(wp, budget)
    if base.status == "unstable" or base.status == "undecided":
        return base
    rng = np.random.default_rng(budget.seed + 1)
    mats = wp.pair.generator_matrices()
    summands = _commutant_split(mats, np.eye(wp.pair.rank, dtype=complex), rng)
    slopes = []
    for piece in summands:
        sub = induced_subpair(wp, piece)
        verdict = semistable(sub, budget)
        if verdict.status == "undecided":
            return StabilityVerdict("undecided", wp.slope(), lattice_status="sampled")
        if verdict.status != "stable":
            # an indecomposable summand that is not stable: no polystable splitting
            return StabilityVerdict(
                base.status,
                wp.slope(),
                base.witness,
                base.witness_slope,
                base.lattice_status,
            )
        slopes.append(sub.slope())
    if len(set(slopes)) > 1:
        return StabilityVerdict(
            base.status, wp.slope(), base.witness, base.witness_slope, base.lattice_status
        )
    return StabilityVerdict(
        "polystable",
        wp.slope(),
        lattice_status=base.lattice_status,
        decomposition=summands,
        summand_slopes=slopes,
    )


@dataclass
class OneParamSubgroup:
    """Integer weights with their eigenspaces; the ambient space must split."""

    levels: list  # list of (N: int, basis)

    def __post_init__(self):
        ns = [int(n) for n, _ in self.levels]
        if len(set(ns)) != len(ns):
            raise StabilityError("one-parameter subgroup weights must be distinct")
        bases = [as_matrix(b) for _, b in self.levels]
        total = sum(b.shape[1] for b in bases)
        stacked = np.hstack(bases)
        if orthonormal_basis(stacked).shape[1] != total:
            raise StabilityError("weight spaces must be independent")
        r = bases[0].shape[0]
        if total != r:
            raise StabilityError("weight spaces must span the ambient space")
        self.levels = sorted(zip(ns, bases), key=lambda t: -t[0])

    def filtration(self):
        """V^{>=N} for each occurring N, in decreasing N order."""
        out = []
        acc = None
        for n, b in self.levels:
            acc = b if acc is None else subspace_sum(acc, b)
            out.append((n, acc))
        return out


def mumford_weight(wp: WeightedPair, lam: OneParamSubgroup) -> Fraction:
    """-sum over N >= 0 of N * sum_{i,l} w_l (dim(V_l ∩ V^N) - dim(V_{l+1} ∩ V^N)).

    Requires every V^{>=N} to be invariant (otherwise the limit of the pair
    under the subgroup does not exist and the weight is undefined)."""
    mats = wp.pair.generator_matrices()
    for n, acc in lam.filtration()[:-1]:
        if invariance_residual(mats, acc) > INVARIANCE_TOL:
            raise StabilityError(
                f"filtration piece V^(>={n}) is not invariant; Mumford weight undefined"
            )
    if any(n < 0 for n, _ in lam.levels):
        raise StabilityError("negative weights: the flag limit does not exist")
    total = Fraction(0)
    for n, basis in lam.levels:
        if n == 0:
            continue
        inner = Fraction(0)
        for f, w in zip(wp.pair.flags, wp.weights):
            for l in range(0, f.levels + 1):
                d_here = subspace_intersection(f.subspace(l), basis).shape[1]
                d_next = subspace_intersection(f.subspace(l + 1), basis).shape[1]
                inner += w[l] * (d_here - d_next)
        total -= n * inner
    return total


def destabilizing_subgroup(wp: WeightedPair, witness) -> OneParamSubgroup:
    """Weight 1 on the witness subspace, 0 on an orthogonal complement."""
    q = orthonormal_basis(witness)
    r = wp.pair.rank
    full = np.eye(r, dtype=complex)
    comp = orthonormal_basis(full - q @ q.conj().T)
    return OneParamSubgroup([(1, q), (0, comp)])


def random_invariant_subgroup(
    wp: WeightedPair, rng, budget=None, report=None
) -> OneParamSubgroup | None:
    """Random 1-PS whose filtration is a chain from the invariant lattice,
    with complements chosen orthogonally."""
    if report is None:
        report = invariant_subspaces(wp.pair, budget)
    r = wp.pair.rank
    eye = np.eye(r, dtype=complex)
    if not report.subspaces or rng.random() < 0.2:
        return OneParamSubgroup([(int(rng.integers(0, 3)), eye)])
    # build an increasing chain by repeated sampling
    k = int(rng.integers(1, min(3, len(report.subspaces)) + 1))
    picks = rng.choice(len(report.subspaces), size=k, replace=False)
    chain = []
    for idx in sorted(picks, key=lambda t: report.subspaces[t][1]):
        basis, _dim = report.subspaces[idx]
        if not chain:
            chain.append(basis)
        else:
            merged = subspace_sum(chain[-1], basis)
            if merged.shape[1] > chain[-1].shape[1] and merged.shape[1] < r:
                chain.append(merged)
    levels = []
    prev = None
    weight = len(chain) + 1
    for piece in chain:
        if prev is None:
            levels.append((weight, piece))
        else:
            comp = orthonormal_basis(piece - prev @ (prev.conj().T @ piece))
            if comp.shape[1] == 0:
                prev = piece
                weight -= 1
                continue
            levels.append((weight, comp))
        prev = piece
        weight -= 1
    comp = orthonormal_basis(eye - prev @ prev.conj().T)
    if comp.shape[1]:
        levels.append((0, comp))
    try:
        return OneParamSubgroup(levels)
    except StabilityError:
        return None

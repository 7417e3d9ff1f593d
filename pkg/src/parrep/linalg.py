"""Dense complex linear algebra substrate: flags, parabolic membership,
Hermitian metrics, and exact rational weight vectors.

All rank decisions in the package go through one relative singular-value
cutoff (``RANK_RTOL``).  Weights are ``fractions.Fraction`` end to end; only
the metric solver converts them to floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

# A singular value counts as zero when below RANK_RTOL * (largest singular value).
RANK_RTOL = 1e-9
# Subspace containment / membership residual cutoff.
MEMBERSHIP_TOL = 1e-8


class LinalgError(ValueError):
    pass


def as_matrix(a) -> np.ndarray:
    """Coerce to a 2-d complex array and insist every entry is finite."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise LinalgError(f"expected a matrix, got array of ndim {m.ndim}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise LinalgError("matrix has non-finite entries")
    return m


def frob(m) -> float:
    return float(np.linalg.norm(np.asarray(m), "fro"))


def numerical_rank(m) -> int:
    m = as_matrix(m)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


def orthonormal_basis(b) -> np.ndarray:
    """Orthonormal columns spanning the column space of ``b`` (rank-truncated)."""
    b = as_matrix(b)
    if b.shape[1] == 0:
        return b
    u, s, _ = np.linalg.svd(b, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return u[:, :0]
    k = int(np.sum(s > RANK_RTOL * s[0]))
    return u[:, :k]


def nullspace(a, atol: float = 0.0) -> np.ndarray:
    """Orthonormal basis (columns) of the kernel of ``a``.

    ``atol`` sets an absolute singular-value floor for matrices that are
    differences of same-scale quantities (where the relative cutoff against
    the difference's own largest singular value would see pure roundoff as
    full rank)."""
    a = as_matrix(a)
    if a.shape[0] == 0:
        return np.eye(a.shape[1], dtype=complex)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        cutoff = max(RANK_RTOL * s[0], atol)
        rank = int(np.sum(s > cutoff))
    return vh[rank:].conj().T


def subspace_intersection(a, b) -> np.ndarray:
    """Orthonormal basis of span(a) ∩ span(b)."""
    qa, qb = orthonormal_basis(a), orthonormal_basis(b)
    if qa.shape[1] == 0 or qb.shape[1] == 0:
        return qa[:, :0]
    n = nullspace(np.hstack([qa, -qb]))
    if n.shape[1] == 0:
        return qa[:, :0]
    return orthonormal_basis(qa @ n[: qa.shape[1], :])


def subspace_sum(a, b) -> np.ndarray:
    return orthonormal_basis(np.hstack([as_matrix(a), as_matrix(b)]))


def subspace_contains(big, small, tol: float = MEMBERSHIP_TOL) -> bool:
    """Is span(small) ⊆ span(big)?"""
    qb = orthonormal_basis(big)
    qs = orthonormal_basis(small)
    if qs.shape[1] == 0:
        return True
    resid = qs - qb @ (qb.conj().T @ qs)
    return frob(resid) <= tol * max(1.0, frob(qs))


def std_projector(b) -> np.ndarray:
    """Orthogonal projector (standard metric) onto the column span of ``b``."""
    q = orthonormal_basis(b)
    return q @ q.conj().T


@dataclass(frozen=True)
class FlagType:
    """Graded dimension vector (d_0, ..., d_s) of a flag; sums to the rank."""

    dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) == 0 or any(d < 1 for d in dims):
            raise LinalgError(f"flag type needs positive graded dimensions, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def rank(self) -> int:
        return sum(self.dims)

    @property
    def levels(self) -> int:
        """Number s of proper subspaces in a flag of this type."""
        return len(self.dims) - 1

    def subspace_dims(self) -> list:
        """dim V_ell for ell = 0..s+1 (descending; V_0 ambient, V_{s+1} zero)."""
        out = [self.rank]
        for d in self.dims[:-1]:
            out.append(out[-1] - d)
        out.append(0)
        return out


def parabolic_dimension(ftype: FlagType) -> int:
    """Dimension of the parabolic subalgebra preserving a flag of this type:
    sum of d_i * d_j over i <= j."""
    d = ftype.dims
    return sum(d[i] * d[j] for i in range(len(d)) for j in range(i, len(d)))


def nilradical_dimension(ftype: FlagType) -> int:
    d = ftype.dims
    return sum(d[i] * d[j] for i in range(len(d)) for j in range(i + 1, len(d)))


class Flag:
    """Strictly nested chain of proper subspaces of C^r.

    Stores bases of the proper subspaces only, outermost first:
    ``subspaces[k]`` spans V_{k+1}, so V_1 comes first and V_s last.
    V_0 = C^r and V_{s+1} = 0 are implicit.  A trivial flag (s = 0) has an
    empty subspace list.
    """

    def __init__(self, ambient_dim: int, subspaces):
        self.ambient_dim = int(ambient_dim)
        bases = []
        prev_dim = self.ambient_dim
        prev_basis = None
        for b in subspaces:
            b = as_matrix(b)
            if b.shape[0] != self.ambient_dim:
                raise LinalgError(
                    f"flag basis has {b.shape[0]} rows, ambient dimension is {self.ambient_dim}"
                )
            if b.shape[1] == 0:
                raise LinalgError("flag subspace must be nonzero; the zero term is implicit")
            s = np.linalg.svd(b, compute_uv=False)
            if s[-1] <= RANK_RTOL * s[0]:
                raise LinalgError("flag basis is rank deficient")
            k = b.shape[1]
            if not (0 < k < prev_dim):
                raise LinalgError("flag subspaces must be strictly nested and proper")
            if prev_basis is not None and not subspace_contains(prev_basis, b):
                raise LinalgError("flag subspaces are not nested")
            bases.append(b)
            prev_dim, prev_basis = k, b
        self.subspaces = bases

    @property
    def levels(self) -> int:
        return len(self.subspaces)

    @property
    def type(self) -> FlagType:
        dims_chain = [self.ambient_dim] + [b.shape[1] for b in self.subspaces] + [0]
        return FlagType(tuple(dims_chain[i] - dims_chain[i + 1] for i in range(len(dims_chain) - 1)))

    def subspace(self, level: int) -> np.ndarray:
        """Basis of V_level; level 0 is the ambient space, level s+1 is zero."""
        if level == 0:
            return np.eye(self.ambient_dim, dtype=complex)
        if level == self.levels + 1:
            return np.zeros((self.ambient_dim, 0), dtype=complex)
        return self.subspaces[level - 1]

    def orthonormal_chain(self) -> list:
        """Orthonormal bases [Q_0, ..., Q_{s}] for V_0 .. V_s (Q_0 identity)."""
        return [np.eye(self.ambient_dim, dtype=complex)] + [
            orthonormal_basis(b) for b in self.subspaces
        ]

    def conjugate(self, g) -> "Flag":
        g = as_matrix(g)
        return Flag(self.ambient_dim, [g @ b for b in self.subspaces])

    @staticmethod
    def trivial(r: int) -> "Flag":
        return Flag(r, [])

    @staticmethod
    def from_nested_dims(columns: np.ndarray, proper_dims) -> "Flag":
        """Flag whose V_ell is spanned by the leading ``proper_dims[ell-1]`` columns."""
        columns = as_matrix(columns)
        return Flag(columns.shape[0], [columns[:, :k] for k in proper_dims])


@dataclass(frozen=True)
class WeightVector:
    """Strictly increasing exact rational weights, one per flag level (s+1 of them)."""

    weights: tuple

    def __post_init__(self):
        w = tuple(Fraction(x) for x in self.weights)
        if len(w) == 0:
            raise LinalgError("weight vector must be nonempty")
        if any(w[i] >= w[i + 1] for i in range(len(w) - 1)):
            raise LinalgError(f"weights must be strictly increasing, got {w}")
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)

    def __getitem__(self, i):
        return self.weights[i]


class HermitianMetric:
    """Positive-definite Hermitian form on C^r, stored as its Gram matrix."""

    HERM_TOL = 1e-10

    def __init__(self, gram):
        g = as_matrix(gram)
        if g.shape[0] != g.shape[1]:
            raise LinalgError("metric Gram matrix must be square")
        if frob(g - g.conj().T) > self.HERM_TOL * max(1.0, frob(g)):
            raise LinalgError("metric Gram matrix is not Hermitian")
        g = 0.5 * (g + g.conj().T)
        eig = np.linalg.eigvalsh(g)
        if eig[0] <= 0:
            raise LinalgError(f"metric is not positive definite (min eigenvalue {eig[0]:.3e})")
        self.gram = g

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    @staticmethod
    def identity(r: int) -> "HermitianMetric":
        return HermitianMetric(np.eye(r, dtype=complex))

    def adjoint(self, m) -> np.ndarray:
        """h-adjoint of an operator: h^{-1} m^* h."""
        m = as_matrix(m)
        return np.linalg.solve(self.gram, m.conj().T @ self.gram)

    def sqrt(self) -> np.ndarray:
        w, v = np.linalg.eigh(self.gram)
        return (v * np.sqrt(w)) @ v.conj().T

    def inv_sqrt(self) -> np.ndarray:
        w, v = np.linalg.eigh(self.gram)
        return (v / np.sqrt(w)) @ v.conj().T

    def condition_number(self) -> float:
        w = np.linalg.eigvalsh(self.gram)
        return float(w[-1] / w[0])


def orth_projection(h: HermitianMetric, sub) -> np.ndarray:
    """h-orthogonal projector onto span(sub): idempotent, h-self-adjoint, image sub."""
    b = as_matrix(sub)
    if numerical_rank(b) < b.shape[1]:
        raise LinalgError("projection subspace basis is rank deficient")
    bhb = b.conj().T @ h.gram @ b
    return b @ np.linalg.solve(bhb, b.conj().T @ h.gram)


def parabolic_membership(m, flag: Flag, tol: float = MEMBERSHIP_TOL) -> bool:
    """Does m preserve every subspace of the flag?"""
    return membership_residual(m, flag) <= tol


def membership_residual(m, flag: Flag) -> float:
    """Max over flag levels of ||(I - P_ell) m B_ell|| / max(1, ||m||)."""
    m = as_matrix(m)
    if m.shape != (flag.ambient_dim, flag.ambient_dim):
        raise LinalgError(
            f"matrix shape {m.shape} does not match flag ambient dimension {flag.ambient_dim}"
        )
    scale = max(1.0, frob(m))
    worst = 0.0
    for b in flag.subspaces:
        q = orthonormal_basis(b)
        mq = m @ q
        worst = max(worst, frob(mq - q @ (q.conj().T @ mq)) / scale)
    return worst


def parabolic_subalgebra_basis(flag: Flag) -> np.ndarray:
    """Orthonormal basis (as r^2-columns, row-major vec) of the matrices
    preserving every subspace of the flag."""
    r = flag.ambient_dim
    rows = []
    for b in flag.subspaces:
        q = orthonormal_basis(b)
        perp = np.eye(r, dtype=complex) - q @ q.conj().T
        # constraint (I - P) A Q = 0, row-major vec: (perp ⊗ Q^T) vec(A)
        rows.append(np.kron(perp, q.T))
    if not rows:
        return np.eye(r * r, dtype=complex)
    return nullspace(np.vstack(rows))


def induced_flag(flag: Flag, sub, weights: WeightVector):
    """Intersect a weighted flag with a subspace, remove duplicate levels.

    Returns ``(flag', weights', level_map)`` where the induced flag lives in
    the coordinates of ``sub`` (ambient dimension = dim sub), the new weight
    at level l' is the old weight at max S(l'), and ``level_map[l']`` is that
    index.  S(l') collects the old levels whose intersection has the same
    dimension as V'_{l'}.
    """
    if len(weights) != flag.levels + 1:
        raise LinalgError("weight count must equal flag level count + 1")
    q_sub = orthonormal_basis(sub)
    r_sub = q_sub.shape[1]
    if r_sub == 0:
        raise LinalgError("cannot induce a flag on the zero subspace")
    if as_matrix(sub).shape[0] != flag.ambient_dim:
        raise LinalgError("subspace does not live in the flag's ambient space")
    if numerical_rank(as_matrix(sub)) < as_matrix(sub).shape[1]:
        raise LinalgError("rank-deficient subspace basis")

    s = flag.levels
    inters = [q_sub] + [subspace_intersection(flag.subspace(l), q_sub) for l in range(1, s + 1)]
    dims = [b.shape[1] for b in inters]  # dims[l] = dim(V_l ∩ sub), l = 0..s

    # proper distinct dimensions, descending, strictly between r_sub and 0
    proper = []
    for l in range(1, s + 1):
        if 0 < dims[l] < r_sub and (not proper or dims[l] < proper[-1][1]):
            proper.append((l, dims[l]))
    new_bases = [q_sub.conj().T @ inters[l] for l, _ in proper]
    new_flag = Flag(r_sub, new_bases)

    chain_dims = [r_sub] + [d for _, d in proper]
    level_map = []
    new_weights = []
    for lp, dval in enumerate(chain_dims):
        s_set = [l for l in range(0, s + 1) if dims[l] == dval]
        level_map.append(max(s_set))
        new_weights.append(weights[max(s_set)])
    return new_flag, WeightVector(tuple(new_weights)), level_map

"""The star-shaped quiver with loops attached to a surface-group presentation
and flag types: one central vertex carrying the loop images, one arm per
puncture encoding the flag by injective inclusions and commuting compressions.

Provides the encode/decode translation between representation pairs and quiver
representations, the induced vertex weights, and King semistability decided
through the central vertex (arm subspaces of a subrepresentation are forced by
injectivity, and arm weights are positive, so maximal arm intersections
maximize the pairing).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .linalg import (
    RANK_RTOL,
    Flag,
    FlagType,
    WeightVector,
    as_matrix,
    frob,
    orthonormal_basis,
    subspace_intersection,
)
from .pairs import (
    InvariantSubspaceReport,
    RepPair,
    SearchBudget,
    WeightedPair,
    submodule_lattice,
)
from .surface import Presentation

LOCUS_TOL = 1e-8


class QuiverError(ValueError):
    pass


@dataclass(frozen=True)
class Arrow:
    name: str
    src: str
    tgt: str


class StarQuiver:
    """Vertices: u and u{i}_{l}; arrows: loops a_j, b_j, c{i} at u, arm
    inclusions e{i}_{l}: u{i}_{l} -> u{i}_{l-1}, arm loops c{i}_{l}."""

    def __init__(self, genus: int, punctures: int, types):
        self.genus = int(genus)
        self.punctures = int(punctures)
        self.types = [t if isinstance(t, FlagType) else FlagType(tuple(t)) for t in types]
        if len(self.types) != self.punctures:
            raise QuiverError("need one flag type per puncture")
        ranks = {t.rank for t in self.types}
        if len(ranks) != 1:
            raise QuiverError(f"flag types disagree on the rank: {sorted(ranks)}")
        self.rank = ranks.pop()

        self.vertices = ["u"]
        for i, t in enumerate(self.types, start=1):
            for l in range(1, t.levels + 1):
                self.vertices.append(self.vertex(i, l))
        self.arrows = []
        for j in range(1, self.genus + 1):
            self.arrows.append(Arrow(f"a{j}", "u", "u"))
            self.arrows.append(Arrow(f"b{j}", "u", "u"))
        for i in range(1, self.punctures + 1):
            self.arrows.append(Arrow(f"c{i}", "u", "u"))
        for i, t in enumerate(self.types, start=1):
            for l in range(1, t.levels + 1):
                below = "u" if l == 1 else self.vertex(i, l - 1)
                self.arrows.append(Arrow(f"e{i}_{l}", self.vertex(i, l), below))
                self.arrows.append(Arrow(f"c{i}_{l}", self.vertex(i, l), self.vertex(i, l)))

    @staticmethod
    def vertex(i: int, l: int) -> str:
        return f"u{i}_{l}"

    def dimension_vector(self) -> dict:
        dims = {"u": self.rank}
        for i, t in enumerate(self.types, start=1):
            chain = t.subspace_dims()
            for l in range(1, t.levels + 1):
                dims[self.vertex(i, l)] = chain[l]
        return dims

    def arrow(self, name: str) -> Arrow:
        for a in self.arrows:
            if a.name == name:
                return a
        raise QuiverError(f"no arrow named {name}")


def build_star_quiver(genus: int, punctures: int, types):
    q = StarQuiver(genus, punctures, types)
    return q, q.dimension_vector()


def induced_weight(weights, types) -> dict:
    """Vertex weights from a rational weight system: the central weight is the
    negative slope plus the sum of bottom weights; each arm vertex carries the
    (positive) gap between consecutive flag weights."""
    types = [t if isinstance(t, FlagType) else FlagType(tuple(t)) for t in types]
    r = types[0].rank
    weights = [WeightVector(tuple(Fraction(x) for x in w)) for w in weights]
    if len(weights) != len(types):
        raise QuiverError("need one weight vector per puncture")
    degree = Fraction(0)
    for t, w in zip(types, weights):
        if len(w) != t.levels + 1:
            raise QuiverError("weight vector length does not match flag type")
        degree += sum(d * wl for d, wl in zip(t.dims, w.weights))
    out = {"u": -degree / r + sum(w[0] for w in weights)}
    for i, (t, w) in enumerate(zip(types, weights), start=1):
        for l in range(1, t.levels + 1):
            out[StarQuiver.vertex(i, l)] = w[l] - w[l - 1]
    return out


def weight_pairing(qweight: dict, dims: dict) -> Fraction:
    return sum((qweight[v] * dims[v] for v in dims), Fraction(0))


class QuiverRep:
    """Arrow-indexed linear maps with the dimension vector of the quiver."""

    def __init__(self, quiver: StarQuiver, maps: dict):
        self.quiver = quiver
        dims = quiver.dimension_vector()
        self.maps = {}
        for a in quiver.arrows:
            if a.name not in maps:
                raise QuiverError(f"missing map for arrow {a.name}")
            m = as_matrix(maps[a.name])
            want = (dims[a.tgt], dims[a.src])
            if m.shape != want:
                raise QuiverError(f"map {a.name} has shape {m.shape}, expected {want}")
            self.maps[a.name] = m

    def locus_failures(self, tol: float = LOCUS_TOL) -> list:
        """Violations of the representation-pair locus: injectivity of every
        arrow map, arm/loop commutation, and the loop relator at u."""
        fails = []
        for a in self.quiver.arrows:
            m = self.maps[a.name]
            if min(m.shape) == 0:
                continue
            s = np.linalg.svd(m, compute_uv=False)
            if s[-1] <= RANK_RTOL * max(1.0, s[0]):
                fails.append(("injectivity", a.name, float(s[-1])))
        for i, t in enumerate(self.quiver.types, start=1):
            for l in range(1, t.levels + 1):
                upper = self.maps[f"c{i}_{l}"]
                lower = self.maps["c" + str(i)] if l == 1 else self.maps[f"c{i}_{l - 1}"]
                e = self.maps[f"e{i}_{l}"]
                resid = frob(lower @ e - e @ upper)
                if resid > tol * max(1.0, frob(lower) * frob(e)):
                    fails.append(("commutation", f"e{i}_{l}", resid))
        rel = np.eye(self.quiver.rank, dtype=complex)
        for j in range(1, self.quiver.genus + 1):
            a, b = self.maps[f"a{j}"], self.maps[f"b{j}"]
            rel = rel @ a @ b @ np.linalg.inv(a) @ np.linalg.inv(b)
        for i in range(1, self.quiver.punctures + 1):
            rel = rel @ self.maps[f"c{i}"]
        resid = frob(rel - np.eye(self.quiver.rank))
        if resid > tol:
            fails.append(("relator", "u", resid))
        return fails

    def composed_embedding(self, i: int, l: int) -> np.ndarray:
        """e{i}_1 ∘ ... ∘ e{i}_l : arm level l into the central space."""
        out = np.eye(self.quiver.rank, dtype=complex)
        acc = None
        for k in range(1, l + 1):
            e = self.maps[f"e{i}_{k}"]
            acc = e if acc is None else acc @ e
        return acc if acc is not None else out


def encode(pair: RepPair) -> QuiverRep:
    """Loop maps are the generator images; arm inclusions are coordinates of
    the orthonormalized flag chain; arm loops are the boundary compressions."""
    p = pair.presentation
    types = [f.type for f in pair.flags]
    quiver = StarQuiver(p.genus, p.punctures, types)
    maps = {}
    for j in range(1, p.genus + 1):
        maps[f"a{j}"] = pair.images[f"a{j}"]
        maps[f"b{j}"] = pair.images[f"b{j}"]
    for i in range(1, p.punctures + 1):
        maps[f"c{i}"] = pair.images[f"g{i}"]
    for i, f in enumerate(pair.flags, start=1):
        chain = f.orthonormal_chain()
        rho = pair.puncture_image(i)
        for l in range(1, f.levels + 1):
            q_prev, q_here = chain[l - 1], chain[l]
            maps[f"e{i}_{l}"] = q_prev.conj().T @ q_here
            maps[f"c{i}_{l}"] = q_here.conj().T @ rho @ q_here
    return QuiverRep(quiver, maps)


def decode(x: QuiverRep) -> RepPair:
    """Pair with the loop maps as images and flags from composed arm images."""
    fails = x.locus_failures()
    if fails:
        kind, where, resid = fails[0]
        raise QuiverError(f"locus invariant violated: {kind} at {where} (residual {resid:.2e})")
    q = x.quiver
    p = Presentation(q.genus, q.punctures)
    images = {}
    for j in range(1, q.genus + 1):
        images[f"a{j}"] = x.maps[f"a{j}"]
        images[f"b{j}"] = x.maps[f"b{j}"]
    for i in range(1, q.punctures + 1):
        images[f"g{i}"] = x.maps[f"c{i}"]
    flags = []
    for i, t in enumerate(q.types, start=1):
        bases = [x.composed_embedding(i, l) for l in range(1, t.levels + 1)]
        flags.append(Flag(q.rank, bases))
    return RepPair(p, images, flags)


@dataclass
class KingVerdict:
    status: str  # "stable" | "semistable" | "unstable" | "undecided"
    pairing: Fraction | None = None
    witness: dict | None = None  # vertex -> basis of the subrepresentation
    lattice_status: str = "complete"
    checked: int = 0

    @property
    def decided(self) -> bool:
        return self.status != "undecided"


def _subrep_from_central(x: QuiverRep, v_basis) -> dict:
    """Maximal subrepresentation over a rho-invariant central subspace: arm
    spaces are the full preimages of the flag intersections (forced maximal)."""
    sub = {"u": orthonormal_basis(v_basis)}
    q = x.quiver
    for i, t in enumerate(q.types, start=1):
        for l in range(1, t.levels + 1):
            emb = x.composed_embedding(i, l)
            inter = subspace_intersection(emb, sub["u"])
            # solve emb * w = inter: coordinates of the intersection upstairs
            w, *_ = np.linalg.lstsq(emb, inter, rcond=None)
            sub[q.vertex(i, l)] = orthonormal_basis(w)
    return sub


def king_semistable(
    x: QuiverRep,
    qweight: dict,
    budget: SearchBudget | None = None,
    report: InvariantSubspaceReport | None = None,
) -> KingVerdict:
    """King pairing test over subrepresentations, searched through the central
    vertex.  Unstable verdicts carry an explicit witness; stable/semistable
    are certified only on a complete lattice, otherwise undecided."""
    fails = x.locus_failures()
    if fails:
        raise QuiverError(f"representation is outside the locus: {fails[0]}")
    q = x.quiver
    dims = q.dimension_vector()
    total = weight_pairing(qweight, dims)
    if total != 0:
        warnings.warn(
            f"vertex weights pair to {total} != 0 against the dimension vector",
            stacklevel=2,
        )
    loop_mats = [x.maps[a.name] for a in q.arrows if a.src == "u" and a.tgt == "u"]
    if report is None:
        report = submodule_lattice(loop_mats, q.rank, budget)

    best = None
    checked = 0
    for basis, _dim in report.subspaces:
        sub = _subrep_from_central(x, basis)
        sub_dims = {v: sub[v].shape[1] for v in sub}
        pairing = weight_pairing(qweight, sub_dims)
        checked += 1
        if best is None or pairing > best[0]:
            best = (pairing, sub)
        if pairing > 0:
            return KingVerdict("unstable", pairing, sub, report.lattice_status, checked)
    if report.lattice_status != "complete":
        return KingVerdict("undecided", None, None, report.lattice_status, checked)
    if best is not None and best[0] == 0:
        return KingVerdict("semistable", best[0], best[1], "complete", checked)
    return KingVerdict("stable", best[0] if best else None, None, "complete", checked)


def encode_weighted(wp: WeightedPair):
    """Quiver representation and induced vertex weights of a weighted pair."""
    x = encode(wp.pair)
    w = induced_weight([wv.weights for wv in wp.weights], [f.type for f in wp.pair.flags])
    return x, w

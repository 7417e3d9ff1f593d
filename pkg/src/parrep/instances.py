"""Builders for the bundled instance corpus and for randomized desk instances
used throughout the test suite.  Everything is deterministic given a seed."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import scipy.linalg

from .linalg import Flag, WeightVector
from .pairs import RepPair, WeightedPair
from .surface import Presentation, evaluate, last_puncture_word

SQRT5 = np.sqrt(5.0)


def product_triple_matrices():
    """The three unimodular matrices whose product is the identity, used by the
    bundled genus-zero certificate instances."""
    a1 = np.array([[1.0, -2.0], [0.0, 1.0]], dtype=complex)
    a2 = np.array([[1.0, 1.0], [1.0, 0.0]], dtype=complex)
    a3 = np.array([[0.0, 1.0], [1.0, 1.0]], dtype=complex)
    return a1, a2, a3


def line_flag(v) -> Flag:
    v = np.asarray(v, dtype=complex).reshape(-1, 1)
    return Flag(v.shape[0], [v])


def triple_flags_good():
    """Eigenline flags making the product triple a certificate solution."""
    f1 = line_flag([1.0, 0.0])
    f3 = line_flag([(3.0 + SQRT5) / 2.0, (1.0 + SQRT5) / 2.0])
    f4 = line_flag([(1.0 + SQRT5) / 2.0, (3.0 + SQRT5) / 2.0])
    return [f1, f3, f4]


def triple_flags_bad():
    """Coordinate-line flags for which membership fails at the second matrix."""
    f1 = line_flag([1.0, 0.0])
    f2 = line_flag([0.0, 1.0])
    return [f1, f2, f2]


def product_triple_pair() -> RepPair:
    p = Presentation(0, 3)
    a1, a2, a3 = product_triple_matrices()
    return RepPair(p, {"g1": a1, "g2": a2, "g3": a3}, triple_flags_good())


def random_invertible(r: int, rng) -> np.ndarray:
    """Well-conditioned random invertible matrix (exponential of a bounded one)."""
    a = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
    return scipy.linalg.expm(0.5 * a / max(1.0, np.linalg.norm(a, 2)))


def random_unitary(r: int, rng) -> np.ndarray:
    a = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
    q, _ = np.linalg.qr(a)
    return q


def schur_flag(m, ftype_dims) -> Flag:
    """A flag preserved by m, from leading Schur columns, of the given type."""
    r = m.shape[0]
    _, q = scipy.linalg.schur(np.asarray(m, dtype=complex), output="complex")
    chain = [r]
    for d in ftype_dims[:-1]:
        chain.append(chain[-1] - d)
    return Flag(r, [q[:, :k] for k in chain[1:]])


def random_pair(g: int, n: int, r: int, seed: int = 0, flag_dims=None) -> RepPair:
    """Random valid pair: free images are random, gn is forced by the relator,
    and each flag is built from the Schur form of the puncture image."""
    p = Presentation(g, n)
    rng = np.random.default_rng(seed)
    images = {}
    for name in p.free_generator_names():
        images[name] = random_invertible(r, rng)
    images[f"g{n}"] = evaluate(images, last_puncture_word(p))
    if flag_dims is None:
        flag_dims = [tuple([1] * r)] * n
    flags = [schur_flag(images[f"g{i + 1}"], flag_dims[i]) for i in range(n)]
    return RepPair(p, images, flags)


def trivial_pair(g: int, n: int, r: int, flags=None) -> RepPair:
    p = Presentation(g, n)
    eye = np.eye(r, dtype=complex)
    images = {name: eye.copy() for name in p.generator_names()}
    if flags is None:
        flags = [Flag.trivial(r)] * n
    return RepPair(p, images, flags)


def diagonal_pair(g: int, n: int, diag_entries, flags) -> RepPair:
    """All generators diagonal; alpha_1 carries the given entries, the rest are
    the identity, so every coordinate line is invariant."""
    r = len(diag_entries)
    p = Presentation(g, n)
    eye = np.eye(r, dtype=complex)
    images = {name: eye.copy() for name in p.generator_names()}
    if g >= 1:
        images["a1"] = np.diag(np.asarray(diag_entries, dtype=complex))
    else:
        raise ValueError("diagonal_pair needs genus >= 1 to keep the relator trivial")
    return RepPair(p, images, flags)


def irreducible_pair_r2(seed: int = 0, flag_dims=((1, 1),)) -> RepPair:
    """Genus-1 one-puncture rank-2 pair with irreducible image (swap + shear)."""
    p = Presentation(1, 1)
    a = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    b = np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex)
    images = {"a1": a, "b1": b}
    images["g1"] = evaluate(images, last_puncture_word(p))
    flags = [schur_flag(images["g1"], flag_dims[0])]
    return RepPair(p, images, flags)


def decomposable_pair(g: int, n: int, blocks, seed: int = 0, flag_dims=None) -> RepPair:
    """Direct sum of random pairs of the given ranks, with Schur flags on the sum."""
    rng = np.random.default_rng(seed)
    p = Presentation(g, n)
    r = sum(blocks)
    images = {}
    for name in p.free_generator_names():
        mats = [random_invertible(k, rng) for k in blocks]
        images[name] = scipy.linalg.block_diag(*mats)
    images[f"g{n}"] = evaluate(images, last_puncture_word(p))
    if flag_dims is None:
        flag_dims = [tuple([1] * r)] * n
    flags = [schur_flag(images[f"g{i + 1}"], flag_dims[i]) for i in range(n)]
    return RepPair(p, images, flags)


def weights_for(pair: RepPair, per_puncture) -> WeightedPair:
    ws = [WeightVector(tuple(Fraction(x) for x in w)) for w in per_puncture]
    return WeightedPair(pair, ws)


def zero_degree_weights(pair: RepPair, spread=Fraction(1, 2)) -> WeightedPair:
    """Degree-zero weight system: symmetric gaps around zero at each puncture,
    shifted so the total weighted degree vanishes exactly."""
    vectors = []
    running = Fraction(0)
    for f in pair.flags:
        dims = f.type.dims
        base = [Fraction(k) * spread for k in range(len(dims))]
        deg = sum(d * w for d, w in zip(dims, base))
        shift = deg / pair.rank
        vectors.append(tuple(w - shift for w in base))
        running += sum(d * w for d, w in zip(dims, vectors[-1]))
    assert running == 0
    return weights_for(pair, vectors)


def unstable_diag_instance(seed: int = 0) -> WeightedPair:
    """diag(1,2) with the flag line and weights (-1, 1): the flag line has
    slope 1 > 0, an exact destabilizer."""
    flags = [line_flag([1.0, 0.0])]
    pair = diagonal_pair(1, 1, [1.0, 2.0], flags)
    return weights_for(pair, [(-1, 1)])


def stable_generic_line_instance(a=Fraction(1, 2)) -> WeightedPair:
    """Diagonal rank-2 pair whose flag line avoids both invariant lines; stable
    for weights (-a, a) of degree zero."""
    flags = [line_flag([1.0, 1.0])]
    pair = diagonal_pair(1, 1, [1.0, 2.0], flags)
    return weights_for(pair, [(-a, a)])


def polystable_two_puncture_instance(a=Fraction(1, 2)) -> WeightedPair:
    """Two punctures with coordinate-line flags so both coordinate summands get
    slope 0: polystable but not stable (degree zero)."""
    p = Presentation(1, 2)
    eye = np.eye(2, dtype=complex)
    d = np.diag([2.0 + 0j, 3.0 + 0j])
    images = {
        "a1": np.diag([1.0 + 0j, 5.0 + 0j]),
        "b1": eye.copy(),
        "g1": d,
        "g2": np.linalg.inv(d),
    }
    flags = [line_flag([1.0, 0.0]), line_flag([0.0, 1.0])]
    pair = RepPair(p, images, flags)
    return weights_for(pair, [(-a, a), (-a, a)])


def unitary_pair(g: int, n: int, r: int, seed: int = 0) -> RepPair:
    """All images unitary (gn forced, hence unitary too), trivial flags."""
    p = Presentation(g, n)
    rng = np.random.default_rng(seed)
    images = {name: random_unitary(r, rng) for name in p.free_generator_names()}
    images[f"g{n}"] = evaluate(images, last_puncture_word(p))
    flags = [Flag.trivial(r)] * n
    return RepPair(p, images, flags)


def shear_semistable_instance(a=Fraction(1, 2)) -> WeightedPair:
    """Indecomposable shear module with flags on both coordinate lines: the
    unique invariant line e1 picks up weights (a, -a), so its slope equals the
    total slope 0 -- strictly semistable, not polystable."""
    p = Presentation(1, 2)
    shear = np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex)
    eye = np.eye(2, dtype=complex)
    images = {"a1": shear, "b1": eye, "g1": eye, "g2": eye}
    pair = RepPair(p, images, [line_flag([1.0, 0.0]), line_flag([0.0, 1.0])])
    return weights_for(pair, [(-a, a), (-a, a)])


def unipotent_monodromy_instance(a=Fraction(1, 2)) -> WeightedPair:
    """Boundary monodromies are nontrivial unipotents preserving the e1 flags;
    used by the residue corpus (nontrivial nilpotent residue parts)."""
    p = Presentation(1, 2)
    shear = np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex)
    eye = np.eye(2, dtype=complex)
    images = {"a1": shear, "b1": eye, "g1": shear, "g2": np.linalg.inv(shear)}
    pair = RepPair(p, images, [line_flag([1.0, 0.0]), line_flag([1.0, 0.0])])
    return weights_for(pair, [(-a, a), (-a, a)])


def bundled_corpus() -> dict:
    """Named instances shipped with the package and exercised by the CLI tests."""
    from .io import encode_instance

    a1, a2, a3 = product_triple_matrices()
    triple_good = RepPair(
        Presentation(0, 3), {"g1": a1, "g2": a2, "g3": a3}, triple_flags_good()
    )
    triple_bad = RepPair(
        Presentation(0, 3), {"g1": a1, "g2": a2, "g3": a3}, triple_flags_bad()
    )
    half = Fraction(1, 2)
    corpus = {
        "product_triple_good": encode_instance(
            triple_good,
            zero_degree_weights(triple_good).weights,
        ),
        "product_triple_bad_flags": encode_instance(
            triple_bad, zero_degree_weights(triple_bad).weights
        ),
        "trivial_rank2": encode_instance(
            trivial_pair(1, 1, 2, flags=[line_flag([1.0, 0.0])]),
            [WeightVector((-half, half))],
        ),
        "diagonal_unstable": encode_instance(
            unstable_diag_instance().pair, unstable_diag_instance().weights
        ),
        "stable_generic_line": encode_instance(
            stable_generic_line_instance().pair, stable_generic_line_instance().weights
        ),
        "irreducible_stable": encode_instance(
            irreducible_pair_r2(), zero_degree_weights(irreducible_pair_r2()).weights
        ),
        "polystable_two_punctures": encode_instance(
            polystable_two_puncture_instance().pair,
            polystable_two_puncture_instance().weights,
        ),
        "unipotent_monodromy": encode_instance(
            unipotent_monodromy_instance().pair, unipotent_monodromy_instance().weights
        ),
        "semisimple_monodromy": encode_instance(
            unitary_pair(1, 1, 2, seed=8), [WeightVector((Fraction(0),))]
        ),
    }
    return corpus


def write_corpus(directory) -> None:
    import json
    import pathlib

    d = pathlib.Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name, doc in bundled_corpus().items():
        (d / f"{name}.json").write_text(json.dumps(doc, sort_keys=True, indent=1))

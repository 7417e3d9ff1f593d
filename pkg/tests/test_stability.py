import numpy as np
import pytest
from fractions import Fraction

from parrep.instances import (
    diagonal_pair,
    irreducible_pair_r2,
    polystable_two_puncture_instance,
    stable_generic_line_instance,
    trivial_pair,
    unstable_diag_instance,
    weights_for,
    zero_degree_weights,
)
from parrep.linalg import Flag, orthonormal_basis
from parrep.quiver import encode_weighted, king_semistable
from parrep.stability import (
    OneParamSubgroup,
    StabilityError,
    destabilizing_subgroup,
    mumford_weight,
    polystable,
    random_invariant_subgroup,
    semistable,
)


def test_rank_one_always_stable():
    pair = trivial_pair(1, 1, 1)
    wp = weights_for(pair, [(7,)])
    assert semistable(wp).status == "stable"


def test_unstable_diag_with_witness():
    wp = unstable_diag_instance()
    verdict = semistable(wp)
    assert verdict.status == "unstable"
    assert verdict.witness_slope == Fraction(1)
    assert verdict.slope == Fraction(0)
    # witness really is the flag line
    assert abs(abs(verdict.witness[0, 0]) - 1.0) < 1e-9


def test_stable_on_irreducible():
    wp = zero_degree_weights(irreducible_pair_r2())
    assert semistable(wp).status == "stable"


def test_stable_generic_line():
    verdict = semistable(stable_generic_line_instance())
    assert verdict.status == "stable"


def test_semistable_not_stable_two_punctures():
    wp = polystable_two_puncture_instance()
    verdict = semistable(wp)
    assert verdict.status == "semistable_not_stable"
    assert verdict.witness_slope == verdict.slope == Fraction(0)


def test_conjugation_invariance_of_verdicts():
    rng = np.random.default_rng(0)
    for build in (unstable_diag_instance, stable_generic_line_instance):
        wp = build()
        g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        conj = wp.__class__(wp.pair.conjugate(g), wp.weights)
        assert semistable(conj).status == semistable(wp).status


def test_polystable_stable_pair_single_summand():
    wp = zero_degree_weights(irreducible_pair_r2())
    verdict = polystable(wp)
    assert verdict.status == "polystable"
    assert len(verdict.decomposition) == 1


def test_polystable_two_equal_slope_summands():
    wp = polystable_two_puncture_instance()
    verdict = polystable(wp)
    assert verdict.status == "polystable"
    assert len(verdict.decomposition) == 2
    assert verdict.summand_slopes == [Fraction(0), Fraction(0)]
    assert all(s == wp.slope() for s in verdict.summand_slopes)


def test_polystable_unstable_stays_unstable():
    verdict = polystable(unstable_diag_instance())
    assert verdict.status == "unstable"


def test_non_split_extension_not_polystable():
    from parrep.instances import shear_semistable_instance

    wp = shear_semistable_instance()
    base = semistable(wp)
    assert base.status == "semistable_not_stable"
    verdict = polystable(wp)
    assert verdict.status == "semistable_not_stable"
    assert verdict.decomposition is None


def test_mumford_weight_trivial_subgroup_zero():
    wp = unstable_diag_instance()
    lam = OneParamSubgroup([(0, np.eye(2, dtype=complex))])
    assert mumford_weight(wp, lam) == 0


def test_mumford_weight_zero_weights():
    pair = diagonal_pair(1, 1, [1.0, 2.0], [Flag.trivial(2)])
    wp = weights_for(pair, [(0,)])
    e1 = np.array([[1.0], [0.0]], dtype=complex)
    e2 = np.array([[0.0], [1.0]], dtype=complex)
    lam = OneParamSubgroup([(1, e1), (0, e2)])
    assert mumford_weight(wp, lam) == 0


def test_mumford_weight_diag_example():
    wp = unstable_diag_instance()
    e1 = np.array([[1.0], [0.0]], dtype=complex)
    e2 = np.array([[0.0], [1.0]], dtype=complex)
    lam = OneParamSubgroup([(1, e1), (0, e2)])
    assert mumford_weight(wp, lam) == Fraction(-1)


def test_mumford_weight_requires_invariance():
    wp = stable_generic_line_instance()
    v = np.array([[1.0], [3.0]], dtype=complex)
    comp = orthonormal_basis(np.eye(2, dtype=complex) - v @ v.conj().T / 10.0)
    lam_levels = [(1, v), (0, orthonormal_basis(np.array([[3.0], [-1.0]], dtype=complex)))]
    with pytest.raises(StabilityError):
        mumford_weight(wp, OneParamSubgroup(lam_levels))


def test_destabilizer_gives_negative_mumford_weight():
    wp = unstable_diag_instance()
    verdict = semistable(wp)
    lam = destabilizing_subgroup(wp, verdict.witness)
    assert mumford_weight(wp, lam) < 0


def test_semistable_nonnegative_mumford_weights():
    rng = np.random.default_rng(42)
    for wp in (polystable_two_puncture_instance(), stable_generic_line_instance()):
        for _ in range(10):
            lam = random_invariant_subgroup(wp, rng)
            if lam is None:
                continue
            assert mumford_weight(wp, lam) >= 0


def test_stability_matches_king_on_decided_instances():
    cases = [
        unstable_diag_instance(),
        stable_generic_line_instance(),
        polystable_two_puncture_instance(),
        zero_degree_weights(irreducible_pair_r2()),
    ]
    for wp in cases:
        s = semistable(wp)
        x, w = encode_weighted(wp)
        k = king_semistable(x, w)
        assert s.decided and k.decided
        if s.status == "unstable":
            assert k.status == "unstable"
        elif s.status == "stable":
            assert k.status == "stable"
        else:
            assert k.status == "semistable"

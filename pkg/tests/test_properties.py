"""Randomized invariant suites (seed-pinned)."""

import property_suites as suites


def test_jacobi_identity_holds():
    assert suites.jacobi_identity_suite(cases=100, seed=101) == 100


def test_exterior_derivative_squares_to_zero():
    assert suites.dd_zero_suite(cases=100, seed=103) == 100


def test_wedge_identities_hold():
    assert suites.wedge_identities_suite(cases=100, seed=107) == 100


def test_wedge_verdict_invariant_under_recombination():
    assert suites.lemma_invariance_suite(cases=100, seed=109) == 100


def test_closure_methods_agree_on_random_systems():
    assert suites.closure_method_agreement_suite(cases=100, seed=113) == 100


def test_symbolic_rank_matches_sampled_rank():
    assert suites.rank_oracle_suite(cases=100, seed=127) == 100


def test_conversions_preserve_verification_on_corpus():
    assert suites.conversion_preserves_verification_suite() > 0

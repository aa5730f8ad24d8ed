import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle_values as O
from georigid.catalog import beltrami_pullback, euclidean, hyperbolic_ball, schwarzschild, sphere_stereo
from georigid.dsl import parse_metric
from georigid.equivalence import (EINSTEIN_IDENTITIES, EQUIVALENCE_SUITE, GENERAL_IDENTITIES, RESIDUALS,
                                  ChartMismatchError, LambdaFloorError, PreconditionError, affine_equivalence_test,
                                  build_pair, einstein_transfer_residual, evaluate_identity, harmonic_coeffs,
                                  kbar_estimate, lambda_floor, levi_civita_residual, pure_trace_residual,
                                  random_admissible_xi, sinjukov_residual, vb_residual)

TOL = 1e-6
BELTRAMI_BY_DIM = {2: "diag(2,1,1)", 3: "diag(2,1,1,0.5)", 4: "diag(2,1,1,1,1)"}


def beltrami(n, A=None):
    return build_pair(sphere_stereo(n), beltrami_pullback(n, BELTRAMI_BY_DIM[n] if A is None else A))


def test_identity_pair_is_trivial(rng):
    g = sphere_stereo(3)
    pair = build_pair(g, g)
    for x in pair.sample(5, rng):
        assert pair.phi(x) == 0.0
        assert not pair.phi_i(x).any()
        np.testing.assert_allclose(pair.a(x), g.matrix(x), rtol=1e-15)
        assert pair.lam(x) == pytest.approx(1.5)
        assert not pair.lambda_i(x).any()
        for name in EQUIVALENCE_SUITE:
            assert RESIDUALS[name](pair, x) <= 1e-14


def test_constant_multiple_has_constant_phi(rng):
    g = hyperbolic_ball(3)
    pair = build_pair(g, g.scaled(4.0))
    for x in pair.sample(5, rng):
        assert pair.phi(x) == pytest.approx(np.log(4.0 ** 3) / 8, abs=1e-14)
        assert np.abs(pair.phi_i(x)).max() <= 1e-14
        for name in EQUIVALENCE_SUITE:
            assert RESIDUALS[name](pair, x) <= 1e-13


def test_beltrami_values_match_symbolic_reference(beltrami_pair):
    x = O.BELTRAMI_X0
    assert beltrami_pair.phi(x) == pytest.approx(O.BELTRAMI_PHI, abs=1e-14)
    np.testing.assert_allclose(beltrami_pair.phi_i(x), O.BELTRAMI_DPHI, atol=1e-14)
    assert beltrami_pair.lam(x) == pytest.approx(O.BELTRAMI_LAMBDA, abs=1e-13)
    np.testing.assert_allclose(beltrami_pair.lambda_i(x), O.BELTRAMI_LAMBDA_I, atol=1e-14)


def test_connection_and_determinant_routes_to_phi_agree(beltrami_pair, beltrami_samples):
    for x in beltrami_samples[:20]:
        p = beltrami_pair.at(x)
        np.testing.assert_allclose(p.phi_i, p.phi_i_connection, atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_beltrami_pairs_satisfy_every_identity(n):
    pair = beltrami(n)
    for x in pair.sample(20, np.random.default_rng(n)):
        for name in EQUIVALENCE_SUITE + GENERAL_IDENTITIES + EINSTEIN_IDENTITIES:
            r = evaluate_identity(pair, name, x)
            assert r.value <= TOL, (name, r)
            assert r.status == ("out_of_hypothesis" if n == 2 and name in EINSTEIN_IDENTITIES else "ok")


def test_formulations_agree_pointwise(rng):
    # equivalent and non-equivalent pairs; the three tests must give the same answer at every point
    pairs = [beltrami(3), build_pair(sphere_stereo(3), euclidean(3)), build_pair(sphere_stereo(3), hyperbolic_ball(3)),
             build_pair(euclidean(3), euclidean(3, scale=2.0))]
    for pair in pairs:
        for x in pair.sample(10, rng):
            verdicts = {fn(pair, x) <= TOL for fn in (pure_trace_residual, levi_civita_residual, sinjukov_residual)}
            assert len(verdicts) == 1


def test_non_equivalent_pair_fails_all_formulations(rng):
    pair = build_pair(sphere_stereo(3), euclidean(3))
    for x in pair.sample(5, rng):
        assert min(fn(pair, x) for fn in (pure_trace_residual, levi_civita_residual, sinjukov_residual)) > 1e-3


def test_chart_mismatch():
    with pytest.raises(ChartMismatchError):
        build_pair(euclidean(3), euclidean(4))


class TestGates:
    def test_lambda_floor_skips(self, rng):
        pair = build_pair(sphere_stereo(3), sphere_stereo(3, scale=2.0))
        x = pair.sample(1, rng)[0]
        assert lambda_floor(3.0) == pytest.approx(4e-6)
        with pytest.raises(LambdaFloorError):
            vb_residual(pair, x)
        with pytest.raises(LambdaFloorError):
            einstein_transfer_residual(pair, x)
        assert evaluate_identity(pair, "vb", x).status == "skipped"
        assert evaluate_identity(pair, "pure_trace", x).status == "ok"

    def test_einstein_gate(self, rng):
        g = parse_metric("dim 3; coords x y z; box [-1,1]^3; let s = 1 + x^2 + y^2\n"
                         "g11 = 4/s^2; g12 = 0; g13 = 0; g22 = 4/s^2; g23 = 0; g33 = 1")
        pair = build_pair(g, g.scaled(2.0))
        x = pair.sample(1, rng)[0]
        r = evaluate_identity(pair, "tanno", x)
        assert r.status == "hypothesis_not_met" and np.isnan(r.value)
        assert evaluate_identity(pair, "integrability", x).status == "ok"


class TestEinsteinIdentities:
    def test_einstein_transfer_and_kbar(self, beltrami_pair, beltrami_samples):
        for x in beltrami_samples[:20]:
            a, b = einstein_transfer_residual(beltrami_pair, x)
            assert a <= 1e-6 and b <= 1e-6
            fit, via_mu, direct = kbar_estimate(beltrami_pair, x)
            assert fit == pytest.approx(direct, abs=1e-6)
            assert via_mu == pytest.approx(direct, abs=1e-6)

    def test_schwarzschild_pair_is_gated_by_lambda(self, rng):
        g = schwarzschild()
        pair = build_pair(g, g.scaled(3.0))
        for x in pair.sample(3, rng):
            assert evaluate_identity(pair, "tanno", x).status == "ok"
            assert evaluate_identity(pair, "vb", x).status == "skipped"


class TestHarmonicCoefficients:
    def test_identity_pair_has_no_admissible_xi(self, rng):
        g = sphere_stereo(3)
        with pytest.raises(PreconditionError):
            harmonic_coeffs(build_pair(g, g), g.sample(1, rng)[0])

    def test_einstein_background_collapse(self, beltrami_pair, beltrami_samples):
        for x in beltrami_samples[:10]:
            p = beltrami_pair.at(x)
            c = harmonic_coeffs(beltrami_pair, x)
            r = p.frame.scalar_R / p.n
            assert c.c1 + c.c2 * r == pytest.approx(p.mu, abs=1e-9)
            assert c.c3 + c.c4 * r == pytest.approx(p.K, abs=1e-9)
            assert c.residual <= 1e-5

    def test_independent_of_xi(self, beltrami_pair, beltrami_samples, rng):
        for x in beltrami_samples[:10]:
            cs = [harmonic_coeffs(beltrami_pair, x, xi) for xi in random_admissible_xi(beltrami_pair, x, rng)]
            for attr in ("c1", "c2", "c3", "c4", "residual"):
                vals = [getattr(c, attr) for c in cs]
                assert max(vals) - min(vals) <= 1e-7, attr

    def test_xi_orthogonal_to_lambda_is_rejected(self, beltrami_pair, beltrami_samples):
        x = beltrami_samples[0]
        li = beltrami_pair.lambda_i(x)
        perp = np.array([li[1], -li[0], 0.0, 0.0])
        with pytest.raises(PreconditionError):
            harmonic_coeffs(beltrami_pair, x, perp)

    def test_alternative_sign_pattern_does_not_decompose(self, beltrami_pair, beltrami_samples):
        # negated c1..c3 and c4 = -tr(a Ric)/4 leave an O(1) residual
        x = beltrami_samples[0]
        assert harmonic_coeffs(beltrami_pair, x, verbatim=True).residual > 1e-3


class TestAffineVerdict:
    def test_constant_multiple_is_affine(self, rng):
        g = sphere_stereo(4)
        pair = build_pair(g, g.scaled(2.5))
        assert affine_equivalence_test(pair, pair.sample(20, rng)) == "affine"

    def test_orthogonal_beltrami_is_affine(self, rng):
        Q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
        pair = beltrami(4, Q)
        assert affine_equivalence_test(pair, pair.sample(20, rng)) == "affine"

    def test_diagonal_beltrami_is_not_affine(self, beltrami_pair, beltrami_samples):
        assert affine_equivalence_test(beltrami_pair, beltrami_samples) == "non_affine"

    def test_empty_sample_set(self, beltrami_pair):
        assert affine_equivalence_test(beltrami_pair, np.zeros((0, 4))) == "inconclusive"


@settings(max_examples=25)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.2, 5.0), st.booleans())
def test_conformal_and_geodesic_implies_affine(seed, c, orthogonal):
    """Geodesically equivalent pairs whose a is pure trace have phi_i = 0."""
    rng = np.random.default_rng(seed)
    n = 3
    if orthogonal:
        Q, _ = np.linalg.qr(rng.normal(size=(n + 1, n + 1)))
        pair = build_pair(sphere_stereo(n), beltrami_pullback(n, Q, scale=c))
    else:
        pair = beltrami(n, np.diag(rng.uniform(0.5, 2.0, n + 1)))
    for x in pair.sample(5, rng):
        p = pair.at(x)
        assert pure_trace_residual(pair, x) <= TOL
        conformal = np.linalg.norm(p.a - 2 * p.lam / n * p.frame.g) <= 1e-8
        if conformal:
            assert np.linalg.norm(p.phi_i) <= 1e-7
        else:
            assert not orthogonal

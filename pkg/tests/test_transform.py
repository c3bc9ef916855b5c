import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jumpmilstein import JumpDiffusionModel, TransformG, bump, build_transform, transform_model
from jumpmilstein.coefficients import sampled_lipschitz
from jumpmilstein.fixtures import additive_ou, parse_coefficient, sign_drift
from jumpmilstein.transform import bump_radius_bound, identity_transform


def two_break_model():
    mu = parse_coefficient("constant:0.5 | affine:-1,0.2 | constant:1", "-1 1.5")
    sigma = parse_coefficient("sin:0.3,1,0,1")
    rho = parse_coefficient("linear:0.2")
    return JumpDiffusionModel(mu, sigma, rho, 0.3, 1.0, 2.0)


@pytest.fixture(scope="module", params=["sign", "two"])
def setup(request):
    m = sign_drift() if request.param == "sign" else two_break_model()
    G = build_transform(m)
    return m, G, transform_model(m, G)


class TestBuild:
    def test_alpha_for_sign_switch(self):
        G = build_transform(sign_drift())
        assert G.alphas == (1.0,)
        assert G.zetas == (0.0,)
        assert G.nu == pytest.approx(0.5 / 8)

    def test_bump_values(self):
        assert bump(0.0) == 1.0
        assert bump(1.0) == bump(-1.0) == 0.0
        assert bump(2.0) == bump(-2.0) == 0.0
        assert bump(0.5) == pytest.approx(0.75 ** 4)

    def test_radius_bound(self):
        assert bump_radius_bound((0.0,), (1.0,)) == 0.125
        assert bump_radius_bound((0.0, 0.1), (0.01, 0.01)) == pytest.approx(0.05)
        assert bump_radius_bound((), ()) == np.inf

    def test_nu_fraction_range(self):
        with pytest.raises(ValueError):
            build_transform(sign_drift(), nu_fraction=1.0)
        with pytest.raises(ValueError):
            TransformG((0.0,), (1.0,), 0.2, (2.0,))

    def test_continuous_drift_gives_identity(self):
        G = build_transform(additive_ou())
        assert G.is_identity
        xs = np.linspace(-5, 5, 101)
        np.testing.assert_array_equal(G.g(xs), xs)
        np.testing.assert_array_equal(G.g_prime(xs), 1.0)
        np.testing.assert_array_equal(G.g_inverse(xs), xs)
        assert identity_transform().is_identity

    def test_extension_value_is_two_alpha_with_right_convention(self):
        G = build_transform(sign_drift())
        assert G.gpp_at_zeta == (2.0,)
        assert G.g_second(0.0) == 2.0

    def test_extension_with_left_convention(self):
        mu = parse_coefficient("constant:1 | constant:-1", "0", at_breakpoint="left")
        m = JumpDiffusionModel(mu, parse_coefficient("constant:1"), parse_coefficient("constant:0"),
                               0.0, 1.0, 1.0)
        # 2 alpha + 2 (mu(0+) - mu(0)) / sigma^2 = 2 - 4
        assert build_transform(m).gpp_at_zeta == (-2.0,)


class TestShape:
    def test_fixes_breakpoints(self, setup):
        _, G, _ = setup
        for z in G.zetas:
            assert G.g(z) == z

    def test_unit_slope_at_breakpoints(self, setup):
        _, G, _ = setup
        for z in G.zetas:
            assert abs(G.g_prime(z) - 1.0) <= 1e-12

    def test_second_derivative_limits(self, setup):
        _, G, _ = setup
        for i, a in enumerate(G.alphas):
            left, right = G.g_second_limits(i)
            assert abs(left + 2 * a) <= 1e-8
            assert abs(right - 2 * a) <= 1e-8

    def test_identity_outside_support(self, setup):
        _, G, _ = setup
        lo, hi = G.support
        xs = np.r_[np.linspace(lo - 5, lo, 500), np.linspace(hi, hi + 5, 500)]
        np.testing.assert_array_equal(G.g_prime(xs), 1.0)
        np.testing.assert_array_equal(G.g(xs), xs)
        c = max(abs(z) for z in G.zetas) + G.nu
        far = np.linspace(c, c + 3, 50)
        np.testing.assert_array_equal(G.g_prime(np.r_[far, -far]), 1.0)

    def test_positive_slope(self, setup):
        _, G, _ = setup
        lo, hi = G.support
        assert G.g_prime(np.linspace(lo, hi, 100001)).min() > 0

    def test_strictly_increasing(self, setup):
        _, G, _ = setup
        rng = np.random.default_rng(1)
        lo, hi = G.support
        x = np.sort(rng.uniform(lo - 0.1, hi + 0.1, size=(100000, 2)), axis=1)
        x = x[x[:, 0] < x[:, 1]]
        assert np.all(G.g(x[:, 0]) < G.g(x[:, 1]))

    def test_round_trip(self, setup):
        _, G, _ = setup
        rng = np.random.default_rng(2)
        lo, hi = G.support
        x = np.r_[rng.uniform(lo - 1, hi + 1, 5000), rng.uniform(lo, hi, 5000)]
        assert np.max(np.abs(G.g_inverse(G.g(x)) - x)) <= 1e-10

    def test_inverse_residual(self, setup):
        _, G, _ = setup
        lo, hi = G.support
        y = np.linspace(lo, hi, 20001)
        assert np.max(np.abs(G.g(G.g_inverse(y, tol=1e-13)) - y)) <= 1e-12

    def test_inverse_outside_support_is_identity(self, setup):
        _, G, _ = setup
        lo, hi = G.support
        y = np.array([lo - 1.0, lo, hi, hi + 2.5])
        np.testing.assert_array_equal(G.g_inverse(y), y)

    def test_scalar_in_scalar_out(self, setup):
        _, G, _ = setup
        assert isinstance(G.g(0.01), float)
        assert isinstance(G.g_inverse(0.01), float)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-1, 1, allow_nan=False))
    def test_derivatives_match_finite_differences(self, u):
        G = build_transform(two_break_model())
        for zeta in G.zetas:
            x = zeta + u * 1.2 * G.nu
            if abs(x - zeta) < 1e-5 or abs(abs(x - zeta) - G.nu) < 1e-5:
                continue
            h = 1e-6 * max(1.0, abs(x))
            fd1 = (G.g(x + h) - G.g(x - h)) / (2 * h)
            fd2 = (G.g_prime(x + h) - G.g_prime(x - h)) / (2 * h)
            assert abs(fd1 - G.g_prime(x)) <= 1e-6 * max(1.0, abs(fd1))
            assert abs(fd2 - G.g_second(x)) <= 1e-6 * max(1.0, abs(fd2))


class TestTransformedCoefficients:
    def test_drift_continuous_at_every_kink(self, setup):
        _, G, tm = setup
        for k in tm.eta_t:
            h = 10.0 ** -np.arange(7, 11)
            left = tm.mu_t(k - h)
            right = tm.mu_t(k + h)
            assert abs(left[-1] - right[-1]) <= 1e-6

    def test_sign_switch_drift_jump_removed(self):
        tm = transform_model(sign_drift(), build_transform(sign_drift()))
        h = 1e-10
        assert abs(tm.mu_t(-h) - tm.mu_t(h)) <= 1e-8

    def test_lipschitz(self, setup):
        _, G, tm = setup
        lo, hi = G.support
        zs = np.linspace(lo - 1, hi + 1, 20001)
        for f in (tm.mu_t, tm.sigma_t, tm.rho_t):
            L = sampled_lipschitz(f, zs)
            assert np.isfinite(L) and L < 1e4

    def test_rho_lipschitz_stable_under_refinement(self, setup):
        _, G, tm = setup
        lo, hi = G.support
        coarse = sampled_lipschitz(tm.rho_t, np.linspace(lo - 1, hi + 1, 2001))
        fine = sampled_lipschitz(tm.rho_t, np.linspace(lo - 1, hi + 1, 40001))
        assert fine <= 1.1 * coarse + 1e-9

    def test_sigma_nonzero_at_kinks(self, setup):
        _, _, tm = setup
        for z in tuple(tm.zeta_t) + tuple(tm.eta_t):
            assert tm.sigma_t(z) != 0.0

    def test_kink_images(self, setup):
        m, G, tm = setup
        assert tm.zeta_t == G.zetas
        assert tm.xi_t == G.g(m.xi)

    def test_zero_rho_stays_zero(self):
        m = sign_drift()
        m = JumpDiffusionModel(m.mu, m.sigma, parse_coefficient("constant:0"), m.xi, m.T, m.lam)
        tm = transform_model(m, build_transform(m))
        zs = np.linspace(-0.2, 0.2, 1001)
        np.testing.assert_array_equal(tm.rho_t(zs), 0.0)

    def test_identity_transform_keeps_coefficients(self):
        m = additive_ou()
        tm = transform_model(m, build_transform(m))
        zs = np.linspace(-3, 3, 61)
        np.testing.assert_array_equal(tm.mu_t(zs), m.mu(zs))
        np.testing.assert_array_equal(tm.sigma_t(zs), m.sigma(zs))
        np.testing.assert_array_equal(tm.rho_t(zs), m.rho(zs))

    def test_diffusion_derivative_matches_chain_rule(self, setup):
        _, G, tm = setup
        for zeta in G.zetas:
            zs = zeta + np.array([-0.7, -0.3, 0.2, 0.6]) * G.nu
            h = 1e-7
            fd = (tm.sigma_t(zs + h) - tm.sigma_t(zs - h)) / (2 * h)
            np.testing.assert_allclose(tm.d_sigma_t(zs), fd, rtol=1e-5, atol=1e-7)

    def test_diffusion_derivative_zero_on_kinks(self, setup):
        m, G, tm = setup
        for x in tm.x_kinks:
            assert tm.d_sigma_t(G.g(x)) == 0.0

    def test_jump_map(self, setup):
        m, G, tm = setup
        zs = np.linspace(-1.5, 1.5, 301)
        x = G.g_inverse(zs)
        np.testing.assert_allclose(tm.jump(zs), G.g(x + m.rho(x)), atol=1e-11)

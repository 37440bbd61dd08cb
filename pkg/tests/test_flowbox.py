import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from surgery_lab.flowbox import (
    TWO_PI,
    ChartError,
    SurgeryConfig,
    TwistProfile,
    beta0_build,
    bump,
    bump_prime,
    deformation_h,
    dh_along_flow,
    glue_map,
    gluing_identity_check,
    interpolation,
    normalization_constant,
    reeb_bound_check,
    reeb_factor,
    smooth_step,
    smooth_step_prime,
    weighted_mean,
)

unit = st.floats(-1.0, 1.0, allow_nan=False)


@given(st.floats(-0.5, 1.5, allow_nan=False))
def test_smooth_step_symmetry(x):
    assert float(smooth_step(x) + smooth_step(1 - x)) == pytest.approx(1.0, abs=1e-15)


def test_smooth_step_prime_matches_differences():
    x = np.linspace(0.01, 0.99, 97)
    h = 1e-6
    fd = (smooth_step(x + h) - smooth_step(x - h)) / (2 * h)
    assert np.allclose(smooth_step_prime(x), fd, atol=1e-7)


def test_profile_endpoints_and_bounds():
    tw = TwistProfile(1, 1.0)
    assert float(tw.g(-1.0)) == pytest.approx(0.0, abs=1e-14)
    assert float(tw.g(0.0)) == pytest.approx(np.pi, abs=1e-14)
    assert float(tw.g(1.0)) == pytest.approx(TWO_PI, abs=1e-14)
    u = np.linspace(-1.2, 1.2, 2001)
    gp = tw.g_prime(u)
    assert np.all(gp >= 0) and gp.max() <= 4.0
    assert np.allclose(gp, tw.g_prime(-u))


@given(unit)
@settings(max_examples=60)
def test_g_is_the_integral_of_g_prime(u):
    tw = TwistProfile(1, 1.0)
    # g' leaves its plateau at +-0.6; quad needs those breakpoints
    pts = [p for p in (-0.6, 0.6) if -1.0 < p < u]
    ref = quad(lambda x: float(tw.g_prime(x)), -1.0, u, epsabs=1e-14, limit=200, points=pts or None)[0]
    assert float(tw.g(u)) == pytest.approx(ref, abs=1e-10)


@given(st.integers(-3, 3), st.floats(0.01, 0.15), unit)
def test_f_point_symmetry(q, eps, u):
    tw = TwistProfile(q, eps)
    w = u * eps
    assert float(tw.f(w) + tw.f(-w)) == pytest.approx(q, abs=1e-12)


def test_f_integral_over_annulus():
    tw = TwistProfile(2, 0.05)
    val = quad(lambda x: float(tw.f(x)), -0.05, 0.05, epsabs=1e-15, limit=200)[0]
    assert val == pytest.approx(2 * 0.05, rel=1e-10)


def test_glue_map_example():
    s, w, jac = glue_map(0.3, 0.0, TwistProfile(1, 0.05))
    assert float(s) == pytest.approx(0.8)
    assert jac[0, 0] == 1 and jac[1, 1] == 1 and jac[1, 0] == 0
    assert float(glue_map(0.3, 0.0, TwistProfile(0, 0.05))[0]) == pytest.approx(0.3)
    with pytest.raises(ChartError):
        glue_map(0.0, 0.2, TwistProfile(1, 0.05))


def test_bump_and_interpolation():
    assert float(bump(0.0, 1.0)) == 1.0 and float(bump_prime(0.0, 1.0)) == 0.0
    assert float(bump(1.0, 1.0)) == 0.0
    t = np.linspace(-2, 2, 401)
    b = interpolation(t, 1.0)
    assert np.all(b[t <= 0] == 1.0) and np.all(b[t >= 1] == 0.0)
    inner = (t > 0) & (t < 1)
    assert np.all(np.diff(b[inner]) <= 0)
    # b(t) = S(1 - t / eta), so b' = -S'(1 - t) < 0 strictly inside (0, eta)
    bulk = (t > 0.05) & (t < 0.95)
    assert np.all(smooth_step_prime(1.0 - t[bulk]) > 0)
    assert np.allclose(b[inner], smooth_step(1.0 - t[inner]))


def test_config_rejects_wide_annulus():
    with pytest.raises(ChartError):
        SurgeryConfig(epsilon=0.2, eta=1.0)
    with pytest.raises(ChartError):
        SurgeryConfig(box_mass=1.5)


@pytest.mark.parametrize("q", [0, 1, 2, -1])
def test_gluing_identities(q):
    rep = gluing_identity_check(SurgeryConfig(q=q), 1000)
    assert rep.ok, rep.residuals


def test_h_vanishes_outside_annulus():
    cfg = SurgeryConfig(q=1)
    assert np.allclose(deformation_h(0.3, np.array([-0.06, 0.05, 0.07]), cfg), 0.0, atol=1e-13)
    assert np.allclose(deformation_h(np.array([-1.0, 1.0]), 0.01, cfg), 0.0)


def test_dh_along_flow_matches_differences():
    cfg = SurgeryConfig(q=2)
    t = np.linspace(-0.9, 0.9, 37)
    h = 1e-6
    fd = (deformation_h(t + h, 0.01, cfg) - deformation_h(t - h, 0.01, cfg)) / (2 * h)
    assert np.allclose(dh_along_flow(t, 0.01, cfg), fd, atol=1e-7)


def test_reeb_bounds():
    assert reeb_bound_check(SurgeryConfig(q=1, epsilon=0.05)).ok
    strict = reeb_bound_check(SurgeryConfig(q=1, epsilon=0.025, strict_half_bound=True))
    assert strict.ok and strict.sup_abs_dh < 0.5


def test_reeb_factor_is_positive():
    cfg = SurgeryConfig(q=2)
    t = np.linspace(-1, 1, 41)[:, None]
    w = np.linspace(-0.05, 0.05, 41)[None, :]
    assert np.all(reeb_factor(t, w, cfg) > 0)


def test_normalization():
    assert normalization_constant(SurgeryConfig(q=0)) == 1.0
    cfg = SurgeryConfig(q=1)
    c = normalization_constant(cfg)
    assert 0.99 < c < 1.01
    assert weighted_mean(cfg, c) == pytest.approx(1.0, abs=1e-8)


def test_beta0_against_quadrature():
    tw = TwistProfile(1, 0.05)
    b0 = beta0_build(tw)
    for w in (-0.03, 0.0, 0.02, 0.1):
        ref = 1 + quad(lambda x: float(tw.f(x)), -0.1, w, epsabs=1e-15, limit=400, points=[-0.05, 0.05])[0] / TWO_PI
        assert float(b0.h0(w)) == pytest.approx(ref, abs=1e-12)
    # beyond the annulus the integral is linear with slope q
    assert float(b0.h0(0.1)) == pytest.approx(1 + 0.1 / TWO_PI, abs=1e-13)
    assert b0.contact_margin == pytest.approx(1.0, abs=1e-12)
    assert b0.period(0.0, 2) == pytest.approx(4 * np.pi * float(b0.h0(0.0)), rel=1e-14)


def test_reeb_direction_is_reeb():
    b0 = beta0_build(TwistProfile(1, 0.05))
    w = np.linspace(-0.05, 0.05, 11)
    R = b0.reeb_direction(w)
    # beta0(R) = 1 with beta0 = h0 dtau + w dsigma
    assert np.allclose(b0.h0(w) * R[:, 0] + w * R[:, 1], 1.0, atol=1e-13)

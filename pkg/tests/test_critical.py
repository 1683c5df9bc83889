"""Critical-point tests: residual pairing, dual norm, Hessian, dichotomy."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cknlab import derive_params
from cknlab.errors import (
    BasisTooSmall,
    CaseRangeViolation,
    FarFromManifold,
    GridMismatch,
    NotOrthogonal,
    RegionViolation,
    TranslationForbidden,
    UnsupportedField,
    ZeroField,
)
from cknlab.critical import (
    alternative_check,
    dual_norm_estimate,
    el_residual_pairing,
    elementary_C_estimate,
    elementary_terms,
    hessian_form,
    spectral_gap_ratio,
    expansion_quantities,
)
from cknlab.fields import (
    Bubble,
    RadialProfile,
    embed_axisym,
    gaussian_bump_profile,
    make_radial_grid,
    sample_bubble,
)
from cknlab.functionals import weighted_grad_pnorm, weighted_lq_norm
from cknlab.manifold import (
    _bubble_field_like,
    canonical_bubble,
    canonical_profile,
    orthogonalize,
    tangent_basis,
    v_inner,
)

PS53 = derive_params(5, 3.0, 0.3, 0.5)
PS32 = derive_params(3, 2.0, 0.0, 0.0)
# the a = 0.2 tail of this tuple decays slowly; pair it with the wide window
PS43 = derive_params(4, 3.0, 0.2, 0.4)

GRID_SPEC = (-30.0, 30.0, 768)
WIDE_SPEC = (-70.0, 70.0, 2048)

_cache = {}


def _grid(spec=GRID_SPEC):
    if spec not in _cache:
        _cache[spec] = make_radial_grid(*spec)
    return _cache[spec]


def _bubble_profile(ps, spec=GRID_SPEC):
    key = ("bub", id(ps), spec)
    if key not in _cache:
        _cache[key] = canonical_profile(ps, _grid(spec))
    return _cache[key]


def _unit_ortho_bump(ps, center=0.5, width=0.7, spec=GRID_SPEC):
    key = ("zeta", id(ps), center, width, spec)
    if key not in _cache:
        z = orthogonalize(
            gaussian_bump_profile(_grid(spec), center, width), canonical_bubble(ps), ps
        )
        zn = weighted_grad_pnorm(z, ps) ** (1.0 / ps.p)
        _cache[key] = RadialProfile(
            grid=z.grid, values=z.values / zn, derivative=z.derivative / zn
        )
    return _cache[key]


def _perturbed(ps, eps, spec=GRID_SPEC):
    v = _bubble_profile(ps, spec)
    z = _unit_ortho_bump(ps, spec=spec)
    return RadialProfile(
        grid=v.grid,
        values=v.values + eps * z.values,
        derivative=v.derivative + eps * z.derivative,
    )


# ---------------------------------------------------------------------------
# Euler-Lagrange residual pairing


def test_pairing_vanishes_at_bubble():
    v = _bubble_profile(PS32)
    phi = gaussian_bump_profile(_grid(), 0.0, 1.0)
    assert abs(el_residual_pairing(v, phi, PS32)) <= 1e-8


def test_pairing_linear_in_test_function():
    u = _perturbed(PS53, 0.3)
    g = _grid()
    p1 = gaussian_bump_profile(g, -1.0, 0.6)
    p2 = gaussian_bump_profile(g, 1.5, 1.2)
    combo = RadialProfile(
        grid=g,
        values=2.0 * p1.values - 0.7 * p2.values,
        derivative=2.0 * p1.derivative - 0.7 * p2.derivative,
    )
    lhs = el_residual_pairing(u, combo, PS53)
    rhs = 2.0 * el_residual_pairing(u, p1, PS53) - 0.7 * el_residual_pairing(
        u, p2, PS53
    )
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs), 1.0)


def test_pairing_scaled_bubble_closed_form():
    # residual of mu V pairs against V as (mu^(q-1) - mu^(p-1)) int |x|^-qb V^q
    v = _bubble_profile(PS53)
    mu = 1.3
    vmu = RadialProfile(
        grid=v.grid, values=mu * v.values, derivative=mu * v.derivative
    )
    pair = el_residual_pairing(vmu, v, PS53)
    pred = (mu ** (PS53.q - 1.0) - mu ** (PS53.p - 1.0)) * weighted_lq_norm(v, PS53)
    assert abs(pair - pred) <= 1e-5 * abs(pred)


def test_pairing_zero_field():
    g = _grid()
    zero = RadialProfile(grid=g, values=np.zeros(g.count), derivative=np.zeros(g.count))
    phi = gaussian_bump_profile(g, 0.0, 1.0)
    assert el_residual_pairing(zero, phi, PS53) == 0.0


def test_pairing_grid_guards():
    v = _bubble_profile(PS53)
    other = gaussian_bump_profile(make_radial_grid(-20.0, 20.0, 512), 0.0, 1.0)
    with pytest.raises(GridMismatch):
        el_residual_pairing(v, other, PS53)
    axi = embed_axisym(gaussian_bump_profile(_grid(), 0.0, 1.0), PS53.n, 48)
    with pytest.raises(GridMismatch):
        el_residual_pairing(v, axi, PS53)


def test_pairing_embeds_radial_phi_for_axisym_u():
    u_rad = _perturbed(PS53, 0.3)
    u_axi = embed_axisym(u_rad, PS53.n, 48)
    phi = gaussian_bump_profile(_grid(), 0.8, 0.9)
    p_axi = el_residual_pairing(u_axi, phi, PS53)
    p_rad = el_residual_pairing(u_rad, phi, PS53)
    assert abs(p_axi - p_rad) <= 1e-10 * max(abs(p_rad), 1.0)


# ---------------------------------------------------------------------------
# dual-norm lower bound


def test_dual_estimate_small_at_bubble():
    v = _bubble_profile(PS53)
    est = dual_norm_estimate(v, PS53, 8)
    assert est.value <= 1e-5


def test_dual_estimate_scaled_bubble_bound():
    # the amplitude direction alone already gives pairing / ||V||
    v = _bubble_profile(PS53)
    mu = 1.3
    vmu = RadialProfile(
        grid=v.grid, values=mu * v.values, derivative=mu * v.derivative
    )
    est = dual_norm_estimate(vmu, PS53, 8)
    drop = abs(mu ** (PS53.q - 1.0) - mu ** (PS53.p - 1.0)) * weighted_lq_norm(v, PS53)
    bound = drop / weighted_grad_pnorm(v, PS53) ** (1.0 / PS53.p)
    assert est.value >= 0.999 * bound


def test_dual_estimate_monotone_in_basis():
    u = _perturbed(PS53, 1e-2)
    est4 = dual_norm_estimate(u, PS53, 4)
    est8 = dual_norm_estimate(u, PS53, 8)
    est12 = dual_norm_estimate(u, PS53, 12)
    assert est8.half_value == est4.value
    assert est8.value >= est4.value
    assert est12.value >= est12.half_value
    assert est4.half_value is None


def test_dual_estimate_needs_four_elements():
    with pytest.raises(BasisTooSmall):
        dual_norm_estimate(_bubble_profile(PS53), PS53, 3)


# ---------------------------------------------------------------------------
# Hessian quadratic form


def test_hessian_zero_rho():
    g = _grid()
    zero = RadialProfile(grid=g, values=np.zeros(g.count), derivative=np.zeros(g.count))
    assert hessian_form(canonical_bubble(PS53), zero, PS53) == 0.0


@given(st.floats(min_value=0.1, max_value=3.0))
@settings(max_examples=20, deadline=None)
def test_hessian_quadratic_homogeneity(c):
    rho = _unit_ortho_bump(PS53)
    scaled = RadialProfile(
        grid=rho.grid, values=c * rho.values, derivative=c * rho.derivative
    )
    bub = canonical_bubble(PS53)
    base = hessian_form(bub, rho, PS53)
    assert hessian_form(bub, scaled, PS53) == pytest.approx(c * c * base, rel=1e-12)


def test_hessian_radial_reduced_route_agrees():
    rho = _unit_ortho_bump(PS53)
    bub = canonical_bubble(PS53)
    full = hessian_form(bub, rho, PS53)
    red = hessian_form(bub, rho, PS53, reduced=True)
    assert abs(full - red) <= 1e-10 * abs(full)


def test_hessian_needs_p_above_two():
    rho = gaussian_bump_profile(_grid(), 0.0, 1.0)
    with pytest.raises(RegionViolation):
        hessian_form(canonical_bubble(PS32), rho, PS32)


def test_hessian_reduced_is_radial_only():
    axi = embed_axisym(gaussian_bump_profile(_grid(), 0.0, 1.0), PS53.n, 48)
    with pytest.raises(UnsupportedField):
        hessian_form(canonical_bubble(PS53), axi, PS53, reduced=True)


def test_hessian_rejects_shifted_bubble():
    rho = gaussian_bump_profile(_grid(), 0.0, 1.0)
    with pytest.raises(TranslationForbidden):
        hessian_form(Bubble(amplitude=1.0, scale=1.0, axial_shift=0.5), rho, PS53)


def test_dilation_mode_saturates_the_form():
    # along the scaling direction the form equals (q-1) times the V-pairing
    wide = _grid(WIDE_SPEC)
    bub = canonical_bubble(PS43)
    dil = tangent_basis(bub, PS43, wide)[1]
    lhs = hessian_form(bub, dil, PS43)
    vf = _bubble_field_like(dil, PS43, bub)
    rhs = (PS43.q - 1.0) * v_inner(dil.values, dil.values, vf, PS43)
    assert lhs == pytest.approx(rhs, rel=1e-4)


# ---------------------------------------------------------------------------
# spectral gap


def test_spectral_gap_exceeds_one():
    wide = _grid(WIDE_SPEC)
    bub = canonical_bubble(PS43)
    rho = orthogonalize(gaussian_bump_profile(wide, 1.0, 0.8), bub, PS43)
    rep = spectral_gap_ratio(bub, rho, PS43)
    assert rep.ratio > 1.5
    assert rep.tau_estimate == pytest.approx(rep.ratio - 1.0, rel=1e-12)
    assert rep.lhs == pytest.approx(rep.ratio * rep.rhs, rel=1e-12)


def test_spectral_ratio_scale_invariant():
    wide = _grid(WIDE_SPEC)
    bub = canonical_bubble(PS43)
    rho = orthogonalize(gaussian_bump_profile(wide, 1.0, 0.8), bub, PS43)
    doubled = RadialProfile(
        grid=wide, values=2.0 * rho.values, derivative=2.0 * rho.derivative
    )
    r1 = spectral_gap_ratio(bub, rho, PS43).ratio
    r2 = spectral_gap_ratio(bub, doubled, PS43).ratio
    assert r2 == pytest.approx(r1, rel=1e-12)


def test_spectral_rejects_tangent_component():
    wide = _grid(WIDE_SPEC)
    raw = gaussian_bump_profile(wide, 1.0, 0.8)
    with pytest.raises(NotOrthogonal):
        spectral_gap_ratio(canonical_bubble(PS43), raw, PS43)


def test_spectral_rejects_zero_rho():
    wide = _grid(WIDE_SPEC)
    zero = RadialProfile(
        grid=wide, values=np.zeros(wide.count), derivative=np.zeros(wide.count)
    )
    with pytest.raises(ZeroField):
        spectral_gap_ratio(canonical_bubble(PS43), zero, PS43)


# ---------------------------------------------------------------------------
# two-sided near-manifold quantities


def test_expansion_at_exact_bubble():
    v = _bubble_profile(PS53)
    rep = expansion_quantities(v, PS53, basis_size=4)
    assert rep.mu == pytest.approx(1.0, abs=1e-8)
    assert rep.N <= 1e-12
    assert rep.Q <= 1e-10
    assert rep.residual_pairing_norm <= 1e-5
    unorm = weighted_grad_pnorm(v, PS53) ** (1.0 / PS53.p)
    assert rep.distance_gate == pytest.approx(0.1 * unorm, rel=1e-12)


def test_expansion_epsilon_scaling():
    r1 = expansion_quantities(_perturbed(PS53, 1e-3), PS53, basis_size=4)
    r2 = expansion_quantities(_perturbed(PS53, 2e-3), PS53, basis_size=4)
    assert r2.N / r1.N == pytest.approx(2.0**PS53.p, rel=2e-2)
    assert r2.Q / r1.Q == pytest.approx(4.0, rel=2e-2)


def test_expansion_needs_p_above_two():
    with pytest.raises(RegionViolation):
        expansion_quantities(_bubble_profile(PS32), PS32, basis_size=4)


def test_expansion_far_from_manifold():
    u = _perturbed(PS53, 1e-2)
    with pytest.raises(FarFromManifold):
        expansion_quantities(u, PS53, distance_gate=1e-8, basis_size=4)


# ---------------------------------------------------------------------------
# the dichotomy


def test_alternative_eta_matches_exponent():
    # p = 4 turns the threshold into c1/(2 C1) itself
    ps = derive_params(6, 4.0, 0.1, 0.3)
    grid = _grid()
    v = canonical_profile(ps, grid)
    z = orthogonalize(gaussian_bump_profile(grid, 0.5, 0.7), canonical_bubble(ps), ps)
    zn = weighted_grad_pnorm(z, ps) ** (1.0 / ps.p)
    u = RadialProfile(
        grid=grid,
        values=v.values + 1e-3 * z.values / zn,
        derivative=v.derivative + 1e-3 * z.derivative / zn,
    )
    rep = alternative_check(u, ps, 1.0, 2.0, t_count=2, basis_size=4)
    assert rep.eta == pytest.approx(0.25, rel=1e-12)
    assert rep.interval == pytest.approx((0.25, 4.0), rel=1e-12)


def test_alternative_degenerate_on_bubble():
    rep = alternative_check(_bubble_profile(PS53), PS53, 1.0, 2.0, basis_size=4)
    assert rep.branch == "degenerate"
    assert rep.A_u is None
    assert math.isinf(rep.kappa)
    assert rep.t_grid == ()


def test_alternative_uniform_branch():
    # small A_u falls outside [c1/2C1, 2C1/c1]: the estimate runs on u itself
    u = _perturbed(PS53, 5e-2)
    rep = alternative_check(u, PS53, 1.0, 2.0, t_count=2, basis_size=4)
    assert rep.branch == "stable"
    assert rep.A_u < rep.interval[0]
    assert rep.kappa > 0.0
    assert rep.t_grid == ()


def test_alternative_scaled_branch():
    # widening the interval moves the same field to the scaled-family branch
    u = _perturbed(PS53, 5e-2)
    rep = alternative_check(u, PS53, 0.2, 2.0, t_count=2, basis_size=4)
    assert rep.branch == "interval"
    assert rep.interval[0] <= rep.A_u <= rep.interval[1]
    assert rep.eta == pytest.approx(0.05**2, rel=1e-12)
    assert len(rep.t_grid) == 2
    assert rep.t_grid[-1] == pytest.approx(rep.eta, rel=1e-12)
    assert 0.0 < rep.kappa < math.inf


def test_alternative_rejects_bad_constants():
    u = _perturbed(PS53, 5e-2)
    with pytest.raises(ValueError):
        alternative_check(u, PS53, 0.0, 2.0)
    with pytest.raises(ValueError):
        alternative_check(u, PS53, 1.0, -2.0)


def test_alternative_needs_p_above_two():
    with pytest.raises(RegionViolation):
        alternative_check(_bubble_profile(PS32), PS32, 1.0, 2.0)


# ---------------------------------------------------------------------------
# elementary inequalities


def test_elementary_known_scalar_point():
    # q = 3, a = b = 1: |(2)|2| - 1 - 2| = 1 against |b|^2 = 1
    lhs, rhs = elementary_terms(5, 3.0, 1.0, 1.0, 1.0)
    assert float(lhs) == pytest.approx(1.0, abs=1e-14)
    assert float(rhs) == pytest.approx(1.0, abs=1e-14)


def test_elementary_case5_constant_near_one():
    c = elementary_C_estimate(5, 3.0)
    assert 1.0 <= c <= 1.01


def test_elementary_zero_increment():
    for case, expo in [(1, 2.5), (2, 4.0), (3, 3.0), (4, 3.5), (5, 2.5), (6, 4.0)]:
        lhs, rhs = elementary_terms(case, expo, 1.0, 0.0, -1.0)
        assert float(lhs) == 0.0


def test_elementary_case_ranges():
    with pytest.raises(CaseRangeViolation):
        elementary_C_estimate(1, 3.5)
    with pytest.raises(CaseRangeViolation):
        elementary_C_estimate(2, 3.0)
    with pytest.raises(CaseRangeViolation):
        elementary_C_estimate(5, 3.5)
    with pytest.raises(CaseRangeViolation):
        elementary_C_estimate(6, 3.0)
    with pytest.raises(ValueError):
        elementary_C_estimate(7, 3.0)


def test_elementary_doubling_stable():
    c200 = elementary_C_estimate(3, 2.5, 200)
    c400 = elementary_C_estimate(3, 2.5, 400)
    assert abs(c400 - c200) <= 1e-2 * c200


@given(
    st.floats(min_value=0.1, max_value=10.0),
    st.floats(min_value=-1.0, max_value=1.0),
    st.floats(min_value=0.5, max_value=2.0),
)
@settings(max_examples=60, deadline=None)
def test_elementary_ratio_scale_free(y, cos_angle, lam):
    lhs, rhs = elementary_terms(2, 4.0, 1.0, y, cos_angle)
    lhs2, rhs2 = elementary_terms(2, 4.0, lam, lam * y, cos_angle)
    # skip cancellation-dominated points; the clean ones must match
    if float(lhs) > 1e-6 * (1.0 + y) ** 4:
        assert float(lhs2) / float(rhs2) == pytest.approx(
            float(lhs) / float(rhs), rel=1e-8
        )

"""Normalization, projection, representative selection, decomposition."""

import math

import numpy as np
import pytest

from cknlab import ZeroField, derive_params, sharp_constant
from cknlab.fields import (
    Bubble,
    RadialProfile,
    gaussian_bump_profile,
    make_radial_grid,
    sample_bubble,
)
from cknlab.functionals import weighted_grad_pnorm, weighted_lq_norm
from cknlab.manifold import (
    _check_reproduced,
    bubble_normalization,
    canonical_bubble,
    canonical_profile,
    manifold_distance,
    moment_seed,
    mu_rho_decompose,
    orthogonalize,
    orthogonality_check,
    select_Pu,
    tangent_basis,
    tangent_labels,
)

TUPLES = [(3, 2, 0, 0), (4, 2.5, 0.2, 0.5), (4, 2, 0.5, 0.5)]


@pytest.mark.parametrize("tup", TUPLES)
def test_normalized_energies_hit_sharp_constant(tup):
    # independent check: both energies of the canonical profile must land
    # on S^(pq/(q-p)) with S from the closed gamma-function form
    ps = derive_params(*tup)
    bub = bubble_normalization(ps)
    grid = make_radial_grid(-40, 40, 2048)
    prof = sample_bubble(ps, bub, grid)
    target = sharp_constant(ps) ** (ps.p * ps.q / (ps.q - ps.p))
    assert weighted_grad_pnorm(prof, ps) == pytest.approx(target, rel=1e-6)
    assert weighted_lq_norm(prof, ps) == pytest.approx(target, rel=1e-6)


def test_normalization_independent_root_solve():
    # solve the amplitude balance by bisection instead of the closed form
    from scipy.optimize import brentq

    ps = derive_params(4, 2.5, 0.2, 0.5)
    grid = make_radial_grid(-60, 60, 3072)

    def energy_gap(amp):
        prof = sample_bubble(ps, Bubble(amplitude=amp, scale=1.0), grid)
        return weighted_grad_pnorm(prof, ps) - weighted_lq_norm(prof, ps)

    root = brentq(energy_gap, 1e-3, 1e3, xtol=1e-14, rtol=1e-14)
    assert bubble_normalization(ps).amplitude == pytest.approx(root, rel=1e-10)


def test_canonical_bubble_dilation_amplitude():
    ps = derive_params(3, 2, 0, 0)
    lam = 1.7
    bub = bubble_normalization(ps)
    dil = canonical_bubble(ps, lam)
    assert dil.scale == lam
    assert dil.amplitude == pytest.approx(
        bub.amplitude * lam**ps.dilation_weight, rel=1e-14
    )


def test_canonical_family_deficit_zero():
    ps = derive_params(3, 2, 0, 0)
    grid = make_radial_grid(count=2048)
    from cknlab.functionals import deficit

    for lam in (0.4, 1.0, 2.5):
        assert abs(deficit(canonical_profile(ps, grid, lam), ps)) < 1e-9


def test_moment_seed_recovers_dilation():
    ps = derive_params(4, 2.5, 0.2, 0.5)
    grid = make_radial_grid(count=2048)
    for lam in (0.5, 1.0, 3.0):
        prof = canonical_profile(ps, grid, lam)
        assert moment_seed(prof, ps) == pytest.approx(math.log(lam), abs=1e-6)


def test_distance_zero_on_manifold():
    ps = derive_params(4, 2.5, 0.2, 0.5)
    grid = make_radial_grid(count=1024)
    u = canonical_profile(ps, grid, 1.3)
    scaled = RadialProfile(
        grid=grid, values=1.1 * u.values, derivative=1.1 * u.derivative
    )
    unorm = weighted_grad_pnorm(scaled, ps) ** (1.0 / ps.p)
    dist, bub = manifold_distance(scaled, ps)
    assert dist <= 1e-6 * unorm
    assert bub.scale == pytest.approx(1.3, rel=1e-3)


def test_distance_bounded_by_perturbation():
    ps = derive_params(4, 2.5, 0.2, 0.5)
    grid = make_radial_grid(count=1024)
    v = canonical_profile(ps, grid, 1.0)
    eps = 0.01
    bump = gaussian_bump_profile(grid, 0.0, 1.0)
    u = RadialProfile(
        grid=grid,
        values=v.values + eps * bump.values,
        derivative=v.derivative + eps * bump.derivative,
    )
    bump_norm = weighted_grad_pnorm(bump, ps) ** (1.0 / ps.p)
    dist, _ = manifold_distance(u, ps)
    assert dist <= eps * bump_norm + 1e-6


def test_distance_zero_field():
    ps = derive_params(3, 2, 0, 0)
    g = make_radial_grid(count=64)
    z = RadialProfile(grid=g, values=np.zeros(g.count), derivative=np.zeros(g.count))
    with pytest.raises(ZeroField):
        manifold_distance(z, ps)


def test_reproduction_counter():
    assert _check_reproduced(1.0, [1.0, 1.00005, 1.2, 1.00009, 5.0], 1e-6) == 3
    assert _check_reproduced(0.0, [0.0, 1e-12, 0.5], 1e-6) == 2


def test_select_pu_recovers_scale():
    ps = derive_params(4, 2.5, 0.2, 0.5)
    grid = make_radial_grid(count=2048)
    u = canonical_profile(ps, grid, 1.7)
    got = select_Pu(u, ps)
    assert got.scale == pytest.approx(1.7, rel=1e-4)


def test_select_pu_scale_invariant_in_u():
    ps = derive_params(4, 2.5, 0.2, 0.5)
    grid = make_radial_grid(count=1024)
    u = canonical_profile(ps, grid, 0.8)
    u3 = RadialProfile(grid=grid, values=3.0 * u.values, derivative=3.0 * u.derivative)
    # the pairing scales linearly, so the maximiser agrees down to the
    # sqrt(machine eps) plateau of any smooth 1-D maximisation
    assert select_Pu(u3, ps).scale == pytest.approx(select_Pu(u, ps).scale, rel=1e-6)


def test_select_pu_perturbation_stability():
    ps = derive_params(4, 2.5, 0.2, 0.5)
    grid = make_radial_grid(count=2048)
    v = canonical_profile(ps, grid, 1.0)
    bump = gaussian_bump_profile(grid, 1.0, 0.8)
    u = RadialProfile(
        grid=grid,
        values=v.values + 0.01 * bump.values,
        derivative=v.derivative + 0.01 * bump.derivative,
    )
    got = select_Pu(u, ps)
    assert abs(math.log(got.scale)) <= 0.1


def test_select_pu_zero_field():
    ps = derive_params(3, 2, 0, 0)
    g = make_radial_grid(count=64)
    z = RadialProfile(grid=g, values=np.zeros(g.count), derivative=np.zeros(g.count))
    with pytest.raises(ZeroField):
        select_Pu(z, ps)


def test_mu_rho_on_manifold():
    ps = derive_params(4, 2.5, 0.2, 0.5)
    grid = make_radial_grid(count=1024)
    bub = canonical_bubble(ps)
    v = canonical_profile(ps, grid)
    rec = mu_rho_decompose(v, bub, ps)
    assert rec.mu == pytest.approx(1.0, rel=1e-10)
    assert np.max(np.abs(rec.rho.values)) <= 1e-10 * np.max(np.abs(v.values))
    doubled = RadialProfile(grid=grid, values=2 * v.values, derivative=2 * v.derivative)
    assert mu_rho_decompose(doubled, bub, ps).mu == pytest.approx(2.0, rel=1e-10)


def test_mu_rho_orthogonal_perturbation():
    # u = V + eps W with W orthogonal to V in the weighted pairing:
    # mu comes back 1 and rho comes back eps W
    ps = derive_params(4, 2.5, 0.2, 0.5)
    grid = make_radial_grid(count=1024)
    bub = canonical_bubble(ps)
    v = canonical_profile(ps, grid)
    w = orthogonalize(gaussian_bump_profile(grid, 0.5, 0.9), bub, ps)
    eps = 0.05
    u = RadialProfile(
        grid=grid,
        values=v.values + eps * w.values,
        derivative=v.derivative + eps * w.derivative,
    )
    rec = mu_rho_decompose(u, bub, ps)
    assert rec.mu == pytest.approx(1.0, abs=1e-10)
    assert np.max(np.abs(rec.rho.values - eps * w.values)) <= 1e-10 * np.max(
        np.abs(v.values)
    )


def test_tangent_count_and_labels():
    ps = derive_params(4, 2, 0.5, 0.5)
    grid = make_radial_grid(count=256)
    basis = tangent_basis(canonical_bubble(ps), ps, grid)
    assert len(basis) == 2
    assert tangent_labels(ps) == ["amplitude", "dilation"]
    flat = derive_params(3, 2, 0, 0)
    basis_ax = tangent_basis(canonical_bubble(flat), flat, grid, axisym=True, psi_count=32)
    assert len(basis_ax) == 3
    assert tangent_labels(flat, axisym=True)[-1] == "axial-translation"


def test_dilation_tangent_fd_oracle():
    # central difference through the canonical family at lam = 1
    ps = derive_params(4, 2.5, 0.2, 0.5)
    grid = make_radial_grid(-20, 20, 512)
    h = 1e-5
    up = canonical_profile(ps, grid, 1.0 + h)
    dn = canonical_profile(ps, grid, 1.0 - h)
    fd = (up.values - dn.values) / (2 * h)
    dil = tangent_basis(canonical_bubble(ps), ps, grid)[1]
    scale = np.max(np.abs(dil.values))
    assert np.max(np.abs(fd - dil.values)) <= 1e-6 * scale
    fd_der = (up.derivative - dn.derivative) / (2 * h)
    dscale = np.max(np.abs(dil.derivative))
    assert np.max(np.abs(fd_der - dil.derivative)) <= 1e-5 * dscale


def test_amplitude_dilation_orthogonality_identity():
    # <V, dilation>_V vanishes identically: the q-energy is invariant
    # along the canonical family
    ps = derive_params(4, 2.5, 0.2, 0.5)
    grid = make_radial_grid(count=2048)
    bub = canonical_bubble(ps)
    v_field = canonical_profile(ps, grid)
    from cknlab.manifold import v_inner

    amp, dil = tangent_basis(bub, ps, grid)
    num = v_inner(amp.values, dil.values, v_field, ps)
    den = math.sqrt(
        v_inner(amp.values, amp.values, v_field, ps)
        * v_inner(dil.values, dil.values, v_field, ps)
    )
    assert abs(num) / den <= 1e-9


def test_orthogonality_check_examples():
    ps = derive_params(4, 2.5, 0.2, 0.5)
    grid = make_radial_grid(count=1024)
    bub = canonical_bubble(ps)
    z = RadialProfile(grid=grid, values=np.zeros(grid.count))
    assert orthogonality_check(z, bub, ps) == [0.0, 0.0]
    v = canonical_profile(ps, grid)
    res = orthogonality_check(v, bub, ps)
    assert res[0] == pytest.approx(1.0, abs=1e-9)
    assert abs(res[1]) <= 1e-8


def test_selected_representative_kills_dilation_pairing():
    # at an interior maximiser of the pairing the dilation direction of
    # the decomposition must be numerically orthogonal
    ps = derive_params(4, 2.5, 0.2, 0.5)
    grid = make_radial_grid(count=2048)
    v = canonical_profile(ps, grid, 1.2)
    bump = gaussian_bump_profile(grid, -0.5, 1.0)
    u = RadialProfile(
        grid=grid,
        values=v.values + 0.02 * bump.values,
        derivative=v.derivative + 0.02 * bump.derivative,
    )
    rep = select_Pu(u, ps)
    rec = mu_rho_decompose(u, rep, ps)
    assert abs(rec.tangent_residuals[1]) <= 1e-4


def test_orthogonalize_output_is_orthogonal():
    ps = derive_params(4, 2, 0.5, 0.5)
    grid = make_radial_grid(count=1024)
    bub = canonical_bubble(ps)
    w = orthogonalize(gaussian_bump_profile(grid, 0.3, 1.1), bub, ps)
    res = orthogonality_check(w, bub, ps)
    assert max(abs(x) for x in res) <= 1e-10

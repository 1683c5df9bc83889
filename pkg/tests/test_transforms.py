"""Stretch maps: norm identities, bubble transport, round trips."""

import numpy as np
import pytest

from cknlab import RegionViolation, derive_hat_params, derive_params
from cknlab.fields import (
    Bubble,
    gaussian_bump_profile,
    make_radial_grid,
    modulated_axisym,
    sample_bubble,
)
from cknlab.functionals import weighted_grad_pnorm, weighted_lq_norm
from cknlab.transforms import (
    flat_params,
    hat_map,
    horiuchi_map,
    transform_identity_check,
)


def test_identity_at_a_zero():
    ps = derive_params(3, 2, 0, 0)
    u = gaussian_bump_profile(make_radial_grid(count=64), 0.0, 1.0)
    assert horiuchi_map(u, ps) is u


def test_bubble_maps_to_flat_bubble():
    # the image of an extremal is an extremal of the weightless tuple
    ps = derive_params(4, 2, 0.5, 0.5)  # k = 2
    grid = make_radial_grid(-15, 15, 256)
    bub = Bubble(amplitude=1.3, scale=1.7)
    moved = horiuchi_map(sample_bubble(ps, bub, grid), ps)
    flat = flat_params(ps)
    expected = sample_bubble(
        flat,
        Bubble(
            amplitude=ps.k ** (1.0 / ps.q) * bub.amplitude,
            scale=(bub.scale**ps.sigma) ** (1.0 / flat.sigma),
        ),
        moved.grid,
    )
    scale = np.max(np.abs(expected.values))
    assert np.max(np.abs(moved.values - expected.values)) <= 1e-8 * scale
    dscale = np.max(np.abs(expected.derivative))
    assert np.max(np.abs(moved.derivative - expected.derivative)) <= 1e-6 * dscale


def test_round_trip():
    ps = derive_params(4, 2.5, 0.2, 0.5)
    grid = make_radial_grid(-12, 12, 256)
    u = sample_bubble(ps, Bubble(1.0, 1.0), grid)
    back = horiuchi_map(horiuchi_map(u, ps), ps, "inverse")
    assert np.allclose(back.grid.log_nodes, grid.log_nodes, rtol=0, atol=1e-12)
    assert np.max(np.abs(back.values - u.values)) <= 1e-12 * np.max(np.abs(u.values))
    assert np.max(np.abs(back.derivative - u.derivative)) <= 1e-10 * np.max(
        np.abs(u.derivative)
    )


def test_identity_check_radial_batch():
    grid = make_radial_grid(count=1024)
    tuples = [
        (4, 2, 0.5, 0.5),
        (4, 2.5, 0.2, 0.5),
        (3, 2, 0.25, 0.25),
        (5, 3, 0.3, 0.7),
        (4, 1.5, 0.8, 1.2),
    ]
    for tup in tuples:
        ps = derive_params(*tup)
        for u in (
            sample_bubble(ps, Bubble(1.0, 1.2), grid),
            gaussian_bump_profile(grid, 0.5, 1.1),
        ):
            rep = transform_identity_check(u, ps)
            assert rep.q_norm_residual <= 1e-8, tup
            assert rep.grad_identity_residual <= 1e-8, tup
            assert rep.k_drop_gap == 0.0


def test_identity_check_axisym_batch():
    grid = make_radial_grid(count=512)
    for tup in [(4, 2, 0.5, 0.5), (4, 2.5, 0.2, 0.5), (5, 3, 0.3, 0.7)]:
        ps = derive_params(*tup)
        prof = sample_bubble(ps, Bubble(1.0, 1.0), grid)
        u = modulated_axisym(prof, ps.n, 64, cos_coeff=0.4)
        rep = transform_identity_check(u, ps)
        assert rep.q_norm_residual <= 1e-8, tup
        assert rep.grad_identity_residual <= 1e-8, tup
        assert rep.k_drop_gap >= 0.0


def test_identity_check_rejects_flat():
    ps = derive_params(3, 2, 0, 0)
    u = gaussian_bump_profile(make_radial_grid(count=64), 0.0, 1.0)
    with pytest.raises(RegionViolation):
        transform_identity_check(u, ps)


def test_hat_map_identity_at_h_one():
    ps = derive_params(4, 2, 0.5, 1.0)
    hp = derive_hat_params(ps, ps)
    u = gaussian_bump_profile(make_radial_grid(count=64), 0.0, 1.0)
    assert hat_map(u, hp) is u


def test_hat_map_qnorm_identity():
    base = derive_params(4, 2, 0.0, 0.5)
    target = derive_params(4, 2, 0.5, 1.0)
    hp = derive_hat_params(base, target)
    grid = make_radial_grid(count=1024)
    for u in (
        sample_bubble(target, Bubble(1.0, 1.0), grid),
        gaussian_bump_profile(grid, -0.5, 0.9),
    ):
        moved = hat_map(u, hp)
        lhs = weighted_lq_norm(u, target)
        rhs = weighted_lq_norm(moved, base)
        assert abs(lhs - rhs) / lhs <= 1e-8


def test_hat_map_gradient_identity_radial():
    # radial chain identity: target energy = h^(1-p-p/q) * base energy
    base = derive_params(4, 2, 0.0, 0.5)
    target = derive_params(4, 2, 0.5, 1.0)
    hp = derive_hat_params(base, target)
    grid = make_radial_grid(count=1024)
    u = sample_bubble(target, Bubble(1.0, 1.0), grid)
    moved = hat_map(u, hp)
    lhs = weighted_grad_pnorm(u, target)
    rhs = hp.h ** (1.0 - base.p - base.p / base.q) * weighted_grad_pnorm(moved, base)
    assert abs(lhs - rhs) / lhs <= 1e-8


def test_hat_round_trip():
    base = derive_params(4, 2, 0.0, 0.5)
    target = derive_params(4, 2, 0.5, 1.0)
    hp = derive_hat_params(base, target)
    grid = make_radial_grid(-10, 10, 128)
    u = gaussian_bump_profile(grid, 0.3, 0.8)
    back = hat_map(hat_map(u, hp), hp, "inverse")
    assert np.max(np.abs(back.values - u.values)) <= 1e-12
    assert np.allclose(back.grid.log_nodes, grid.log_nodes, rtol=0, atol=1e-12)


def test_unknown_direction():
    ps = derive_params(4, 2, 0.5, 0.5)
    u = gaussian_bump_profile(make_radial_grid(count=64), 0.0, 1.0)
    with pytest.raises(ValueError):
        horiuchi_map(u, ps, "sideways")

"""Radial stretch maps that trade the gradient weight for dimension.

Both maps send u to c^(1/q) u(r^c theta) for a stretch c: the k-map
(c = k) removes the |x|^-pa weight entirely, the h-map (c = h) moves a
field between two weight classes sharing gamma.  On a log-radius grid
the substitution is a pure node re-map: new log nodes t/c, values
scaled by c^(1/q), radial derivatives picking up c e^(t(c-1)/c).  No
interpolation is involved, so the q-norm identity holds node for node
at rounding level.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import RegionViolation
from .fields import (
    AxisymField,
    Field,
    RadialProfile,
    bubble_tag,
    evaluator_from_tag,
    bubble_evaluator,
    scaled_grid,
)
from .functionals import weighted_grad_pnorm, weighted_lq_norm
from .params import CknParams, HatParams, derive_params

__all__ = [
    "TransformReport",
    "horiuchi_map",
    "hat_map",
    "transform_identity_check",
    "flat_params",
]


@dataclass(frozen=True)
class TransformReport:
    """Residuals of the two norm identities for one mapped field."""

    q_norm_residual: float
    grad_identity_residual: float
    direction: str
    k_drop_gap: float = 0.0  # angular majorisation gap, >= 0, 0 for radial


def _stretch_tag(tag: str | None, expo: float, value_scale: float):
    """Transform a closed-form tag through the stretch, when possible."""
    if tag is None or not tag.startswith("bubble "):
        return None, None
    kv = dict(item.split("=", 1) for item in tag.split()[1:])
    amp = value_scale * float(kv["A"])
    b_coeff = float(kv["B"])
    sig = expo * float(kv["sig"])
    m = float(kv["m"])
    return bubble_tag(amp, b_coeff, sig, m), bubble_evaluator(amp, b_coeff, sig, m)


def _stretch_field(u: Field, expo: float, value_scale: float) -> Field:
    """v(s) = value_scale * u(s^expo), node for node."""
    grid = scaled_grid(u.grid, 1.0 / expo)
    t = u.grid.log_nodes
    dfac = value_scale * expo * np.exp(t * (expo - 1.0) / expo)
    if isinstance(u, RadialProfile):
        tag, ev = _stretch_tag(u.analytic_tag, expo, value_scale)
        return RadialProfile(
            grid=grid,
            values=value_scale * u.values,
            derivative=None if u.derivative is None else dfac * u.derivative,
            analytic_tag=tag,
            evaluator=ev,
        )
    return AxisymField(
        grid=grid,
        dim=u.dim,
        psi_nodes=u.psi_nodes,
        psi_weights=u.psi_weights,
        values=value_scale * u.values,
        grad_r=None if u.grad_r is None else dfac[:, None] * u.grad_r,
        grad_psi=None if u.grad_psi is None else value_scale * u.grad_psi,
        analytic_tag=None,
    )


def flat_params(params: CknParams) -> CknParams:
    """The weightless tuple (n, p, 0, b-a) sharing gamma and q."""
    return derive_params(params.n, params.p, 0.0, params.b - params.a)


def horiuchi_map(u: Field, params: CknParams, direction: str = "forward") -> Field:
    """Move a field between the weighted class and the a = 0 class.

    forward sends u with weight exponent a to the weightless class;
    inverse undoes it.  With a = 0 the map is the identity and u is
    returned unchanged.
    """
    if direction not in ("forward", "inverse"):
        raise ValueError(f"unknown direction {direction!r}")
    k, q = params.k, params.q
    if k == 1.0:
        return u
    if direction == "forward":
        return _stretch_field(u, k, k ** (1.0 / q))
    return _stretch_field(u, 1.0 / k, k ** (-1.0 / q))


def hat_map(u: Field, hp: HatParams, direction: str = "forward") -> Field:
    """Move a field from the target weight class to the base class.

    forward: u in the target class (larger a when h > 1) becomes
    h^(1/q) u(r^h) in the base class; inverse undoes it.  h = 1 returns
    u unchanged.
    """
    if direction not in ("forward", "inverse"):
        raise ValueError(f"unknown direction {direction!r}")
    h = hp.h
    q = hp.base.q
    if h == 1.0:
        return u
    if direction == "forward":
        return _stretch_field(u, h, h ** (1.0 / q))
    return _stretch_field(u, 1.0 / h, h ** (-1.0 / q))


def transform_identity_check(u: Field, params: CknParams) -> TransformReport:
    """Verify both norm identities of the weight-removing map on one field.

    Requires a > 0 (with a = 0 there is nothing to check).  Returns the
    relative q-norm residual, the relative residual of the gradient
    identity (with the k^2-scaled angular term), and the nonnegative
    gap dropped when the angular scaling is released to 1.
    """
    if params.a <= 0.0:
        raise RegionViolation("identity check needs a > 0; the map is trivial at a = 0")
    flat = flat_params(params)
    k = params.k
    moved = horiuchi_map(u, params, "forward")
    pref = k ** (1.0 - params.p - params.p / params.q)

    q_lhs = weighted_lq_norm(u, params)
    q_rhs = weighted_lq_norm(moved, flat)
    q_res = abs(q_lhs - q_rhs) / max(abs(q_lhs), 1e-300)

    g_lhs = weighted_grad_pnorm(u, params, 1.0)
    g_rhs_scaled = pref * weighted_grad_pnorm(moved, flat, k_factor=k)
    g_res = abs(g_lhs - g_rhs_scaled) / max(abs(g_lhs), 1e-300)

    if isinstance(moved, AxisymField):
        drop = g_rhs_scaled - pref * weighted_grad_pnorm(moved, flat, k_factor=1.0)
    else:
        drop = 0.0
    return TransformReport(
        q_norm_residual=q_res,
        grad_identity_residual=g_res,
        direction="forward",
        k_drop_gap=drop,
    )

"""Stability experiments built on the projection machinery.

Everything here turns an inequality statement into a number we can
watch: deficit-to-distance ratios, empirical upper bounds for the
stability constant, slope fits for the distance exponent, the
parameter-monotonicity chain, a continuity probe along parameter
sequences, the translated-bubble gap probe, and finite-domain
embedding checks through the weak norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateFit,
    EmptyFamily,
    OnManifold,
    RegionViolation,
    UnsupportedField,
    ZeroField,
)
from .fields import (
    AxisymField,
    Field,
    RadialGrid,
    RadialProfile,
    embed_axisym,
    gaussian_bump_profile,
    make_radial_grid,
    sample_bubble,
    translate_axisym,
)
from .functionals import (
    deficit,
    grad_norm,
    q_norm,
    weak_lebesgue_norm,
    weighted_grad_pnorm,
    weighted_lq_norm,
)
from .manifold import canonical_bubble, canonical_profile, manifold_distance, orthogonalize
from .params import CknParams, HatParams, derive_params, sharp_constant
from .transforms import flat_params, hat_map

__all__ = [
    "ON_MANIFOLD_REL",
    "StabilityRecord",
    "KUpperBound",
    "SlopeFitResult",
    "MonotonicityRecord",
    "ContinuityReport",
    "GeneratorSpec",
    "alpha_exponent",
    "stability_ratio",
    "family_samples",
    "k_upper_scan",
    "exponent_slope_fit",
    "monotonicity_chain_check",
    "continuity_probe",
    "translated_bubble_gap_probe",
    "mollified_bubble",
    "embedding_check",
]

# relative distance below this counts as sitting on the manifold
ON_MANIFOLD_REL = 1e-6


@dataclass(frozen=True)
class StabilityRecord:
    """One deficit/distance measurement at a fixed exponent."""

    params: CknParams
    alpha: float
    ratio: float
    distance: float
    deficit: float
    family_tag: str


@dataclass(frozen=True)
class KUpperBound:
    """Scan summary: the smallest observed ratio bounds the constant above."""

    bound: float
    alpha: float
    sample_count: int
    used_count: int
    skipped_count: int
    minimizer: StabilityRecord
    caveat: bool  # a = b > 0, p != 2: the constant itself might vanish


@dataclass(frozen=True)
class SlopeFitResult:
    slope: float
    intercept: float
    distances: tuple
    deficits: tuple


@dataclass(frozen=True)
class MonotonicityRecord:
    hp: HatParams
    nu: float
    grad_chain_gap: float
    qnorm_residual: float


@dataclass(frozen=True)
class ContinuityReport:
    """k_upper_scan along a parameter sequence, last entry at the limit."""

    bounds: tuple
    limit_bound: float
    limsup: float
    noise: float
    flagged: bool


@dataclass(frozen=True)
class GeneratorSpec:
    """Declarative perturbation family: name, options, seed.

    Samples are drawn sequentially from one seeded stream, so the first
    N samples of a longer scan coincide with a shorter one.
    """

    family: str
    seed: int = 0
    options: dict = field(default_factory=dict)

    def tag(self, index: int) -> str:
        return f"{self.family}[{index}]@seed{self.seed}"


def alpha_exponent(params: CknParams, n_symmetric: bool = False) -> float:
    """Distance exponent: max{4,2p} only for p != 2, 0 < a = b, flag off."""
    if params.p != 2.0 and params.a == params.b and params.a > 0 and not n_symmetric:
        return max(4.0, 2.0 * params.p)
    return max(2.0, params.p)


def stability_ratio(
    u: Field,
    params: CknParams,
    n_symmetric: bool = False,
    family_tag: str = "adhoc",
) -> StabilityRecord:
    """deficit(u) / (relative manifold distance)^alpha for one field."""
    unorm_p = weighted_grad_pnorm(u, params)
    if unorm_p <= 0.0:
        raise ZeroField("stability ratio of the zero field")
    unorm = unorm_p ** (1.0 / params.p)
    dist, _ = manifold_distance(u, params)
    rel = dist / unorm
    if rel <= ON_MANIFOLD_REL:
        raise OnManifold(f"relative distance {rel:.3e} below {ON_MANIFOLD_REL:.0e}")
    alpha = alpha_exponent(params, n_symmetric)
    return StabilityRecord(
        params=params,
        alpha=alpha,
        ratio=deficit(u, params) / rel**alpha,
        distance=rel,
        deficit=deficit(u, params),
        family_tag=family_tag,
    )


# ---------------------------------------------------------------------------
# declarative sample families


def family_samples(spec: GeneratorSpec, params: CknParams, count: int):
    """Yield `count` fields from the named family, prefix-stable in count."""
    opts = dict(spec.options)
    window = opts.pop("window", (-30.0, 30.0, 2048))
    rng = np.random.default_rng(spec.seed)
    grid = make_radial_grid(*window)

    if spec.family == "bubble_bump":
        eps_lo, eps_hi = opts.pop("eps_log10", (-3.0, -1.0))
        c_lo, c_hi = opts.pop("center", (-5.0, 5.0))
        w_lo, w_hi = opts.pop("width", (0.6, 1.8))
        if opts:
            raise ConfigError(f"unknown bubble_bump options {sorted(opts)}")
        v = canonical_profile(params, grid)
        vb = canonical_bubble(params)
        for _ in range(count):
            # three draws per sample keeps prefixes aligned across counts
            eps = 10.0 ** rng.uniform(eps_lo, eps_hi)
            center = rng.uniform(c_lo, c_hi)
            width = rng.uniform(w_lo, w_hi)
            z = orthogonalize(gaussian_bump_profile(grid, center, width), vb, params)
            zn = weighted_grad_pnorm(z, params) ** (1.0 / params.p)
            yield RadialProfile(
                grid=grid,
                values=v.values + eps * z.values / zn,
                derivative=v.derivative + eps * z.derivative / zn,
            )
    elif spec.family == "pure_bubble":
        lam_lo, lam_hi = opts.pop("log_lambda", (-1.0, 1.0))
        if opts:
            raise ConfigError(f"unknown pure_bubble options {sorted(opts)}")
        for _ in range(count):
            lam = math.exp(rng.uniform(lam_lo, lam_hi))
            yield canonical_profile(params, grid, lam)
    else:
        raise ConfigError(f"unknown sample family {spec.family!r}")


def k_upper_scan(
    family: GeneratorSpec,
    params: CknParams,
    sample_count: int,
    n_symmetric: bool = False,
) -> KUpperBound:
    """Empirical upper bound: min stability ratio over the sampled family.

    On-manifold samples are excluded; the minimizing record is kept so a
    scan can be audited afterwards.
    """
    if sample_count < 1:
        raise ValueError(f"sample_count must be >= 1, got {sample_count}")
    best: Optional[StabilityRecord] = None
    used = skipped = 0
    for i, u in enumerate(family_samples(family, params, sample_count)):
        try:
            rec = stability_ratio(u, params, n_symmetric, family.tag(i))
        except OnManifold:
            skipped += 1
            continue
        used += 1
        if best is None or rec.ratio < best.ratio:
            best = rec
    if best is None:
        raise EmptyFamily(f"all {sample_count} samples sat on the manifold")
    return KUpperBound(
        bound=best.ratio,
        alpha=best.alpha,
        sample_count=sample_count,
        used_count=used,
        skipped_count=skipped,
        minimizer=best,
        caveat=(params.a == params.b and params.a > 0 and params.p != 2.0),
    )


# ---------------------------------------------------------------------------
# exponent optimality


def _bubble_like(pert: Field, params: CknParams) -> Field:
    if isinstance(pert, RadialProfile):
        return canonical_profile(params, pert.grid)
    prof = canonical_profile(params, pert.grid)
    return embed_axisym(prof, pert.dim, len(pert.psi_nodes))


def exponent_slope_fit(
    params: CknParams, eps_schedule: Sequence[float], perturbation: Field
) -> SlopeFitResult:
    """Fit log deficit(V + eps z) against log relative distance.

    The perturbation is rescaled to unit gradient norm relative to the
    bubble, so eps is the relative perturbation size and the schedule
    precondition (<= 0.1, >= 1.5 decades) means what it says.
    """
    eps = np.sort(np.asarray([float(e) for e in eps_schedule]))
    if eps.size < 2:
        raise DegenerateFit("need at least two epsilon values")
    if eps[0] <= 0.0:
        raise DegenerateFit("epsilon values must be positive")
    if eps[-1] > 0.1:
        raise DegenerateFit(f"epsilon {eps[-1]:.3g} above 0.1")
    if math.log10(eps[-1] / eps[0]) < 1.5:
        raise DegenerateFit("schedule spans under 1.5 decades")

    v = _bubble_like(perturbation, params)
    unorm = weighted_grad_pnorm(v, params) ** (1.0 / params.p)
    zn = weighted_grad_pnorm(perturbation, params) ** (1.0 / params.p)
    if zn <= 0.0:
        raise ZeroField("zero perturbation")
    scale = unorm / zn

    dists, defs = [], []
    for e in eps:
        if isinstance(perturbation, RadialProfile):
            u: Field = RadialProfile(
                grid=v.grid,
                values=v.values + e * scale * perturbation.values,
                derivative=v.derivative + e * scale * perturbation.derivative,
            )
        else:
            u = AxisymField(
                grid=v.grid,
                dim=v.dim,
                psi_nodes=v.psi_nodes,
                psi_weights=v.psi_weights,
                values=v.values + e * scale * perturbation.values,
                grad_r=v.grad_r + e * scale * perturbation.grad_r,
                grad_psi=v.grad_psi + e * scale * perturbation.grad_psi,
            )
        d, _ = manifold_distance(u, params)
        dists.append(d / unorm)
        defs.append(deficit(u, params))

    dists_a = np.asarray(dists)
    if np.any(np.diff(dists_a) <= 0.0):
        raise DegenerateFit("distance not monotone along the schedule")
    slope, intercept = np.polyfit(np.log(dists_a), np.log(np.asarray(defs)), 1)
    return SlopeFitResult(
        slope=float(slope),
        intercept=float(intercept),
        distances=tuple(float(d) for d in dists),
        deficits=tuple(float(d) for d in defs),
    )


# ---------------------------------------------------------------------------
# parameter monotonicity


def monotonicity_chain_check(u: Field, hp: HatParams) -> MonotonicityRecord:
    """Verify the two computable steps tying the two weight classes.

    (i) the q-norms match exactly under the hat map; (ii) the target
    gradient energy dominates h^(1-p-p/q) times the plain base energy
    of the mapped field.  Radial fields make (ii) an equality.
    """
    if hp.h < 1.0:
        raise RegionViolation(f"chain runs toward smaller a only, h={hp.h:.4f} < 1")
    tp = hp.target
    uh = hat_map(u, hp, "forward")
    lhs = weighted_grad_pnorm(u, tp)
    if lhs <= 0.0:
        raise ZeroField("chain check of the zero field")
    pref = hp.h ** (1.0 - tp.p - tp.p / tp.q)
    gap = lhs - pref * weighted_grad_pnorm(uh, hp.base)
    qn = weighted_lq_norm(u, tp)
    qres = abs(weighted_lq_norm(uh, hp.base) - qn) / qn
    nu = 1.0 + max(1.0, tp.p - 1.0) * tp.gamma / tp.n
    return MonotonicityRecord(hp=hp, nu=nu, grad_chain_gap=gap, qnorm_residual=qres)


def continuity_probe(
    param_sequence: Sequence[CknParams],
    family: GeneratorSpec,
    sample_count: int = 12,
) -> ContinuityReport:
    """Scan a parameter sequence whose last entry is the limit tuple.

    Flags limsup(sequence) > limit + 2 * noise, with noise taken from a
    half-sample rescan at the limit.  A consistency probe only.
    """
    if len(param_sequence) < 2:
        raise ValueError("need at least one sequence entry plus the limit")
    for ps in param_sequence:
        # re-derive so hand-built out-of-region tuples fail loudly
        derive_params(ps.n, ps.p, ps.a, ps.b)
    bounds = [
        k_upper_scan(family, ps, sample_count).bound for ps in param_sequence
    ]
    limit_bound = bounds[-1]
    limsup = max(bounds[:-1])
    half = k_upper_scan(family, param_sequence[-1], max(1, sample_count // 2)).bound
    noise = max(half - limit_bound, 1e-12 * abs(limit_bound))
    return ContinuityReport(
        bounds=tuple(bounds),
        limit_bound=limit_bound,
        limsup=limsup,
        noise=noise,
        flagged=bool(limsup > limit_bound + 2.0 * noise),
    )


# ---------------------------------------------------------------------------
# translated-bubble gap probe


def translated_bubble_gap_probe(
    params: CknParams,
    shift_schedule: Sequence[float],
    window: tuple = (-30.0, 30.0, 1536),
    psi_count: int = 160,
) -> list:
    """Ratios LHS/RHS along a shift schedule, for a = b > 0 tuples.

    LHS is the k-modified polar deficit of the translated flat bubble;
    RHS is the squared relative gradient distance to the unshifted one.
    Zero shifts contribute nothing and are skipped.  The running
    infimum of the returned list estimates the comparison constant.
    """
    if params.a != params.b or params.a == 0.0:
        raise RegionViolation(
            f"gap probe needs a = b > 0, got a={params.a}, b={params.b}"
        )
    fp = flat_params(params)
    grid = make_radial_grid(*window)
    u0 = canonical_profile(fp, grid)
    base = embed_axisym(u0, fp.n, psi_count)
    sharp = sharp_constant(fp)
    gnorm0 = grad_norm(base, fp)

    ratios = []
    for shift in shift_schedule:
        if shift == 0.0:
            continue
        moved = translate_axisym(u0, float(shift), fp, psi_count)
        pk = weighted_grad_pnorm(moved, fp, k_factor=params.k)
        lhs = pk ** (1.0 / fp.p) / q_norm(moved, fp) - sharp
        diff = AxisymField(
            grid=grid,
            dim=fp.n,
            psi_nodes=base.psi_nodes,
            psi_weights=base.psi_weights,
            values=base.values - moved.values,
            grad_r=base.grad_r - moved.grad_r,
            grad_psi=base.grad_psi - moved.grad_psi,
        )
        rhs = (grad_norm(diff, fp) / gnorm0) ** 2
        ratios.append(lhs / rhs)
    return ratios


# ---------------------------------------------------------------------------
# finite-domain embedding


def mollified_bubble(
    params: CknParams,
    domain_radius: float,
    grid: Optional[RadialGrid] = None,
    lam: float = 1.0,
    count: int = 1024,
) -> RadialProfile:
    """Canonical bubble cut to a ball: cos^2 taper over the outer 10%.

    The taper puts the profile in the zero-trace class on the ball, so
    embedding_check accepts it.
    """
    if domain_radius <= 0.0:
        raise ValueError(f"domain radius must be positive, got {domain_radius}")
    if grid is None:
        grid = make_radial_grid(-30.0, math.log(domain_radius), count)
    prof = sample_bubble(params, canonical_bubble(params, lam), grid)
    r = grid.nodes
    r0 = 0.9 * domain_radius
    theta = 0.5 * math.pi * np.clip((r - r0) / (0.1 * domain_radius), 0.0, 1.0)
    chi = np.where(r >= domain_radius, 0.0, np.cos(theta) ** 2)
    dchi = np.where(
        (r > r0) & (r < domain_radius),
        -(math.pi / (0.2 * domain_radius)) * np.sin(2.0 * theta),
        0.0,
    )
    return RadialProfile(
        grid=grid,
        values=prof.values * chi,
        derivative=prof.derivative * chi + prof.values * dchi,
    )


def _weight_samples(u: Field, params: CknParams, variant: str) -> Field:
    r = u.grid.nodes
    if isinstance(u, RadialProfile):
        if variant == "value":
            vals = r ** (-params.a) * np.abs(u.values)
        else:
            vals = r ** (-params.a) * np.abs(u.derivative)
        return RadialProfile(grid=u.grid, values=vals, derivative=np.zeros_like(vals))
    mag = (
        np.abs(u.values)
        if variant == "value"
        else np.sqrt(u.grad_r**2 + (u.grad_psi / r[:, None]) ** 2)
    )
    vals = r[:, None] ** (-params.a) * mag
    zero = np.zeros_like(vals)
    return AxisymField(
        grid=u.grid,
        dim=u.dim,
        psi_nodes=u.psi_nodes,
        psi_weights=u.psi_weights,
        values=vals,
        grad_r=zero,
        grad_psi=zero,
    )


def embedding_check(
    u: Field, params: CknParams, domain_radius: float, variant: str = "value"
) -> float:
    """Implied constant in the finite-domain weak-norm strengthening.

    Returns (grad^a - S^a qn^a) / (|Omega|^(-a p3) W^a) with W the weak
    norm of |x|^-a u (value variant, exponent p1) or of |x|^-a grad u
    (grad variant, exponent p2).  Degree zero in u by construction.
    """
    if variant not in ("value", "grad"):
        raise ValueError(f"unknown variant {variant!r}")
    if domain_radius <= 0.0:
        raise ValueError(f"domain radius must be positive, got {domain_radius}")
    n, p, a = params.n, params.p, params.a
    r = u.grid.nodes
    vals = u.values if isinstance(u, RadialProfile) else np.max(np.abs(u.values), axis=1)
    outside = r >= domain_radius
    vmax = float(np.max(np.abs(u.values)))
    if vmax == 0.0:
        raise ZeroField("embedding check of the zero field")
    if np.any(np.abs(np.atleast_1d(vals)[outside]) > 1e-14 * vmax):
        raise UnsupportedField(
            f"support leaks past r = {domain_radius:g}; zero-trace class required"
        )

    gn = grad_norm(u, params)
    qn = q_norm(u, params)
    alpha = alpha_exponent(params)
    p1 = n * (p - 1.0) / (n - p - a)
    p2 = n * (p - 1.0) / (n - a - 1.0)
    p3 = (n - p - p * a) / (n * p * (p - 1.0))
    exponent = p1 if variant == "value" else p2
    w = weak_lebesgue_norm(
        _weight_samples(u, params, variant), exponent, domain_radius, dim=n
    )
    if w <= 0.0:
        raise ZeroField("weak norm vanished on the domain")
    volume = params.sphere_area * domain_radius**n / n
    numer = gn**alpha - sharp_constant(params) ** alpha * qn**alpha
    denom = volume ** (-alpha * p3) * w**alpha
    return numer / denom

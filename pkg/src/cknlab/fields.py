"""Radial grids, sampled fields, and the extremal bubble profiles.

All radial quadrature lives on a log-radius grid: panels of Gauss-
Legendre nodes in t = log r, with the Jacobian e^t folded into the
weights so that plain weighted sums approximate integrals in dr.
Angular quadrature for axisymmetric fields uses Gauss-Jacobi nodes in
cos(psi) with the (n-2)-sphere measure folded in, so the angular
weights alone sum to the full sphere area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import roots_jacobi, roots_legendre

from .errors import BadGridSpec, TranslationForbidden
from .params import CknParams

__all__ = [
    "RadialGrid",
    "RadialProfile",
    "AxisymField",
    "Bubble",
    "make_radial_grid",
    "make_psi_grid",
    "sample_bubble",
    "bubble_evaluator",
    "bubble_second_derivative",
    "embed_axisym",
    "modulated_axisym",
    "translate_axisym",
    "gaussian_bump_profile",
    "fd_derivative",
    "resample_profile",
    "save_field",
    "load_field",
]

PANEL_POINTS = 8
DEFAULT_T_MIN = -30.0
DEFAULT_T_MAX = 30.0
DEFAULT_COUNT = 2048
DEFAULT_PSI_COUNT = 128


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Composite Gauss-Legendre grid in log radius.

    weights integrate against dr (Jacobian included); t_weights are the
    raw panel weights in t for integrands already written in log radius.
    """

    t_min: float
    t_max: float
    count: int
    nodes: np.ndarray      # radii, strictly increasing
    log_nodes: np.ndarray  # t = log r
    weights: np.ndarray    # quadrature for integral f(r) dr
    t_weights: np.ndarray  # quadrature for integral f(t) dt

    def meta(self) -> tuple:
        return (self.t_min, self.t_max, self.count)

    def same_as(self, other: "RadialGrid") -> bool:
        return self.meta() == other.meta() and np.array_equal(
            self.log_nodes, other.log_nodes
        )


def make_radial_grid(
    t_min: float = DEFAULT_T_MIN,
    t_max: float = DEFAULT_T_MAX,
    count: int = DEFAULT_COUNT,
    panel_points: int = PANEL_POINTS,
    k_compat: float | None = None,
) -> RadialGrid:
    """Build the composite panel grid on [t_min, t_max].

    count rounds up to a whole number of panels.  With k_compat = k the
    window is stretched to [k t_min, k t_max] so that the image of the
    grid under the weight-removing map t -> t/k lands exactly on the
    requested window.

    Raises
    ------
    BadGridSpec
        Empty or inverted window, or fewer than 16 nodes.
    """
    if not (math.isfinite(t_min) and math.isfinite(t_max)) or t_min >= t_max:
        raise BadGridSpec(f"need t_min < t_max, got [{t_min}, {t_max}]")
    if count < 16:
        raise BadGridSpec(f"need at least 16 nodes, got {count}")
    if k_compat is not None:
        if k_compat < 1.0:
            raise BadGridSpec(f"k_compat must be >= 1, got {k_compat}")
        t_min, t_max = k_compat * t_min, k_compat * t_max
    npan = int(math.ceil(count / panel_points))
    actual = npan * panel_points
    edges = np.linspace(t_min, t_max, npan + 1)
    x, w = roots_legendre(panel_points)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    r = np.exp(t)
    return RadialGrid(
        t_min=float(t_min),
        t_max=float(t_max),
        count=actual,
        nodes=r,
        log_nodes=t,
        weights=wt * r,
        t_weights=wt,
    )


def scaled_grid(grid: RadialGrid, factor: float) -> RadialGrid:
    """Grid with every log node multiplied by factor, node for node.

    Used by the radial stretch maps so mapped values can be reused
    without interpolation.  factor must be positive.
    """
    if factor <= 0:
        raise BadGridSpec(f"scale factor must be positive, got {factor}")
    t = grid.log_nodes * factor
    r = np.exp(t)
    return RadialGrid(
        t_min=grid.t_min * factor,
        t_max=grid.t_max * factor,
        count=grid.count,
        nodes=r,
        log_nodes=t,
        weights=grid.t_weights * factor * r,
        t_weights=grid.t_weights * factor,
    )


def make_psi_grid(dim: int, count: int = DEFAULT_PSI_COUNT) -> tuple[np.ndarray, np.ndarray]:
    """Polar-angle nodes and weights on [0, pi] for dimension dim.

    Gauss-Jacobi in x = cos(psi) with exponent (dim-3)/2 on both ends;
    the (dim-2)-sphere area is folded in, so sum(weights) equals the
    full sphere area in R^dim.
    """
    if dim < 2:
        raise BadGridSpec(f"angular grid needs dim >= 2, got {dim}")
    if count < 4:
        raise BadGridSpec(f"angular grid needs at least 4 nodes, got {count}")
    alpha = (dim - 3) / 2.0
    x, w = roots_jacobi(count, alpha, alpha)
    psi = np.arccos(x[::-1])
    w = w[::-1].copy()
    equator_area = 2.0 * math.pi ** ((dim - 1) / 2.0) / math.gamma((dim - 1) / 2.0)
    return psi, w * equator_area


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Radial field sampled on a grid.

    derivative is d(value)/dr at the nodes, or None when unknown.
    analytic_tag names a closed form the samples came from; evaluator,
    when present, computes (value, derivative) at arbitrary radius and
    is never serialized.
    """

    grid: RadialGrid
    values: np.ndarray
    derivative: Optional[np.ndarray] = None
    analytic_tag: Optional[str] = None
    evaluator: Optional[Callable] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class AxisymField:
    """Axisymmetric field u(r, psi) sampled on a tensor grid.

    values, grad_r, grad_psi are (radial count, angular count) arrays;
    grad_psi is the partial in psi (so the angular gradient part of
    |grad u|^2 is grad_psi^2 / r^2).
    """

    grid: RadialGrid
    dim: int
    psi_nodes: np.ndarray
    psi_weights: np.ndarray
    values: np.ndarray
    grad_r: Optional[np.ndarray] = None
    grad_psi: Optional[np.ndarray] = None
    analytic_tag: Optional[str] = None


Field = RadialProfile | AxisymField


# ---------------------------------------------------------------------------
# bubbles


@dataclass(frozen=True)
class Bubble:
    """Point on the extremal manifold.

    amplitude multiplies the profile, scale is the dilation parameter
    lambda > 0 (the profile sees B = lambda^sigma), axial_shift is a
    translation along the first axis and is only meaningful for the
    unweighted tuple a = b = 0.
    """

    amplitude: float
    scale: float
    axial_shift: float = 0.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"bubble scale must be positive, got {self.scale}")


def _format_float(x: float) -> str:
    return repr(float(x))


def bubble_tag(amplitude: float, b_coeff: float, sigma: float, m: float) -> str:
    return "bubble A=%s B=%s sig=%s m=%s" % tuple(
        _format_float(v) for v in (amplitude, b_coeff, sigma, m)
    )


def bubble_evaluator(amplitude: float, b_coeff: float, sigma: float, m: float):
    """Closed-form (value, d/dr) evaluator for A (1 + B r^sigma)^-m."""

    def ev(r):
        r = np.asarray(r, dtype=float)
        base = 1.0 + b_coeff * r**sigma
        v = amplitude * base ** (-m)
        dv = amplitude * (-m) * base ** (-m - 1.0) * b_coeff * sigma * r ** (sigma - 1.0)
        return v, dv

    return ev


def bubble_second_derivative(amplitude: float, b_coeff: float, sigma: float, m: float):
    """Closed-form d2/dr2 evaluator for the same profile."""

    def ev2(r):
        r = np.asarray(r, dtype=float)
        base = 1.0 + b_coeff * r**sigma
        return (
            -amplitude
            * m
            * sigma
            * b_coeff
            * r ** (sigma - 2.0)
            * base ** (-m - 2.0)
            * ((sigma - 1.0) * base - (m + 1.0) * b_coeff * sigma * r**sigma)
        )

    return ev2


def _bump_tag(center: float, width: float) -> str:
    return "gbump c=%s w=%s" % (_format_float(center), _format_float(width))


def _bump_evaluator(center: float, width: float):
    # Gaussian in log radius; smooth and rapidly vanishing at both ends
    def ev(r):
        r = np.asarray(r, dtype=float)
        t = np.log(r)
        v = np.exp(-((t - center) ** 2) / (2.0 * width**2))
        dv = v * (-(t - center) / width**2) / r
        return v, dv

    return ev


def evaluator_from_tag(tag: str):
    """Rebuild the closed-form evaluator named by a serialized tag."""
    parts = tag.split()
    kind = parts[0]
    kv = dict(item.split("=", 1) for item in parts[1:])
    if kind == "bubble":
        return bubble_evaluator(
            float(kv["A"]), float(kv["B"]), float(kv["sig"]), float(kv["m"])
        )
    if kind == "gbump":
        return _bump_evaluator(float(kv["c"]), float(kv["w"]))
    return None


def sample_bubble(params: CknParams, bubble: Bubble, grid: RadialGrid) -> RadialProfile:
    """Sample an extremal profile (with analytic derivative) on a grid.

    The profile is amplitude * (1 + (scale * r)^sigma)^-m.  Shifted
    bubbles have no radial profile; translate the centred one instead.
    """
    if bubble.axial_shift != 0.0:
        raise TranslationForbidden(
            "shifted bubble has no radial profile; sample centred and translate"
        )
    b_coeff = bubble.scale**params.sigma
    ev = bubble_evaluator(bubble.amplitude, b_coeff, params.sigma, params.bubble_m)
    v, dv = ev(grid.nodes)
    return RadialProfile(
        grid=grid,
        values=v,
        derivative=dv,
        analytic_tag=bubble_tag(bubble.amplitude, b_coeff, params.sigma, params.bubble_m),
        evaluator=ev,
    )


def gaussian_bump_profile(
    grid: RadialGrid, center: float, width: float
) -> RadialProfile:
    """Unit-height Gaussian bump in log radius, with analytic derivative."""
    if width <= 0:
        raise BadGridSpec(f"bump width must be positive, got {width}")
    ev = _bump_evaluator(center, width)
    v, dv = ev(grid.nodes)
    return RadialProfile(
        grid=grid,
        values=v,
        derivative=dv,
        analytic_tag=_bump_tag(center, width),
        evaluator=ev,
    )


# ---------------------------------------------------------------------------
# axisymmetric construction


def embed_axisym(
    profile: RadialProfile, dim: int, psi_count: int = DEFAULT_PSI_COUNT
) -> AxisymField:
    """View a radial profile as an axisymmetric field (grad_psi = 0)."""
    psi, wpsi = make_psi_grid(dim, psi_count)
    npsi = len(psi)
    vals = np.repeat(profile.values[:, None], npsi, axis=1)
    gr = None
    gp = None
    if profile.derivative is not None:
        gr = np.repeat(profile.derivative[:, None], npsi, axis=1)
        gp = np.zeros_like(vals)
    return AxisymField(
        grid=profile.grid,
        dim=dim,
        psi_nodes=psi,
        psi_weights=wpsi,
        values=vals,
        grad_r=gr,
        grad_psi=gp,
        analytic_tag=profile.analytic_tag,
    )


def modulated_axisym(
    profile: RadialProfile,
    dim: int,
    psi_count: int = DEFAULT_PSI_COUNT,
    cos_coeff: float = 0.3,
) -> AxisymField:
    """Radial profile times (1 + c cos psi): cheap nontrivial angular test field."""
    if profile.derivative is None:
        raise BadGridSpec("modulated field needs the radial derivative")
    psi, wpsi = make_psi_grid(dim, psi_count)
    ang = 1.0 + cos_coeff * np.cos(psi)
    dang = -cos_coeff * np.sin(psi)
    vals = profile.values[:, None] * ang[None, :]
    gr = profile.derivative[:, None] * ang[None, :]
    gp = profile.values[:, None] * dang[None, :]
    return AxisymField(
        grid=profile.grid,
        dim=dim,
        psi_nodes=psi,
        psi_weights=wpsi,
        values=vals,
        grad_r=gr,
        grad_psi=gp,
    )


def _profile_eval(profile: RadialProfile):
    """Evaluator at arbitrary radius: closed form if known, else monotone
    cubic interpolation in log radius (clamped to the grid window)."""
    if profile.evaluator is not None:
        return profile.evaluator
    if profile.analytic_tag is not None:
        ev = evaluator_from_tag(profile.analytic_tag)
        if ev is not None:
            return ev
    t = profile.grid.log_nodes
    val_ip = PchipInterpolator(t, profile.values, extrapolate=False)
    if profile.derivative is not None:
        der_ip = PchipInterpolator(t, profile.derivative, extrapolate=False)
    else:
        der_ip = None

    def ev(r):
        r = np.asarray(r, dtype=float)
        tt = np.clip(np.log(np.maximum(r, 1e-300)), t[0], t[-1])
        v = val_ip(tt)
        if der_ip is not None:
            dv = der_ip(tt)
        else:
            dv = val_ip.derivative()(tt) / np.maximum(r, 1e-300)
        return v, dv

    return ev


def translate_axisym(
    profile: RadialProfile,
    shift: float,
    params: CknParams,
    psi_count: int = DEFAULT_PSI_COUNT,
) -> AxisymField:
    """Sample u(x + shift e1) for a radial u, as an axisymmetric field.

    Only the unweighted gradient class a = 0 transports under
    translation; other tuples raise TranslationForbidden.  With
    shift = 0 this reduces to the embedding.
    """
    if params.a != 0.0:
        raise TranslationForbidden(f"translation needs a = 0, got a={params.a}")
    if shift == 0.0:
        return embed_axisym(profile, params.n, psi_count)
    ev = _profile_eval(profile)
    psi, wpsi = make_psi_grid(params.n, psi_count)
    r = profile.grid.nodes[:, None]
    c = np.cos(psi)[None, :]
    s = np.sin(psi)[None, :]
    big_r = np.sqrt(r**2 + 2.0 * r * shift * c + shift**2)
    v, dv = ev(big_r)
    # chain rule through R(r, psi); R > 0 away from r = |shift|, psi = pi
    safe = np.maximum(big_r, 1e-300)
    gr = dv * (r + shift * c) / safe
    gp = dv * (-r * shift * s) / safe
    return AxisymField(
        grid=profile.grid,
        dim=params.n,
        psi_nodes=psi,
        psi_weights=wpsi,
        values=v,
        grad_r=gr,
        grad_psi=gp,
    )


# ---------------------------------------------------------------------------
# derivatives and resampling


def fd_derivative(grid: RadialGrid, values: np.ndarray) -> np.ndarray:
    """Second-order finite-difference d(values)/dr on the non-uniform grid.

    Centred three-point stencil in t = log r inside, one-sided at the
    two ends, then divided by r.
    """
    t = grid.log_nodes
    v = np.asarray(values, dtype=float)
    out = np.empty_like(v)
    h1 = t[1:-1] - t[:-2]
    h2 = t[2:] - t[1:-1]
    out[1:-1] = (
        h1**2 * v[2:] - h2**2 * v[:-2] - (h1**2 - h2**2) * v[1:-1]
    ) / (h1 * h2 * (h1 + h2))
    # one-sided quadratic at the ends
    for idx, sl in ((0, slice(0, 3)), (-1, slice(-3, None))):
        ts, vs = t[sl], v[sl]
        c = np.polyfit(ts - t[idx], vs, 2)
        out[idx] = c[1]
    return out / grid.nodes


def resample_profile(
    profile: RadialProfile, grid: RadialGrid
) -> tuple[RadialProfile, float]:
    """Move a profile to another grid; returns (profile, error estimate).

    Exact (estimate 0) when a closed form is attached; otherwise
    monotone cubic in log radius, with the spread between cubic and
    linear interpolation reported as the error estimate.
    """
    if profile.evaluator is not None or (
        profile.analytic_tag is not None
        and evaluator_from_tag(profile.analytic_tag) is not None
    ):
        ev = _profile_eval(profile)
        v, dv = ev(grid.nodes)
        return (
            RadialProfile(
                grid=grid,
                values=v,
                derivative=dv,
                analytic_tag=profile.analytic_tag,
                evaluator=profile.evaluator or ev,
            ),
            0.0,
        )
    t_old = profile.grid.log_nodes
    tt = np.clip(grid.log_nodes, t_old[0], t_old[-1])
    val_ip = PchipInterpolator(t_old, profile.values)
    v = val_ip(tt)
    est = float(np.max(np.abs(v - np.interp(tt, t_old, profile.values))))
    dv = None
    if profile.derivative is not None:
        dv = PchipInterpolator(t_old, profile.derivative)(tt)
    return RadialProfile(grid=grid, values=v, derivative=dv), est


# ---------------------------------------------------------------------------
# serialization: columnar text, bit-exact through repr round-trips


def save_field(path, u: Field) -> None:
    """Write a field as columnar text (r, psi, value, grad_r, grad_psi)."""
    lines = []
    if isinstance(u, RadialProfile):
        kind = "radial"
        dim, psi_count = 0, 0
        has_grad = u.derivative is not None
    else:
        kind = "axisym"
        dim, psi_count = u.dim, len(u.psi_nodes)
        has_grad = u.grad_r is not None
    g = u.grid
    lines.append(f"# cknfield v1 kind={kind}")
    lines.append(f"# grid {g.t_min!r} {g.t_max!r} {g.count}")
    lines.append(f"# angular {dim} {psi_count}")
    lines.append(f"# derivative {int(has_grad)}")
    lines.append(f"# tag {u.analytic_tag if u.analytic_tag is not None else '-'}")
    lines.append("# columns: r psi value grad_r grad_psi")
    if isinstance(u, RadialProfile):
        dv = u.derivative if has_grad else np.zeros_like(u.values)
        for r, v, d in zip(g.nodes, u.values, dv):
            lines.append(f"{float(r)!r} 0.0 {float(v)!r} {float(d)!r} 0.0")
    else:
        gr = u.grad_r if has_grad else np.zeros_like(u.values)
        gp = u.grad_psi if has_grad else np.zeros_like(u.values)
        for i, r in enumerate(g.nodes):
            for j, psi in enumerate(u.psi_nodes):
                lines.append(
                    f"{float(r)!r} {float(psi)!r} {float(u.values[i, j])!r} "
                    f"{float(gr[i, j])!r} {float(gp[i, j])!r}"
                )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field(path) -> Field:
    """Read a field written by save_field; grids are rebuilt, not stored."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    header = {}
    body_start = 0
    for i, ln in enumerate(lines):
        if not ln.startswith("#"):
            body_start = i
            break
        parts = ln[1:].strip().split(None, 1)
        if parts:
            header[parts[0]] = parts[1] if len(parts) > 1 else ""
    if "cknfield" not in header:
        raise BadGridSpec(f"{path}: not a field file")
    t_min_s, t_max_s, count_s = header["grid"].split()
    grid = make_radial_grid(float(t_min_s), float(t_max_s), int(count_s))
    dim_s, psi_count_s = header["angular"].split()
    dim, psi_count = int(dim_s), int(psi_count_s)
    has_grad = header["derivative"].strip() == "1"
    tag = header["tag"]
    tag = None if tag == "-" else tag
    rows = np.array(
        [[float(x) for x in ln.split()] for ln in lines[body_start:] if ln.strip()]
    )
    if abs(rows[0, 0] - grid.nodes[0]) > 0:
        raise BadGridSpec(f"{path}: stored radii do not match the rebuilt grid")
    kind = header["cknfield"].split("kind=")[-1]
    if kind == "radial":
        values = rows[:, 2]
        deriv = rows[:, 3] if has_grad else None
        ev = evaluator_from_tag(tag) if tag else None
        return RadialProfile(
            grid=grid, values=values, derivative=deriv, analytic_tag=tag, evaluator=ev
        )
    psi, wpsi = make_psi_grid(dim, psi_count)
    nr = grid.count
    values = rows[:, 2].reshape(nr, psi_count)
    gr = rows[:, 3].reshape(nr, psi_count) if has_grad else None
    gp = rows[:, 4].reshape(nr, psi_count) if has_grad else None
    return AxisymField(
        grid=grid,
        dim=dim,
        psi_nodes=psi,
        psi_weights=wpsi,
        values=values,
        grad_r=gr,
        grad_psi=gp,
        analytic_tag=tag,
    )

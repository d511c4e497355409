"""Deterministic link optics: beam spread, pointing losses, angle of arrival.

Two instantaneous loss factors are computed here.  The geometric loss is the
fraction of a Gaussian beam collected by the circular receiver lens when the
beam center is displaced; the field-of-view loss is the fraction of the
focused (Airy) spot that lands on the circular detector when the arrival
direction is off-axis.  Both are radially symmetric, which the Monte-Carlo
path exploits through interpolation tables built once per geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp
from scipy.integrate import dblquad, quad
from scipy.interpolate import PchipInterpolator


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class LinkGeometry:
    """Deterministic optical parameters of one link.

    Units are meters and radians throughout.  ``cn2`` is the refractive-index
    structure parameter in m^(-2/3); ``h_l`` is the deterministic channel
    loss factor.
    """

    z: float                # link length
    r_a: float              # receiver lens radius
    r_ap: float             # detector radius (focal plane)
    w0: float               # transmitter beam waist
    wavelength: float
    cn2: float              # refractive-index structure parameter
    d_f: float              # focal length
    n_f: float              # f-number
    fov: float              # receiver field of view (half-angle)
    h_l: float = 1.0

    def __post_init__(self):
        for name in ("z", "r_a", "r_ap", "w0", "wavelength", "d_f", "n_f", "fov"):
            if getattr(self, name) <= 0:
                raise ValueError(f"LinkGeometry.{name} must be > 0")
        if self.cn2 < 0:
            raise ValueError("LinkGeometry.cn2 must be >= 0")
        if not 0 < self.h_l <= 1:
            raise ValueError("LinkGeometry.h_l must be in (0, 1]")


@dataclass(frozen=True)
class PointingState:
    """Instantaneous orientation (rad) and position (m) deviations."""

    theta_tx: float = 0.0
    theta_ty: float = 0.0
    theta_rx: float = 0.0
    theta_ry: float = 0.0
    x_tx: float = 0.0
    y_ty: float = 0.0
    x_rx: float = 0.0
    y_ry: float = 0.0


def beam_width_at_rx(g: LinkGeometry) -> float:
    """Beam radius at the receiver: diffraction plus turbulence broadening.

    w_z = w0 sqrt(1 + (1 + 2 w0^2 (0.55 cn2 k^2 z)^(6/5)) (lambda z / (pi w0^2))^2)
    with k the optical wavenumber.  cn2 = 0 gives the pure diffraction limit.
    """
    k = 2 * math.pi / g.wavelength
    turb = 0.55 * g.cn2 * k * k * g.z
    broadening = 1.0 + 2.0 * g.w0 ** 2 * turb ** 1.2
    spread = g.wavelength * g.z / (math.pi * g.w0 ** 2)
    return g.w0 * math.sqrt(1.0 + broadening * spread * spread)


def a0(g: LinkGeometry, w_z: float) -> float:
    """Peak collected fraction 2 r_a^2 / w_z^2 of a centered wide beam."""
    if w_z <= 0:
        raise ValueError("w_z must be > 0")
    return 2.0 * g.r_a ** 2 / w_z ** 2


def radial_displacement(p: PointingState, z: float) -> float:
    """Radial offset of the beam center at the receiver, small-angle form."""
    return math.hypot(z * p.theta_tx + p.x_tx + p.x_rx,
                      z * p.theta_ty + p.y_ty + p.y_ry)


def radial_displacement_exact(p: PointingState, z: float) -> float:
    """Radial offset with the exact tangent of the tilt angles."""
    return math.hypot(z * math.tan(p.theta_tx) + p.x_tx + p.x_rx,
                      z * math.tan(p.theta_ty) + p.y_ty + p.y_ry)


def aoa(p: PointingState) -> float:
    """Angle of arrival, small-angle form sqrt((t_tx+t_rx)^2 + (t_ty+t_ry)^2)."""
    return math.hypot(p.theta_tx + p.theta_rx, p.theta_ty + p.theta_ry)


def aoa_exact(p: PointingState) -> float:
    """Angle of arrival with exact tangents, for validating the linear form."""
    return math.atan(math.hypot(math.tan(p.theta_tx + p.theta_rx),
                                math.tan(p.theta_ty + p.theta_ry)))


def hpg_exact(g: LinkGeometry, w_z: float, dx: float, dy: float = 0.0,
              rel_tol: float = 1e-6) -> float:
    """Collected fraction of a Gaussian beam displaced by (dx, dy).

    Adaptive 2-D quadrature of 2/(pi w_z^2) exp(-2((x-dx)^2+(y-dy)^2)/w_z^2)
    over the lens disk.  Falls back to an adaptive polar form when the
    cartesian integrator cannot certify the tolerance.
    """
    if w_z <= 0:
        raise ValueError("w_z must be > 0")
    r_d = math.hypot(dx, dy)
    # far outside the beam footprint the integral underflows cleanly
    if 2.0 * (max(r_d - g.r_a, 0.0) / w_z) ** 2 > 700.0:
        return 0.0
    norm = 2.0 / (math.pi * w_z * w_z)

    def integrand(x, y):
        return norm * math.exp(-2.0 * ((x - dx) ** 2 + (y - dy) ** 2) / (w_z * w_z))

    half = lambda y: math.sqrt(max(g.r_a ** 2 - y * y, 0.0))
    val, err = dblquad(integrand, -g.r_a, g.r_a, lambda y: -half(y), half,
                       epsabs=1e-13, epsrel=rel_tol)
    if val > 0 and err > 10 * rel_tol * val + 1e-12:
        val2 = _hpg_polar(g, w_z, r_d, rel_tol)
        if not math.isclose(val, val2, rel_tol=50 * rel_tol, abs_tol=1e-12):
            raise QuadratureError(
                f"hpg_exact did not converge: cartesian={val!r} (err={err!r}), polar={val2!r}")
        val = val2
    return min(val, 1.0)


def _hpg_polar(g: LinkGeometry, w_z: float, r_d: float, rel_tol: float = 1e-9) -> float:
    """Polar form: the angular integral reduces to I0, leaving one radial quad."""
    c = 4.0 / (w_z * w_z)

    def f(rho):
        # i0e keeps the integrand finite for large arguments
        arg = c * rho * r_d
        return c * rho * math.exp(-0.5 * c * (rho * rho + r_d * r_d) + arg) * _sp.i0e(arg)

    val, err = quad(f, 0.0, g.r_a, epsabs=1e-14, epsrel=rel_tol, limit=200)
    return min(val, 1.0)


def hpg_approx(r_d, w_z: float, r_a: float):
    """Wide-beam approximation (2 r_a^2 / w_z^2) exp(-2 r_d^2 / w_z^2)."""
    if w_z <= 0:
        raise ValueError("w_z must be > 0")
    r_d = np.asarray(r_d, dtype=float)
    out = 2.0 * r_a ** 2 / w_z ** 2 * np.exp(-2.0 * r_d ** 2 / w_z ** 2)
    return float(out) if out.ndim == 0 else out


def hpg_from_state(p: PointingState, g: LinkGeometry, w_z: float) -> float:
    """hpg_exact at the beam offset implied by a pointing state (linear form)."""
    return hpg_exact(g, w_z, g.z * p.theta_tx + p.x_tx + p.x_rx,
                     g.z * p.theta_ty + p.y_ty + p.y_ry)


# ------------------------------------------------------------------ Airy loss


def _airy_intensity_rho(rho, a_coef):
    """(1/pi) (J1(a rho)/rho)^2 with the rho -> 0 limit (a/2)^2 / pi."""
    rho = np.asarray(rho, dtype=float)
    small = rho < 1e-12 / a_coef
    safe = np.where(small, 1.0, rho)
    val = np.where(small, (a_coef / 2.0) ** 2, (_sp.j1(a_coef * safe) / safe) ** 2)
    return val / math.pi


def _overlap_angle(rho, d, radius):
    """Angular measure of the circle of radius rho (about the spot center)
    lying inside a disk of the given radius centered a distance d away."""
    rho = np.asarray(rho, dtype=float)
    if d == 0.0:
        return np.where(rho <= radius, 2.0 * math.pi, 0.0)
    cosarg = (rho * rho + d * d - radius * radius) / (2.0 * rho * d)
    w = np.empty_like(rho)
    inside = rho <= radius - d if d < radius else np.zeros(rho.shape, dtype=bool)
    outside = (rho >= d + radius) | (rho <= d - radius)
    band = ~(inside | outside)
    w[inside] = 2.0 * math.pi
    w[outside] = 0.0
    w[band] = 2.0 * np.arccos(np.clip(cosarg[band], -1.0, 1.0))
    return w


_GL8 = np.polynomial.legendre.leggauss(8)
_GL16 = np.polynomial.legendre.leggauss(16)


def _hpa_panels(g: LinkGeometry, d: float, nodes) -> float:
    """Integrate the displaced Airy intensity over the detector disk.

    The 2-D disk integral is taken in polar coordinates about the spot
    center; panels one intensity-oscillation long keep the fixed-order
    Gauss rule accurate.
    """
    a_coef = math.pi / (g.wavelength * g.n_f)
    lo = max(0.0, d - g.r_ap)
    hi = d + g.r_ap
    period = math.pi / a_coef
    n_panels = max(8, int(math.ceil((hi - lo) / period)))
    edges = np.linspace(lo, hi, n_panels + 1)
    # the overlap angle has square-root kinks at |r_ap - d| and r_ap + d;
    # split panels there and refine geometrically toward each kink
    knot = abs(g.r_ap - d)
    extra = [knot + sgn * period / 2 ** j
             for sgn in (-1.0, 1.0) for j in range(0, 7)]
    extra += [hi - period / 2 ** j for j in range(1, 4)]
    extra = [e for e in extra + [knot] if lo < e < hi]
    if extra:
        edges = np.unique(np.concatenate([edges, extra]))
    xg, wg = nodes
    mid = (edges[1:] + edges[:-1]) / 2.0
    halfw = (edges[1:] - edges[:-1]) / 2.0
    rho = (mid[:, None] + halfw[:, None] * xg[None, :]).ravel()
    wts = (halfw[:, None] * wg[None, :]).ravel()
    integrand = _airy_intensity_rho(rho, a_coef) * _overlap_angle(rho, d, g.r_ap) * rho
    return float(np.dot(integrand, wts))


def hpa_exact(theta_x: float, theta_y: float, g: LinkGeometry,
              rel_tol: float = 1e-5, abs_tol: float = 1e-7) -> float:
    """Fraction of the focused Airy pattern captured by the detector.

    theta_x, theta_y are the summed tilt angles in the two planes; the spot
    center sits at d_f * tan(theta) from the detector center.  Raises
    QuadratureError when doubling the panel order moves the result by more
    than the tolerance.
    """
    d = g.d_f * math.hypot(math.tan(theta_x), math.tan(theta_y))
    coarse = _hpa_panels(g, d, _GL8)
    fine = _hpa_panels(g, d, _GL16)
    if abs(fine - coarse) > rel_tol * abs(fine) + abs_tol:
        raise QuadratureError(
            f"hpa_exact panel refinement did not converge: {coarse!r} vs {fine!r}")
    return min(max(fine, 0.0), 1.0)


def hpa_step(theta_a, fov: float):
    """Step field-of-view model: 1 inside the FOV, 0 at and beyond it."""
    if fov < 0:
        raise ValueError("fov must be >= 0")
    theta_a = np.asarray(theta_a, dtype=float)
    if np.any(theta_a < 0):
        raise ValueError("theta_a must be >= 0")
    out = np.where(theta_a < fov, 1.0, 0.0)
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------------------ tables


class RadialTable:
    """Monotone-safe interpolation of a radially symmetric loss profile.

    The geometric loss is stored as ln(value) against r^2, where it is
    nearly linear, so the interpolant is accurate in relative terms across
    hundreds of decades of decay; the FOV loss is stored directly.
    """

    def __init__(self, knots, values, cutoff, log_square):
        self.knots = np.asarray(knots, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.cutoff = float(cutoff)
        self._log_square = bool(log_square)
        if log_square:
            self._interp = PchipInterpolator(
                self.knots ** 2, np.log(np.maximum(self.values, 1e-320)), extrapolate=False)
        else:
            self._interp = PchipInterpolator(self.knots, self.values, extrapolate=False)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.zeros_like(r)
        ok = r <= self.cutoff
        x = np.clip(r[ok], self.knots[0], self.knots[-1])
        if self._log_square:
            out[ok] = np.exp(self._interp(x * x))
        else:
            out[ok] = self._interp(x)
        np.clip(out, 0.0, 1.0, out=out)
        return float(out[0]) if scalar else out


def _refine_knots(fn, knots, values, abs_tol, log_square, rel_tol=3e-4, max_rounds=12):
    """Bisect intervals until the interpolation mid-point error is small in
    both absolute terms and (where values are meaningful) relative terms."""
    knots = list(knots)
    values = list(values)
    for _ in range(max_rounds):
        table = RadialTable(np.asarray(knots), np.asarray(values), knots[-1], log_square)
        mids = (np.asarray(knots[1:]) + np.asarray(knots[:-1])) / 2.0
        approx = table(mids)
        exact = np.array([fn(m) for m in mids])
        err = np.abs(approx - exact)
        bad = (err > abs_tol) | ((exact > 1e-12) & (err > rel_tol * exact))
        if not np.any(bad):
            return np.asarray(knots), np.asarray(values)
        new_knots, new_values = [knots[0]], [values[0]]
        for i in range(len(mids)):
            if bad[i]:
                new_knots.append(mids[i])
                new_values.append(exact[i])
            new_knots.append(knots[i + 1])
            new_values.append(values[i + 1])
        knots, values = new_knots, new_values
    return np.asarray(knots), np.asarray(values)


def build_radial_tables(g: LinkGeometry, w_z: float, n_knots: int = 128,
                        abs_tol: float = 5e-5, include_hpa: bool = True):
    """Interpolation tables for the two radial loss profiles.

    Knots start from a coarse grid of at least ``n_knots`` points overall and
    are bisected adaptively until the mid-point interpolation error is below
    ``abs_tol`` (half the documented 1e-4 budget).  Returns ``(hpg_table,
    hpa_table)``; the latter is ``None`` when ``include_hpa`` is false.
    """
    if n_knots < 64:
        raise ValueError("n_knots must be >= 64")
    peak = a0(g, w_z)
    # radius where the collected fraction underflows to ~1e-300
    r_cut = w_z * math.sqrt(max(690.0 + math.log(max(peak, 1e-12)), 1.0) / 2.0) + g.r_a

    hpg_fn = lambda r: hpg_exact(g, w_z, r)
    r_knots = np.linspace(0.0, r_cut, max(n_knots // 2, 48))
    r_vals = np.array([hpg_fn(r) for r in r_knots])
    r_knots, r_vals = _refine_knots(hpg_fn, r_knots, r_vals, abs_tol, log_square=True)
    hpg_table = RadialTable(r_knots, r_vals, r_cut, log_square=True)

    hpa_table = None
    if include_hpa:
        # the ring tail decays like 1/offset; past fov + 20 mrad it is < 1e-4
        theta_cut = g.fov + 0.020
        band = 0.005
        seed = np.concatenate([
            np.linspace(0.0, max(g.fov - band, 1e-4), max(n_knots // 4, 17)),
            np.linspace(max(g.fov - band, 1e-4), g.fov + band, max(n_knots, 161)),
            np.linspace(g.fov + band, theta_cut, max(n_knots, 161)),
        ])
        seed = np.unique(seed)
        hpa_fn = lambda t: hpa_exact(t, 0.0, g)
        t_vals = np.array([hpa_fn(t) for t in seed])
        t_knots, t_vals = _refine_knots(hpa_fn, seed, t_vals, abs_tol,
                                        log_square=False, rel_tol=1.0)
        hpa_table = RadialTable(t_knots, t_vals, theta_cut, log_square=False)

    return hpg_table, hpa_table

"""Analytical mixture PDFs of the end-to-end optical channel gain.

Every model has the same shape: a point mass at h = 0 (the beam arriving
outside the receiver field of view) plus a continuous density on
(0, h_max].  The general anisotropic models (theorem2, theorem5) keep a
numerical integral over the pointing-offset law; the closed forms
(theorem3/4/6/7, prop1) replace it with series whose coefficients are
precomputed in extended precision, because their alternating gamma-weighted
terms cancel over ~18 decades in the strong-turbulence regime.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import mpmath as mp
import numpy as np
from scipy import special as _sp

from .geometry import LinkGeometry, a0 as _a0, beam_width_at_rx
from .specfun import marcum_q1, q_function
from .turbulence import GammaGamma, LogNormal, gg_pdf, gg_quantile

_LD = np.longdouble

__all__ = [
    "UavStability",
    "DerivedConstants",
    "ChannelPdf",
    "prob_R",
    "marcum_mass",
    "derive_constants",
    "calibrate_series",
    "pdf_theorem2",
    "pdf_theorem3",
    "pdf_theorem4",
    "pdf_prop1",
    "pdf_theorem5",
    "pdf_theorem6",
    "pdf_theorem7",
    "MODEL_BUILDERS",
]


@dataclass(frozen=True)
class UavStability:
    """Fluctuation standard deviations and fixed boresight offsets.

    Orientation sigmas and boresights in radians, position sigmas in meters.
    """

    sigma_txo: float
    sigma_tyo: float
    sigma_rxo: float
    sigma_ryo: float
    sigma_txp: float
    sigma_typ: float
    sigma_rxp: float
    sigma_ryp: float
    bore_tx_x: float = 0.0
    bore_tx_y: float = 0.0
    bore_rx_x: float = 0.0
    bore_rx_y: float = 0.0

    def __post_init__(self):
        for name in ("sigma_txo", "sigma_tyo", "sigma_rxo", "sigma_ryo",
                     "sigma_txp", "sigma_typ", "sigma_rxp", "sigma_ryp"):
            if getattr(self, name) < 0:
                raise ValueError(f"UavStability.{name} must be >= 0")


@dataclass(frozen=True)
class DerivedConstants:
    """Shape constants shared by the analytical models."""

    w_z: float
    a0: float               # peak collected fraction, also called kappa
    kappa: float
    sigma_dx2: float        # beam-offset variance along x (m^2)
    sigma_dy2: float
    sigma_m2: float         # isotropic approximation scale of the offset law
    sigma_d2: float         # isotropic offset variance (m^2)
    r_o: float              # boresight-induced offset of the beam center (m)
    theta_d: float          # boresight angle of arrival (rad)
    sigma_to: float
    sigma_ro: float
    tau: float              # w_z^2 / (4 sigma_d^2)
    tau1: float             # w_z^2 / (4 sigma_m^2)


def derive_constants(g: LinkGeometry, s: UavStability, w_z: float | None = None) -> DerivedConstants:
    if w_z is None:
        w_z = beam_width_at_rx(g)
    z = g.z
    sdx2 = z * z * s.sigma_txo ** 2 + s.sigma_txp ** 2 + s.sigma_rxp ** 2
    sdy2 = z * z * s.sigma_tyo ** 2 + s.sigma_typ ** 2 + s.sigma_ryp ** 2
    mx = z * s.bore_tx_x
    my = z * s.bore_tx_y
    sigma_m2 = ((3 * mx * mx * sdx2 ** 2 + 3 * my * my * sdy2 ** 2
                 + sdx2 ** 3 + sdy2 ** 3) / 2.0) ** (1.0 / 3.0)
    sigma_to = math.sqrt((s.sigma_txo ** 2 + s.sigma_tyo ** 2) / 2.0)
    sigma_ro = math.sqrt((s.sigma_rxo ** 2 + s.sigma_ryo ** 2) / 2.0)
    sigma_tp2 = (s.sigma_txp ** 2 + s.sigma_typ ** 2) / 2.0
    sigma_rp2 = (s.sigma_rxp ** 2 + s.sigma_ryp ** 2) / 2.0
    sigma_d2 = z * z * sigma_to ** 2 + sigma_tp2 + sigma_rp2
    kappa = _a0(g, w_z)
    return DerivedConstants(
        w_z=w_z,
        a0=kappa,
        kappa=kappa,
        sigma_dx2=sdx2,
        sigma_dy2=sdy2,
        sigma_m2=sigma_m2,
        sigma_d2=sigma_d2,
        r_o=math.hypot(mx, my),
        theta_d=math.hypot(s.bore_tx_x + s.bore_rx_x, s.bore_tx_y + s.bore_rx_y),
        sigma_to=sigma_to,
        sigma_ro=sigma_ro,
        tau=w_z * w_z / (4.0 * sigma_d2),
        tau1=w_z * w_z / (4.0 * sigma_m2),
    )


# ------------------------------------------------------------------ FOV mass


def prob_R(s: UavStability, fov: float, n_terms: int = 10) -> float:
    """Probability that the arrival angle falls inside the field of view.

    Lattice-cell sum over n_terms strips: each strip pairs the x-interval of
    the enclosing disk chord with a symmetric pair of y-strips, expressed
    through Gaussian tail differences.  Converges (from above) to the disk
    probability as n_terms grows.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    if fov < 0:
        raise ValueError("fov must be >= 0")
    if fov == 0.0:
        return 0.0
    sx = math.hypot(s.sigma_txo, s.sigma_rxo)
    sy = math.hypot(s.sigma_tyo, s.sigma_ryo)
    if sx == 0.0 or sy == 0.0:
        raise ValueError("prob_R needs nonzero orientation spread on both axes")
    mx = s.bore_tx_x + s.bore_rx_x
    my = s.bore_tx_y + s.bore_rx_y
    n = np.arange(1, n_terms + 1, dtype=float)
    y0 = fov * (n - 1) / n_terms
    y1 = fov * n / n_terms
    half_chord = np.sqrt(np.maximum(fov * fov - y0 * y0, 0.0))
    bx = q_function((-half_chord - mx) / sx) - q_function((half_chord - mx) / sx)
    by = (q_function((y0 - my) / sy) - q_function((y1 - my) / sy)) + (
        q_function((-y1 - my) / sy) - q_function((-y0 - my) / sy)
    )
    return float(np.clip(np.sum(bx * by), 0.0, 1.0))


def marcum_mass(theta_d: float, fov: float, sigma_to: float, sigma_ro: float) -> float:
    """P(h_pa = 0) in the isotropic case: Rician arrival angle beyond the FOV."""
    s2 = sigma_to ** 2 + sigma_ro ** 2
    if s2 <= 0:
        raise ValueError("marcum_mass needs sigma_to^2 + sigma_ro^2 > 0")
    s = math.sqrt(s2)
    return float(marcum_q1(theta_d / s, fov / s))


# ------------------------------------------------------------------ ChannelPdf


class ChannelPdf:
    """Mixture channel law: point mass at 0 plus a density on (0, h_max].

    ``pdf`` evaluates the continuous part pointwise (0 outside the support);
    negative values from truncated series are clamped to zero and counted in
    ``negative_clamps``.  A cached log-spaced tabulation supports the
    normalization and binning helpers.
    """

    def __init__(self, p_zero, density, h_max, model_tag, validity_flags=(),
                 grid_points=512):
        self.p_zero = float(p_zero)
        self._density = density
        self.h_max = float(h_max)
        self.model_tag = str(model_tag)
        self.validity_flags = tuple(validity_flags)
        self.grid_points = int(grid_points)
        self.negative_clamps = 0
        self._grid_cache = None

    def pdf(self, h):
        h = np.asarray(h, dtype=float)
        scalar = h.ndim == 0
        h = np.atleast_1d(h)
        out = np.zeros_like(h)
        inside = (h > 0) & (h <= self.h_max)
        if np.any(inside):
            vals = np.asarray(self._density(h[inside]), dtype=float)
            neg = vals < 0
            if np.any(neg):
                self.negative_clamps += int(np.count_nonzero(neg))
                vals = np.where(neg, 0.0, vals)
            out[inside] = vals
        return float(out[0]) if scalar else out

    __call__ = pdf

    def grid(self):
        """Cached (h, pdf) tabulation, log-spaced over 12 decades."""
        if self._grid_cache is None:
            h = np.exp(np.linspace(math.log(self.h_max) - 12 * math.log(10.0),
                                   math.log(self.h_max), self.grid_points))
            self._grid_cache = (h, self.pdf(h))
        return self._grid_cache

    def normalization(self, n: int = 4097) -> float:
        """p_zero plus the quadrature of the density over the support."""
        t = np.linspace(math.log(self.h_max) - 12 * math.log(10.0),
                        math.log(self.h_max), n)
        h = np.exp(t)
        y = self.pdf(h) * h
        return self.p_zero + float(_simpson(y, t))

    def bin_probs(self, edges, points: int = 16) -> np.ndarray:
        """Probability of each histogram bin by fixed-order log-space Gauss."""
        edges = np.asarray(edges, dtype=float)
        lo = np.log(np.maximum(edges[:-1], self.h_max * 1e-300))
        hi = np.log(np.maximum(edges[1:], self.h_max * 1e-300))
        xg, wg = np.polynomial.legendre.leggauss(points)
        t = (hi + lo)[:, None] / 2 + (hi - lo)[:, None] / 2 * xg[None, :]
        w = (hi - lo)[:, None] / 2 * wg[None, :]
        h = np.exp(t)
        vals = self.pdf(h.ravel()).reshape(h.shape)
        return np.sum(vals * h * w, axis=1)

    def mass_interval(self, central: float = 0.9):
        """(h_lo, h_hi) bracketing the given central probability mass of the
        continuous part."""
        h, f = self.grid()
        t = np.log(h)
        seg = (f[1:] * h[1:] + f[:-1] * h[:-1]) / 2 * np.diff(t)
        cdf = np.concatenate([[0.0], np.cumsum(seg)])
        total = cdf[-1]
        if total <= 0:
            raise RuntimeError("density integrates to zero on the grid")
        q = (1.0 - central) / 2.0
        i_lo = int(np.searchsorted(cdf, q * total))
        i_hi = int(np.searchsorted(cdf, (1.0 - q) * total))
        return h[min(i_lo, len(h) - 1)], h[min(i_hi, len(h) - 1)]


def _simpson(y, x):
    n = len(x)
    if n % 2 == 0:
        head = np.trapz(y[:2], x[:2])
        y, x = y[1:], x[1:]
    else:
        head = 0.0
    dx = x[1] - x[0]
    return head + dx / 3.0 * (y[0] + y[-1] + 4 * np.sum(y[1:-1:2]) + 2 * np.sum(y[2:-2:2]))


# ------------------------------------------------------------------ shared helpers


def _boresight_flags(s: UavStability) -> list:
    flags = []
    lhs = (s.bore_tx_x + s.bore_rx_x) ** 2 + (s.bore_tx_y + s.bore_rx_y) ** 2
    rhs = 9.0 * max(s.sigma_txo ** 2 + s.sigma_rxo ** 2,
                    s.sigma_tyo ** 2 + s.sigma_ryo ** 2)
    if lhs > rhs:
        flags.append("boresight_exceeds_validity_bound")
    return flags


def _isotropy_flags(s: UavStability) -> list:
    flags = []
    for a, b, label in ((s.sigma_txo, s.sigma_tyo, "tx"), (s.sigma_rxo, s.sigma_ryo, "rx")):
        hi = max(a, b)
        if hi > 0 and abs(a - b) > 0.1 * hi:
            warnings.warn(
                f"{label} orientation sigmas differ by more than 10%; the isotropic "
                "closed forms average them", stacklevel=3)
            flags.append(f"anisotropic_{label}_orientation")
    return flags


def _phi_kernel(g: LinkGeometry, s: UavStability, d: DerivedConstants, n_phi: int):
    """Returns (c1, c2[phi], c3[phi]) for the angular integral of the
    Beckmann-distributed beam offset."""
    sdx2, sdy2 = d.sigma_dx2, d.sigma_dy2
    sdx, sdy = math.sqrt(sdx2), math.sqrt(sdy2)
    w_z = d.w_z
    mx = g.z * s.bore_tx_x
    my = g.z * s.bore_tx_y
    phi = (np.arange(n_phi) + 0.5) * (2 * math.pi / n_phi)
    c1 = w_z ** 2 / (8 * math.pi * sdx * sdy) * math.exp(
        -mx * mx / (2 * sdx2) - my * my / (2 * sdy2))
    c2 = w_z / math.sqrt(2.0) * (mx * np.cos(phi) / sdx2 + my * np.sin(phi) / sdy2)
    c3 = (w_z ** 2 * (sdx2 - sdy2) * np.cos(2 * phi) - w_z ** 2 * (sdx2 + sdy2)) / (
        8 * sdx2 * sdy2)
    return c1, c2, c3


def _phi_average(u, c2, c3):
    """(2 pi / n_phi) sum_phi exp(c3 u + c2 sqrt(u)), vectorized over u."""
    u = np.asarray(u, dtype=float)
    root = np.sqrt(u)
    out = np.zeros_like(u)
    # chunk the phi axis to bound memory on large u grids
    with np.errstate(under="ignore"):
        acc = np.exp(np.multiply.outer(u, c3) + np.multiply.outer(root, c2))
    out = acc.sum(axis=-1) * (2 * math.pi / len(c2))
    return out


def _mpf_pair_to_longdouble(x) -> np.longdouble:
    hi = float(x)
    lo = float(x - hi)
    return _LD(hi) + _LD(lo)


# ------------------------------------------------------------------ theorem 2


def pdf_theorem2(g: LinkGeometry, s: UavStability, m: LogNormal,
                 n_terms: int = 10, n_phi: int = 64, n_u: int = 96) -> ChannelPdf:
    """General anisotropic model under log-normal turbulence (2-D integral).

    The angular integral is a midpoint rule over n_phi angles (spectrally
    accurate for the periodic integrand); the radial variable is integrated
    on a Gauss-Legendre window that tracks the gaussian factor per h.
    """
    if not isinstance(m, LogNormal):
        raise TypeError("pdf_theorem2 requires a LogNormal turbulence model")
    d = derive_constants(g, s)
    R = prob_R(s, g.fov, n_terms)
    c1, c2, c3 = _phi_kernel(g, s, d, n_phi)
    sl2 = m.sigma_l2
    sl = math.sqrt(sl2)
    mu2 = 2 * m.mu_l
    a0hl = d.a0 * g.h_l
    h_max = a0hl * math.exp(mu2 + 16 * sl)
    sigma_g = 2 * sl  # gaussian width in the radial variable
    xg, wg = np.polynomial.legendre.leggauss(n_u)
    pref = R * c1 / (2 * sl * math.sqrt(2 * math.pi))

    block = max(1, int(4_000_000 / (n_u * n_phi)))

    def density(h):
        h = np.atleast_1d(np.asarray(h, dtype=float))
        out = np.empty_like(h)
        for i in range(0, h.size, block):  # bound the (nh, n_u, n_phi) workspace
            hb = h[i:i + block]
            L = np.log(hb / a0hl)
            center = np.maximum(mu2 - L, 0.0)
            lo = np.maximum(center - 14 * sigma_g, 0.0)
            hi = center + 14 * sigma_g
            u = (hi + lo)[:, None] / 2 + (hi - lo)[:, None] / 2 * xg[None, :]
            w = (hi - lo)[:, None] / 2 * wg[None, :]
            with np.errstate(under="ignore"):
                kern = np.exp(-((L[:, None] + u - mu2) ** 2) / (8 * sl2))
                wphi = np.exp(np.multiply.outer(u, c3) + np.multiply.outer(np.sqrt(u), c2))
            wavg = wphi.sum(axis=-1) * (2 * math.pi / n_phi)
            out[i:i + block] = pref * np.sum(w * wavg * kern, axis=1) / hb
        return out

    return ChannelPdf(1.0 - R, density, h_max, "theorem2")


def pdf_theorem3(g: LinkGeometry, s: UavStability, m: LogNormal,
                 n_terms: int = 10) -> ChannelPdf:
    """Closed form: isotropic approximation of the beam-offset law collapses
    the model to a power law times a Gaussian tail factor."""
    if not isinstance(m, LogNormal):
        raise TypeError("pdf_theorem3 requires a LogNormal turbulence model")
    d = derive_constants(g, s)
    R = prob_R(s, g.fov, n_terms)
    sl2 = m.sigma_l2
    sl = math.sqrt(sl2)
    tau1 = d.tau1
    a0hl = d.a0 * g.h_l
    v1 = 1.0 / (2.0 * sl)
    v2 = m.mu_l / (2 * v1 * sl2) - tau1 / v1
    v3 = tau1 * a0hl ** (-tau1) * math.exp(v2 * v2 / 2 - 2 * m.mu_l ** 2 * v1 * v1)
    h_max = a0hl * math.exp(2 * m.mu_l + 16 * sl)

    def density(h):
        h = np.asarray(h, dtype=float)
        return v3 * R * h ** (tau1 - 1) * q_function(v1 * np.log(h / a0hl) - v2)

    return ChannelPdf(1.0 - R, density, h_max, "theorem3", _boresight_flags(s))


# ------------------------------------------------------------------ theorem 4 / prop 1


def _thm4_pointing_params(g: LinkGeometry, s: UavStability):
    d = derive_constants(g, s)
    flags = _isotropy_flags(s)
    mass = marcum_mass(d.theta_d, g.fov, d.sigma_to, d.sigma_ro)
    return d, flags, mass


def pdf_theorem4(g: LinkGeometry, s: UavStability, m: LogNormal,
                 k_terms: int = 10) -> ChannelPdf:
    """Isotropic nonzero-boresight model under log-normal turbulence.

    Double series over the Rician-offset expansion (k) and binomial index j;
    the two support branches share coefficients and meet continuously where
    the incomplete-gamma argument vanishes.
    """
    if not isinstance(m, LogNormal):
        raise TypeError("pdf_theorem4 requires a LogNormal turbulence model")
    if k_terms < 1:
        raise ValueError("k_terms must be >= 1")
    d, flags, mass = _thm4_pointing_params(g, s)
    sl2, mul = m.sigma_l2, m.mu_l
    sl = math.sqrt(sl2)
    tau = d.tau
    kap_hl = d.kappa * g.h_l
    lam = d.r_o ** 2 * d.w_z ** 2 / (8 * d.sigma_d2 ** 2)
    q2 = math.log(kap_hl) + 2 * mul - 4 * sl2 * tau
    q3 = tau * math.exp(-tau * (q2 + 2 * sl2 * tau) - d.r_o ** 2 / (2 * d.sigma_d2)) / (
        2 * math.sqrt(8 * math.pi) * sl)
    h_max = kap_hl * math.exp(2 * mul + 16 * sl)

    # precompute (k, j) coefficients
    kj = [(k, j) for k in range(k_terms + 1) for j in range(k + 1)]
    q1 = np.array([
        _sp.comb(k, j) * lam ** k * (8 * sl2) ** ((j + 1) / 2)
        / (_sp.gamma(k + 1) * _sp.factorial(k))
        for k, j in kj
    ])
    kk = np.array([k for k, _ in kj])
    jj = np.array([j for _, j in kj])
    gam_half = _sp.gamma((jj + 1) / 2.0)

    def density(h):
        h = np.atleast_1d(np.asarray(h, dtype=float))
        c = q2 - np.log(h)
        arg = c * c / (8 * sl2)
        upper = _sp.gammaincc((jj[:, None] + 1) / 2.0, arg[None, :]) * gam_half[:, None]
        lower = gam_half[:, None] - upper
        branch = np.where(c[None, :] <= 0, upper,
                          gam_half[:, None] + ((-1.0) ** jj)[:, None] * lower)
        terms = q1[:, None] * c[None, :] ** (kk - jj)[:, None] * branch
        f = q3 * np.exp(tau * np.log(h)) / h * terms.sum(axis=0)
        return (1.0 - mass) * f

    return ChannelPdf(mass, density, h_max, "theorem4", flags)


def pdf_prop1(g: LinkGeometry, s: UavStability, m: LogNormal) -> ChannelPdf:
    """Two-term-offset simplification of theorem4 in erfc form.

    Valid when sigma_d / r_o > 0.8; outside that region a validity flag is
    set and the density progressively under-covers the left tail.
    """
    if not isinstance(m, LogNormal):
        raise TypeError("pdf_prop1 requires a LogNormal turbulence model")
    d, flags, mass = _thm4_pointing_params(g, s)
    if d.r_o > 0 and math.sqrt(d.sigma_d2) / d.r_o <= 0.8:
        flags = list(flags) + ["outside_sigma_d_over_r_o_region"]
    sl2, mul = m.sigma_l2, m.mu_l
    sl = math.sqrt(sl2)
    tau = d.tau
    kap_hl = d.kappa * g.h_l
    S = 8 * sl2
    rootS = math.sqrt(S)
    q2 = math.log(kap_hl) + 2 * mul - 4 * sl2 * tau
    s1 = math.sqrt(2.0) * sl * d.r_o ** 2 * d.w_z ** 2 / (4 * d.sigma_d2 ** 2)
    s2 = sl2 * d.r_o ** 4 * d.w_z ** 4 / (16 * d.sigma_d2 ** 4 * _sp.gamma(3.0))
    pref = tau / 4.0 * math.exp(-d.r_o ** 2 / (2 * d.sigma_d2))
    h_max = kap_hl * math.exp(2 * mul + 16 * sl)

    def density(h):
        h = np.atleast_1d(np.asarray(h, dtype=float))
        c = q2 - np.log(h)
        b = np.log(kap_hl / h) + 2 * mul
        with np.errstate(under="ignore", over="ignore"):
            gauss = np.exp(-b * b / S)
            term1 = 2 * pref * gauss / (math.sqrt(math.pi) * h) * (s1 + s2 * c / rootS)
            # E = exp(-b^2/S) exp(c^2/S) erfc(-c/rootS), stable on both branches
            E = np.where(
                c > 0,
                2 * np.exp((c * c - b * b) / S) - gauss * _sp.erfcx(np.abs(c) / rootS),
                gauss * _sp.erfcx(np.abs(c) / rootS),
            )
            term2 = pref * E / h * (2 + s2 + 2 * s1 * c / rootS + 2 * s2 * c * c / S)
        return (1.0 - mass) * (term1 + term2)

    return ChannelPdf(mass, density, h_max, "prop1", flags)


# ------------------------------------------------------------------ theorem 5


def pdf_theorem5(g: LinkGeometry, s: UavStability, m: GammaGamma,
                 n_terms: int = 10, n_phi: int = 64, nodes_per_unit: float = 10.0) -> ChannelPdf:
    """General anisotropic model under Gamma-Gamma turbulence (2-D integral).

    After substituting u = ln(a0/x), the angular average reuses the same
    kernel as theorem2 and the radial integral runs against a Bessel-K
    factor, evaluated in exponentially scaled form to avoid overflow.
    """
    if not isinstance(m, GammaGamma):
        raise TypeError("pdf_theorem5 requires a GammaGamma turbulence model")
    alpha, beta = m.alpha, m.beta
    if abs(math.sin(math.pi * (alpha - beta))) < 1e-9:
        raise ValueError("alpha - beta must be non-integer")
    d = derive_constants(g, s)
    R = prob_R(s, g.fov, n_terms)
    c1, c2, c3 = _phi_kernel(g, s, d, n_phi)
    p = (alpha + beta) / 2.0
    nu = alpha - beta
    a0hl = d.a0 * g.h_l
    h_max = a0hl * gg_quantile(1.0 - 1e-7, m)
    pref = R * 2 * c1 * (alpha * beta / a0hl) ** p / (_sp.gamma(alpha) * _sp.gamma(beta))

    def density(h):
        h = np.atleast_1d(np.asarray(h, dtype=float))
        z0 = 2.0 * np.sqrt(alpha * beta * np.maximum(h, h_max * 1e-280) / a0hl)
        u_hi = max(2.0 * math.log(max(4 * p / z0.min(), 2.0)), 1.0) + 25.0
        n_u = int(max(192, nodes_per_unit * u_hi))
        xg, wg = np.polynomial.legendre.leggauss(min(n_u, 1024))
        u = u_hi / 2 * (xg + 1)
        w = u_hi / 2 * wg
        wavg = _phi_average(u, c2, c3)
        zz = z0[:, None] * np.exp(u[None, :] / 2)
        with np.errstate(over="ignore", under="ignore"):
            # cap the kve argument: scipy returns NaN past ~1e10, and the
            # paired exp factor has underflowed to zero long before that
            kve = _sp.kve(nu, np.minimum(zz, 1e6))
            expo = np.exp(np.clip(p * u[None, :] - zz, -745.0, 700.0))
            vals = (kve * expo) @ (w * wavg)
        return pref * h ** (p - 1) * np.nan_to_num(vals, nan=0.0)

    return ChannelPdf(1.0 - R, density, h_max, "theorem5", _boresight_flags(s))


# ------------------------------------------------------------------ series calibration


@lru_cache(maxsize=32)
def _calibrate_cached(alpha: float, beta: float, eps: float):
    m = GammaGamma(alpha=alpha, beta=beta)
    h_m = gg_quantile(1.0 - eps, m)
    nu = alpha - beta
    p = (alpha + beta) / 2.0
    hgrid = np.exp(np.linspace(math.log(h_m) - 14, math.log(h_m), 64))
    target = gg_pdf(hgrid, m)
    peak = float(np.max(target))
    coef = 2.0 * (alpha * beta) ** p / (_sp.gamma(alpha) * _sp.gamma(beta))
    with mp.workdps(80):
        al, be = mp.mpf(alpha), mp.mpf(beta)
        ab = al * be
        pref = mp.pi / (2 * mp.sin(mp.pi * (al - be)))
        half2 = [ab * mp.mpf(float(x)) for x in hgrid]  # (z/2)^2 = ab * h
        partial = [mp.mpf(0)] * len(hgrid)
        for order in range(201):
            mm = mp.mpf(order)
            ga = mp.gamma(mm - (al - be) + 1) * mp.factorial(order)
            gb = mp.gamma(mm + (al - be) + 1) * mp.factorial(order)
            for i, q in enumerate(half2):
                partial[i] += q ** (mm - (al - be) / 2) / ga - q ** (mm + (al - be) / 2) / gb
            approx = np.array([
                coef * float(x) ** (p - 1) * float(pref * partial[i])
                for i, x in enumerate(hgrid)
            ])
            if np.max(np.abs(approx - target)) < eps * peak:
                return order, float(h_m)
    raise RuntimeError("Bessel-K series did not converge by order 200")


def calibrate_series(m: GammaGamma, eps: float = 1e-3):
    """Truncation parameters for the closed-form Gamma-Gamma models.

    h_m is the smallest turbulence-gain cutoff with CDF >= 1 - eps; the
    series order is the smallest that reproduces the turbulence density
    within eps of its peak over (0, h_m].
    """
    if not 0 < eps < 0.1:
        raise ValueError("eps must be in (0, 0.1)")
    return _calibrate_cached(float(m.alpha), float(m.beta), float(eps))


# ------------------------------------------------------------------ theorem 6


@lru_cache(maxsize=32)
def _thm6_coefficients(alpha: float, beta: float, tau1: float, a0hl: float,
                       h_m: float, m_terms: int):
    """Series coefficients and the h-independent boundary sum, computed in
    extended precision: the alternating gamma-weighted terms reach ~1e18
    while their sum stays O(1e3)."""
    with mp.workdps(60):
        al, be, t1 = mp.mpf(alpha), mp.mpf(beta), mp.mpf(tau1)
        ab = al * be
        nu = al - be
        k5 = (mp.pi * ab ** ((al + be) / 2) * t1
              / (mp.gamma(al) * mp.gamma(be) * mp.sin(mp.pi * nu) * mp.mpf(a0hl) ** t1))
        hm = mp.mpf(h_m)
        c3s, c4s = [], []
        s_hm = mp.mpf(0)
        for order in range(m_terms + 1):
            mm = mp.mpf(order)
            k1 = mm - t1 + be
            k2 = mm - t1 + al
            if k1 <= 0 or k2 <= 0:
                raise ValueError(
                    f"series term {order}: exponent k1/k2 <= 0 "
                    "(support power would flip sign); reduce tau1 or beta mismatch")
            c3 = k5 * ab ** (mm - nu / 2) / (k1 * mp.factorial(order) * mp.gamma(mm - nu + 1))
            c4 = k5 * ab ** (mm + nu / 2) / (k2 * mp.factorial(order) * mp.gamma(mm + nu + 1))
            c3s.append(c3)
            c4s.append(c4)
            s_hm += c3 * hm ** k1 - c4 * hm ** k2
        c3_ld = np.array([_mpf_pair_to_longdouble(c) for c in c3s], dtype=_LD)
        c4_ld = np.array([_mpf_pair_to_longdouble(c) for c in c4s], dtype=_LD)
        return _mpf_pair_to_longdouble(s_hm), c3_ld, c4_ld


def pdf_theorem6(g: LinkGeometry, s: UavStability, m: GammaGamma,
                 n_terms: int = 10, m_terms: int | None = None,
                 h_m: float | None = None, eps: float = 1e-3) -> ChannelPdf:
    """Closed-form Gamma-Gamma model on a truncated support (0, a0 h_l h_m].

    Coefficients come from the ascending Bessel-K series; those of each h
    power are seeded in extended precision and the per-h power sums run in
    long double, since the series cancels catastrophically in float64.
    """
    if not isinstance(m, GammaGamma):
        raise TypeError("pdf_theorem6 requires a GammaGamma turbulence model")
    alpha, beta = m.alpha, m.beta
    if abs(math.sin(math.pi * (alpha - beta))) < 1e-9:
        raise ValueError("alpha - beta must be non-integer")
    d = derive_constants(g, s)
    R = prob_R(s, g.fov, n_terms)
    if m_terms is None or h_m is None:
        cal_m, cal_h = calibrate_series(m, eps)
        m_terms = m_terms if m_terms is not None else max(cal_m, 8)
        h_m = h_m if h_m is not None else cal_h
    a0hl = d.a0 * g.h_l
    tau1 = d.tau1
    s_hm, c3_ld, c4_ld = _thm6_coefficients(alpha, beta, tau1, a0hl, float(h_m), int(m_terms))
    h_max = a0hl * h_m
    off_b = _LD(beta) - _LD(tau1)
    off_a = _LD(alpha) - _LD(tau1)

    def density(h):
        h = np.atleast_1d(np.asarray(h, dtype=float))
        hh = (h / a0hl).astype(_LD)
        s3 = np.zeros_like(hh)
        s4 = np.zeros_like(hh)
        pw = np.ones_like(hh)
        for order in range(len(c3_ld)):
            s3 += c3_ld[order] * pw
            s4 += c4_ld[order] * pw
            pw *= hh
        t = hh ** off_b * s3 - hh ** off_a * s4
        out = np.asarray((s_hm - t), dtype=float) * R * h ** (tau1 - 1)
        return out

    return ChannelPdf(1.0 - R, density, h_max, "theorem6", _boresight_flags(s))


# ------------------------------------------------------------------ theorem 7


@lru_cache(maxsize=32)
def _thm7_coefficients(alpha: float, beta: float, gamma_: float, kap_hl: float,
                       lam: float, expo_ro: float, h_m: float,
                       m_terms: int, k_terms: int):
    """Coefficient tables of the isotropic Gamma-Gamma closed form.

    Cd are the coefficients of h^(gamma-1) * ln(kap_hl h_m / h)^d; (Am, Bm)
    weight the residual power sums h^(m+alpha-1), h^(m+beta-1).  All sums
    over the series index cancel heavily and are done in extended precision.
    """
    with mp.workdps(80):
        al, be, ga = mp.mpf(alpha), mp.mpf(beta), mp.mpf(gamma_)
        ab = al * be
        khl = mp.mpf(kap_hl)
        pref = (mp.pi * ga * mp.exp(mp.mpf(expo_ro))
                / (mp.gamma(al) * mp.gamma(be) * mp.sin(mp.pi * (al - be))))
        g1 = [pref * mp.mpf(lam) ** k / (mp.factorial(k) * mp.gamma(k + 1))
              for k in range(k_terms + 1)]
        cd = [mp.mpf(0) for _ in range(k_terms + 1)]
        am, bm = [], []
        hm_b = khl * mp.mpf(h_m)
        for order in range(m_terms + 1):
            mm = mp.mpf(order)
            g2 = (ab / khl) ** (mm + be) / (mp.gamma(mm + be - al + 1) * mp.factorial(order))
            g3 = (ab / khl) ** (mm + al) / (mp.gamma(mm + al - be + 1) * mp.factorial(order))
            pb = mm + be - ga
            pa = mm + al - ga
            if abs(pb) < 1e-6 or abs(pa) < 1e-6:
                raise ValueError(
                    f"series term {order}: exponent m+beta-gamma or m+alpha-gamma "
                    "is near zero; the closed form is singular there")
            hmb = hm_b ** pb
            hma = hm_b ** pa
            for k in range(k_terms + 1):
                for j in range(k + 1):
                    base = (-1) ** j * mp.factorial(j) * mp.binomial(k, j)
                    g4 = base * hmb / pb ** (j + 1)
                    g5 = base * hma / pa ** (j + 1)
                    cd[k - j] += g1[k] * (g2 * g4 - g3 * g5)
            sum_a = sum(g1[k] * (-1) ** k * mp.factorial(k) / pa ** (k + 1)
                        for k in range(k_terms + 1))
            sum_b = sum(g1[k] * (-1) ** k * mp.factorial(k) / pb ** (k + 1)
                        for k in range(k_terms + 1))
            am.append(g3 * sum_a)
            bm.append(g2 * sum_b)
        cd_f = np.array([float(c) for c in cd])
        am_ld = np.array([_mpf_pair_to_longdouble(a) for a in am], dtype=_LD)
        bm_ld = np.array([_mpf_pair_to_longdouble(b) for b in bm], dtype=_LD)
        return cd_f, am_ld, bm_ld


def pdf_theorem7(g: LinkGeometry, s: UavStability, m: GammaGamma,
                 k_terms: int = 10, m_terms: int | None = None,
                 h_m: float | None = None, eps: float = 1e-3) -> ChannelPdf:
    """Isotropic nonzero-boresight closed form under Gamma-Gamma turbulence."""
    if not isinstance(m, GammaGamma):
        raise TypeError("pdf_theorem7 requires a GammaGamma turbulence model")
    alpha, beta = m.alpha, m.beta
    if abs(math.sin(math.pi * (alpha - beta))) < 1e-9:
        raise ValueError("alpha - beta must be non-integer")
    d = derive_constants(g, s)
    flags = _isotropy_flags(s)
    mass = marcum_mass(d.theta_d, g.fov, d.sigma_to, d.sigma_ro)
    if m_terms is None or h_m is None:
        cal_m, cal_h = calibrate_series(m, eps)
        m_terms = m_terms if m_terms is not None else max(cal_m, 8)
        h_m = h_m if h_m is not None else cal_h
    gamma_ = d.tau
    kap_hl = d.kappa * g.h_l
    lam = d.r_o ** 2 * d.w_z ** 2 / (8 * d.sigma_d2 ** 2)
    expo_ro = -d.r_o ** 2 / (2 * d.sigma_d2)
    cd, am_ld, bm_ld = _thm7_coefficients(
        alpha, beta, gamma_, kap_hl, lam, expo_ro, float(h_m),
        int(m_terms), int(k_terms))
    h_max = kap_hl * h_m
    off_a = _LD(alpha) - _LD(1.0)
    off_b = _LD(beta) - _LD(1.0)

    def density(h):
        h = np.atleast_1d(np.asarray(h, dtype=float))
        y = np.log(h_max / h)
        poly = np.zeros_like(h)
        for coeff in cd[::-1]:
            poly = poly * y + coeff
        out1 = h ** (gamma_ - 1.0) * poly
        hl = h.astype(_LD)
        sa = np.zeros_like(hl)
        sb = np.zeros_like(hl)
        pw = np.ones_like(hl)
        for order in range(len(am_ld)):
            sa += am_ld[order] * pw
            sb += bm_ld[order] * pw
            pw *= hl
        t = hl ** off_a * sa - hl ** off_b * sb
        return (1.0 - mass) * (out1 + np.asarray(t, dtype=float))

    return ChannelPdf(mass, density, h_max, "theorem7", flags)


MODEL_BUILDERS = {
    "theorem2": pdf_theorem2,
    "theorem3": pdf_theorem3,
    "theorem4": pdf_theorem4,
    "prop1": pdf_prop1,
    "theorem5": pdf_theorem5,
    "theorem6": pdf_theorem6,
    "theorem7": pdf_theorem7,
}

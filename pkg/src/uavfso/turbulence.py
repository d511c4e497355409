"""Atmospheric turbulence models: log-normal (weak) and Gamma-Gamma (strong).

Both laws are parameterized so the irradiance factor has unit mean.  The
scintillation strength is carried by the Rytov variance; below 0.5 the
log-normal law applies, above it the Gamma-Gamma law.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp
from scipy.integrate import quad
from scipy.optimize import brentq

WEAK_STRONG_BOUNDARY = 0.5


@dataclass(frozen=True)
class LogNormal:
    """Log-irradiance gaussian model: ln(h_a) ~ N(2*mu_l, 4*sigma_l2)."""

    sigma_l2: float         # log-irradiance variance
    mu_l: float             # log-irradiance mean (-sigma_l2 for unit mean)
    rytov_var: float = float("nan")

    def __post_init__(self):
        if self.sigma_l2 <= 0:
            raise ValueError("sigma_l2 must be > 0")


@dataclass(frozen=True)
class GammaGamma:
    """Product of large- and small-scale gamma eddies, each with unit mean."""

    alpha: float
    beta: float
    rytov_var: float = float("nan")

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be > 0")


def cn2_from_rytov(rytov_var: float, wavelength: float, z: float) -> float:
    """Refractive-index structure constant giving the plane-wave Rytov
    variance 1.23 cn2 k^(7/6) z^(11/6) at range z."""
    k = 2 * math.pi / wavelength
    return rytov_var / (1.23 * k ** (7 / 6) * z ** (11 / 6))


def rytov_from_cn2(cn2: float, wavelength: float, z: float) -> float:
    k = 2 * math.pi / wavelength
    return 1.23 * cn2 * k ** (7 / 6) * z ** (11 / 6)


def lognormal_from_rytov(rytov_var: float) -> LogNormal:
    """Weak-turbulence model with sigma_l2 = rytov/4 and mu_l = -sigma_l2."""
    if rytov_var <= 0:
        raise ValueError("rytov_var must be > 0")
    if rytov_var > WEAK_STRONG_BOUNDARY:
        warnings.warn(
            f"log-normal model requested at rytov_var={rytov_var:g}; "
            "values above 0.5 are outside the weak-turbulence regime",
            stacklevel=2,
        )
    sigma_l2 = rytov_var / 4.0
    return LogNormal(sigma_l2=sigma_l2, mu_l=-sigma_l2, rytov_var=rytov_var)


def plane_wave_alpha_beta(rytov_var: float) -> tuple[float, float]:
    """Standard plane-wave scintillation mapping from Rytov variance to the
    effective large-/small-scale eddy counts."""
    s = rytov_var
    alpha = 1.0 / (math.exp(0.49 * s / (1 + 1.11 * s ** 2.4) ** (7 / 6)) - 1.0)
    beta = 1.0 / (math.exp(0.51 * s / (1 + 0.69 * s ** 2.4) ** (5 / 6)) - 1.0)
    return alpha, beta


def gg_from_rytov(rytov_var: float, mapping=plane_wave_alpha_beta) -> GammaGamma:
    """Gamma-Gamma model via a swappable (alpha, beta) mapping strategy.

    Near-integer alpha - beta is nudged (beta shifted by 1e-3) because the
    closed-form series models divide by sin(pi (alpha - beta)).
    """
    if rytov_var <= 0:
        raise ValueError("rytov_var must be > 0")
    if rytov_var < WEAK_STRONG_BOUNDARY:
        warnings.warn(
            f"Gamma-Gamma model requested at rytov_var={rytov_var:g}; "
            "values below 0.5 are usually modeled as log-normal",
            stacklevel=2,
        )
    alpha, beta = mapping(rytov_var)
    if abs(math.sin(math.pi * (alpha - beta))) < 1e-3:
        warnings.warn(
            f"alpha - beta = {alpha - beta:g} is near-integer; "
            "perturbing beta by 1e-3 to keep the series models usable",
            stacklevel=2,
        )
        beta += 1e-3
    return GammaGamma(alpha=alpha, beta=beta, rytov_var=rytov_var)


def lognormal_pdf(h_a, m: LogNormal):
    """Density 1/(2 h sigma_l sqrt(2 pi)) exp(-(ln h - 2 mu_l)^2 / (8 sigma_l2))."""
    h_a = np.asarray(h_a, dtype=float)
    if np.any(h_a <= 0):
        raise ValueError("h_a must be > 0")
    s = math.sqrt(m.sigma_l2)
    out = np.exp(-((np.log(h_a) - 2 * m.mu_l) ** 2) / (8 * m.sigma_l2)) / (
        2 * h_a * s * math.sqrt(2 * math.pi)
    )
    return float(out) if out.ndim == 0 else out


def gg_pdf(h_a, m: GammaGamma):
    """Density 2 (ab)^((a+b)/2) / (G(a)G(b)) h^((a+b)/2-1) K_(a-b)(2 sqrt(ab h))."""
    h_a = np.asarray(h_a, dtype=float)
    if np.any(h_a <= 0):
        raise ValueError("h_a must be > 0")
    a, b = m.alpha, m.beta
    p = (a + b) / 2.0
    coef = 2.0 * (a * b) ** p / (_sp.gamma(a) * _sp.gamma(b))
    with np.errstate(over="ignore", under="ignore"):
        out = coef * h_a ** (p - 1) * _sp.kv(a - b, 2.0 * np.sqrt(a * b * h_a))
    out = np.nan_to_num(out, nan=0.0, posinf=0.0)
    return float(out) if out.ndim == 0 else out


def turbulence_pdf(h_a, m):
    if isinstance(m, LogNormal):
        return lognormal_pdf(h_a, m)
    if isinstance(m, GammaGamma):
        return gg_pdf(h_a, m)
    raise TypeError(f"unknown turbulence model {type(m).__name__}")


def gg_cdf(x: float, m: GammaGamma) -> float:
    """CDF of the Gamma-Gamma law by quadrature in log space."""
    if x <= 0:
        return 0.0
    val, _ = quad(lambda t: gg_pdf(math.exp(t), m) * math.exp(t),
                  math.log(x) - 40.0, math.log(x), limit=400)
    return min(val, 1.0)


def gg_quantile(q: float, m: GammaGamma) -> float:
    """Upper quantile of the Gamma-Gamma law (bracketed bisection on gg_cdf)."""
    if not 0 < q < 1:
        raise ValueError("q must be in (0, 1)")
    hi = 2.0
    while gg_cdf(hi, m) < q:
        hi *= 2.0
        if hi > 1e6:
            raise RuntimeError("gg_quantile bracketing failed")
    return brentq(lambda x: gg_cdf(x, m) - q, 1e-9, hi, xtol=1e-6)


def sample_turbulence(m, n: int, rng) -> np.ndarray:
    """Draw n i.i.d. unit-mean irradiance factors.

    Log-normal: exp of a gaussian with mean 2 mu_l, variance 4 sigma_l2.
    Gamma-Gamma: product of two unit-mean gamma variates with shapes
    alpha and beta (exact in law, O(1) per draw).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(m, LogNormal):
        return np.exp(rng.normal(2 * m.mu_l, 2 * math.sqrt(m.sigma_l2), n))
    if isinstance(m, GammaGamma):
        x = rng.gamma(m.alpha, 1.0 / m.alpha, n)
        y = rng.gamma(m.beta, 1.0 / m.beta, n)
        return x * y
    raise TypeError(f"unknown turbulence model {type(m).__name__}")

"""Monte-Carlo channel realizations and analytic-vs-empirical comparison.

Realizations follow the composition h = h_l * h_a * h_pg * h_pa: eight
gaussian pointing variables feed the geometric and field-of-view losses,
one turbulence draw supplies h_a.  Sampling is chunked; each chunk owns an
RNG substream derived from (seed, chunk index), so results are identical
regardless of how chunks are distributed over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .analytic import ChannelPdf
from .turbulence import sample_turbulence


@dataclass(frozen=True)
class SimulationPlan:
    """Knobs of one Monte-Carlo run."""

    n_samples: int = 1_000_000
    seed: int = 0
    bins: int = 100
    bin_scale: str = "log"          # "log" | "linear"
    hpa_path: str = "step"          # "step" | "airy"
    use_tables: bool = True
    workers: int = 1
    chunk_size: int = 1 << 17

    def __post_init__(self):
        if self.n_samples < 1_000:
            raise ValueError("n_samples must be >= 1000")
        if self.bins < 10:
            raise ValueError("bins must be >= 10")
        if self.bin_scale not in ("log", "linear"):
            raise ValueError("bin_scale must be 'log' or 'linear'")
        if self.hpa_path not in ("step", "airy"):
            raise ValueError("hpa_path must be 'step' or 'airy'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class EmpiricalPdf:
    """Histogram density estimate plus the exact zero-sample fraction."""

    bin_edges: np.ndarray
    densities: np.ndarray
    p_zero_hat: float
    n: int

    @property
    def bin_probs(self) -> np.ndarray:
        return self.densities * np.diff(self.bin_edges)

    @property
    def centers(self) -> np.ndarray:
        return np.sqrt(self.bin_edges[:-1] * self.bin_edges[1:]) if np.all(
            self.bin_edges[:-1] > 0) else (self.bin_edges[:-1] + self.bin_edges[1:]) / 2


@dataclass(frozen=True)
class ComparisonMetrics:
    tv: float
    p_zero_err: float
    max_bin_rel_err: float
    bins_compared: int


def _chunk_samples(plan: SimulationPlan, g, s, m, w_z, tables, start, count):
    rng = np.random.default_rng([plan.seed, start])
    th_tx = rng.normal(s.bore_tx_x, s.sigma_txo, count)
    th_ty = rng.normal(s.bore_tx_y, s.sigma_tyo, count)
    th_rx = rng.normal(s.bore_rx_x, s.sigma_rxo, count)
    th_ry = rng.normal(s.bore_rx_y, s.sigma_ryo, count)
    x_tx = rng.normal(0.0, s.sigma_txp, count)
    y_ty = rng.normal(0.0, s.sigma_typ, count)
    x_rx = rng.normal(0.0, s.sigma_rxp, count)
    y_ry = rng.normal(0.0, s.sigma_ryp, count)

    theta_a = np.hypot(th_tx + th_rx, th_ty + th_ry)
    if plan.hpa_path == "step":
        hpa = geo.hpa_step(theta_a, g.fov)
    elif tables is not None and tables[1] is not None:
        hpa = tables[1](theta_a)
    else:
        hpa = np.array([geo.hpa_exact(tx + rx, ty + ry, g)
                        for tx, rx, ty, ry in zip(th_tx, th_rx, th_ty, th_ry)])

    r_d = np.hypot(g.z * th_tx + x_tx + x_rx, g.z * th_ty + y_ty + y_ry)
    if tables is not None:
        hpg = tables[0](r_d)
    else:
        hpg = np.array([geo.hpg_exact(g, w_z, r) for r in r_d])

    h_a = sample_turbulence(m, count, rng)
    return g.h_l * h_a * hpg * hpa


def sample_channel(plan: SimulationPlan, g, s, m, tables=None) -> np.ndarray:
    """Draw plan.n_samples channel realizations.

    ``tables`` is the (hpg, hpa) pair from geometry.build_radial_tables; when
    absent and use_tables is set, tables are built on the fly.  Disabling
    use_tables evaluates the loss integrals directly per sample, which is
    only practical for small runs.
    """
    w_z = geo.beam_width_at_rx(g)
    if tables is None and plan.use_tables:
        tables = geo.build_radial_tables(g, w_z, include_hpa=plan.hpa_path == "airy")
    n = plan.n_samples
    chunk = plan.chunk_size
    starts = list(range(0, n, chunk))
    counts = [min(chunk, n - st) for st in starts]

    def run(args):
        st, ct = args
        return _chunk_samples(plan, g, s, m, w_z, tables, st, ct)

    if plan.workers > 1:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            parts = list(pool.map(run, zip(starts, counts)))
    else:
        parts = [run(a) for a in zip(starts, counts)]
    return np.concatenate(parts)


def empirical_pdf(samples: np.ndarray, bins: int = 100, bin_scale: str = "log") -> EmpiricalPdf:
    """Histogram the nonzero samples; exact zeros go to the point mass.

    Mass accounting is exact: p_zero_hat plus the binned probabilities sum
    to 1 because the edges span [min nonzero, max].
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n == 0:
        raise ValueError("no samples")
    nz = samples[samples > 0.0]
    p_zero_hat = 1.0 - nz.size / n
    if nz.size == 0:
        return EmpiricalPdf(np.empty(0), np.empty(0), 1.0, n)
    lo, hi = nz.min(), nz.max()
    if bin_scale == "log":
        if lo == hi:
            lo, hi = lo * 0.999, hi * 1.001
        edges = np.exp(np.linspace(math.log(lo), math.log(hi), bins + 1))
        edges[0], edges[-1] = lo, hi  # guard rounding at the extremes
    else:
        if lo == hi:
            lo, hi = lo * 0.999, hi * 1.001
        edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(nz, edges)
    densities = counts / (n * np.diff(edges))
    return EmpiricalPdf(edges, densities, p_zero_hat, n)


def compare(ana: ChannelPdf, emp: EmpiricalPdf, min_bin_count: int = 100) -> ComparisonMetrics:
    """Total-variation estimate between an analytic mixture and a histogram.

    TV = 0.5 * (|p_zero gap| + sum |bin prob gaps| + analytic mass outside
    the binned range); the last term charges the analytic model for mass the
    empirical support never saw.
    """
    if emp.bin_edges.size == 0:
        tv = 0.5 * (abs(ana.p_zero - emp.p_zero_hat) + (1.0 - ana.p_zero))
        return ComparisonMetrics(tv, abs(ana.p_zero - emp.p_zero_hat), float("nan"), 0)
    p_bins = ana.bin_probs(emp.bin_edges)
    q_bins = emp.bin_probs
    inside = float(np.sum(p_bins))
    outside = max((1.0 - ana.p_zero) - inside, 0.0)
    tv = 0.5 * (abs(ana.p_zero - emp.p_zero_hat) + float(np.sum(np.abs(p_bins - q_bins))) + outside)
    counts = q_bins * emp.n
    big = counts >= min_bin_count
    if np.any(big):
        rel = np.abs(p_bins[big] - q_bins[big]) / q_bins[big]
        max_rel = float(np.max(rel))
    else:
        max_rel = float("nan")
    return ComparisonMetrics(tv, abs(ana.p_zero - emp.p_zero_hat), max_rel, int(big.sum()))

"""Monte-Carlo pipeline: determinism, accounting, known-law checks."""

import math

import numpy as np
import pytest

from uavfso import analytic as ana
from uavfso import turbulence as turb
from uavfso.geometry import LinkGeometry, beam_width_at_rx, build_radial_tables, hpg_exact
from uavfso.analytic import UavStability
from uavfso.montecarlo import SimulationPlan, compare, empirical_pdf, sample_channel

MR = 1e-3
LAM = 1550e-9


def make_geometry(rytov=0.2, fov=0.02):
    cn2 = turb.cn2_from_rytov(rytov, LAM, 500.0)
    return LinkGeometry(z=500.0, r_a=0.05, r_ap=0.2 * math.tan(fov), w0=6.2e-5,
                        wavelength=LAM, cn2=cn2, d_f=0.2, n_f=2.0, fov=fov)


S = UavStability(3 * MR, 4 * MR, 3 * MR, 2 * MR, 0.4, 0.3, 0.4, 0.3,
                 2 * MR, 3 * MR, 2 * MR, 3 * MR)
LN = turb.lognormal_from_rytov(0.2)


@pytest.fixture(scope="module")
def hpg_tables():
    g = make_geometry()
    w_z = beam_width_at_rx(g)
    return g, build_radial_tables(g, w_z, include_hpa=False)


def test_determinism(hpg_tables):
    g, tables = hpg_tables
    plan = SimulationPlan(n_samples=50_000, seed=5)
    a = sample_channel(plan, g, S, LN, tables=tables)
    b = sample_channel(plan, g, S, LN, tables=tables)
    assert np.array_equal(a, b)


def test_worker_invariance(hpg_tables):
    g, tables = hpg_tables
    a = sample_channel(SimulationPlan(n_samples=300_000, seed=5), g, S, LN, tables=tables)
    b = sample_channel(SimulationPlan(n_samples=300_000, seed=5, workers=4), g, S, LN,
                       tables=tables)
    assert np.array_equal(a, b)


def test_deterministic_channel_when_everything_frozen(hpg_tables):
    g, tables = hpg_tables
    s0 = UavStability(*(0.0,) * 8)
    m0 = turb.lognormal_from_rytov(1e-12)
    plan = SimulationPlan(n_samples=1_000, seed=1)
    h = sample_channel(plan, g, s0, m0, tables=tables)
    w_z = beam_width_at_rx(g)
    expect = g.h_l * hpg_exact(g, w_z, 0.0)  # hpa_step(0) = 1
    assert np.allclose(h, expect, rtol=1e-4)


def test_zero_fraction_matches_prob_r(hpg_tables):
    g, tables = hpg_tables
    plan = SimulationPlan(n_samples=500_000, seed=9)
    h = sample_channel(plan, g, S, LN, tables=tables)
    p_zero = 1 - ana.prob_R(S, g.fov, 4000)
    p_hat = np.mean(h == 0.0)
    sigma = math.sqrt(p_zero * (1 - p_zero) / plan.n_samples)
    assert abs(p_hat - p_zero) < 3 * sigma


def test_tables_vs_direct_spot_check(hpg_tables):
    g, tables = hpg_tables
    plan_t = SimulationPlan(n_samples=1_000, seed=3, use_tables=True)
    plan_d = SimulationPlan(n_samples=1_000, seed=3, use_tables=False)
    ht = sample_channel(plan_t, g, S, LN, tables=tables)
    hd = sample_channel(plan_d, g, S, LN, tables=None)
    nz = (ht > 0) & (hd > 0)
    rel = np.abs(ht[nz] - hd[nz]) / hd[nz]
    assert np.max(rel) < 1e-3


def test_empirical_pdf_accounting():
    rng = np.random.default_rng(0)
    samples = np.concatenate([rng.uniform(0.1, 1.0, 9000), np.zeros(1000)])
    emp = empirical_pdf(samples, bins=40, bin_scale="linear")
    assert emp.p_zero_hat == pytest.approx(0.1, abs=1e-12)
    assert emp.p_zero_hat + emp.bin_probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_empirical_pdf_uniform_density():
    rng = np.random.default_rng(1)
    emp = empirical_pdf(rng.uniform(0.0, 1.0, 400_000), bins=20, bin_scale="linear")
    assert np.allclose(emp.densities, 1.0, atol=0.05)


def test_empirical_pdf_all_zero():
    emp = empirical_pdf(np.zeros(5000))
    assert emp.p_zero_hat == 1.0
    assert emp.bin_edges.size == 0


def test_empirical_known_law_tv():
    # histogram of pure turbulence samples vs its analytic density
    n = 1_000_000
    s = turb.sample_turbulence(LN, n, np.random.default_rng(12))
    emp = empirical_pdf(s, bins=100, bin_scale="log")
    centers = emp.centers
    probs = turb.lognormal_pdf(centers, LN) * np.diff(emp.bin_edges)
    tv = 0.5 * (np.abs(probs - emp.bin_probs).sum() + abs(1 - probs.sum()))
    assert tv < 0.02


def test_compare_self_binned_is_zero(hpg_tables):
    g, tables = hpg_tables
    p3 = ana.pdf_theorem3(g, S, LN)
    edges = np.exp(np.linspace(math.log(p3.h_max) - 14, math.log(p3.h_max), 81))
    probs = p3.bin_probs(edges)
    densities = probs / np.diff(edges)
    from uavfso.montecarlo import EmpiricalPdf
    emp = EmpiricalPdf(edges, densities, p3.p_zero, 10 ** 9)
    m = compare(p3, emp)
    # only the analytic mass outside the synthetic bin range remains
    assert m.tv < 2e-3
    assert m.p_zero_err == 0.0


def test_compare_detects_fov_mismatch(hpg_tables):
    # negative control: an analytic model built with the wrong FOV must show
    # a large zero-mass error
    g, tables = hpg_tables
    g_small = make_geometry(fov=0.012)
    plan = SimulationPlan(n_samples=200_000, seed=21)
    h = sample_channel(plan, g_small, S, LN, tables=None if False else build_radial_tables(
        g_small, beam_width_at_rx(g_small), include_hpa=False))
    emp = empirical_pdf(h)
    p_wrong = ana.pdf_theorem3(g, S, LN)  # fov = 0.02 model vs fov = 0.012 data
    m = compare(p_wrong, emp)
    assert m.p_zero_err > 0.02


def test_two_independent_runs_close(hpg_tables):
    g, tables = hpg_tables
    h1 = sample_channel(SimulationPlan(n_samples=300_000, seed=101), g, S, LN, tables=tables)
    h2 = sample_channel(SimulationPlan(n_samples=300_000, seed=202), g, S, LN, tables=tables)
    e1 = empirical_pdf(h1)
    p3 = ana.pdf_theorem3(g, S, LN)
    # compare both runs through the analytic binner on shared edges
    q1 = np.histogram(h1[h1 > 0], e1.bin_edges)[0] / h1.size
    q2 = np.histogram(h2[h2 > 0], e1.bin_edges)[0] / h2.size
    tv = 0.5 * (np.abs(q1 - q2).sum() + abs(np.mean(h1 == 0) - np.mean(h2 == 0)))
    assert tv < 0.02


def test_plan_validation():
    with pytest.raises(ValueError):
        SimulationPlan(n_samples=10)
    with pytest.raises(ValueError):
        SimulationPlan(bins=2)
    with pytest.raises(ValueError):
        SimulationPlan(bin_scale="sqrt")
    with pytest.raises(ValueError):
        SimulationPlan(hpa_path="exactly")

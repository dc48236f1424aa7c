"""Acceptance suite: each numbered criterion at its stated tolerance.

Every test prints one ``criterion NN [PASS|FAIL]`` line (visible with
``pytest -s``); the assertion carries the same message.  Shared kernels,
matrices and sample sets are module-scoped fixtures so the whole suite
stays within the desk-scale runtime budgets.
"""

import json
import math
import time

import numpy as np
import pytest

from ldgas.counting import (
    build_counting_matrix,
    chebyshev_bound,
    counting_pmf,
    cumulants_clt,
    lambda_max,
    ldp_log_prob,
    log_generating_function,
    tilted_moments,
    trace_moments,
)
from ldgas.dispersion import DispersionRelation
from ldgas.harness import ExperimentConfig, run_experiment
from ldgas.kernel import build_kernel, decay_exponent
from ldgas.modes import ModeLattice, kac_test
from ldgas.rate import RateContext, interval_rate, minimizer, rate_value
from ldgas.thermo import (
    BE,
    FD,
    ThermoState,
    critical_density,
    density,
    pressure,
    translated_pressure,
)

import oracle_series as oracle

D1 = DispersionRelation.nonrelativistic(mass=0.5, dimension=1)    # eps = k^2
D3 = DispersionRelation.nonrelativistic(mass=1.0, dimension=3)    # eps = k^2/2
D3M = DispersionRelation.massless(c=1.0, dimension=3)             # eps = |k|
FD0 = ThermoState(1.0, 0.0, FD)
BE1_D1 = ThermoState(1.0, -1.0, BE)
BE1_D3 = ThermoState(1.0, -1.0, BE)

SEED = 20260810


def check(num, name, ok, detail):
    line = f"criterion {num:>2} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def fd_kernel():
    return build_kernel(FD0, D1, h=0.05, extent=160.0)


@pytest.fixture(scope="module")
def be_kernel():
    return build_kernel(BE1_D1, D1, h=0.05, extent=160.0)


@pytest.fixture(scope="module")
def fd_matrices(fd_kernel):
    return {L: build_counting_matrix(fd_kernel, L) for L in (10.0, 20.0, 40.0, 80.0)}


@pytest.fixture(scope="module")
def be_matrices(be_kernel):
    return {L: build_counting_matrix(be_kernel, L) for L in (10.0, 20.0, 40.0)}


@pytest.fixture(scope="module")
def fd_dists(fd_matrices):
    return {L: counting_pmf(fd_matrices[L]) for L in (20.0, 40.0, 80.0)}


@pytest.fixture(scope="module")
def fd_ctx():
    return RateContext.build(FD0, D1)


@pytest.fixture(scope="module")
def kac_results():
    out = {}
    for i, ell in enumerate((12.0, 16.0)):
        lat = ModeLattice.build(BE1_D3, D3, ell)
        out[ell] = kac_test(
            lat, 2.0 * critical_density(1.0, D3), 10_000,
            seed=np.random.SeedSequence([SEED, i]),
        )
    return out


def test_criterion_01_eos_oracle_equivalence():
    p = pressure(FD0, D1)
    r = density(FD0, D1)
    rc = critical_density(1.0, D3)
    gp = abs(p - oracle.FD_P_D1_MU0) / oracle.FD_P_D1_MU0
    gr = abs(r - oracle.FD_RHO_D1_MU0) / oracle.FD_RHO_D1_MU0
    gc = abs(rc - oracle.BE_RHOC_D3) / oracle.BE_RHOC_D3
    check(
        1, "eos oracle equivalence",
        gp < 1e-8 and gr < 1e-8 and gc < 1e-6,
        f"pressure gap {gp:.2e} (<1e-8), density gap {gr:.2e} (<1e-8), "
        f"rho_c gap {gc:.2e} (<1e-6)",
    )


def test_criterion_02_translated_pressure_structure():
    g0 = translated_pressure(0.0, FD0, D1)
    g1 = translated_pressure(0.0, FD0, D1, order=1)
    gap = abs(g1 - oracle.FD_RHO_D1_MU0) / oracle.FD_RHO_D1_MU0
    lams = np.linspace(-2.0, 1.5, 41)
    g = np.array([translated_pressure(l, FD0, D1) for l in lams])
    scale = float(np.max(np.abs(g)))
    convex = bool(np.all(g[1:-1] <= 0.5 * (g[:-2] + g[2:]) + 1e-9 * scale))
    check(
        2, "translated-pressure structure",
        g0 == 0.0 and gap < 1e-6 and convex,
        f"g(0)={g0!r} (exact 0), |g'(0)-rho| rel {gap:.2e} (<1e-6), "
        f"convex on 41-point grid: {convex}",
    )


def test_criterion_03_legendre_duality(fd_ctx):
    lam_grid = np.linspace(-1.5, 1.0, 11)
    fine = np.linspace(-2.0, 1.2, 65)
    xs = sorted({fd_ctx.gprime(l) for l in np.concatenate([fine, lam_grid])})
    pts = [(x, rate_value(x, fd_ctx).f) for x in xs]
    g_vals = {lam: fd_ctx.g(lam) for lam in lam_grid}
    g_scale = max(abs(v) for v in g_vals.values())
    worst = 0.0
    for lam in lam_grid:
        dual = max(f + lam * x for x, f in pts)
        # g vanishes at lam = 0; measure that point against the grid scale
        worst = max(worst, abs(dual - g_vals[lam]) / max(abs(g_vals[lam]), 1e-2 * g_scale))
    be_ctx = RateContext.build(BE1_D3, D3)
    seg = np.linspace(be_ctx.rho_c, 2.0 * be_ctx.rho_c, 9)
    fs = np.array([rate_value(x, be_ctx).f for x in seg])
    second = float(np.max(np.abs(np.diff(fs, 2))))
    check(
        3, "Legendre duality",
        worst < 1e-6 and second < 1e-9,
        f"double-transform worst rel gap {worst:.2e} (<1e-6), "
        f"condensation-segment second difference {second:.2e} (<1e-9)",
    )


def test_criterion_04_generating_function_convergence(fd_matrices):
    t0 = time.perf_counter()
    ok = True
    details = []
    for lam in (-1.0, -0.5, 0.5, 1.0):
        g = translated_pressure(lam, FD0, D1)
        gaps = []
        for L in (10.0, 20.0, 40.0, 80.0):
            phi = log_generating_function(fd_matrices[L], lam)
            gaps.append(abs(phi / 1.0 - g) / abs(g))
        monotone = all(b < a for a, b in zip(gaps, gaps[1:]))
        ratios = [gaps[i + 1] / gaps[i] for i in range(3)]
        in_band = all(0.3 <= r <= 0.8 for r in ratios)
        ok = ok and monotone and gaps[-1] < 0.02 and in_band
        details.append(f"lam={lam}: gap80={gaps[-1]:.2e}, ratios={[round(r, 2) for r in ratios]}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 300.0
    check(4, "finite-size generating function", ok,
          "; ".join(details) + f"; elapsed {elapsed:.1f}s (<300)")


def test_criterion_05_trace_moments(fd_matrices):
    at40 = trace_moments(fd_matrices[40.0], 4)
    at80 = trace_moments(fd_matrices[80.0], 4)
    first_ok = at40[0].rel_gap < 1e-6 and at80[0].rel_gap < 1e-6
    higher_ok = all(
        m40.rel_gap < 0.05 and m80.rel_gap < m40.rel_gap
        for m40, m80 in zip(at40[1:], at80[1:])
    )
    check(
        5, "trace moments", first_ok and higher_ok,
        f"m=1 gap {at40[0].rel_gap:.1e} (<1e-6); "
        + ", ".join(f"m={m.order}: {m.rel_gap:.3f}->{m80.rel_gap:.3f}"
                    for m, m80 in zip(at40[1:], at80[1:])),
    )


def test_criterion_06_spectrum_containment(fd_matrices, be_matrices):
    worst = 0.0
    ok = True
    for m in fd_matrices.values():
        tol = 1e-8 * m.norm
        lo, hi = float(m.eigenvalues.min()), float(m.eigenvalues.max())
        ok = ok and lo >= -tol and hi <= m.spectral_bound + tol
        worst = max(worst, -lo, hi - m.spectral_bound)
    for m in be_matrices.values():
        tol = 1e-8 * m.norm
        lo, hi = float(m.eigenvalues.min()), float(m.eigenvalues.max())
        ok = ok and hi <= tol and lo >= m.spectral_bound - tol
        worst = max(worst, hi, m.spectral_bound - lo)
    check(6, "spectrum containment", ok,
          f"worst excursion beyond the continuum interval {worst:.2e} "
          f"(tolerance 1e-8 ||K||), both statistics, all sizes")


def test_criterion_07_lambda_max_monotone(be_matrices):
    values = [lambda_max(be_matrices[L]) for L in (10.0, 20.0, 40.0)]
    decreasing = values[0] > values[1] > values[2]
    above = all(v > 1.0 for v in values)
    check(7, "bosonic tilt ceiling", decreasing and above,
          f"lambda_max over L=10,20,40: {[round(v, 6) for v in values]} "
          f"(strictly decreasing toward -mu=1, always above)")


def test_criterion_08_ldp_with_chebyshev(fd_matrices, fd_dists, fd_ctx):
    target = rate_value(0.25, fd_ctx).f
    gaps = []
    bounds_ok = True
    for L in (20.0, 40.0, 80.0):
        m = fd_matrices[L]
        val = ldp_log_prob(m, 0.25, 0.30, fd_dists[L])
        gaps.append(abs(val - target))
        bounds_ok = bounds_ok and (val <= chebyshev_bound(m, 0.25))
    monotone = gaps[0] > gaps[1] > gaps[2]
    check(
        8, "interval LDP + sharp Chebyshev", monotone and bounds_ok,
        f"gaps to f(0.25)={target:.5f}: {[round(g, 4) for g in gaps]} "
        f"(monotone {monotone}); exact finite-size bound holds: {bounds_ok}",
    )


def test_criterion_09_clt_cumulants(fd_matrices, fd_dists):
    c2 = cumulants_clt(fd_matrices[80.0], fd_dists[80.0]).values[1]
    gap = abs(c2 - oracle.FD_DRHO_D1_MU0) / oracle.FD_DRHO_D1_MU0
    c3_20 = abs(cumulants_clt(fd_matrices[20.0], fd_dists[20.0]).values[2])
    c3_80 = abs(cumulants_clt(fd_matrices[80.0], fd_dists[80.0]).values[2])
    shrink = c3_80 < 0.6 * c3_20
    check(
        9, "central-limit cumulants", gap < 0.02 and shrink,
        f"C(2)@80 = {c2:.6f} vs {oracle.FD_DRHO_D1_MU0:.6f} (rel {gap:.3f} < 0.02); "
        f"|C(3)| 20->80: {c3_20:.2e}->{c3_80:.2e} (ratio {c3_80 / c3_20:.2f} < 0.6)",
    )


def test_criterion_10_exponential_tilting(fd_matrices, fd_ctx):
    lam0 = minimizer(0.25, fd_ctx)
    mean80, var80 = tilted_moments(fd_matrices[80.0], lam0)
    mean_gap = abs(mean80 - 0.25) / 0.25
    target = translated_pressure(lam0, FD0, D1, order=2)
    var_gap = abs(var80 - target) / target
    check(
        10, "exponential tilting", mean_gap < 0.02 and var_gap < 0.10,
        f"tilted mean density {mean80:.4f} vs 0.25 (rel {mean_gap:.4f} < 0.02); "
        f"beta var/L {var80:.5f} vs {target:.5f} (rel {var_gap:.4f} < 0.10)",
    )


def test_criterion_11_kernel_decay(fd_kernel):
    slope1 = decay_exponent(fd_kernel, (2.0, 10.0))
    d3_tab = build_kernel(FD0, D3M, h=0.05, extent=1024.0)
    slope3 = decay_exponent(d3_tab, (2.0, 30.0))
    check(
        11, "kernel decay exponents",
        slope1 <= -1.5 and slope3 <= -3.5,
        f"d=1 smooth symbol slope {slope1:.2f} (<= -1.5); "
        f"d=3 corner symbol slope {slope3:.2f} (<= -3.5)",
    )


def test_criterion_12_kac_distribution(kac_results):
    t0 = time.perf_counter()
    res12, res16 = kac_results[12.0], kac_results[16.0]
    ratio = res16.sample_variance / res12.sample_variance
    stable = 0.5 <= ratio <= 2.0
    check(
        12, "condensate density variance is size-stable", stable,
        f"var(N/V): {res12.sample_variance:.4f}@12 -> {res16.sample_variance:.4f}@16 "
        f"(ratio {ratio:.2f} in [0.5, 2])",
    )
    # the periodic box's normal capacity sits O(1/ell) below the bulk
    # critical density, which dominates the distance at this box size
    elapsed = time.perf_counter() - t0
    check(
        12, "condensate law vs limiting shifted exponential",
        res16.ks_distance < 0.05 and elapsed < 600.0,
        f"KS@16 = {res16.ks_distance:.4f} (< 0.05 required); box normal density "
        f"{res16.box_normal_density:.4f} vs rho_c {res16.location:.4f}",
    )


def test_criterion_13_determinism():
    gf_cfg = ExperimentConfig(
        kind="gf", statistics=FD, dispersion="nonrelativistic", mass=0.5,
        dimension=1, beta=1.0, mu=0.0, lam=0.5, sizes=(10.0, 20.0), h=0.05,
        seed=SEED,
    )
    kac_cfg = ExperimentConfig(
        kind="kac", statistics=BE, dispersion="nonrelativistic", mass=1.0,
        dimension=3, beta=1.0, mu=-1.0, sizes=(6.0,), samples=400,
        tolerance=0.9, seed=SEED,
    )
    ok = True
    for cfg in (gf_cfg, kac_cfg):
        blob1 = json.dumps(run_experiment(cfg).numeric_payload(), sort_keys=True)
        blob2 = json.dumps(run_experiment(cfg).numeric_payload(), sort_keys=True)
        ok = ok and blob1 == blob2
    check(13, "seeded determinism", ok,
          "gf and kac records byte-identical across reruns (timings excluded)")

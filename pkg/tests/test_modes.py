import math

import numpy as np
import pytest

from ldgas.dispersion import DispersionRelation
from ldgas.errors import DomainError, ResourceError
from ldgas.modes import (
    ModeLattice,
    box_log_pgf,
    box_pmf,
    box_pressure,
    kac_test,
    mean_density,
    pmf_to_csv,
    sample_NV,
    samples_to_csv,
    solve_lambda_V,
)
from ldgas.rate import RateContext, interval_rate, rate_value
from ldgas.thermo import BE, FD, ThermoState, critical_density, pressure, translated_pressure

import oracle_series as oracle

D1 = DispersionRelation.nonrelativistic(mass=0.5, dimension=1)
D3 = DispersionRelation.nonrelativistic(mass=1.0, dimension=3)
FD0 = ThermoState(1.0, 0.0, FD)
BE1 = ThermoState(1.0, -1.0, BE)


@pytest.fixture(scope="module")
def fd_lat40():
    return ModeLattice.build(FD0, D1, 40.0)


@pytest.fixture(scope="module")
def be_lat10():
    return ModeLattice.build(BE1, D3, 10.0)


def single_mode_lattice(state, energy):
    return ModeLattice(
        state=state,
        disp=D1,
        ell=1.0,
        energies=np.array([energy]),
        multiplicities=np.array([1], dtype=np.int64),
        discarded_mass=0.0,
        tilt_ceiling=math.inf if state.sigma == FD else -state.mu,
    )


class TestBuild:
    def test_truncation_budget(self, fd_lat40):
        retained = float(np.sum(fd_lat40.multiplicities * fd_lat40.occupations()))
        assert fd_lat40.discarded_mass < 1e-9 * retained

    def test_be_requires_negative_mu_under_tilt(self, be_lat10):
        with pytest.raises(DomainError):
            mean_density(be_lat10, 1.0)  # mu + lam = 0 hits the ground mode

    def test_ground_shell_first(self, be_lat10):
        assert be_lat10.energies[0] == 0.0
        assert be_lat10.multiplicities[0] == 1


class TestBoxPressure:
    def test_dilute_limit(self):
        lat = ModeLattice.build(ThermoState(1.0, -50.0, BE), D3, 6.0)
        assert box_pressure(lat) < 1e-15

    def test_fd_d1_converges_to_bulk(self):
        target = oracle.FD_P_D1_MU0
        gaps = []
        for ell in (20.0, 40.0, 80.0):
            lat = ModeLattice.build(FD0, D1, ell)
            gaps.append(abs(box_pressure(lat) - target))
        # mode sums converge (exponentially here) down to roundoff
        floor = 1e-12 * target
        assert gaps[1] <= max(gaps[0], floor)
        assert gaps[2] <= max(gaps[1], floor)
        assert gaps[-1] < 1e-6 * target

    def test_translated_pressure_identity(self, fd_lat40):
        # (log Xi(mu+lam) - log Xi(mu)) / (beta V) equals the box generating
        # function of N at lam, at any finite size
        lam = 0.5
        lhs = box_log_pgf(fd_lat40, math.exp(fd_lat40.state.beta * lam)) / (
            fd_lat40.state.beta * fd_lat40.volume
        )
        shifted = ModeLattice.build(ThermoState(1.0, 0.5, FD), D1, 40.0)
        rhs = box_pressure(shifted) - box_pressure(fd_lat40)
        assert lhs == pytest.approx(rhs, abs=1e-12)


class TestBoxPmf:
    def test_single_fd_mode(self):
        lat = single_mode_lattice(FD0, FD0.mu)  # eps = mu gives p = 1/2
        assert box_pmf(lat) == pytest.approx([0.5, 0.5])

    def test_mean_matches_mode_sum_exactly(self, fd_lat40):
        pmf = box_pmf(fd_lat40)
        mean = float(np.sum(np.arange(pmf.size) * pmf))
        exact = float(np.sum(fd_lat40.multiplicities * fd_lat40.occupations()))
        assert mean == pytest.approx(exact, rel=1e-12)

    @pytest.mark.parametrize("zeta", [0.6, 0.9, 1.1, 1.3])
    def test_product_identity(self, fd_lat40, zeta):
        pmf = box_pmf(fd_lat40)
        lhs = math.log(float(np.sum(pmf * zeta ** np.arange(pmf.size))))
        assert lhs == pytest.approx(box_log_pgf(fd_lat40, zeta), rel=1e-10)

    def test_be_product_identity(self, be_lat10):
        pmf = box_pmf(be_lat10)
        for zeta in (0.7, 1.1):
            lhs = math.log(float(np.sum(pmf * zeta ** np.arange(pmf.size))))
            assert lhs == pytest.approx(box_log_pgf(be_lat10, zeta), rel=1e-10)

    def test_mode_budget(self):
        lat = ModeLattice.build(BE1, D3, 26.0)
        assert lat.mode_count > 100_000
        with pytest.raises(ResourceError):
            box_pmf(lat)

    def test_finite_volume_ldp_approaches_rate(self):
        ctx = RateContext.build(FD0, D1)
        target = interval_rate(0.25, 0.30, ctx)
        gaps = []
        for ell in (20.0, 40.0, 80.0):
            lat = ModeLattice.build(FD0, D1, ell)
            pmf = box_pmf(lat)
            vol = lat.volume
            lo, hi = int(math.ceil(0.25 * vol - 1e-9)), int(math.floor(0.30 * vol + 1e-9))
            mass = float(np.sum(pmf[lo : hi + 1]))
            val = math.log(mass) / (FD0.beta * vol)
            gaps.append(abs(val - target))
        assert gaps[2] < gaps[1] < gaps[0]
        assert gaps[2] < 0.05


class TestLambdaV:
    def test_untilted_mean_gives_zero(self, fd_lat40):
        a = mean_density(fd_lat40)
        assert abs(solve_lambda_V(fd_lat40, a)) < 1e-10

    def test_fd_increasing_in_target(self, fd_lat40):
        lams = [solve_lambda_V(fd_lat40, a) for a in (0.1, 0.25, 0.4)]
        assert lams[0] < lams[1] < lams[2]

    def test_residual(self, fd_lat40):
        lam = solve_lambda_V(fd_lat40, 0.25)
        assert abs(mean_density(fd_lat40, lam) - 0.25) < 1e-10 * 0.25

    def test_be_condensation_regime(self):
        rc = critical_density(1.0, D3)
        a = 2.0 * rc
        mu_eff_prev = None
        rel_gaps = []
        for ell in (6.0, 10.0, 14.0):
            lat = ModeLattice.build(BE1, D3, ell)
            lam = solve_lambda_V(lat, a)
            mu_eff = BE1.mu + lam
            assert -1e-1 < mu_eff < 0.0
            if mu_eff_prev is not None:
                assert mu_eff > mu_eff_prev  # approaches 0 from below as V grows
            mu_eff_prev = mu_eff
            ground = lat.occupations(lam)[0] * lat.multiplicities[0]
            surplus = (a - rc) * lat.volume
            rel_gaps.append(abs(ground - surplus) / surplus)
        # the surplus lands in the ground mode, up to the O(1/ell) shift of
        # the box's normal capacity, which dies off with the volume
        assert rel_gaps[2] < rel_gaps[1] < rel_gaps[0]
        assert rel_gaps[2] < 0.25

    def test_condensation_lower_bound_route(self):
        # g(lam_V) - lam_V a approaches f(a) = p(0) - p(mu) + mu a from above
        rc = critical_density(1.0, D3)
        a = 2.0 * rc
        ctx = RateContext.build(BE1, D3)
        f_a = rate_value(a, ctx).f
        gaps = []
        for ell in (6.0, 10.0, 14.0):
            lat = ModeLattice.build(BE1, D3, ell)
            lam = solve_lambda_V(lat, a)
            val = translated_pressure(lam, BE1, D3) - lam * a
            gaps.append(val - f_a)
        assert all(g > 0 for g in gaps)
        assert gaps[2] < gaps[1] < gaps[0]


class TestSampling:
    def test_seed_determinism(self, fd_lat40):
        x1 = sample_NV(fd_lat40, 0.0, 400, seed=123)
        x2 = sample_NV(fd_lat40, 0.0, 400, seed=123)
        assert np.array_equal(x1, x2)
        x3 = sample_NV(fd_lat40, 0.0, 400, seed=124)
        assert not np.array_equal(x1, x3)

    def test_fd_unbiased(self, fd_lat40):
        n = 2000
        x = sample_NV(fd_lat40, 0.0, n, seed=5)
        exact_mean = mean_density(fd_lat40)
        occ = fd_lat40.occupations()
        var_n = float(np.sum(fd_lat40.multiplicities * occ * (1 - occ)))
        stderr = math.sqrt(var_n) / fd_lat40.volume / math.sqrt(n)
        assert abs(x.mean() - exact_mean) < 3 * stderr

    def test_fd_variance_matches_susceptibility(self, fd_lat40):
        lam = 0.3
        x = sample_NV(fd_lat40, lam, 10_000, seed=11)
        beta_var_density = FD0.beta * x.var() * fd_lat40.volume
        target = translated_pressure(lam, FD0, D1, order=2)
        assert beta_var_density == pytest.approx(target, rel=0.10)

    def test_be_condensed_variance_is_order_one(self):
        rc = critical_density(1.0, D3)
        a = 2.0 * rc
        variances = {}
        for ell in (6.0, 10.0):
            lat = ModeLattice.build(BE1, D3, ell)
            lam = solve_lambda_V(lat, a)
            x = sample_NV(lat, lam, 2000, seed=3)
            variances[ell] = x.var()
        # Theta(1) in the volume, not Theta(1/V): ratio stays near 1
        ratio = variances[10.0] / variances[6.0]
        assert 0.5 < ratio < 2.0

    def test_invalid_tilt(self, be_lat10):
        with pytest.raises(DomainError):
            sample_NV(be_lat10, 1.5, 10, seed=0)


class TestKac:
    def test_domain_errors(self, fd_lat40, be_lat10):
        with pytest.raises(DomainError):
            kac_test(fd_lat40, 0.5, 10, seed=0)  # FD, d=1
        rc = critical_density(1.0, D3)
        with pytest.raises(DomainError):
            kac_test(be_lat10, 0.5 * rc, 10, seed=0)  # below rho_c

    def test_limiting_mean_is_target_density(self, be_lat10):
        rc = critical_density(1.0, D3)
        res = kac_test(be_lat10, 2.0 * rc, 3000, seed=9)
        sem = math.sqrt(res.sample_variance / 3000)
        assert abs(res.sample_mean - 2.0 * rc) < 4 * sem
        assert res.location == pytest.approx(rc)
        assert res.scale == pytest.approx(rc)

    def test_degenerate_target_concentrates(self, be_lat10):
        rc = critical_density(1.0, D3)
        near = kac_test(be_lat10, 1.02 * rc, 1500, seed=13)
        wide = kac_test(be_lat10, 2.0 * rc, 1500, seed=13)
        # scale -> 0: the law collapses toward a point mass (the residual
        # spread at finite ell comes from the box's shifted normal capacity)
        assert math.sqrt(near.sample_variance) < 0.35 * math.sqrt(wide.sample_variance)
        assert near.sample_mean == pytest.approx(1.02 * rc, rel=0.1)

    def test_tables_shape(self, be_lat10):
        rc = critical_density(1.0, D3)
        res = kac_test(be_lat10, 2.0 * rc, 500, seed=21)
        assert res.empirical_cdf.shape == (500, 2)
        assert res.target_cdf.shape == (500, 2)
        assert np.all(np.diff(res.empirical_cdf[:, 0]) >= 0)
        assert res.ks_distance == pytest.approx(
            float(np.max(np.abs(res.empirical_cdf[:, 1] - res.target_cdf[:, 1]))),
            abs=1.0 / 500,
        )


def test_exports(tmp_path, fd_lat40):
    import json

    x = sample_NV(fd_lat40, 0.0, 50, seed=2)
    sample_path = tmp_path / "samples.csv"
    samples_to_csv(x, sample_path)
    lines = sample_path.read_text().splitlines()
    assert len(lines) == 51
    assert float(lines[1]) == x[0]

    pmf = box_pmf(fd_lat40)
    pmf_path = tmp_path / "pmf.csv"
    pmf_to_csv(pmf, pmf_path)
    assert len(pmf_path.read_text().splitlines()) == 1 + pmf.size

    rc = critical_density(1.0, D3)
    lat = ModeLattice.build(BE1, D3, 6.0)
    res = kac_test(lat, 2.0 * rc, 200, seed=4)
    js_path = tmp_path / "kac.json"
    res.summary_to_json(js_path)
    payload = json.loads(js_path.read_text())
    assert payload["ks_distance"] == res.ks_distance
    assert payload["n_samples"] == 200

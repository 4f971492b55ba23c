"""Ensemble simulation: statistics, reproducibility, densities, persistence."""

import numpy as np
import pytest

from nsvlab.estimates import EstimateWithError, ks_critical_value, ks_uniform_statistic
from nsvlab.fields import FourierScalarField, SpectralBasis
from nsvlab.flows import steady_flow, taylor_green
from nsvlab.sde import (
    FORWARD,
    REVERSED,
    SdeParams,
    brownian_bridge,
    drift_orthogonality,
    load_ensemble,
    measure_density,
    resimulate_from_noise,
    save_ensemble,
    simulate_ito,
    simulate_stratonovich_basis,
)

from helpers import constant_field, cos_x1_scalar, grad_sin_x1

NU, T = 0.1, 1.0


@pytest.fixture(scope="module")
def heat_ensemble():
    return simulate_ito(SdeParams(nu=0.05, T=T), N=8000, M=200, seed=42)


@pytest.fixture(scope="module")
def tg_reversed():
    tg = taylor_green(NU, T, 400)
    params = SdeParams(nu=NU, T=T, drift_source=tg, orientation=REVERSED)
    return simulate_ito(params, N=6000, M=400, seed=42)


class TestItoEngine:
    def test_heat_displacement_variance(self, heat_ensemble):
        disp = heat_ensemble.unwrapped[:, -1] - heat_ensemble.unwrapped[:, 0]
        target = 2 * 0.05 * T
        se = target * np.sqrt(2.0 / (disp.shape[0] - 1))
        for d in range(2):
            assert abs(disp[:, d].var(ddof=1) - target) <= 3 * se

    def test_constant_drift_mean_displacement(self):
        drift = steady_flow(constant_field((1.0, 0.0)), T, 2, NU)
        params = SdeParams(nu=NU, T=T, drift_source=drift, initial_law=("fixed", (0.0, 0.0)))
        ens = simulate_ito(params, N=2000, M=100, seed=1)
        disp = ens.unwrapped[:, -1] - ens.unwrapped[:, 0]
        est = EstimateWithError.from_samples(disp[:, 0])
        assert est.within(T, 3)
        assert EstimateWithError.from_samples(disp[:, 1]).within(0.0, 3)

    def test_uniform_marginals_under_reversed_drift(self, tg_reversed):
        N = tg_reversed.n_paths
        cap = ks_critical_value(N, significance=1e-3)
        for frac in (0.25, 0.5, 1.0):
            j = tg_reversed.step_index(frac * T)
            for d in range(2):
                assert ks_uniform_statistic(tg_reversed.wrapped[:, j, d]) <= cap

    def test_recorded_drift_is_inserted_drift(self, tg_reversed):
        tg = taylor_green(NU, T, 400)
        j = 120
        want = -tg.velocity_at(T - tg_reversed.times[j], tg_reversed.unwrapped[:, j])
        np.testing.assert_array_equal(tg_reversed.drift[:, j], want)

    def test_wrapped_is_unwrapped_mod_2pi(self, tg_reversed):
        w = tg_reversed.wrapped
        assert np.all((w >= 0) & (w < 2 * np.pi))
        np.testing.assert_array_equal(w, np.mod(tg_reversed.unwrapped, 2 * np.pi))

    def test_increment_variance_sanity(self, heat_ensemble):
        dW = heat_ensemble.dW
        dt = heat_ensemble.dt
        flat = dW.reshape(-1, dW.shape[2])
        n = flat.shape[0]
        se = dt * np.sqrt(2.0 / (n - 1))
        for c in range(flat.shape[1]):
            assert abs(flat[:, c].var(ddof=1) - dt) <= 5 * se

    def test_product_initial_law(self):
        from scipy import stats

        # coordinate 0 uniform, coordinate 1 with density ~ 1/sqrt(x) via u -> 2 pi u^2
        law = ("product", (lambda u: 2 * np.pi * u, lambda u: 2 * np.pi * u**2))
        ens = simulate_ito(SdeParams(nu=NU, T=T, initial_law=law), N=4000, M=2, seed=31)
        x0 = ens.unwrapped[:, 0]
        assert stats.kstest(x0[:, 0] / (2 * np.pi), "uniform").pvalue > 1e-3
        cdf = lambda x: np.sqrt(x / (2 * np.pi))
        assert stats.kstest(x0[:, 1], cdf).pvalue > 1e-3

    def test_fixed_initial_law(self):
        ens = simulate_ito(
            SdeParams(nu=NU, T=T, initial_law=("fixed", (1.0, 2.0))), N=10, M=4, seed=0
        )
        np.testing.assert_array_equal(ens.unwrapped[:, 0], np.tile([1.0, 2.0], (10, 1)))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_state_signalled(self):
        huge = steady_flow(constant_field((1.7e308, 0.0)), 4.0, 2, NU)
        params = SdeParams(nu=NU, T=4.0, drift_source=huge)
        with pytest.raises(FloatingPointError):
            simulate_ito(params, N=4, M=4, seed=0)


class TestReproducibility:
    def test_bitwise_identical_rerun(self):
        params = SdeParams(nu=NU, T=T)
        a = simulate_ito(params, N=100, M=50, seed=7)
        b = simulate_ito(params, N=100, M=50, seed=7)
        np.testing.assert_array_equal(a.unwrapped, b.unwrapped)
        np.testing.assert_array_equal(a.dW, b.dW)

    def test_path_streams_independent_of_ensemble_size(self):
        params = SdeParams(nu=NU, T=T)
        small = simulate_ito(params, N=10, M=50, seed=7)
        big = simulate_ito(params, N=40, M=50, seed=7)
        np.testing.assert_array_equal(big.unwrapped[:10], small.unwrapped)

    def test_adaptedness_prefix_resimulation(self, tg_reversed):
        tg = taylor_green(NU, T, 400)
        params = SdeParams(nu=NU, T=T, drift_source=tg, orientation=REVERSED)
        prefix = resimulate_from_noise(tg_reversed, params, j_max=150)
        np.testing.assert_array_equal(prefix, tg_reversed.unwrapped[:, :151])


class TestStratonovichEngine:
    def test_quadratic_variation_matches_diffusivity(self):
        basis = SpectralBasis(beta=3.0, K=2, nu=NU)
        ens = simulate_stratonovich_basis(SdeParams(nu=NU, T=T), basis, N=3000, M=300, seed=3)
        qv = np.sum(np.diff(ens.unwrapped, axis=1) ** 2, axis=1)
        for d in range(2):
            est = EstimateWithError.from_samples(qv[:, d])
            assert est.within(2 * NU * T, 3)

    def test_single_pair_moves_along_kperp_only(self):
        basis = SpectralBasis(beta=3.0, K=1, nu=NU)
        keep = np.array([[1.0, 0.0]])
        basis.kvecs = keep
        basis.kperp = np.array([[0.0, -1.0]])
        basis.amps = basis.amps[:1]
        ens = simulate_stratonovich_basis(SdeParams(nu=NU, T=T), basis, N=50, M=100, seed=5)
        # k.x is invariant, so the first coordinate never moves
        np.testing.assert_array_equal(ens.unwrapped[:, :, 0], ens.unwrapped[:, :1, 0] * np.ones(101))

    def test_generator_compensated_martingale(self):
        # M_t^f = f(x_t) - f(x_0) - int (nu Lap f + <u, grad f>) ds has mean zero
        tg = taylor_green(NU, T, 200)
        basis = SpectralBasis(beta=3.0, K=2, nu=NU)
        ens = simulate_stratonovich_basis(
            SdeParams(nu=NU, T=T, drift_source=tg), basis, N=4000, M=200, seed=9
        )
        f = cos_x1_scalar()
        pos = ens.unwrapped
        fvals = np.cos(pos[:, :, 0])
        lap_f = -np.cos(pos[:, :, 0])  # Lap cos x1
        grad_f = np.stack([-np.sin(pos[:, :, 0]), np.zeros_like(pos[:, :, 0])], axis=-1)
        compensator = NU * lap_f + np.sum(grad_f * ens.drift, axis=-1)
        integral = np.trapezoid(compensator, dx=ens.dt, axis=1)
        mart = fvals[:, -1] - fvals[:, 0] - integral
        est = EstimateWithError.from_samples(mart)
        assert est.within(0.0, 3)
        assert f.evaluate_at(pos[0, :1]).shape == (1,)

    def test_agrees_with_ito_engine_in_law(self):
        tg = taylor_green(NU, T, 200)
        basis = SpectralBasis(beta=3.0, K=2, nu=NU)
        strat = simulate_stratonovich_basis(
            SdeParams(nu=NU, T=T, drift_source=tg), basis, N=4000, M=200, seed=21
        )
        ito = simulate_ito(
            SdeParams(nu=NU, T=T, drift_source=tg, orientation=FORWARD), N=4000, M=200, seed=22
        )
        from nsvlab.action import action

        a1, a2 = action(strat), action(ito)
        assert abs(a1.value - a2.value) <= 3 * a1.combined_se(a2)
        d1 = strat.unwrapped[:, -1] - strat.unwrapped[:, 0]
        d2 = ito.unwrapped[:, -1] - ito.unwrapped[:, 0]
        for d in range(2):
            v1 = EstimateWithError.from_samples(d1[:, d] ** 2)
            v2 = EstimateWithError.from_samples(d2[:, d] ** 2)
            assert abs(v1.value - v2.value) <= 3 * v1.combined_se(v2)


class TestBridge:
    def test_mean_interpolates_endpoints(self):
        ens = brownian_bridge(0.3, 1.1, N=8000, M=256, cutoff=0.125, seed=7)
        for frac in (0.25, 0.5, 0.75):
            j = int(frac * 256)
            t = ens.times[j]
            est = EstimateWithError.from_samples(ens.unwrapped[:, j, 0])
            assert est.within(0.3 + t * (1.1 - 0.3), 3)

    def test_symmetric_bridge_stays_centred(self):
        ens = brownian_bridge(0.0, 0.0, N=8000, M=128, cutoff=0.25, seed=8)
        est = EstimateWithError.from_samples(ens.unwrapped[:, 64, 0])
        assert est.within(0.0, 3)

    def test_variance_profile(self):
        ens = brownian_bridge(0.0, 0.0, N=8000, M=256, cutoff=0.125, seed=9)
        for frac in (0.25, 0.5, 0.75):
            j = int(frac * 256)
            t = ens.times[j]
            est = EstimateWithError.from_samples(ens.unwrapped[:, j, 0] ** 2)
            assert est.within(t * (1 - t), 3)

    def test_rejects_nonpositive_cutoff(self):
        with pytest.raises(ValueError):
            brownian_bridge(0.0, 0.0, N=2, M=4, cutoff=0.0)

    def test_drift_recorded_from_formula(self):
        ens = brownian_bridge(0.2, -0.4, N=5, M=16, cutoff=0.5, seed=1)
        j = 7
        want = -(ens.unwrapped[:, j] - (-0.4)) / (1 - ens.times[j])
        np.testing.assert_array_equal(ens.drift[:, j], want)


class TestMeasureDensity:
    def test_solenoidal_fields_give_unit_density(self):
        basis = SpectralBasis(beta=3.0, K=1, nu=NU)
        ens = simulate_stratonovich_basis(SdeParams(nu=NU, T=T), basis, N=50, M=80, seed=2)
        zero = lambda pts: np.zeros(pts.shape[0])
        dens = measure_density(ens, [zero] * ens.dW.shape[2])
        assert np.array_equal(dens, np.ones_like(dens))

    def test_zero_length_prefix_is_one(self):
        basis = SpectralBasis(beta=3.0, K=1, nu=NU)
        ens = simulate_stratonovich_basis(SdeParams(nu=NU, T=T), basis, N=5, M=10, seed=2)
        zero = lambda pts: np.zeros(pts.shape[0])
        dens = measure_density(ens, [zero] * ens.dW.shape[2])
        assert np.all(dens[:, 0] == 1.0)

    def test_gradient_drift_moves_density(self):
        basis = SpectralBasis(beta=3.0, K=2, nu=NU)
        drift = steady_flow(grad_sin_x1(), T, 2, NU, require_divergence_free=False)
        ens = simulate_stratonovich_basis(
            SdeParams(nu=NU, T=T, drift_source=drift), basis, N=400, M=200, seed=4
        )
        zero = lambda pts: np.zeros(pts.shape[0])
        div_drift = lambda pts: -np.sin(pts[:, 0])
        dens = measure_density(ens, [zero] * ens.dW.shape[2], div_drift)
        moved = np.max(np.abs(dens - 1.0), axis=1) > 0.01
        assert np.mean(moved) >= 0.9


class TestDriftOrthogonality:
    def test_zero_for_incompressible_ensemble(self, tg_reversed):
        est = drift_orthogonality(tg_reversed, cos_x1_scalar(), 0.5 * T)
        assert est.within(0.0, 3)

    def test_constant_test_function_exactly_zero(self, tg_reversed):
        const = FourierScalarField(2, np.zeros((5, 5), complex))
        est = drift_orthogonality(tg_reversed, const, 0.5 * T)
        assert est.value == 0.0 and est.std_error == 0.0

    def test_gradient_drift_fixed_start_detected(self):
        drift = steady_flow(grad_sin_x1(), T, 2, 0.05, require_divergence_free=False)
        params = SdeParams(
            nu=0.05, T=T, drift_source=drift, initial_law=("fixed", (np.pi / 4, 0.0))
        )
        ens = simulate_ito(params, N=4000, M=200, seed=13)
        est = drift_orthogonality(ens, cos_x1_scalar(), 0.5 * T)
        assert abs(est.value) > 3 * est.std_error


class TestPersistence:
    def test_round_trip_bit_exact(self, tmp_path, heat_ensemble):
        stem = str(tmp_path / "ens")
        save_ensemble(heat_ensemble, stem)
        back = load_ensemble(stem)
        np.testing.assert_array_equal(back.unwrapped, heat_ensemble.unwrapped)
        np.testing.assert_array_equal(back.drift, heat_ensemble.drift)
        np.testing.assert_array_equal(back.dW, heat_ensemble.dW)
        assert back.kind == heat_ensemble.kind
        assert back.dt == heat_ensemble.dt
        assert back.seed == heat_ensemble.seed


class TestAntithetic:
    def test_pairs_mirror_under_zero_drift(self):
        ens = simulate_ito(SdeParams(nu=NU, T=T), N=20, M=30, seed=3, antithetic=True)
        np.testing.assert_array_equal(ens.dW[1::2], -ens.dW[0::2])
        np.testing.assert_array_equal(ens.unwrapped[1::2, 0], ens.unwrapped[0::2, 0])
        disp = ens.unwrapped - ens.unwrapped[:, :1]
        np.testing.assert_allclose(disp[1::2], -disp[0::2], atol=1e-12)

    def test_requires_even_path_count(self):
        with pytest.raises(ValueError):
            simulate_ito(SdeParams(nu=NU, T=T), N=3, M=4, seed=0, antithetic=True)

    def test_reduces_action_variance_for_taylor_green(self):
        tg = taylor_green(NU, T, 100)
        params = SdeParams(nu=NU, T=T, drift_source=tg, orientation=FORWARD)
        from nsvlab.action import action

        plain = action(simulate_ito(params, N=2000, M=100, seed=5))
        paired = action(simulate_ito(params, N=2000, M=100, seed=5, antithetic=True))
        exact = (1 - np.exp(-4 * NU * T)) / (16 * NU)
        # same budget, both near the closed form; pairing must not break either
        assert abs(paired.value - exact) <= 3 * paired.std_error + 0.5 * 1e-2
        assert abs(plain.value - exact) <= 3 * plain.std_error + 0.5 * 1e-2

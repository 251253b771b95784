import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shorfluct.decoherence import (
    DegenerateFidelityError,
    StepNoiseReport,
    combined_success_estimate,
    entropy_ensemble,
    fidelity_ensemble,
    fidelity_sampling_sigma,
    fragility_fit,
    gamma_from_entropy,
    perturb_and_continue,
    perturbative_fidelity,
    reduction_rate,
    state_noise_sweep,
    step_noise_scan,
)
from shorfluct.noise import NoiseConfig, analytic_C, step_unitaries
from shorfluct.shor import build_schedule, success_indices, success_set
from shorfluct.state import DenseState, MemoryCapError, RegisterLayout


@pytest.fixture(scope="module")
def small():
    return RegisterLayout(15, 7, 6, 4)


class TestEnsembles:
    def test_identical_members(self, clean21):
        psi = clean21[20]
        ens = np.stack([psi.amps] * 4)
        F = fidelity_ensemble(psi, ens)
        S = entropy_ensemble(ens)
        assert F.value == pytest.approx(1.0) and abs(S.value) < 1e-12

    def test_orthogonal_members(self):
        lay = RegisterLayout(15, 2, 2, 4)
        members = []
        for k in range(4):
            v = np.zeros(lay.dim, complex)
            v[k] = 1
            members.append(DenseState.from_vector(lay, v))
        S = entropy_ensemble(members)
        assert S.value == pytest.approx(math.log(4))
        assert fidelity_ensemble(members[0], members).value == pytest.approx(0.25)

    def test_mixed_layouts_rejected(self):
        a = DenseState.from_vector(RegisterLayout(15, 2, 2, 4), np.eye(64)[0])
        b = DenseState.from_vector(RegisterLayout(15, 2, 3, 4), np.eye(128)[0])
        with pytest.raises(ValueError):
            entropy_ensemble([a, b])

    def test_gamma(self):
        assert gamma_from_entropy(0.2, 2.0) == pytest.approx(0.05)
        with pytest.raises(ValueError):
            gamma_from_entropy(-0.1)

    def test_reduction_rate(self):
        assert reduction_rate(0.2, 0.19, 0.9) == pytest.approx(0.1)
        with pytest.raises(DegenerateFidelityError):
            reduction_rate(0.2, 0.2, 1.0)


class TestPerturbative:
    def test_prediction_terms(self, clean21):
        cfg = NoiseConfig(0.0015, components="xz")
        pred = perturbative_fidelity(clean21[20], cfg, 20)
        C = analytic_C(cfg)
        assert pred.contributions["x"] == pytest.approx(0.0015**2 * 225 * C * 0.2266666667, rel=1e-9)
        assert pred.F == pytest.approx(1 - sum(pred.contributions.values()))
        assert pred.Gamma == pytest.approx(1 - pred.F)

    def test_sampling_sigma_scales(self, clean21):
        a = fidelity_sampling_sigma(clean21[20], NoiseConfig(0.0015, n_samples=40))
        b = fidelity_sampling_sigma(clean21[20], NoiseConfig(0.0015, n_samples=160))
        assert a == pytest.approx(2 * b)
        assert fidelity_sampling_sigma(clean21[0], NoiseConfig(0.0015, components="z")) == 0.0

    def test_small_system_agrees(self, small):
        cfg = NoiseConfig(0.002, components="y", n_samples=60, Q=build_schedule(small).Q)
        reports = step_noise_scan(small, cfg, steps=[0, 6, 12, build_schedule(small).Q])
        from shorfluct.shor import run_clean

        states = run_clean(small, capture=[r.m for r in reports])
        for r in reports:
            pred = perturbative_fidelity(states[r.m], cfg, r.m)
            sigma = fidelity_sampling_sigma(states[r.m], cfg)
            assert abs(r.F - pred.F) <= 3 * sigma + 1e-12
            assert abs(r.S - 2 * (1 - r.F)) < 1e-4


class TestScans:
    def test_scan_rows(self, small):
        Q = build_schedule(small).Q
        reports = step_noise_scan(small, NoiseConfig(0.01, components="x", n_samples=8, Q=Q))
        assert [r.m for r in reports] == list(range(Q + 1))
        assert all(r.F <= 1 + 1e-12 for r in reports)

    def test_scan_q_mismatch(self, small):
        with pytest.raises(ValueError):
            step_noise_scan(small, NoiseConfig(0.01))

    def test_z_noise_at_end_keeps_T(self, small):
        Q = build_schedule(small).Q
        (rep,) = step_noise_scan(small, NoiseConfig(0.05, components="z", n_samples=10, Q=Q), steps=[Q])
        from shorfluct.shor import run_clean, success_probability

        T_clean = success_probability(run_clean(small, capture=[Q])[Q], success_set(small))
        assert abs(rep.T - T_clean) < 1e-12 and rep.F < 1

    def test_zero_strength_sweep(self, small):
        T_clean, rows = state_noise_sweep(small, 6, [0.0, 0.01], ("x", "z"), n_samples=6)
        zero = [r for r in rows if r.lam == 0.0]
        assert all(abs(r.F - 1) < 1e-12 and abs(r.T - T_clean) < 1e-12 for r in zero)
        assert all(math.isnan(r.r_m) for r in zero)
        assert len(rows) == 4

    def test_sweep_step_range(self, small):
        with pytest.raises(IndexError):
            state_noise_sweep(small, 999, [0.01])

    def test_streaming_without_entropy(self, small):
        from shorfluct.shor import run_clean

        sched = build_schedule(small)
        psi = run_clean(small, capture=[5])[5]
        us = step_unitaries(NoiseConfig(0.01, components="x", n_samples=10, Q=sched.Q))
        idx = success_indices(success_set(small), small.L1)
        F1, S1, T1 = perturb_and_continue(psi, 5, us, small, sched, idx)
        F2, S2, T2 = perturb_and_continue(psi, 5, us, small, sched, idx, max_amplitudes=3 * small.dim, entropy=False)
        assert S2 is None and F1.value == pytest.approx(F2.value) and np.allclose(T1, T2)
        with pytest.raises(MemoryCapError):
            perturb_and_continue(psi, 5, us, small, sched, idx, max_amplitudes=3 * small.dim)


def _report(m, T):
    return StepNoiseReport(m, 1.0, 0.0, 0.0, 0.0, 0.0, T, 0.0, 0.0, 1, 0.0, "x")


class TestCombined:
    @given(st.lists(st.floats(0.5, 1.0), min_size=1, max_size=30))
    def test_product_and_exponential(self, ratios):
        T_clean = 0.25
        reps = [_report(m, T_clean * r) for m, r in enumerate(ratios)]
        est = combined_success_estimate(reps, T_clean)
        assert est.epsilon == pytest.approx(float(np.prod(ratios)), rel=1e-9)
        assert est.T == pytest.approx(T_clean * est.epsilon)
        # 1 - u <= exp(-u): the product never exceeds the exponential form
        assert est.epsilon <= est.epsilon_exponential * (1 + 1e-12)

    def test_clean_steps(self):
        est = combined_success_estimate([_report(m, 0.2) for m in range(5)], 0.2)
        assert est.T == pytest.approx(0.2) and est.epsilon == pytest.approx(1.0)

    def test_missing_and_duplicate_steps(self):
        with pytest.raises(ValueError):
            combined_success_estimate([_report(0, 0.2), _report(2, 0.2)], 0.2, expected_steps=range(3))
        with pytest.raises(ValueError):
            combined_success_estimate([_report(0, 0.2), _report(0, 0.2)], 0.2)


class TestFragility:
    @given(st.floats(-0.5, 2.0))
    def test_exact_power(self, delta):
        pts = [(L, 0.3 * L ** (1 + delta)) for L in (10, 15, 30)]
        assert fragility_fit(pts).delta == pytest.approx(delta, abs=1e-9)

    def test_errors(self):
        with pytest.raises(ValueError):
            fragility_fit([(15, 1.0)])
        with pytest.raises(ValueError):
            fragility_fit([(15, 1.0), (30, 0.0)])

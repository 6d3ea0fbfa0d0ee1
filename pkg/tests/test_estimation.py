import numpy as np
import pytest

from ofsmpc import (AssumptionError, SystemModel, ValidationError,
                    bound_analytic_md, bound_scaled_reference,
                    check_assumptions, filter_init, filter_step,
                    kalman_schedule, psd_leq, steady_state_prior)

# hand recursion of the scalar model (A=C=1, Qw=Rv=Sigma0=0.1):
#   P-_0 = 0.1, L_0 = 0.5, P_0 = 0.05
#   P-_1 = 0.15, L_1 = 0.6, P_1 = 0.06, Phi_0 = 0.6*0.25*0.6 = 0.09
SCALAR_PINF = (0.1 + np.sqrt(0.05)) / 2.0


class TestSchedule:
    def test_scalar_hand_recursion(self, scalar_model):
        sched = kalman_schedule(scalar_model)
        assert sched.gains[0, 0, 0] == pytest.approx(0.5)
        assert sched.post_cov[0, 0, 0] == pytest.approx(0.05)
        assert sched.prior_cov[1, 0, 0] == pytest.approx(0.15)
        assert sched.gains[1, 0, 0] == pytest.approx(0.6)
        assert sched.post_cov[1, 0, 0] == pytest.approx(0.06)
        assert sched.noise_cov[0, 0, 0] == pytest.approx(0.09)

    def test_noiseless_schedule_is_zero(self):
        model = SystemModel(a=[[1.0]], b=[[1.0]], c=[[1.0]],
                            noise_cov_w=[[0.0]], noise_cov_v=[[0.1]],
                            init_mean=[0.0], init_cov=[[0.0]], horizon=4)
        sched = kalman_schedule(model)
        assert np.allclose(sched.prior_cov, 0.0)
        assert np.allclose(sched.post_cov, 0.0)
        assert np.allclose(sched.gains, 0.0)

    def test_recursion_invariants_paper_system(self, paper_model):
        sched = kalman_schedule(paper_model)
        a, c, qw = paper_model.a, paper_model.c, paper_model.noise_cov_w
        eye = np.eye(paper_model.n_x)
        assert np.allclose(sched.prior_cov[0], paper_model.init_cov)
        for k in range(sched.horizon):
            lhs = (eye - sched.gains[k] @ c) @ sched.prior_cov[k]
            assert np.abs(sched.post_cov[k] - lhs).max() <= 1e-10
            if k + 1 < sched.horizon:
                nxt = a @ sched.post_cov[k] @ a.T + qw
                assert np.abs(sched.prior_cov[k + 1] - nxt).max() <= 1e-10

    def test_gain_formula(self, paper_model):
        sched = kalman_schedule(paper_model)
        c, rv = paper_model.c, paper_model.noise_cov_v
        for k in range(sched.horizon):
            s = c @ sched.prior_cov[k] @ c.T + rv
            expected = sched.prior_cov[k] @ c.T @ np.linalg.inv(s)
            assert np.abs(sched.gains[k] - expected).max() <= 1e-12


class TestFilter:
    def test_zero_innovation_keeps_mean(self, scalar_model):
        sched = kalman_schedule(scalar_model)
        state = filter_init(scalar_model, [0.0], sched)
        assert state.k == 0
        assert np.allclose(state.xhat, scalar_model.init_mean)

    def test_init_uses_first_gain(self, scalar_model):
        sched = kalman_schedule(scalar_model)
        state = filter_init(scalar_model, [1.0], sched)
        assert state.xhat[0] == pytest.approx(0.5)

    def test_step_uses_next_gain(self, scalar_model):
        sched = kalman_schedule(scalar_model)
        state = filter_init(scalar_model, [0.0], sched)
        nxt = filter_step(state, [0.0], [1.0], scalar_model, sched)
        assert nxt.k == 1
        assert nxt.xhat[0] == pytest.approx(0.6)

    def test_zero_innovation_propagates(self, paper_model):
        sched = kalman_schedule(paper_model)
        state = filter_init(paper_model, paper_model.c @ paper_model.init_mean,
                            sched)
        u = np.array([0.7])
        x_pred = paper_model.a @ state.xhat + paper_model.b @ u
        nxt = filter_step(state, u, paper_model.c @ x_pred, paper_model, sched)
        assert np.allclose(nxt.xhat, x_pred)

    def test_input_passthrough_when_gain_zero(self):
        # A=0, B=1 with a noiseless prior: estimate equals the input
        model = SystemModel(a=[[0.0]], b=[[1.0]], c=[[1.0]],
                            noise_cov_w=[[0.0]], noise_cov_v=[[0.1]],
                            init_mean=[0.3], init_cov=[[0.0]], horizon=3)
        sched = kalman_schedule(model)
        state = filter_init(model, [5.0], sched)
        nxt = filter_step(state, [2.0], [-1.0], model, sched)
        assert nxt.xhat[0] == pytest.approx(2.0 * 0.0 + 2.0 * 1.0, abs=1e-12)

    def test_step_out_of_range(self, scalar_model):
        sched = kalman_schedule(scalar_model)
        state = filter_init(scalar_model, [0.0], sched)
        state.k = scalar_model.horizon - 1
        with pytest.raises(ValidationError):
            filter_step(state, [0.0], [0.0], scalar_model, sched)


class TestSteadyState:
    def test_scalar_closed_form(self, scalar_model):
        p_inf = steady_state_prior(scalar_model)
        assert p_inf[0, 0] == pytest.approx(SCALAR_PINF, abs=1e-10)

    def test_no_process_noise_gives_zero(self):
        model = SystemModel(a=[[0.5]], b=[[1.0]], c=[[1.0]],
                            noise_cov_w=[[0.0]], noise_cov_v=[[0.1]],
                            init_mean=[0.0], init_cov=[[0.2]], horizon=3)
        assert steady_state_prior(model)[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_paper_system_residual(self, paper_model):
        p_inf = steady_state_prior(paper_model)
        a, c = paper_model.a, paper_model.c
        qw, rv = paper_model.noise_cov_w, paper_model.noise_cov_v
        gain = p_inf @ c.T @ np.linalg.inv(c @ p_inf @ c.T + rv)
        resid = a @ (p_inf - gain @ c @ p_inf) @ a.T + qw - p_inf
        assert np.abs(resid).max() <= 1e-10


class TestAssumptions:
    def test_scalar_holds(self, scalar_model):
        p_inf = steady_state_prior(scalar_model)
        rep = check_assumptions(scalar_model, p_inf)
        assert rep.assumption1 and rep.assumption2

    def test_boundary_sigma0(self, scalar_model):
        p_inf = steady_state_prior(scalar_model)
        boundary = SystemModel(a=[[1.0]], b=[[1.0]], c=[[1.0]],
                               noise_cov_w=[[0.1]], noise_cov_v=[[0.1]],
                               init_mean=[0.0], init_cov=p_inf, horizon=3)
        assert check_assumptions(boundary, p_inf).assumption1

    def test_singular_a(self):
        model = SystemModel(a=[[0.0]], b=[[1.0]], c=[[1.0]],
                            noise_cov_w=[[0.1]], noise_cov_v=[[0.1]],
                            init_mean=[0.0], init_cov=[[0.1]], horizon=3)
        p_inf = steady_state_prior(model)
        assert not check_assumptions(model, p_inf).assumption2


class TestAnalyticBound:
    def test_scalar_values(self, scalar_model):
        sched = kalman_schedule(scalar_model)
        p_inf = steady_state_prior(scalar_model)
        bound = bound_analytic_md(scalar_model, p_inf, sched)
        assert bound.p_bar[0, 0] == pytest.approx(SCALAR_PINF - 0.1, abs=1e-9)
        assert bound.phi_bar[0, 0] == pytest.approx(SCALAR_PINF, abs=1e-12)
        assert bound.method == "analytic_md"
        # hand values dominate: P_0 = 0.05, P_1 = 0.06 <= 0.0618
        assert sched.post_cov[0, 0, 0] <= bound.p_bar[0, 0]
        assert sched.post_cov[1, 0, 0] <= bound.p_bar[0, 0]

    def test_identity_a_without_noise_equals_p_inf(self):
        model = SystemModel(a=[[1.0]], b=[[1.0]], c=[[1.0]],
                            noise_cov_w=[[0.0]], noise_cov_v=[[0.1]],
                            init_mean=[0.0], init_cov=[[0.0]], horizon=3)
        sched = kalman_schedule(model)
        p_inf = steady_state_prior(model)
        bound = bound_analytic_md(model, p_inf, sched)
        assert np.allclose(bound.p_bar, p_inf)

    def test_refuses_when_assumption_fails(self, scalar_model):
        p_inf = steady_state_prior(scalar_model)
        bad = SystemModel(a=[[1.0]], b=[[1.0]], c=[[1.0]],
                          noise_cov_w=[[0.1]], noise_cov_v=[[0.1]],
                          init_mean=[0.0], init_cov=10.0 * p_inf, horizon=3)
        sched = kalman_schedule(bad)
        with pytest.raises(AssumptionError):
            bound_analytic_md(bad, p_inf, sched)


class TestScaledReferenceBound:
    def test_alpha_one_when_schedule_equals_reference(self):
        model = SystemModel(a=[[1.0]], b=[[1.0]], c=[[1.0]],
                            noise_cov_w=[[0.1]], noise_cov_v=[[0.1]],
                            init_mean=[0.0],
                            init_cov=[[SCALAR_PINF]], horizon=2)
        sched = kalman_schedule(model)
        p_inf = steady_state_prior(model)
        # replace the schedule posteriors by the reference itself
        sched.post_cov[:] = p_inf
        bound = bound_scaled_reference(sched, p_inf)
        assert bound.p_bar[0, 0] == pytest.approx(p_inf[0, 0], rel=1e-6)

    def test_scalar_ratio(self, scalar_model):
        sched = kalman_schedule(
            SystemModel(a=[[1.0]], b=[[1.0]], c=[[1.0]],
                        noise_cov_w=[[0.1]], noise_cov_v=[[0.1]],
                        init_mean=[0.0], init_cov=[[0.1]], horizon=2))
        p_inf = steady_state_prior(scalar_model)
        bound = bound_scaled_reference(sched, p_inf)
        # alpha_P = max(0.05, 0.06) / P_inf, so P_bar recovers 0.06
        assert bound.p_bar[0, 0] == pytest.approx(0.06, abs=1e-6)
        # Phi bound is exactly Phi_0 = 0.09, tighter than Phi_MD = P_inf
        assert bound.phi_bar[0, 0] == pytest.approx(0.09, abs=1e-6)
        assert bound.phi_bar[0, 0] <= SCALAR_PINF

    def test_never_looser_than_md_for_phi_on_paper_system(self, paper_model):
        sched = kalman_schedule(paper_model)
        p_inf = steady_state_prior(paper_model)
        scaled = bound_scaled_reference(sched, p_inf)
        md = bound_analytic_md(paper_model, p_inf, sched)
        assert psd_leq(scaled.phi_bar, md.phi_bar, 1e-9)


class TestBoundInvariants:
    @pytest.mark.parametrize("method", ["analytic_md", "scaled_reference"])
    def test_bounds_dominate_schedule(self, paper_model, method):
        sched = kalman_schedule(paper_model)
        p_inf = steady_state_prior(paper_model)
        if method == "analytic_md":
            bound = bound_analytic_md(paper_model, p_inf, sched)
        else:
            bound = bound_scaled_reference(sched, p_inf)
        for k in range(sched.horizon):
            assert psd_leq(sched.post_cov[k], bound.p_bar, 1e-9)
        for k in range(sched.noise_cov.shape[0]):
            assert psd_leq(sched.noise_cov[k], bound.phi_bar, 1e-9)

    def test_lemma1_prior_monotone(self, paper_model, scalar_model):
        for model in (paper_model, scalar_model):
            sched = kalman_schedule(model)
            p_inf = steady_state_prior(model)
            assert check_assumptions(model, p_inf).assumption1
            for k in range(sched.horizon):
                assert psd_leq(sched.prior_cov[k], p_inf, 1e-9)


class TestFilterConsistency:
    def test_empirical_error_covariance_scalar(self, scalar_model):
        """e_k = x_k - xhat_k should have covariance P_k; the error dynamics
        do not depend on the input, so simulate with u = 0, vectorized over
        many runs."""
        sched = kalman_schedule(scalar_model)
        n_runs = 120_000
        rng = np.random.default_rng(42)
        x = rng.normal(0.0, np.sqrt(0.1), size=n_runs)
        v = rng.normal(0.0, np.sqrt(0.1), size=n_runs)
        y = x + v
        xhat = 0.0 + sched.gains[0, 0, 0] * y
        errs = {0: x - xhat}
        for k in range(1, 6):
            x = x + rng.normal(0.0, np.sqrt(0.1), size=n_runs)
            y = x + rng.normal(0.0, np.sqrt(0.1), size=n_runs)
            gain = sched.gains[k, 0, 0]
            xhat = xhat + gain * (y - xhat)
            errs[k] = x - xhat
        for k in (0, 1, 5):
            emp = errs[k].var()
            assert emp == pytest.approx(sched.post_cov[k, 0, 0], rel=0.05)
            assert abs(errs[k].mean()) <= 5e-3


def test_model_validation_rejects_bad_inputs():
    with pytest.raises(ValidationError):
        SystemModel(a=[[1.0, 0.0], [0.0, 1.0]], b=[[1.0], [0.0]],
                    c=[[1.0, 0.0]], noise_cov_w=np.eye(2),
                    noise_cov_v=[[0.1]], init_mean=[0.0, 0.0],
                    init_cov=np.eye(2), horizon=5)   # uncontrollable
    with pytest.raises(ValidationError):
        SystemModel(a=[[1.0]], b=[[1.0]], c=[[1.0]],
                    noise_cov_w=[[0.1]], noise_cov_v=[[0.0]],
                    init_mean=[0.0], init_cov=[[0.1]], horizon=5)   # Rv not PD
    with pytest.raises(ValidationError):
        SystemModel(a=[[1.0]], b=[[1.0]], c=[[1.0]],
                    noise_cov_w=[[-0.1]], noise_cov_v=[[0.1]],
                    init_mean=[0.0], init_cov=[[0.1]], horizon=5)   # Qw not PSD

import numpy as np
import pytest

from helpers import RidgeExperiment, exp_g, linear_g, max_column_diff, quadratic_g
from pigroups.algorithms import (
    AlgorithmConfig,
    CountingExperiment,
    algorithm1,
    algorithm2,
    build_rule,
    evaluate_experiment,
    fd_gradient,
    fd_shift_point,
    full_space_C,
    predict_dependent,
)
from pigroups.dimension import PiBasis, log_groups
from pigroups.errors import (
    DesignTooSmall,
    ExperimentFailure,
    NonFinite,
    NonPositiveInput,
    ShapeMismatch,
)
from pigroups.pipeflow import PipeFlowExperiment, regime_box
from pigroups.quadrature import RegimeBox, latin_hypercube
from pigroups.subspace import subspace_distance
from pigroups.surrogate import eval_surface, fit_polynomial


BOX = regime_box("turbulent")


def small_config(**kw):
    base = dict(h=1e-6, degree=2, quad="tensor:3", seed=0, design=60, holdout=20)
    base.update(kw)
    return AlgorithmConfig(**base)


def random_orthogonal(n, seed):
    gen = np.random.default_rng(seed)
    Q, R = np.linalg.qr(gen.normal(size=(n, n)))
    return Q * np.sign(np.diag(R))


class TestAlgorithmConfig:
    def test_quad_parsing(self):
        assert AlgorithmConfig(quad="tensor:11").parse_quad() == ("tensor", 11)
        assert AlgorithmConfig(quad="mc:5000").parse_quad() == ("mc", 5000)

    @pytest.mark.parametrize("bad", ["tensor", "grid:3", "mc:-1", "tensor:abc"])
    def test_bad_quad_spec(self, bad):
        with pytest.raises(ValueError):
            AlgorithmConfig(quad=bad)

    def test_h_and_degree_validated(self):
        with pytest.raises(ValueError):
            AlgorithmConfig(h=0.0)
        with pytest.raises(ValueError):
            AlgorithmConfig(degree=0)

    def test_build_rule_sizes(self):
        assert len(build_rule(BOX, small_config())) == 243
        assert len(build_rule(BOX, small_config(quad="mc:100"))) == 100


class TestEvaluateExperiment:
    def test_scalar_fallback_matches_batch(self):
        experiment = PipeFlowExperiment()
        pts = latin_hypercube(BOX, 10, seed=3)
        batch = evaluate_experiment(experiment, pts)
        scalar = np.array([experiment(p) for p in pts])
        assert np.array_equal(batch, scalar)

    def test_non_finite_reported_with_index(self):
        class Bad:
            def evaluate_batch(self, Q):
                out = np.ones(len(Q))
                out[3] = np.inf
                return out

        with pytest.raises(NonFinite, match="index 3"):
            evaluate_experiment(Bad(), np.ones((5, 2)))

    def test_raising_experiment_wrapped(self):
        def boom(q):
            raise RuntimeError("kaput")

        with pytest.raises(ExperimentFailure, match="kaput"):
            evaluate_experiment(boom, np.ones((2, 2)))

    def test_wrong_length_output(self):
        class Short:
            def evaluate_batch(self, Q):
                return np.ones(len(Q) - 1)

        with pytest.raises(ShapeMismatch):
            evaluate_experiment(Short(), np.ones((4, 2)))


class TestFdShiftPoint:
    def test_zero_step_is_identity(self, pipe_basis):
        q = np.array([0.12, 5e-6, 0.75, 1e-3, 3.0])
        shifted = fd_shift_point(q, pipe_basis.W, 0, 0.0)
        assert np.max(np.abs(shifted / q - 1.0)) < 1e-15

    def test_defining_system_holds_for_random_inputs(self, pipe_basis):
        gen = np.random.default_rng(5)
        W = pipe_basis.W
        for _ in range(50):
            q = np.exp(gen.uniform(-4, 4, size=5))
            k = int(gen.integers(0, W.shape[1]))
            h = float(gen.uniform(1e-8, 1e-2))
            gamma = log_groups(q, W)
            shifted = fd_shift_point(q, W, k, h)
            target = gamma.copy()
            target[k] += h
            assert np.max(np.abs(log_groups(shifted, W) - target)) < 1e-12

    def test_pipe_point_gamma_shift_is_exact(self, pipe_basis):
        q = np.array([0.12, 5e-6, 0.75, 1e-3, 3.0])
        h = 1e-6
        before = log_groups(q, pipe_basis.W)
        after = log_groups(fd_shift_point(q, pipe_basis.W, 0, h), pipe_basis.W)
        assert after[0] - before[0] == pytest.approx(h, abs=1e-12)
        assert after[1] == pytest.approx(before[1], abs=1e-12)

    def test_bad_index(self, pipe_basis):
        with pytest.raises(ShapeMismatch):
            fd_shift_point(np.ones(5), pipe_basis.W, 2, 1e-6)


class TestFdGradient:
    def test_exponential_ridge_gradient(self, pipe_basis):
        a = np.array([3.0, 1.0])
        experiment = RidgeExperiment(pipe_basis.w, pipe_basis.W, exp_g(a))
        gen = np.random.default_rng(2)
        h = 1e-6
        for _ in range(10):
            q = np.exp(gen.uniform(-1, 1, size=5))
            gamma = log_groups(q, pipe_basis.W)
            g_val = float(np.exp(a @ gamma))
            pi0 = g_val  # exp(w.x) cancels in the dimensionless output
            grad = fd_gradient(experiment, q, pi0, pipe_basis.w, pipe_basis.W, h)
            assert np.max(np.abs(grad / (a * g_val) - 1.0)) < 5e-6

    def test_constant_g_gives_zero_gradient(self, pipe_basis):
        experiment = RidgeExperiment(pipe_basis.w, pipe_basis.W, lambda G: np.ones(len(G)))
        q = np.array([0.12, 5e-6, 0.75, 1e-3, 3.0])
        grad = fd_gradient(experiment, q, 1.0, pipe_basis.w, pipe_basis.W, 1e-6)
        assert np.max(np.abs(grad)) < 1e-9

    def test_pipe_point_against_central_difference_oracle(self, pipe_basis):
        experiment = PipeFlowExperiment()
        q = np.array([0.12, 5e-6, 0.75, 1e-3, 3.0])
        w, W = pipe_basis.w, pipe_basis.W
        pi0 = experiment(q) * float(np.exp(-w @ np.log(q)))
        grad = fd_gradient(experiment, q, pi0, w, W, 1e-6)
        step = 1e-7
        for k in range(2):
            up = fd_shift_point(q, W, k, step)
            dn = fd_shift_point(q, W, k, -step)
            pi_up = experiment(up) * float(np.exp(-w @ np.log(up)))
            pi_dn = experiment(dn) * float(np.exp(-w @ np.log(dn)))
            central = (pi_up - pi_dn) / (2 * step)
            assert grad[k] == pytest.approx(central, rel=5e-6)

    def test_failure_carries_the_point(self, pipe_basis):
        def flaky(q):
            raise ValueError("sensor died")

        with pytest.raises(ExperimentFailure, match="sensor died"):
            fd_gradient(flaky, np.ones(5), 1.0, pipe_basis.w, pipe_basis.W, 1e-6)


class TestAlgorithm1:
    def test_linear_g_recovers_analytic_subspace(self, pipe_system, pipe_basis):
        a = np.array([3.0, 1.0])
        experiment = RidgeExperiment(pipe_basis.w, pipe_basis.W, linear_g(a))
        result = algorithm1(experiment, pipe_system, pipe_basis, BOX,
                            small_config(degree=1))
        assert result.eigenvalues[0] == pytest.approx(10.0, rel=1e-8)
        assert result.eigenvalues[1] == pytest.approx(0.0, abs=1e-8)
        u1 = result.U[:, 0]
        assert np.max(np.abs(u1 - a / np.linalg.norm(a))) < 1e-9
        assert result.metadata["algorithm"] == "surface"
        assert result.metadata["evaluations"] == 60

    def test_design_too_small(self, pipe_system, pipe_basis):
        experiment = PipeFlowExperiment()
        with pytest.raises(DesignTooSmall):
            algorithm1(experiment, pipe_system, pipe_basis, BOX,
                       small_config(design=5, degree=2))

    def test_budget_counts_design_and_holdout(self, pipe_system, pipe_basis):
        counter = CountingExperiment(PipeFlowExperiment())
        result = algorithm1(counter, pipe_system, pipe_basis, BOX, small_config())
        assert counter.count == 60 + 20
        assert result.metadata["evaluations"] == 60
        assert result.metadata["holdout_evaluations"] == 20
        assert result.metadata["holdout_rmse"] is not None

    def test_returned_surface_supports_prediction(self, pipe_system, pipe_basis):
        experiment = PipeFlowExperiment()
        result, surface = algorithm1(experiment, pipe_system, pipe_basis, BOX,
                                     small_config(design=200), return_surface=True)
        q = np.array([0.12, 5e-6, 0.75, 1e-3, 3.0])
        pred = predict_dependent(surface, pipe_basis.w, pipe_basis.W, q)
        truth = experiment(q)
        assert pred == pytest.approx(truth, rel=0.05)


class TestAlgorithm2:
    def test_linear_g_is_exact(self, pipe_system, pipe_basis):
        a = np.array([3.0, 1.0])
        experiment = RidgeExperiment(pipe_basis.w, pipe_basis.W, linear_g(a))
        result = algorithm2(experiment, pipe_system, pipe_basis, BOX, small_config())
        lam = result.eigenvalues
        assert lam[1] < 1e-10 * lam[0]
        assert np.max(np.abs(result.U[:, 0] - a / np.linalg.norm(a))) < 1e-6

    def test_exponential_g_rank_one(self, pipe_system, pipe_basis):
        a = np.array([3.0, 1.0])
        experiment = RidgeExperiment(pipe_basis.w, pipe_basis.W, exp_g(a))
        result = algorithm2(experiment, pipe_system, pipe_basis, BOX, small_config())
        lam = result.eigenvalues
        assert lam[1] < 1e-12 * lam[0]
        assert np.max(np.abs(result.U[:, 0] - a / np.linalg.norm(a))) < 1e-6

    def test_evaluation_budget_is_exact(self, pipe_system, pipe_basis):
        counter = CountingExperiment(PipeFlowExperiment())
        result = algorithm2(counter, pipe_system, pipe_basis, BOX, small_config())
        n = pipe_basis.n
        assert counter.count == 243 * (n + 1)
        assert result.metadata["evaluations"] == counter.count

    def test_deterministic_output(self, pipe_system, pipe_basis):
        experiment = PipeFlowExperiment()
        r1 = algorithm2(experiment, pipe_system, pipe_basis, BOX, small_config())
        r2 = algorithm2(experiment, pipe_system, pipe_basis, BOX, small_config())
        assert r1.to_json() == r2.to_json()

    @pytest.mark.parametrize("scale,ratio_tol,basis_tol", [
        # a power-of-two scale commutes exactly with the float arithmetic
        (8.0, 1e-13, 1e-13),
        # an arbitrary scale perturbs the forward differences at the
        # round-off-over-h level, which bounds what the ratio can achieve
        (7.5, 1e-8, 1e-8),
    ])
    def test_output_scaling_leaves_groups_unchanged(self, pipe_system, pipe_basis,
                                                    scale, ratio_tol, basis_tol):
        base = PipeFlowExperiment()

        class Scaled:
            def evaluate_batch(self, Q):
                return scale * base.evaluate_batch(Q)

        r1 = algorithm2(base, pipe_system, pipe_basis, BOX, small_config())
        r2 = algorithm2(Scaled(), pipe_system, pipe_basis, BOX, small_config())
        assert np.max(np.abs(r2.eigenvalues / r1.eigenvalues - scale**2)) < ratio_tol * scale**2
        assert max_column_diff(r2.U, r1.U) < basis_tol
        assert max_column_diff(r2.Z, r1.Z) < basis_tol

    def test_monte_carlo_rule_accepted(self, pipe_system, pipe_basis):
        experiment = PipeFlowExperiment()
        result = algorithm2(experiment, pipe_system, pipe_basis, BOX,
                            small_config(quad="mc:500"))
        assert result.metadata["evaluations"] == 500 * 3


class TestAlgorithmAgreement:
    def quadratic_setup(self, pipe_basis):
        a = np.array([2.0, -0.5])
        Q = np.array([[0.8, 0.3], [0.3, -0.4]])
        return RidgeExperiment(pipe_basis.w, pipe_basis.W, quadratic_g(a, Q))

    def test_quadratic_g_gives_matching_subspaces(self, pipe_system, pipe_basis):
        experiment = self.quadratic_setup(pipe_basis)
        r1 = algorithm1(experiment, pipe_system, pipe_basis, BOX,
                        small_config(design=120, degree=2, quad="tensor:5"))
        r2 = algorithm2(experiment, pipe_system, pipe_basis, BOX,
                        small_config(quad="tensor:5"))
        assert subspace_distance(r1.U, r2.U, 1) < 1e-4
        assert max_column_diff(r1.Z, r2.Z) < 1e-4

    def test_rotation_invariance_of_z(self, pipe_system, pipe_basis):
        # re-basing the null space must not move the unique groups
        experiment = self.quadratic_setup(pipe_basis)
        config = small_config(design=120, degree=2, quad="tensor:5")
        reference = algorithm1(experiment, pipe_system, pipe_basis, BOX, config)
        lam = reference.eigenvalues
        assert lam[0] - lam[1] > 1e-3 * lam[0]
        for seed in range(10):
            Q = random_orthogonal(2, 600 + seed)
            rebased = PiBasis(w=pipe_basis.w, W=pipe_basis.W @ Q)
            result = algorithm1(experiment, pipe_system, rebased, BOX, config)
            assert max_column_diff(result.Z, reference.Z) < 1e-6


class TestFullSpaceC:
    def test_monomial_law_is_rank_one(self, pipe_basis):
        w = pipe_basis.w
        experiment = RidgeExperiment(w, pipe_basis.W, lambda G: np.ones(len(G)))
        result = full_space_C(experiment, BOX, p=3, h=1e-6)
        lam = result.eigenvalues
        assert np.all(lam[1:] < 1e-12 * lam[0])
        direction = w / np.linalg.norm(w)
        u1 = result.U[:, 0]
        if u1 @ direction < 0:
            u1 = -u1
        assert np.max(np.abs(u1 - direction)) < 1e-5

    def test_ridge_trailing_eigenvalues_vanish_with_h(self, pipe_basis):
        # eigenvalues beyond n+1 are pure differencing error and must fall
        # at least first order in h over a decade
        a = np.array([2.0, -0.5])
        Q = np.array([[0.8, 0.3], [0.3, -0.4]])
        experiment = RidgeExperiment(pipe_basis.w, pipe_basis.W, quadratic_g(a, Q))
        hs = [1e-1, 1e-2]  # below that the error is already at the eigensolver floor
        trail = []
        for h in hs:
            lam = full_space_C(experiment, BOX, p=3, h=h).eigenvalues
            trail.append(float(np.max(lam[3:]) / lam[0]))
        slope = np.log(trail[0] / trail[1]) / np.log(hs[0] / hs[1])
        assert slope > 0.8
        lam_small = full_space_C(experiment, BOX, p=3, h=1e-4).eigenvalues
        assert np.max(lam_small[3:]) < 1e-13 * lam_small[0]

    def test_evaluation_budget(self, pipe_basis):
        counter = CountingExperiment(PipeFlowExperiment())
        result = full_space_C(counter, BOX, p=3, h=1e-5)
        assert counter.count == 243 * 6
        assert result.metadata["evaluations"] == counter.count


class TestPredictDependent:
    def test_constant_surface_reduces_to_scaling_factor(self, pipe_basis):
        gen = np.random.default_rng(4)
        gamma = gen.normal(size=(30, 2))
        surface = fit_polynomial(gamma, np.ones(30), 1)
        for _ in range(5):
            q = np.exp(gen.uniform(-2, 2, size=5))
            expected = float(np.exp(pipe_basis.w @ np.log(q)))
            assert predict_dependent(surface, pipe_basis.w, pipe_basis.W, q) == \
                pytest.approx(expected, rel=1e-10)

    def test_monomial_law_recovered_in_box(self, pipe_system, pipe_basis):
        experiment = RidgeExperiment(pipe_basis.w, pipe_basis.W, lambda G: np.full(len(G), 2.5))
        _, surface = algorithm1(experiment, pipe_system, pipe_basis, BOX,
                                small_config(design=100, degree=2), return_surface=True)
        gen = np.random.default_rng(6)
        for _ in range(20):
            q = BOX.lower + gen.random(5) * BOX.widths
            pred = predict_dependent(surface, pipe_basis.w, pipe_basis.W, q)
            assert pred == pytest.approx(experiment(q), rel=1e-8)

    def test_positive_inputs_required(self, pipe_basis):
        surface = fit_polynomial(np.random.default_rng(0).normal(size=(10, 2)),
                                 np.ones(10), 1)
        with pytest.raises(NonPositiveInput):
            predict_dependent(surface, pipe_basis.w, pipe_basis.W,
                              np.array([1.0, -1.0, 1.0, 1.0, 1.0]))

import json

import numpy as np
import pytest

from helpers import max_column_diff
from pigroups.errors import (
    NonFinite,
    NotPositiveSemidefinite,
    NotSymmetric,
    ShapeMismatch,
    SpanMismatch,
    ToolkitError,
    WrongDimension,
)
from pigroups.subspace import (
    SubspaceResult,
    assemble_C,
    eigen_gap,
    eigendecompose,
    express_in_classical,
    group_descriptor,
    result_to_csv,
    rotation_angle,
    sensitivity_metrics,
    subspace_distance,
    unique_groups,
)


def random_orthogonal(n, seed):
    gen = np.random.default_rng(seed)
    Q, R = np.linalg.qr(gen.normal(size=(n, n)))
    return Q * np.sign(np.diag(R))


def random_psd(n, seed):
    gen = np.random.default_rng(seed)
    Q = random_orthogonal(n, seed)
    lam = np.sort(gen.uniform(0.0, 10.0, size=n))[::-1]
    return Q @ np.diag(lam) @ Q.T


class TestAssembleC:
    def test_constant_gradient_gives_rank_one(self):
        a = np.array([1.0, 2.0, -1.0])
        G = np.tile(a, (40, 1))
        C = assemble_C(G, np.full(40, 1.0 / 40))
        assert np.max(np.abs(C - np.outer(a, a))) < 1e-14
        lam, _ = eigendecompose(C)
        assert lam[0] == pytest.approx(float(a @ a), rel=1e-14)
        assert np.max(np.abs(lam[1:])) < 1e-13

    def test_zero_gradients(self):
        C = assemble_C(np.zeros((10, 2)), np.full(10, 0.1))
        assert np.array_equal(C, np.zeros((2, 2)))

    def test_two_unit_gradients(self):
        G = np.array([[1.0, 0.0], [0.0, 1.0]])
        C = assemble_C(G, np.array([0.5, 0.5]))
        assert np.array_equal(C, np.diag([0.5, 0.5]))

    def test_exactly_symmetric(self):
        gen = np.random.default_rng(7)
        G = gen.normal(size=(1000, 4))
        w = gen.random(1000)
        w /= w.sum()
        C = assemble_C(G, w, chunk_size=128)
        assert np.array_equal(C, C.T)

    def test_chunk_size_does_not_change_result_materially(self):
        gen = np.random.default_rng(3)
        G = gen.normal(size=(500, 3))
        w = np.full(500, 1.0 / 500)
        C1 = assemble_C(G, w, chunk_size=500)
        C2 = assemble_C(G, w, chunk_size=7)
        assert np.array_equal(C1, assemble_C(G, w, chunk_size=500))  # deterministic
        assert np.max(np.abs(C1 - C2)) < 1e-14 * max(1.0, np.max(np.abs(C1)))

    def test_rejects_unnormalized_weights(self):
        with pytest.raises(ToolkitError):
            assemble_C(np.ones((4, 2)), np.full(4, 0.3))

    def test_rejects_non_finite_gradients(self):
        G = np.ones((4, 2))
        G[2, 1] = np.nan
        with pytest.raises(NonFinite, match="row 2"):
            assemble_C(G, np.full(4, 0.25))


class TestEigendecompose:
    def test_diagonal(self):
        lam, U = eigendecompose(np.diag([2.0, 1.0]))
        assert np.array_equal(lam, [2.0, 1.0])
        assert np.array_equal(U, np.eye(2))

    def test_rank_one_analytic(self):
        a = np.array([3.0, 4.0]) / 5.0
        lam, U = eigendecompose(np.outer(a, a))
        assert lam[0] == pytest.approx(1.0, rel=1e-14)
        assert lam[1] == pytest.approx(0.0, abs=1e-14)
        assert np.max(np.abs(U[:, 0] - np.array([0.6, 0.8]))) < 1e-14

    def test_not_symmetric(self):
        with pytest.raises(NotSymmetric):
            eigendecompose(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_descending_order_and_reconstruction(self):
        for seed in range(100):
            C = random_psd(4, seed)
            lam, U = eigendecompose(C)
            assert np.all(np.diff(lam) <= 1e-12)
            recon = U @ np.diag(lam) @ U.T
            assert np.max(np.abs(C - recon)) < 1e-10 * (1.0 + lam[0])

    def test_roundoff_negatives_clamped(self):
        Q = random_orthogonal(3, 1)
        C = Q @ np.diag([1.0, 1e-16, -1e-16]) @ Q.T
        lam, _ = eigendecompose(0.5 * (C + C.T))
        assert np.all(lam >= 0.0)

    def test_genuinely_negative_raises(self):
        with pytest.raises(NotPositiveSemidefinite):
            eigendecompose(np.diag([1.0, -1e-6]))

    def test_sign_rule(self):
        for seed in range(30):
            lam, U = eigendecompose(random_psd(5, 1000 + seed))
            for j in range(5):
                mags = np.abs(U[:, j])
                lead = int(np.flatnonzero(mags >= mags.max() * (1 - 1e-12))[0])
                assert U[lead, j] > 0


class TestSensitivityMetrics:
    def test_diagonal_of_c(self):
        C = np.diag([0.5, 0.5])
        assert np.array_equal(sensitivity_metrics(C), [0.5, 0.5])

    def test_rotated_coordinates_reproduce_eigenvalues(self):
        for seed in range(100):
            C = random_psd(4, 5000 + seed)
            lam, U = eigendecompose(C)
            nu = sensitivity_metrics(U.T @ C @ U)
            assert np.max(np.abs(nu - lam)) < 1e-10

    def test_requires_symmetry(self):
        with pytest.raises(NotSymmetric):
            sensitivity_metrics(np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestUniqueGroups:
    def test_identity_rotation_returns_w(self, pipe_basis):
        Z, descriptors = unique_groups(pipe_basis.W, np.eye(2), symbols=list("abcde"))
        assert np.array_equal(Z, pipe_basis.W)
        assert len(descriptors) == 2
        assert "^" in descriptors[0]

    def test_descriptor_rendering(self):
        text = group_descriptor(np.array([0.309, -0.423, 0.0]), ["rho", "eps", "V"])
        assert text == "rho^0.309 * eps^-0.423"
        assert group_descriptor(np.zeros(2), ["a", "b"]) == "1"

    def test_rejects_nonorthonormal_w(self):
        with pytest.raises(ValueError):
            unique_groups(np.ones((4, 2)), np.eye(2))

    def test_shape_mismatch(self, pipe_basis):
        with pytest.raises(ShapeMismatch):
            unique_groups(pipe_basis.W, np.eye(3))


class TestExpressInClassical:
    def test_same_basis_gives_identity(self, pipe_basis):
        E, residual = express_in_classical(pipe_basis.W, pipe_basis.W)
        assert np.max(np.abs(E - np.eye(2))) < 1e-12
        assert residual < 1e-12

    def test_rotated_basis_recovered(self, pipe_basis):
        Q = random_orthogonal(2, 9)
        Z = pipe_basis.W @ Q
        E, residual = express_in_classical(Z, pipe_basis.W)
        assert np.max(np.abs(E - Q)) < 1e-12
        assert residual < 1e-12

    def test_span_mismatch(self, pipe_basis):
        Z = pipe_basis.W.copy()
        Z[0, 0] += 0.5  # push the column out of the null space
        with pytest.raises(SpanMismatch):
            express_in_classical(Z, pipe_basis.W)


class TestRotationAngle:
    def test_identity(self):
        assert rotation_angle(np.eye(2)) == pytest.approx(0.0, abs=1e-12)

    def test_quarter_turn(self):
        U = np.array([[0.0, -1.0], [1.0, 0.0]])
        assert rotation_angle(U) == pytest.approx(90.0, rel=1e-12)

    def test_wrong_dimension(self):
        with pytest.raises(WrongDimension):
            rotation_angle(np.eye(3))

    def test_requires_orthogonal(self):
        with pytest.raises(ValueError):
            rotation_angle(np.array([[1.0, 1.0], [0.0, 1.0]]))


class TestSubspaceDistance:
    def test_identical_bases(self):
        U = random_orthogonal(4, 2)
        assert subspace_distance(U, U, 2) == pytest.approx(0.0, abs=1e-14)

    def test_orthogonal_complements(self):
        U1 = np.eye(4)
        U2 = np.eye(4)[:, [2, 3, 0, 1]]
        assert subspace_distance(U1, U2, 2) == pytest.approx(1.0, rel=1e-12)

    def test_sign_invariance(self):
        U = random_orthogonal(3, 4)
        flipped = U * np.array([-1.0, 1.0, -1.0])
        assert subspace_distance(U, flipped, 2) < 1e-14

    def test_bad_k(self):
        U = random_orthogonal(3, 4)
        with pytest.raises(ShapeMismatch):
            subspace_distance(U, U, 4)


class TestRidgeRankBound:
    def test_rank_r_gradients_give_rank_r_c(self):
        # gradients of a ridge with rank-r inner structure live in a rank-r subspace
        gen = np.random.default_rng(12)
        for r in (1, 2, 3):
            B = gen.normal(size=(r, 5))
            coeffs = gen.normal(size=(400, r))
            G = coeffs @ B
            w = np.full(400, 1.0 / 400)
            lam, _ = eigendecompose(assemble_C(G, w))
            assert np.all(lam[r:] < 1e-10 * lam[0])


class TestSubspaceResult:
    def make(self, pipe_basis):
        C = random_psd(2, 77)
        lam, U = eigendecompose(C)
        Z = pipe_basis.W @ U
        return SubspaceResult(C=C, eigenvalues=lam, U=U, Z=Z,
                              metadata={"algorithm": "finite_difference", "h": 1e-6})

    def test_json_round_trip(self, pipe_basis):
        result = self.make(pipe_basis)
        again = SubspaceResult.from_json(result.to_json())
        assert np.array_equal(again.C, result.C)
        assert np.array_equal(again.Z, result.Z)
        assert again.metadata["h"] == 1e-6

    def test_csv_layout(self, pipe_basis, tmp_path):
        result = self.make(pipe_basis)
        path = tmp_path / "exponents.csv"
        result_to_csv(result, ("rho", "mu", "D", "eps", "V"), path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "variable,z_1,z_2"
        assert len(lines) == 7
        assert lines[1].startswith("rho,")
        assert lines[-1].startswith("eigenvalue,")

    def test_degenerate_flagging(self, pipe_basis):
        U = np.eye(2)
        result = SubspaceResult(
            C=np.diag([1.0, 1.0 - 1e-5]), eigenvalues=np.array([1.0, 1.0 - 1e-5]),
            U=U, Z=pipe_basis.W @ U,
        )
        assert result.degenerate
        assert eigen_gap(np.array([1.0, 0.5])) == pytest.approx(0.5)

"""Tests for the deformed ADHM module."""

import numpy as np
import numpy.testing as npt
import pytest

from momentmap.adhm import (
    ADHMData,
    adhm_from_json,
    adhm_residuals,
    adhm_to_json,
    build_adhm_quiver,
    solve_adhm,
    stabilizer_dimension,
)
from momentmap.errors import SolverError, ValidationError
from momentmap.moment import king_residual
from momentmap.quiver import Representation, validate_dims
from momentmap.solver import SolveOptions


def rand_data(N, k, rng, scale=1.0):
    def rand(shape):
        return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

    return ADHMData(N, k, rand((N, N)), rand((N, N)), rand((N, k)), rand((k, N)))


def embed_as_representation(d: ADHMData):
    """View the data as a representation of the two-vertex quiver with the
    small fibre collapsed to dimension 1 per arrow pair."""
    q = build_adhm_quiver(d.k)
    mats = {"alpha": d.alpha, "beta": d.beta}
    for i in range(1, d.k + 1):
        mats[f"a{i}"] = d.a[:, i - 1 : i]
        mats[f"b{i}"] = d.b[i - 1 : i, :]
    return Representation(q, {"1": d.N, "2": 1}, mats)


class TestADHMData:
    def test_shapes_validated(self):
        with pytest.raises(ValidationError):
            ADHMData(2, 1, np.zeros((2, 3)), np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((1, 2)))
        with pytest.raises(ValidationError):
            ADHMData(2, 1, np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((1, 2)), np.zeros((1, 2)))

    def test_counts_validated(self):
        z = np.zeros((1, 1))
        with pytest.raises(ValidationError):
            ADHMData(0, 1, z, z, z, z)
        with pytest.raises(ValidationError):
            ADHMData(1, 0, z, z, z, z)
        with pytest.raises(ValidationError):
            ADHMData(True, 1, z, z, z, z)


class TestBuildAdhmQuiver:
    def test_k_zero_rejected(self):
        with pytest.raises(ValidationError):
            build_adhm_quiver(0)

    def test_k_one_shape(self):
        q = build_adhm_quiver(1)
        assert q.vertices == ("1", "2")
        assert len(q.arrows) == 4
        by_name = {a.name: (a.src, a.dst) for a in q.arrows}
        assert by_name["alpha"] == ("1", "1")
        assert by_name["beta"] == ("1", "1")
        assert by_name["a1"] == ("2", "1")
        assert by_name["b1"] == ("1", "2")

    def test_k_three_has_eight_arrows(self):
        assert len(build_adhm_quiver(3).arrows) == 8

    def test_dims_validate_through_quiver_core(self):
        dims = validate_dims(build_adhm_quiver(1), {"1": 2, "2": 1})
        assert dims == {"1": 2, "2": 1}


class TestAdhmResiduals:
    def test_zero_data_zero_eta(self):
        d = ADHMData(2, 1, *(np.zeros(s) for s in ((2, 2), (2, 2), (2, 1), (1, 2))))
        res = adhm_residuals(d, 0.0)
        assert res.sup_c == 0.0
        assert res.sup_r == 0.0

    def test_scalar_solution_family(self):
        # alpha = beta arbitrary scalars commute; a = 0 and |b|^2 = eta kill
        # the real equation.
        eta = 1.7
        d = ADHMData(
            1,
            1,
            np.array([[0.4 - 2.2j]]),
            np.array([[0.4 - 2.2j]]),
            np.array([[0.0]]),
            np.array([[np.sqrt(eta)]]),
        )
        res = adhm_residuals(d, eta)
        assert res.sup_c == 0.0
        assert res.sup_r <= 1e-15

    def test_trace_identity_on_random_data(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            N = int(rng.integers(1, 5))
            k = int(rng.integers(1, 4))
            d = rand_data(N, k, rng)
            res = adhm_residuals(d, float(rng.standard_normal()))
            assert res.trace_defect < 1e-12

    def test_real_residual_hermitian(self):
        rng = np.random.default_rng(1)
        d = rand_data(3, 2, rng)
        res = adhm_residuals(d, 0.3)
        npt.assert_allclose(res.mu_r, res.mu_r.conj().T, atol=1e-13)

    def test_gauge_equivariance(self):
        rng = np.random.default_rng(2)
        N, k, eta = 3, 2, 0.8
        d = rand_data(N, k, rng)
        g = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
        u, _ = np.linalg.qr(g)
        moved = ADHMData(
            N, k, u @ d.alpha @ u.conj().T, u @ d.beta @ u.conj().T, u @ d.a, d.b @ u.conj().T
        )
        res = adhm_residuals(d, eta)
        res_m = adhm_residuals(moved, eta)
        npt.assert_allclose(res_m.mu_c, u @ res.mu_c @ u.conj().T, atol=1e-12)
        npt.assert_allclose(res_m.mu_r, u @ res.mu_r @ u.conj().T, atol=1e-12)
        assert abs(res_m.sup_c - res.sup_c) <= 1e-12 * max(1.0, res.sup_c)
        assert abs(res_m.sup_r - res.sup_r) <= 1e-12 * max(1.0, res.sup_r)

    def test_bad_inputs(self):
        rng = np.random.default_rng(3)
        d = rand_data(2, 1, rng)
        with pytest.raises(ValidationError):
            adhm_residuals(d, float("inf"))
        with pytest.raises(ValidationError):
            adhm_residuals("nope", 1.0)


class TestSolveAdhm:
    def test_eta_zero_redirects(self):
        with pytest.raises(ValidationError, match="solve_metric"):
            solve_adhm(1, 1, 0.0, seed=0)

    def test_rank_one_closed_form(self):
        sol = solve_adhm(1, 1, 1.0, seed=0)
        assert abs(abs(sol.b[0, 0]) ** 2 - 1.0) <= 1e-8
        assert abs(sol.a[0, 0]) <= 1e-8
        assert stabilizer_dimension(sol) == 0

    def test_negative_eta_mirror(self):
        # Flipping the sign exchanges the roles of a and b in rank 1.
        sol = solve_adhm(1, 1, -1.0, seed=1)
        assert abs(abs(sol.a[0, 0]) ** 2 - 1.0) <= 1e-8
        assert abs(sol.b[0, 0]) <= 1e-8

    def test_small_grid_residuals_and_freeness(self):
        for N in (2, 3):
            for k in (1, 2):
                sol = solve_adhm(N, k, 1.0, seed=10 * N + k)
                res = adhm_residuals(sol, 1.0)
                assert res.sup_c <= 1e-9
                assert res.sup_r <= 1e-9
                assert res.trace_defect < 1e-12
                assert stabilizer_dimension(sol) == 0

    def test_seed_determinism(self):
        s1 = solve_adhm(2, 1, 1.0, seed=42)
        s2 = solve_adhm(2, 1, 1.0, seed=42)
        npt.assert_array_equal(s1.alpha, s2.alpha)
        npt.assert_array_equal(s1.b, s2.b)

    def test_nonconvergence_carries_best_residuals(self):
        with pytest.raises(SolverError) as err:
            solve_adhm(3, 2, 1.0, seed=0, opts=SolveOptions(max_iters=2))
        assert "best_sup_c" in err.value.details
        assert "best_sup_r" in err.value.details
        assert np.isfinite(err.value.details["best_sup_r"])

    def test_vertex_two_block_automatic(self):
        # Embedded as a quiver representation with the slope-balancing
        # stability parameter, the King residual at the collapsed vertex
        # vanishes whenever the big block does.
        for N, k, seed in ((2, 1, 5), (3, 2, 6)):
            eta = 1.0
            sol = solve_adhm(N, k, eta, seed=seed)
            rep = embed_as_representation(sol)
            metric = {"1": np.eye(N), "2": np.eye(1)}
            eta_king = {"1": eta, "2": -eta * N}
            res = king_residual(rep, metric, eta_king)
            npt.assert_allclose(
                res.blocks["1"], adhm_residuals(sol, eta).mu_r, atol=1e-12
            )
            assert res.blocks["2"].shape == (1, 1)
            assert abs(res.blocks["2"][0, 0]) <= 1e-9

    def test_validation(self):
        with pytest.raises(ValidationError):
            solve_adhm(0, 1, 1.0)
        with pytest.raises(ValidationError):
            solve_adhm(1, 1, float("nan"))


class TestStabilizerDimension:
    def test_zero_data_full_algebra(self):
        for N in (1, 2, 3):
            d = ADHMData(
                N, 1, np.zeros((N, N)), np.zeros((N, N)), np.zeros((N, 1)), np.zeros((1, N))
            )
            assert stabilizer_dimension(d) == N * N

    def test_scalar_unit_b_is_free(self):
        d = ADHMData(
            1, 1, np.array([[0.3]]), np.array([[1.2j]]), np.array([[0.0]]), np.array([[1.0]])
        )
        assert stabilizer_dimension(d) == 0

    def test_block_scalars_stabilized_by_diagonal(self):
        # alpha = beta = 0 and a, b supported on the first coordinate leave
        # the u(1) factor on the second coordinate unbroken.
        d = ADHMData(
            2,
            1,
            np.zeros((2, 2)),
            np.zeros((2, 2)),
            np.array([[1.0], [0.0]]),
            np.array([[1.0, 0.0]]),
        )
        # stabilizer: anti-Hermitian u with u a = 0 and b u = 0 and [u, 0] = 0
        # -> u = diag(0, it): one real dimension.
        assert stabilizer_dimension(d) == 1

    def test_type_checked(self):
        with pytest.raises(ValidationError):
            stabilizer_dimension(object())


class TestJsonRoundTrip:
    def test_round_trip(self):
        rng = np.random.default_rng(4)
        d = rand_data(2, 2, rng)
        back, eta = adhm_from_json(adhm_to_json(d, -0.5))
        assert eta == -0.5
        npt.assert_array_equal(back.alpha, d.alpha)
        npt.assert_array_equal(back.beta, d.beta)
        npt.assert_array_equal(back.a, d.a)
        npt.assert_array_equal(back.b, d.b)

    def test_missing_key_rejected(self):
        with pytest.raises(ValidationError, match="missing"):
            adhm_from_json('{"N": 1, "k": 1}')

    def test_bad_payloads_rejected(self):
        with pytest.raises(ValidationError):
            adhm_from_json("not json")
        with pytest.raises(ValidationError):
            adhm_from_json("[1, 2]")
        with pytest.raises(ValidationError):
            adhm_from_json(
                '{"N": 0, "k": 1, "eta": 1.0, "alpha": [], "beta": [], "a": [], "b": []}'
            )

"""Tests for the dense Hermitian linear-algebra primitives."""

import numpy as np
import numpy.testing as npt
import pytest

from momentmap.errors import ValidationError
from momentmap.linalg import (
    as_complex_matrix,
    as_hermitian,
    as_positive_definite,
    frechet_exp,
    frobenius_norm,
    hermitian_basis,
    hermitian_exp,
    hermitian_log,
    metric_adjoint,
    sup_norm,
)


def random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (a + a.conj().T)


class TestConstructors:
    def test_rejects_non_2d(self):
        with pytest.raises(ValidationError):
            as_complex_matrix([1.0, 2.0])

    def test_rejects_nan(self):
        with pytest.raises(ValidationError):
            as_complex_matrix([[np.nan, 0.0], [0.0, 1.0]])

    def test_rejects_inf(self):
        with pytest.raises(ValidationError):
            as_complex_matrix([[0.0, 1j * np.inf], [0.0, 1.0]])

    def test_hermitian_rejects_asymmetric(self):
        with pytest.raises(ValidationError):
            as_hermitian([[0.0, 1.0], [0.0, 0.0]])

    def test_hermitian_symmetrizes_exactly(self):
        rng = np.random.default_rng(0)
        a = random_hermitian(rng, 4)
        a[0, 1] += 1e-14  # below tolerance
        h = as_hermitian(a)
        npt.assert_array_equal(h, h.conj().T)

    def test_positive_definite_rejects_semidefinite(self):
        with pytest.raises(ValidationError):
            as_positive_definite([[1.0, 0.0], [0.0, 0.0]])

    def test_positive_definite_rejects_negative(self):
        with pytest.raises(ValidationError):
            as_positive_definite([[1.0, 0.0], [0.0, -2.0]])

    def test_norms_on_empty(self):
        e = np.zeros((0, 0))
        assert sup_norm(e) == 0.0
        assert frobenius_norm(e) == 0.0


class TestExpLog:
    def test_exp_zero_is_identity(self):
        npt.assert_allclose(hermitian_exp(np.zeros((2, 2))), np.eye(2), atol=1e-15)

    def test_exp_diagonal(self):
        s = np.diag([np.log(2.0), np.log(3.0)]).astype(complex)
        npt.assert_allclose(hermitian_exp(s), np.diag([2.0, 3.0]), rtol=1e-14)

    def test_log_identity_is_zero(self):
        npt.assert_allclose(hermitian_log(np.eye(3)), np.zeros((3, 3)), atol=1e-15)

    def test_log_diagonal(self):
        npt.assert_allclose(
            hermitian_log(np.diag([2.0, 3.0])),
            np.diag([np.log(2.0), np.log(3.0)]),
            rtol=1e-14,
        )

    def test_exp_inverse_identity(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            s = random_hermitian(rng, 5)
            p = hermitian_exp(s) @ hermitian_exp(-s)
            npt.assert_allclose(p, np.eye(5), atol=1e-12)

    def test_exp_output_positive_definite(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            s = random_hermitian(rng, 4, scale=3.0)
            w = np.linalg.eigvalsh(hermitian_exp(s))
            assert w[0] > 0

    def test_roundtrip(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            s = random_hermitian(rng, 4)
            h = hermitian_exp(s)
            npt.assert_allclose(hermitian_log(h), s, atol=1e-10 * max(1.0, sup_norm(s)))


class TestMetricAdjoint:
    def test_identity_metrics_give_conjugate_transpose(self):
        rng = np.random.default_rng(10)
        t = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        adj = metric_adjoint(t, np.eye(2), np.eye(3))
        npt.assert_allclose(adj, t.conj().T, atol=1e-15)

    def test_diagonal_metric_example(self):
        # h_src^-1 T^dagger h_dst = diag(1, 1/4) E21 diag(1, 4): entry (2,1) = 1/4.
        t = np.array([[0.0, 1.0], [0.0, 0.0]])
        h = np.diag([1.0, 4.0])
        adj = metric_adjoint(t, h, h)
        npt.assert_allclose(adj, np.array([[0.0, 0.0], [0.25, 0.0]]), atol=1e-15)

    def test_pairing_identity(self):
        # <T x, y>_{h_dst} = <x, adj y>_{h_src} with <x,y>_h = y^dagger h x.
        rng = np.random.default_rng(11)
        for _ in range(30):
            d_src, d_dst = rng.integers(1, 5, size=2)
            t = rng.standard_normal((d_dst, d_src)) + 1j * rng.standard_normal((d_dst, d_src))
            h_src = make_pd(rng, d_src)
            h_dst = make_pd(rng, d_dst)
            adj = metric_adjoint(t, h_src, h_dst)
            x = rng.standard_normal(d_src) + 1j * rng.standard_normal(d_src)
            y = rng.standard_normal(d_dst) + 1j * rng.standard_normal(d_dst)
            lhs = y.conj() @ h_dst @ (t @ x)
            rhs = (adj @ y).conj() @ h_src @ x
            assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))

    def test_anti_homomorphism(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            d1, d2, d3 = rng.integers(1, 5, size=3)
            t = rng.standard_normal((d2, d1)) + 1j * rng.standard_normal((d2, d1))
            s = rng.standard_normal((d3, d2)) + 1j * rng.standard_normal((d3, d2))
            h1, h2, h3 = make_pd(rng, d1), make_pd(rng, d2), make_pd(rng, d3)
            lhs = metric_adjoint(s @ t, h1, h3)
            rhs = metric_adjoint(t, h1, h2) @ metric_adjoint(s, h2, h3)
            npt.assert_allclose(lhs, rhs, atol=1e-12 * max(1.0, sup_norm(lhs)))

    def test_double_adjoint(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            d_src, d_dst = rng.integers(1, 6, size=2)
            t = rng.standard_normal((d_dst, d_src)) + 1j * rng.standard_normal((d_dst, d_src))
            h_src = make_pd(rng, d_src)
            h_dst = make_pd(rng, d_dst)
            back = metric_adjoint(metric_adjoint(t, h_src, h_dst), h_dst, h_src)
            npt.assert_allclose(back, t, atol=1e-12 * max(1.0, sup_norm(t)))

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            metric_adjoint(np.zeros((2, 3)), np.eye(2), np.eye(2))


def make_pd(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a @ a.conj().T + n * np.eye(n)


class TestFrechetExp:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(14)
        eps = 1e-6
        for _ in range(15):
            n = int(rng.integers(1, 5))
            s = random_hermitian(rng, n)
            x = random_hermitian(rng, n)
            d = frechet_exp(s, x)
            fd = (hermitian_exp(s + eps * x) - hermitian_exp(s - eps * x)) / (2 * eps)
            npt.assert_allclose(d, fd, atol=1e-7 * max(1.0, sup_norm(d)))

    def test_commuting_case(self):
        # At a diagonal base point with a diagonal direction, the derivative
        # is exp(s) x.
        s = np.diag([0.3, -1.2]).astype(complex)
        x = np.diag([2.0, 5.0]).astype(complex)
        npt.assert_allclose(frechet_exp(s, x), hermitian_exp(s) @ x, rtol=1e-12)

    def test_trace_self_adjoint(self):
        rng = np.random.default_rng(15)
        for _ in range(20):
            n = int(rng.integers(1, 5))
            s = random_hermitian(rng, n)
            x = random_hermitian(rng, n)
            y = random_hermitian(rng, n)
            lhs = np.trace(y @ frechet_exp(s, x))
            rhs = np.trace(frechet_exp(s, y) @ x)
            assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))

    def test_degenerate_eigenvalues(self):
        # Repeated eigenvalues exercise the sinch limit.
        s = np.zeros((3, 3), dtype=complex)
        rng = np.random.default_rng(16)
        x = random_hermitian(rng, 3)
        npt.assert_allclose(frechet_exp(s, x), x, atol=1e-13)


class TestHermitianBasis:
    def test_orthonormal_and_complete(self):
        n = 3
        basis = hermitian_basis(n)
        assert len(basis) == n * n
        for i, a in enumerate(basis):
            npt.assert_allclose(a, a.conj().T, atol=1e-15)
            for j, b in enumerate(basis):
                ip = np.real(np.trace(a @ b))
                npt.assert_allclose(ip, 1.0 if i == j else 0.0, atol=1e-14)

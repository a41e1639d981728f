"""Dense complex linear-algebra primitives shared by all solvers.

Validated constructors for complex/Hermitian/positive-definite matrices,
spectral exponential and logarithm, metric-dependent adjoints, and the
directional derivative of the Hermitian matrix exponential.

Conventions
-----------
Vectors are columns; an arrow matrix of shape (d_dst, d_src) maps the source
space into the target space.  Inner products are ``<x, y>_h = y^dagger h x``
(linear in the first slot, conjugate-linear in the second).
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ValidationError

__all__ = [
    "as_complex_matrix",
    "as_hermitian",
    "as_positive_definite",
    "sup_norm",
    "frobenius_norm",
    "hermitian_part",
    "hermitian_exp",
    "hermitian_log",
    "metric_adjoint",
    "frechet_exp",
    "hermitian_basis",
]

#: Relative tolerance for Hermitian-symmetry and positive-definiteness checks.
DEFAULT_TOL = 1e-12


def as_complex_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-d complex128 array.

    Parameters
    ----------
    a : array_like
        Anything numpy can turn into a two-dimensional array.
    name : str
        Label used in error messages.

    Returns
    -------
    numpy.ndarray
        A fresh ``complex128`` array of dimension 2.

    Raises
    ------
    ValidationError
        If the array is not 2-d or contains NaN/Inf entries.
    """
    try:
        arr = np.array(a, dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name}: not convertible to a complex matrix: {exc}") from exc
    if arr.ndim != 2:
        raise ValidationError(f"{name}: expected a 2-d array, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr.view(np.float64))):
        raise ValidationError(f"{name}: non-finite entries")
    return arr


def sup_norm(a) -> float:
    """Operator (spectral) norm; 0.0 for empty matrices."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.size == 0:
        return 0.0
    return float(np.linalg.norm(arr, 2))


def frobenius_norm(a) -> float:
    """Frobenius norm; 0.0 for empty matrices."""
    arr = np.asarray(a, dtype=np.complex128)
    return float(np.linalg.norm(arr)) if arr.size else 0.0


def hermitian_part(a) -> np.ndarray:
    """Return ``(a + a^dagger)/2``."""
    arr = as_complex_matrix(a)
    return 0.5 * (arr + arr.conj().T)


def as_hermitian(a, tol: float = DEFAULT_TOL, name: str = "matrix") -> np.ndarray:
    """Validate Hermitian symmetry (relative tolerance) and symmetrize exactly.

    Raises
    ------
    ValidationError
        If ``a`` is not square or deviates from its conjugate transpose by more
        than ``tol`` relative to its size.
    """
    arr = as_complex_matrix(a, name=name)
    n, m = arr.shape
    if n != m:
        raise ValidationError(f"{name}: expected a square matrix, got shape {arr.shape}")
    if n == 0:
        return arr
    defect = sup_norm(arr - arr.conj().T)
    if defect > tol * max(1.0, sup_norm(arr)):
        raise ValidationError(f"{name}: not Hermitian (defect {defect:.3e})")
    return hermitian_part(arr)


def as_positive_definite(a, tol: float = DEFAULT_TOL, name: str = "metric") -> np.ndarray:
    """Validate that ``a`` is Hermitian positive-definite.

    The smallest eigenvalue must exceed ``tol`` times the largest magnitude
    eigenvalue (relative check, matching the constructor tolerance).
    """
    h = as_hermitian(a, tol=tol, name=name)
    if h.shape[0] == 0:
        return h
    w = np.linalg.eigvalsh(h)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w[0] <= tol * scale:
        raise ValidationError(
            f"{name}: not positive-definite (smallest eigenvalue {w[0]:.6e})"
        )
    return h


def hermitian_exp(s, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Matrix exponential of a Hermitian matrix via unitary eigendecomposition.

    Returns a Hermitian positive-definite matrix.

    Raises
    ------
    NumericError
        If the eigendecomposition fails to converge or the result overflows.
    """
    h = as_hermitian(s, tol=tol, name="exponent")
    if h.shape[0] == 0:
        return h
    try:
        w, u = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    ew = np.exp(w)
    if not np.all(np.isfinite(ew)):
        raise NumericError("matrix exponential overflowed")
    out = (u * ew) @ u.conj().T
    return hermitian_part(out)


def hermitian_log(h, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Matrix logarithm of a Hermitian positive-definite matrix.

    Inverse of :func:`hermitian_exp` on its range to ~1e-10 relative.

    Raises
    ------
    ValidationError
        If ``h`` has a non-positive eigenvalue.
    """
    pd = as_positive_definite(h, tol=tol, name="metric")
    if pd.shape[0] == 0:
        return pd
    w, u = np.linalg.eigh(pd)
    out = (u * np.log(w)) @ u.conj().T
    return hermitian_part(out)


def metric_adjoint(t, h_src, h_dst) -> np.ndarray:
    """Adjoint of ``t`` with respect to vertex metrics: ``h_src^-1 t^dagger h_dst``.

    For ``t`` of shape (d_dst, d_src) and metrics ``h_src`` (d_src square),
    ``h_dst`` (d_dst square), the result has shape (d_src, d_dst) and satisfies
    ``<t x, y>_{h_dst} = <x, adj y>_{h_src}`` with ``<x,y>_h = y^dagger h x``.

    Raises
    ------
    ValidationError
        On dimension mismatch.
    """
    tm = as_complex_matrix(t, name="arrow matrix")
    hs = as_complex_matrix(h_src, name="source metric")
    hd = as_complex_matrix(h_dst, name="target metric")
    d_dst, d_src = tm.shape
    if hs.shape != (d_src, d_src) or hd.shape != (d_dst, d_dst):
        raise ValidationError(
            f"metric_adjoint: shape mismatch, T {tm.shape}, "
            f"h_src {hs.shape}, h_dst {hd.shape}"
        )
    if d_src == 0 or d_dst == 0:
        return np.zeros((d_src, d_dst), dtype=np.complex128)
    return np.linalg.solve(hs, tm.conj().T @ hd)


def _sinch(x: np.ndarray) -> np.ndarray:
    """Entrywise sinh(x)/x, analytic continuation 1 at x = 0."""
    out = np.ones_like(x)
    small = np.abs(x) < 1e-5
    xs = np.where(small, 1.0, x)
    out = np.where(small, 1.0 + x * x / 6.0, np.sinh(xs) / xs)
    return out


def frechet_exp(s, x) -> np.ndarray:
    """Directional derivative of the matrix exponential at Hermitian ``s``.

    Computes ``d/dt exp(s + t x)`` at ``t = 0`` in the eigenbasis of ``s``:
    the divided-difference kernel ``(e^a - e^b)/(a - b)`` is evaluated stably
    as ``exp((a+b)/2) * sinch((a-b)/2)``.

    The direction ``x`` must be Hermitian; the result is Hermitian, and the
    map is self-adjoint for the trace pairing:
    ``tr(y frechet_exp(s, x)) = tr(frechet_exp(s, y) x)``.
    """
    hs = as_hermitian(s, name="base point")
    hx = as_hermitian(x, name="direction")
    if hs.shape != hx.shape:
        raise ValidationError(
            f"frechet_exp: shape mismatch {hs.shape} vs {hx.shape}"
        )
    if hs.shape[0] == 0:
        return hs
    w, u = np.linalg.eigh(hs)
    diff = w[:, None] - w[None, :]
    avg = 0.5 * (w[:, None] + w[None, :])
    kernel = np.exp(avg) * _sinch(0.5 * diff)
    xt = u.conj().T @ hx @ u
    return hermitian_part(u @ (kernel * xt) @ u.conj().T)


def hermitian_basis(n: int) -> list[np.ndarray]:
    """Orthonormal real basis of n x n Hermitian matrices (trace pairing).

    Returns the n^2 matrices E_jj, (E_jk + E_kj)/sqrt(2), i(E_jk - E_kj)/sqrt(2)
    for j < k, orthonormal under ``(a, b) -> Re tr(a b)``.
    """
    basis = []
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for j in range(n):
        e = np.zeros((n, n), dtype=np.complex128)
        e[j, j] = 1.0
        basis.append(e)
    for j in range(n):
        for k in range(j + 1, n):
            e = np.zeros((n, n), dtype=np.complex128)
            e[j, k] = inv_sqrt2
            e[k, j] = inv_sqrt2
            basis.append(e)
            f = np.zeros((n, n), dtype=np.complex128)
            f[j, k] = 1j * inv_sqrt2
            f[k, j] = -1j * inv_sqrt2
            basis.append(f)
    return basis

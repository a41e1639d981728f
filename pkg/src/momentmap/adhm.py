"""Deformed ADHM equations: data model, residuals, solver, and the
stabilizer certificate.

ADHM data of size ``(N, k)`` consists of ``alpha, beta`` acting on the
N-dimensional framing fibre, ``a`` mapping the k-dimensional fibre in
(``N x k``) and ``b`` mapping out (``k x N``).  The two moment equations are

    mu_C  =  [alpha, beta] + a b                      (complex equation)
    mu_R  =  [alpha^dagger, alpha] + [beta^dagger, beta]
             + b^dagger b - a a^dagger - eta Id       (real equation),

the deformed system being ``mu_C = 0, mu_R = 0`` with ``eta != 0``.  The data
embeds as a representation of a two-vertex quiver (two loops at vertex 1,
``k`` arrow pairs to and from vertex 2) whose King residual at vertex 1 is
exactly ``mu_R``; the vertex-2 residual is then automatic by the trace
identity ``tr(mu_R + eta Id) = tr(b^dagger b) - tr(a a^dagger)``.

The deformed system is solved by gradient descent with backtracking on the
merged least-squares objective ``|mu_C|_F^2 + |mu_R|_F^2`` from a seeded
random start; positive ``eta`` forces ``b`` over ``a`` in the rank-1 case.
Nondegeneracy of a solution is certified by :func:`stabilizer_dimension`,
the real nullity of the linearized U(N)-action.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConsistencyError, SolverError, ValidationError
from .linalg import as_complex_matrix, hermitian_basis, sup_norm
from .quiver import Arrow, Quiver, matrix_from_json, matrix_to_json
from .solver import SolveOptions

__all__ = [
    "ADHMData",
    "ADHMResiduals",
    "build_adhm_quiver",
    "adhm_residuals",
    "solve_adhm",
    "stabilizer_dimension",
    "adhm_to_json",
    "adhm_from_json",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ADHMData:
    """Matrices ``(alpha, beta, a, b)`` of size ``(N, k)``.

    Attributes
    ----------
    N, k : int
        Framing dimension and instanton number, both >= 1.
    alpha, beta : ndarray
        ``N x N`` complex matrices.
    a : ndarray
        ``N x k`` complex matrix (columns map the small fibre in).
    b : ndarray
        ``k x N`` complex matrix (rows map out to the small fibre).
    """

    N: int
    k: int
    alpha: np.ndarray
    beta: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        n, k = self.N, self.k
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
            raise ValidationError(f"N must be an integer >= 1, got {n!r}")
        if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 1:
            raise ValidationError(f"k must be an integer >= 1, got {k!r}")
        object.__setattr__(self, "N", int(n))
        object.__setattr__(self, "k", int(k))
        for name, mat, shape in (
            ("alpha", self.alpha, (n, n)),
            ("beta", self.beta, (n, n)),
            ("a", self.a, (n, k)),
            ("b", self.b, (k, n)),
        ):
            m = as_complex_matrix(mat, name=name)
            if m.shape != shape:
                raise ValidationError(f"{name}: shape {m.shape} != expected {shape}")
            object.__setattr__(self, name, m)


@dataclass(frozen=True)
class ADHMResiduals:
    """Residual matrices of the two moment equations with scalar summaries.

    Attributes
    ----------
    mu_c : ndarray
        ``[alpha, beta] + a b``.
    mu_r : ndarray
        ``[alpha^dagger, alpha] + [beta^dagger, beta] + b^dagger b
        - a a^dagger - eta Id`` (Hermitian).
    sup_c, sup_r : float
        Operator norms of the residuals.
    trace_defect : float
        ``|tr(mu_r + eta Id) - (tr(b^dagger b) - tr(a a^dagger))|`` computed
        along two independent routes; vanishes identically because commutator
        traces cancel.
    """

    mu_c: np.ndarray
    mu_r: np.ndarray
    sup_c: float
    sup_r: float
    trace_defect: float


def build_adhm_quiver(k: int) -> Quiver:
    """Two-vertex quiver with loops ``alpha, beta`` at vertex ``"1"`` and
    ``k`` arrow pairs ``a_i: 2 -> 1``, ``b_i: 1 -> 2``.

    Raises
    ------
    ValidationError
        If ``k < 1``.
    """
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 1:
        raise ValidationError(f"k must be an integer >= 1, got {k!r}")
    arrows = [Arrow("alpha", "1", "1"), Arrow("beta", "1", "1")]
    arrows += [Arrow(f"a{i}", "2", "1") for i in range(1, k + 1)]
    arrows += [Arrow(f"b{i}", "1", "2") for i in range(1, k + 1)]
    return Quiver(("1", "2"), tuple(arrows))


def _moments(d: ADHMData, eta: float):
    al, be, a, b = d.alpha, d.beta, d.a, d.b
    mu_c = al @ be - be @ al + a @ b
    mu_r = (
        al.conj().T @ al
        - al @ al.conj().T
        + be.conj().T @ be
        - be @ be.conj().T
        + b.conj().T @ b
        - a @ a.conj().T
        - eta * np.eye(d.N)
    )
    return mu_c, mu_r


def adhm_residuals(d: ADHMData, eta: float) -> ADHMResiduals:
    """Evaluate both moment equations at the given data.

    With ``eta = 0`` this reproduces the undeformed system.  The returned
    ``mu_r`` is checked Hermitian and the trace identity is verified along
    two routes; a violation (impossible short of numerical catastrophe)
    raises :class:`ConsistencyError`.
    """
    if not isinstance(d, ADHMData):
        raise ValidationError(f"expected ADHMData, got {type(d).__name__}")
    eta = float(eta)
    if not np.isfinite(eta):
        raise ValidationError("eta must be finite")
    mu_c, mu_r = _moments(d, eta)

    herm_defect = sup_norm(mu_r - mu_r.conj().T)
    if herm_defect > 1e-12 * max(1.0, sup_norm(mu_r)):
        raise ConsistencyError(
            f"real residual lost Hermiticity (defect {herm_defect:.3e})"
        )
    route_a = float(np.trace(mu_r).real) + eta * d.N
    route_b = float((np.trace(d.b.conj().T @ d.b) - np.trace(d.a @ d.a.conj().T)).real)
    trace_defect = abs(route_a - route_b)
    scale = max(1.0, abs(route_a), abs(route_b))
    if trace_defect > 1e-12 * scale:
        raise ConsistencyError(
            f"trace identity violated: {route_a!r} vs {route_b!r}"
        )
    return ADHMResiduals(
        mu_c=mu_c,
        mu_r=mu_r,
        sup_c=sup_norm(mu_c),
        sup_r=sup_norm(mu_r),
        trace_defect=trace_defect,
    )


def _objective(d: ADHMData, eta: float):
    mu_c, mu_r = _moments(d, eta)
    value = float(np.sum(np.abs(mu_c) ** 2) + np.sum(np.abs(mu_r) ** 2))
    return value, mu_c, mu_r


def _gradients(d: ADHMData, mu_c: np.ndarray, mu_r: np.ndarray):
    """Conjugate-coordinate gradients of the merged objective.

    The first-order expansion is ``df = 2 Re sum tr(G_x^dagger dx)`` over the
    four matrix blocks, so ``-G`` is the steepest-descent direction.
    """
    al, be, a, b = d.alpha, d.beta, d.a, d.b
    g_al = (mu_c @ be.conj().T - be.conj().T @ mu_c) + 2.0 * (al @ mu_r - mu_r @ al)
    g_be = (al.conj().T @ mu_c - mu_c @ al.conj().T) + 2.0 * (be @ mu_r - mu_r @ be)
    g_a = mu_c @ b.conj().T - 2.0 * mu_r @ a
    g_b = a.conj().T @ mu_c + 2.0 * b @ mu_r
    return g_al, g_be, g_a, g_b


def _pack(mats) -> np.ndarray:
    return np.concatenate([m.ravel() for m in mats])


def _solve_once(
    N: int, k: int, eta: float, rng: np.random.Generator, opts: SolveOptions
):
    """One gradient-descent run from a random start; returns
    ``(data, residuals)`` on success, or ``(None, best)`` on stall."""

    def rand(shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    scale = max(1.0, abs(eta)) ** 0.5
    mats = [
        0.5 * scale * rand((N, N)),
        0.5 * scale * rand((N, N)),
        0.5 * scale * rand((N, k)),
        0.5 * scale * rand((k, N)),
    ]

    def data_of(ms):
        return ADHMData(N, k, ms[0], ms[1], ms[2], ms[3])

    d = data_of(mats)
    value, mu_c, mu_r = _objective(d, eta)
    grads = _gradients(d, mu_c, mu_r)
    best = (sup_norm(mu_c), sup_norm(mu_r))
    prev_mats = prev_grads = None

    for _ in range(opts.max_iters):
        sup_c, sup_r = sup_norm(mu_c), sup_norm(mu_r)
        if max(sup_c, sup_r) < max(best):
            best = (sup_c, sup_r)
        if sup_c <= opts.tol and sup_r <= opts.tol:
            return data_of(mats), adhm_residuals(data_of(mats), eta)

        gnorm2 = float(sum(np.sum(np.abs(g) ** 2) for g in grads))
        if gnorm2 == 0.0:
            break
        if prev_mats is None:
            alpha = 1.0 / max(1.0, gnorm2**0.5)
        else:
            dx = _pack(mats) - _pack(prev_mats)
            dg = _pack(grads) - _pack(prev_grads)
            den = float(np.real(np.vdot(dx, dg)))
            alpha = (
                float(np.real(np.vdot(dx, dx))) / den
                if den > 0
                else 1.0 / max(1.0, gnorm2**0.5)
            )
        deriv = -2.0 * gnorm2
        accepted = None
        while alpha > 1e-18:
            trial = [m - alpha * g for m, g in zip(mats, grads)]
            t_value, t_mu_c, t_mu_r = _objective(data_of(trial), eta)
            if np.isfinite(t_value) and t_value <= value + opts.armijo_c * alpha * deriv:
                accepted = (trial, t_value, t_mu_c, t_mu_r)
                break
            alpha *= opts.backtrack
        if accepted is None:
            break
        prev_mats, prev_grads = mats, grads
        mats, value, mu_c, mu_r = accepted
        d = data_of(mats)
        grads = _gradients(d, mu_c, mu_r)
    return None, best


def solve_adhm(
    N: int,
    k: int,
    eta: float,
    seed: int = 0,
    opts: Optional[SolveOptions] = None,
) -> ADHMData:
    """Solve the deformed system ``mu_C = 0, mu_R = 0`` with ``eta != 0``.

    Minimizes the merged objective ``|mu_C|_F^2 + |mu_R|_F^2`` by gradient
    descent with backtracking from a seeded random start (restarting from
    fresh draws if a run stalls) until both residual sup norms fall below
    ``opts.tol``; the returned data is re-verified through
    :func:`adhm_residuals`.

    Raises
    ------
    ValidationError
        If ``eta = 0`` — the undeformed problem is King's equation for the
        embedded quiver representation and belongs to the metric solver,
        whose output must then be checked for nondegeneracy separately.
    SolverError
        If no run converges within ``opts.max_iters``; carries the best
        residual pair in ``details``.
    """
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool) or N < 1:
        raise ValidationError(f"N must be an integer >= 1, got {N!r}")
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 1:
        raise ValidationError(f"k must be an integer >= 1, got {k!r}")
    eta = float(eta)
    if not np.isfinite(eta):
        raise ValidationError("eta must be finite")
    if eta == 0.0:
        raise ValidationError(
            "eta = 0 is the undeformed system: solve it as King's equation "
            "via solve_metric on the embedded quiver representation and "
            "check stabilizer_dimension on the result"
        )
    if opts is None:
        opts = SolveOptions()
    rng = np.random.default_rng(seed)
    best = (np.inf, np.inf)
    restarts = 5
    for attempt in range(restarts):
        data, outcome = _solve_once(int(N), int(k), eta, rng, opts)
        if data is not None:
            logger.info(
                "deformed system solved: N=%d k=%d eta=%g attempt=%d", N, k, eta, attempt
            )
            return data
        best = min(best, outcome)
    raise SolverError(
        f"no convergence to tol={opts.tol} within {opts.max_iters} iterations "
        f"({restarts} starts)",
        details={"best_sup_c": best[0], "best_sup_r": best[1]},
    )


def stabilizer_dimension(d: ADHMData) -> int:
    """Real dimension of the Lie-algebra stabilizer of the data under U(N).

    The linearized action sends an anti-Hermitian ``u`` to
    ``([u, alpha], [u, beta], u a, -b u)``; the stabilizer dimension is the
    real nullity of this map (singular values below ``1e-9`` of the largest).
    Zero certifies a free U(N)-action at the data.
    """
    if not isinstance(d, ADHMData):
        raise ValidationError(f"expected ADHMData, got {type(d).__name__}")
    n = d.N
    cols = []
    for h in hermitian_basis(n):
        u = 1j * h
        image = [
            u @ d.alpha - d.alpha @ u,
            u @ d.beta - d.beta @ u,
            u @ d.a,
            -d.b @ u,
        ]
        vec = _pack(image)
        cols.append(np.concatenate([vec.real, vec.imag]))
    m = np.array(cols).T
    if m.size == 0 or not np.any(m):
        return n * n
    sigma = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(sigma < 1e-9 * sigma[0]))


def adhm_to_json(d: ADHMData, eta: float) -> str:
    """Serialize data and deformation parameter to the problem JSON form."""
    obj = {
        "N": d.N,
        "k": d.k,
        "eta": float(eta),
        "alpha": matrix_to_json(d.alpha),
        "beta": matrix_to_json(d.beta),
        "a": matrix_to_json(d.a),
        "b": matrix_to_json(d.b),
    }
    return json.dumps(obj, sort_keys=True)


def adhm_from_json(text: str):
    """Parse the problem JSON form; returns ``(ADHMData, eta)``."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValidationError("problem JSON must be an object")
    missing = {"N", "k", "eta", "alpha", "beta", "a", "b"} - set(obj)
    if missing:
        raise ValidationError(f"problem JSON missing keys {sorted(missing)}")
    n, k = obj["N"], obj["k"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ValidationError(f"N must be an integer >= 1, got {n!r}")
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise ValidationError(f"k must be an integer >= 1, got {k!r}")
    data = ADHMData(
        n,
        k,
        matrix_from_json(obj["alpha"], (n, n), name="alpha"),
        matrix_from_json(obj["beta"], (n, n), name="beta"),
        matrix_from_json(obj["a"], (n, k), name="a"),
        matrix_from_json(obj["b"], (k, n), name="b"),
    )
    eta = float(obj["eta"])
    if not np.isfinite(eta):
        raise ValidationError("eta must be finite")
    return data, eta

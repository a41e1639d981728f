"""King's equation residual, the Kempf-Ness functional, and Hamiltonian
reformulations of the moment-map condition on quiver representations.

Conventions
-----------
Arrow matrices act on column vectors, ``T_a: E_{s(a)} -> E_{t(a)}``; the gauge
group acts on the left, ``T_a -> g_{t(a)} T_a g_{s(a)}^{-1}``, and its Lie
algebra acts by ``[A, u]_a = u_{t(a)} A_a - A_a u_{s(a)}``.  Metric adjoints
use ``T^{*h} = h_src^{-1} T^dagger h_dst``.  The per-vertex residual is

    mu_v  =  sum_{s(a)=v} w_a T_a^{*h} T_a  -  sum_{t(a)=v} w_a T_a T_a^{*h}
             -  eta_v Id,

whose zero set (over positive-definite metric families ``h_v = exp(s_v)``) is
the moment-map equation.  The Kempf-Ness functional

    D(s)  =  sum_a w_a tr(h_{s(a)}^{-1} T_a^dagger h_{t(a)} T_a)
             +  sum_v eta_v tr(s_v)

has gradient zero exactly at metrics where every ``mu_v`` vanishes (for the
trace pairing on Hermitian ``s``); its eta-term sign is fixed by that
criticality requirement.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .errors import ValidationError
from .linalg import (
    as_complex_matrix,
    as_hermitian,
    hermitian_exp,
    hermitian_part,
    metric_adjoint,
    sup_norm,
)
from .quiver import Quiver, Representation, validate_eta

__all__ = [
    "KahlerData",
    "MomentResidual",
    "identity_metric",
    "zero_displacement",
    "king_residual",
    "kempf_ness_value",
    "kempf_ness_gradient",
    "gauge_variation",
    "hamiltonian_trivial",
    "hamiltonian_projector",
    "poisson_bracket_check",
]


@dataclass(frozen=True)
class KahlerData:
    """Per-arrow positive weights ``w_a`` defining the Kahler pairing
    ``omega_0(B, conj C) = sum_a w_a tr(B_a C_a^dagger)``."""

    weights: Mapping[str, float]

    @staticmethod
    def ones(quiver: Quiver) -> "KahlerData":
        """Unit weights for every arrow (the default pairing)."""
        return KahlerData({a.name: 1.0 for a in quiver.arrows})


def _weights(quiver: Quiver, kahler: Optional[KahlerData]) -> dict[str, float]:
    if kahler is None:
        return {a.name: 1.0 for a in quiver.arrows}
    names = {a.name for a in quiver.arrows}
    if set(kahler.weights) != names:
        raise ValidationError(
            f"weight keys {sorted(kahler.weights)} != arrows {sorted(names)}"
        )
    out = {}
    for name in names:
        w = float(kahler.weights[name])
        if not np.isfinite(w) or w <= 0:
            raise ValidationError(f"weight for arrow {name!r} must be positive, got {w}")
        out[name] = w
    return out


def _check_vertex_family(
    rep: Representation, fam: Mapping[str, np.ndarray], name: str
) -> dict[str, np.ndarray]:
    """Validate a per-vertex square-matrix family against the dimension vector."""
    if set(fam) != set(rep.quiver.vertices):
        raise ValidationError(
            f"{name} keys {sorted(fam)} != vertices {sorted(rep.quiver.vertices)}"
        )
    out = {}
    for v in rep.quiver.vertices:
        m = as_complex_matrix(fam[v], name=f"{name}[{v!r}]")
        d = rep.dims[v]
        if m.shape != (d, d):
            raise ValidationError(
                f"{name}[{v!r}]: shape {m.shape} != expected {(d, d)}"
            )
        out[v] = m
    return out


def identity_metric(rep: Representation) -> dict[str, np.ndarray]:
    """Identity metric family for a representation's dimension vector."""
    return {v: np.eye(rep.dims[v], dtype=np.complex128) for v in rep.quiver.vertices}


def zero_displacement(rep: Representation) -> dict[str, np.ndarray]:
    """Zero logarithmic-metric family (``h = exp(0) = Id``)."""
    return {v: np.zeros((rep.dims[v], rep.dims[v]), dtype=np.complex128) for v in rep.quiver.vertices}


@dataclass(frozen=True)
class MomentResidual:
    """Per-vertex residual blocks with their scalar summaries.

    Attributes
    ----------
    blocks : dict
        Vertex -> residual matrix ``mu_v`` (self-adjoint for the metric
        ``h_v``, so its spectrum is real).
    sup : float
        Largest operator norm among the blocks.
    trace_sum : float
        ``sum_v Re tr(mu_v)``; equals ``-sum_v eta_v dim_v`` identically, so it
        vanishes for slope-balanced stability parameters.
    """

    blocks: Mapping[str, np.ndarray]
    sup: float
    trace_sum: float


def king_residual(
    rep: Representation,
    metric: Mapping[str, np.ndarray],
    eta: Mapping[str, float],
    kahler: Optional[KahlerData] = None,
) -> MomentResidual:
    """Evaluate the per-vertex moment-map residual at a metric family.

    ``metric[v]`` must be positive-definite of size ``dims[v]``.  The residual
    transforms equivariantly under unitary gauge (``mu -> g mu g^dagger`` when
    ``T -> g_t T g_s^dagger`` and ``h -> g h g^dagger``), and scales linearly
    when weights and eta are scaled together.
    """
    q = rep.quiver
    w = _weights(q, kahler)
    eta = validate_eta(q, eta)
    metric = _check_vertex_family(rep, metric, "metric")
    h = {}
    for v in q.vertices:
        m = as_hermitian(metric[v], name=f"metric[{v!r}]")
        # Strict positivity only: metrics produced by exp(s) can be extremely
        # ill-conditioned along near-divergent flows yet remain valid inputs.
        if m.size and np.linalg.eigvalsh(m)[0] <= 0:
            raise ValidationError(f"metric[{v!r}]: not positive-definite")
        h[v] = m

    blocks = {
        v: -eta[v] * np.eye(rep.dims[v], dtype=np.complex128) for v in q.vertices
    }
    for a in q.arrows:
        t = rep.matrices[a.name]
        if t.size == 0:
            continue
        adj = metric_adjoint(t, h[a.src], h[a.dst])
        blocks[a.src] = blocks[a.src] + w[a.name] * (adj @ t)
        blocks[a.dst] = blocks[a.dst] - w[a.name] * (t @ adj)
    sup = max((sup_norm(b) for b in blocks.values()), default=0.0)
    trace_sum = float(sum(np.trace(b).real for b in blocks.values()))
    return MomentResidual(blocks=blocks, sup=sup, trace_sum=trace_sum)


def _check_displacement(rep: Representation, s: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    fam = _check_vertex_family(rep, s, "displacement")
    return {v: as_hermitian(fam[v], name=f"displacement[{v!r}]") for v in fam}


def kempf_ness_value(
    rep: Representation,
    s: Mapping[str, np.ndarray],
    eta: Mapping[str, float],
    kahler: Optional[KahlerData] = None,
) -> float:
    """Kempf-Ness functional at the metric family ``h_v = exp(s_v)``.

    Evaluated stably as ``sum_a w_a || exp(s_t/2) T_a exp(-s_s/2) ||_F^2
    + sum_v eta_v tr(s_v)``.
    """
    q = rep.quiver
    w = _weights(q, kahler)
    eta = validate_eta(q, eta)
    s = _check_displacement(rep, s)
    half_pos = {v: hermitian_exp(0.5 * s[v]) for v in q.vertices}
    half_neg = {v: hermitian_exp(-0.5 * s[v]) for v in q.vertices}
    total = 0.0
    for a in q.arrows:
        t = rep.matrices[a.name]
        if t.size == 0:
            continue
        m = half_pos[a.dst] @ t @ half_neg[a.src]
        total += w[a.name] * float(np.linalg.norm(m) ** 2)
    for v in q.vertices:
        total += eta[v] * float(np.trace(s[v]).real)
    return total


def kempf_ness_gradient(
    rep: Representation,
    s: Mapping[str, np.ndarray],
    eta: Mapping[str, float],
    kahler: Optional[KahlerData] = None,
) -> dict[str, np.ndarray]:
    """Gradient of :func:`kempf_ness_value` for the pairing ``Re tr(G X)``.

    Per vertex,

        G_v = Dexp_{s_v}[P_v] - Dexp_{-s_v}[Q_v] + eta_v Id,

    with the positive-semidefinite accumulations ``P_v = sum_{t(a)=v} w_a T_a
    exp(-s_{s(a)}) T_a^dagger`` and ``Q_v = sum_{s(a)=v} w_a T_a^dagger
    exp(s_{t(a)}) T_a``, and ``Dexp`` the directional derivative of the matrix
    exponential.  ``G_v = 0`` for all v exactly when the residual of
    :func:`king_residual` vanishes at ``h = exp(s)``.
    """
    from .linalg import frechet_exp

    q = rep.quiver
    w = _weights(q, kahler)
    eta = validate_eta(q, eta)
    s = _check_displacement(rep, s)
    exp_pos = {v: hermitian_exp(s[v]) for v in q.vertices}
    exp_neg = {v: hermitian_exp(-s[v]) for v in q.vertices}

    p_acc = {v: np.zeros((rep.dims[v], rep.dims[v]), dtype=np.complex128) for v in q.vertices}
    q_acc = {v: np.zeros((rep.dims[v], rep.dims[v]), dtype=np.complex128) for v in q.vertices}
    for a in q.arrows:
        t = rep.matrices[a.name]
        if t.size == 0:
            continue
        p_acc[a.dst] = p_acc[a.dst] + w[a.name] * (t @ exp_neg[a.src] @ t.conj().T)
        q_acc[a.src] = q_acc[a.src] + w[a.name] * (t.conj().T @ exp_pos[a.dst] @ t)

    grad = {}
    for v in q.vertices:
        d = rep.dims[v]
        if d == 0:
            grad[v] = np.zeros((0, 0), dtype=np.complex128)
            continue
        g = (
            frechet_exp(s[v], hermitian_part(p_acc[v]))
            - frechet_exp(-s[v], hermitian_part(q_acc[v]))
            + eta[v] * np.eye(d, dtype=np.complex128)
        )
        grad[v] = hermitian_part(g)
    return grad


def _check_gauge_directions(
    rep: Representation, u: Mapping[str, np.ndarray], name: str = "u"
) -> dict[str, np.ndarray]:
    """Validate a per-vertex anti-Hermitian family (gauge Lie algebra)."""
    fam = _check_vertex_family(rep, u, name)
    for v, m in fam.items():
        if m.size == 0:
            continue
        defect = sup_norm(m + m.conj().T)
        if defect > 1e-12 * max(1.0, sup_norm(m)):
            raise ValidationError(f"{name}[{v!r}]: not anti-Hermitian (defect {defect:.3e})")
    return fam


def gauge_variation(rep: Representation, u: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Infinitesimal gauge action on arrow matrices:
    ``[A, u]_a = u_{t(a)} A_a - A_a u_{s(a)}``."""
    u = _check_gauge_directions(rep, u)
    out = {}
    for a in rep.quiver.arrows:
        t = rep.matrices[a.name]
        out[a.name] = u[a.dst] @ t - t @ u[a.src]
    return out


def _hamiltonian_core(
    quiver: Quiver,
    weights: Mapping[str, float],
    eta: Mapping[str, float],
    u: Mapping[str, np.ndarray],
    arrow_mats: Mapping[str, np.ndarray],
) -> float:
    """Shared Hamiltonian kernel:
    ``-sum_v eta_v Im tr(u_v) + 1/2 Im sum_a w_a tr(A_a ([A,u]_a)^dagger)``."""
    total = 0.0
    for v in quiver.vertices:
        m = u[v]
        if m.size:
            total -= eta[v] * float(np.trace(m).imag)
    for a in quiver.arrows:
        t = arrow_mats[a.name]
        if t.size == 0:
            continue
        var = u[a.dst] @ t - t @ u[a.src]
        total += 0.5 * weights[a.name] * float(np.trace(t @ var.conj().T).imag)
    return total


def hamiltonian_trivial(
    u: Mapping[str, np.ndarray],
    rep: Representation,
    eta: Mapping[str, float],
    kahler: Optional[KahlerData] = None,
) -> float:
    """Hamiltonian of the gauge direction ``u`` on the trivial-metric phase
    space:

        H_u(A) = -sum_v eta_v Im tr(u_v)
                 + 1/2 Im sum_a w_a tr(A_a ([A, u]_a)^dagger).

    ``u`` must be anti-Hermitian per vertex; the value is real by construction.
    """
    q = rep.quiver
    w = _weights(q, kahler)
    eta = validate_eta(q, eta)
    u = _check_gauge_directions(rep, u)
    return _hamiltonian_core(q, w, eta, u, rep.matrices)


def hamiltonian_projector(
    u: Mapping[str, np.ndarray],
    ambient: Representation,
    projector: Mapping[str, np.ndarray],
    eta: Mapping[str, float],
    kahler: Optional[KahlerData] = None,
) -> float:
    """Hamiltonian on a projector-cut subbundle of a trivial ambient bundle.

    ``projector[v]`` must be a Hermitian idempotent in the ambient fiber;
    arrow matrices must satisfy ``X_a = P_{t(a)} X_a P_{s(a)}`` and gauge
    directions ``u_v = P_v u_v P_v`` (all checked to 1e-12 relative).  For
    quiver data the canonical-connection terms drop out and the value reduces
    to the same kernel as :func:`hamiltonian_trivial` on the compressed data;
    with ``P = Id`` the two functions agree identically.
    """
    q = ambient.quiver
    w = _weights(q, kahler)
    eta = validate_eta(q, eta)
    u = _check_gauge_directions(ambient, u)
    proj = _check_vertex_family(ambient, projector, "projector")
    for v, p in proj.items():
        if p.size == 0:
            continue
        scale = max(1.0, sup_norm(p))
        if sup_norm(p - p.conj().T) > 1e-12 * scale:
            raise ValidationError(f"projector[{v!r}] is not Hermitian")
        if sup_norm(p @ p - p) > 1e-12 * scale:
            raise ValidationError(f"projector[{v!r}] is not idempotent")
        if sup_norm(u[v] - p @ u[v] @ p) > 1e-12 * max(1.0, sup_norm(u[v])):
            raise ValidationError(f"u[{v!r}] is not supported on the projector image")
    for a in q.arrows:
        x = ambient.matrices[a.name]
        if x.size == 0:
            continue
        if sup_norm(x - proj[a.dst] @ x @ proj[a.src]) > 1e-12 * max(1.0, sup_norm(x)):
            raise ValidationError(
                f"arrow {a.name!r} is not supported between the projector images"
            )
    return _hamiltonian_core(q, w, eta, u, ambient.matrices)


def poisson_bracket_check(
    u1: Mapping[str, np.ndarray],
    u2: Mapping[str, np.ndarray],
    rep: Representation,
    eta: Mapping[str, float],
    kahler: Optional[KahlerData] = None,
) -> tuple[float, float]:
    """Evaluate both sides of the Poisson-bracket identity at ``rep``.

    Returns ``(lhs, rhs)`` where ``lhs = Im sum_a w_a tr(V1_a V2_a^dagger)``
    pairs the two Hamiltonian vector fields ``Vi = [A, ui]`` through the
    symplectic form, and ``rhs`` is the Hamiltonian of the vertex-wise bracket
    ``u2 u1 - u1 u2``.  The bracket is reversed relative to the row-vector
    formulation because transposing to column conventions is an
    anti-isomorphism of the gauge Lie algebra; the two numbers must agree to
    1e-10 for the identity to hold, which is what callers test.
    """
    q = rep.quiver
    w = _weights(q, kahler)
    eta = validate_eta(q, eta)
    u1 = _check_gauge_directions(rep, u1, "u1")
    u2 = _check_gauge_directions(rep, u2, "u2")
    v1 = gauge_variation(rep, u1)
    v2 = gauge_variation(rep, u2)
    lhs = 0.0
    for a in q.arrows:
        if v1[a.name].size == 0:
            continue
        lhs += w[a.name] * float(np.trace(v1[a.name] @ v2[a.name].conj().T).imag)
    bracket = {v: u2[v] @ u1[v] - u1[v] @ u2[v] for v in q.vertices}
    rhs = _hamiltonian_core(q, w, eta, bracket, rep.matrices)
    return lhs, rhs

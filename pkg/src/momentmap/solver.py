"""Kempf-Ness metric flow: minimize the functional over metric families
``h_v = exp(s_v)`` and report a solution metric or a divergence certificate.

The driver runs Armijo-backtracked steepest descent with a safeguarded
Barzilai-Borwein initial step, switching to Tikhonov-damped Newton once the
residual is small.  Three safeguards matter on hard instances:

* On non-polystable instances the residual decays to zero *along an escaping
  flow* (the orbit closure contains a smaller representation), so a small
  residual alone never certifies a solution.  Convergence is declared only
  after a full-length descent probe fails to decrease the functional; along
  an escaping valley the probe step is accepted instead and the flow keeps
  moving toward the divergence threshold.
* Near a true minimum the functional's decrease per step falls below its own
  floating-point resolution before the residual reaches ``tol``; an endgame
  polish accepts damped-Newton steps by residual contraction instead.
* Steepest descent can stall while strict progress is still available (linear
  descent valleys flanked by exponentially steep walls); a damped-Newton
  rescue step suppresses the wall components before a stall is terminal.

Termination:

* ``Converged`` -- the re-evaluated residual sup-norm at ``exp(s)`` is
  ``<= tol`` and a descent probe confirms stationarity.
* ``Diverged`` -- some ``||s_v||`` crossed ``divergence_norm``; a destabilizing
  subspace candidate is extracted from the trajectory.
* ``MaxIters`` -- iteration budget exhausted (includes terminal stalls).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, NamedTuple, Optional

import numpy as np

from .errors import MomentMapError, SolverError, ValidationError
from .linalg import hermitian_basis, hermitian_exp, hermitian_part, sup_norm
from .moment import (
    KahlerData,
    kempf_ness_gradient,
    kempf_ness_value,
    king_residual,
    zero_displacement,
)
from .quiver import Representation, validate_eta

__all__ = [
    "SolveOptions",
    "SolveStatus",
    "HistoryRecord",
    "DestabilizerCandidate",
    "SolveOutcome",
    "solve_metric",
    "extract_destabilizer",
]

logger = logging.getLogger(__name__)

#: Relative sup-norm bound on the last accepted step below which the iterate
#: is treated as a stationarity candidate and a descent probe is scheduled.
STATIONARY_STEP = 1e-3

#: Largest trial step length (sup norm of alpha * direction) per iteration.
STEP_CAP = 2.0


class SolveStatus(str, Enum):
    CONVERGED = "Converged"
    DIVERGED = "Diverged"
    MAX_ITERS = "MaxIters"


@dataclass(frozen=True)
class SolveOptions:
    """Tuning knobs for :func:`solve_metric`."""

    tol: float = 1e-10
    max_iters: int = 10000
    divergence_norm: float = 50.0
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    newton_switch_tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValidationError(f"tol must be positive, got {self.tol}")
        if not 0 < self.backtrack < 1:
            raise ValidationError(f"backtrack must lie in (0,1), got {self.backtrack}")
        if not 0 < self.armijo_c < 1:
            raise ValidationError(f"armijo_c must lie in (0,1), got {self.armijo_c}")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.divergence_norm > 0:
            raise ValidationError(
                f"divergence_norm must be positive, got {self.divergence_norm}"
            )


class HistoryRecord(NamedTuple):
    """One accepted iterate: iteration index, functional value, residual sup."""

    iteration: int
    functional: float
    residual: float


@dataclass(frozen=True)
class DestabilizerCandidate:
    """Advisory destabilizing-subspace candidate read off a divergent flow.

    Attributes
    ----------
    basis : dict
        Vertex -> matrix with orthonormal columns spanning the candidate
        subspace (possibly zero columns).
    subdims : dict
        Vertex -> candidate subspace dimension.
    slope : float
        ``sum_v eta_v * subdims[v]``, reported as computed.
    invariance_defect : float
        ``max_a ||(Id - P_t) T_a P_s||`` over arrows, for the orthogonal
        projections onto the candidate subspaces; small values mean the
        subspaces nearly form a subrepresentation.
    """

    basis: Mapping[str, np.ndarray]
    subdims: Mapping[str, int]
    slope: float
    invariance_defect: float


@dataclass(frozen=True)
class SolveOutcome:
    """Result of a metric solve."""

    status: SolveStatus
    metric: Optional[Mapping[str, np.ndarray]]
    history: list[HistoryRecord] = field(default_factory=list)
    final_sup: float = np.inf
    certificate: Optional[DestabilizerCandidate] = None


def _family_inner(x: Mapping[str, np.ndarray], y: Mapping[str, np.ndarray]) -> float:
    return float(
        sum(np.trace(x[v] @ y[v]).real for v in x if x[v].size)
    )


def _family_sup(x: Mapping[str, np.ndarray]) -> float:
    return max((sup_norm(m) for m in x.values()), default=0.0)


def extract_destabilizer(
    trajectory: list[Mapping[str, np.ndarray]],
    rep: Representation,
    eta: Mapping[str, float],
) -> DestabilizerCandidate:
    """Read a destabilizing-subspace candidate off a divergent flow trajectory.

    The final displacement family is normalized to unit operator norm and its
    eigenvalues are pooled across vertices; the split is taken below the
    midpoint of the largest gap in the pooled spectrum (below the median
    eigenvalue if all gaps agree to 1e-9).  Requires at least one trajectory
    point with ``max_v ||s_v|| >= 1``.
    """
    if not trajectory:
        raise ValidationError("extract_destabilizer: empty trajectory")
    eta = validate_eta(rep.quiver, eta)
    if max(_family_sup(point) for point in trajectory) < 1.0:
        raise ValidationError(
            "extract_destabilizer: no trajectory point with ||s|| >= 1"
        )
    last = trajectory[-1]
    norm = _family_sup(last)
    if norm == 0.0:
        raise ValidationError("extract_destabilizer: final displacement is zero")
    sigma = {v: np.asarray(last[v]) / norm for v in rep.quiver.vertices}

    eigen = {}
    pooled = []
    for v in rep.quiver.vertices:
        if sigma[v].size == 0:
            eigen[v] = (np.zeros(0), np.zeros((0, 0), dtype=np.complex128))
            continue
        w, u = np.linalg.eigh(hermitian_part(sigma[v]))
        eigen[v] = (w, u)
        pooled.extend(w.tolist())
    pooled = np.sort(np.asarray(pooled))
    if pooled.size == 0:
        raise ValidationError("extract_destabilizer: no eigenvalues (all vertices empty)")

    if pooled.size == 1:
        threshold = float(pooled[0])  # split strictly below the single value
    else:
        gaps = np.diff(pooled)
        if float(gaps.max() - gaps.min()) <= 1e-9:
            threshold = float(np.median(pooled))
        else:
            k = int(np.argmax(gaps))
            threshold = float(0.5 * (pooled[k] + pooled[k + 1]))

    basis = {}
    subdims = {}
    for v in rep.quiver.vertices:
        w, u = eigen[v]
        cols = u[:, w < threshold] if w.size else np.zeros((0, 0), dtype=np.complex128)
        basis[v] = cols
        subdims[v] = int(cols.shape[1])
    slope = float(sum(eta[v] * subdims[v] for v in subdims))

    defect = 0.0
    for a in rep.quiver.arrows:
        t = rep.matrices[a.name]
        if t.size == 0:
            continue
        bs = basis[a.src]
        bt = basis[a.dst]
        if bs.shape[1] == 0:
            continue
        p_src = bs @ bs.conj().T
        p_dst = bt @ bt.conj().T if bt.size else np.zeros((t.shape[0], t.shape[0]))
        leak = (np.eye(t.shape[0]) - p_dst) @ t @ p_src
        defect = max(defect, sup_norm(leak))
    return DestabilizerCandidate(
        basis=basis, subdims=subdims, slope=slope, invariance_defect=defect
    )


def _finite_difference_hessian(rep, s, eta, kahler, basis_index, scale):
    """Hessian of the functional in the orthonormal Hermitian product basis."""
    n = len(basis_index)
    hess = np.zeros((n, n))
    eps = 1e-4 * scale
    for j, (v, b) in enumerate(basis_index):
        sp = dict(s)
        sp[v] = s[v] + eps * b
        sm = dict(s)
        sm[v] = s[v] - eps * b
        gp = kempf_ness_gradient(rep, sp, eta, kahler)
        gm = kempf_ness_gradient(rep, sm, eta, kahler)
        for i, (w, c) in enumerate(basis_index):
            hess[i, j] = float(np.trace((gp[w] - gm[w]) @ c).real) / (2 * eps)
    return 0.5 * (hess + hess.T)


def _newton_direction(rep, s, eta, kahler, grad, residual, basis_index):
    """Damped Newton step in basis coordinates; None if not a descent direction."""
    if not basis_index:
        return None, 0.0
    scale = max(1.0, _family_sup(s))
    hess = _finite_difference_hessian(rep, s, eta, kahler, basis_index, scale)
    lam = max(1e-10, residual)
    gvec = np.array([float(np.trace(grad[v] @ b).real) for v, b in basis_index])
    try:
        delta = np.linalg.solve(hess + lam * np.eye(len(gvec)), -gvec)
    except np.linalg.LinAlgError:
        return None, 0.0
    slope = float(delta @ gvec)
    if not np.isfinite(slope) or slope >= 0:
        return None, 0.0
    direction = {v: np.zeros_like(s[v]) for v in rep.quiver.vertices}
    for coeff, (v, b) in zip(delta, basis_index):
        direction[v] = direction[v] + coeff * b
    return direction, slope


def _refine_by_residual(rep, s, eta, kahler, opts, residual, metric):
    """Endgame polish: damped Newton steps accepted iff the King residual
    strictly decreases.

    Near the minimum the functional's decrease per step falls below its own
    floating-point resolution long before the residual reaches ``tol``, so
    Armijo-on-functional cannot certify the final contractions; the residual
    itself is the reliable progress measure there.
    """
    basis_index = [(v, b) for v in rep.quiver.vertices for b in hermitian_basis(rep.dims[v])]
    best_s, best_res, best_metric = s, residual, metric
    for _ in range(60):
        if best_res <= opts.tol:
            break
        grad = kempf_ness_gradient(rep, best_s, eta, kahler)
        direction, slope = _newton_direction(
            rep, best_s, eta, kahler, grad, best_res, basis_index
        )
        if direction is None:
            direction = {v: -grad[v] for v in rep.quiver.vertices}
        alpha = 1.0
        improved = False
        while alpha > 1e-8:
            cand = {
                v: hermitian_part(best_s[v] + alpha * direction[v])
                for v in rep.quiver.vertices
            }
            try:
                cand_metric = {v: hermitian_exp(cand[v]) for v in cand}
                cand_res = king_residual(rep, cand_metric, eta, kahler).sup
            except MomentMapError:
                alpha *= 0.5
                continue
            if cand_res < best_res:
                best_s, best_res, best_metric = cand, cand_res, cand_metric
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
    return best_s, best_res, best_metric


def _armijo_search(functional, vertices, s, value, direction, deriv, alpha, opts):
    """Backtracking line search with the Armijo sufficient-decrease rule.

    Returns ``(new_s, new_value)`` for the first accepted trial, or ``None``
    when every trial down to the numerical floor is rejected.
    """
    while alpha > 1e-16:
        cand = {v: hermitian_part(s[v] + alpha * direction[v]) for v in vertices}
        try:
            cand_value = functional(cand)
        except MomentMapError:
            alpha *= opts.backtrack
            continue
        if np.isfinite(cand_value) and cand_value <= value + opts.armijo_c * alpha * deriv:
            return cand, cand_value
        alpha *= opts.backtrack
    return None


def _descent_probe(vertices, s, grad, functional):
    """Distinguish a genuine minimum from an escaping valley at a stall.

    Attempt an Armijo-checked steepest-descent step whose *trial length* is
    ``STEP_CAP`` regardless of the gradient's magnitude.  Near a minimum no
    order-one step can decrease the functional, so every trial is rejected
    down to the stationarity scale and the probe returns ``None``; along an
    escaping valley the functional keeps decaying at full step length, the
    trial is accepted, and the caller should keep flowing.
    """
    direction = {v: -grad[v] for v in vertices}
    dir_sup = _family_sup(direction)
    if dir_sup == 0.0:
        return None
    deriv = -_family_inner(grad, grad)
    try:
        value = functional(s)
    except MomentMapError:
        return None
    alpha = STEP_CAP / dir_sup
    floor = STATIONARY_STEP * max(1.0, _family_sup(s))
    while alpha * dir_sup > floor:
        cand = {v: hermitian_part(s[v] + alpha * direction[v]) for v in vertices}
        try:
            cand_value = functional(cand)
        except MomentMapError:
            alpha *= 0.5
            continue
        if np.isfinite(cand_value) and cand_value < value + 1e-4 * alpha * deriv:
            return cand, cand_value
        alpha *= 0.5
    return None


def solve_metric(
    rep: Representation,
    eta: Mapping[str, float],
    kahler: Optional[KahlerData] = None,
    opts: Optional[SolveOptions] = None,
) -> SolveOutcome:
    """Minimize the Kempf-Ness functional over metric families.

    Returns a :class:`SolveOutcome`; when ``Converged``, the attached metric
    satisfies ``king_residual(rep, metric, eta, kahler).sup <= opts.tol``
    (re-evaluated independently before returning).  When ``Diverged``, a
    :class:`DestabilizerCandidate` is attached.  The last ``history`` record
    always describes the returned iterate, so ``history[-1].residual``
    equals ``final_sup``.

    Raises
    ------
    SolverError
        If the functional or gradient becomes non-finite (carries the
        iteration index in ``details``).
    """
    if opts is None:
        opts = SolveOptions()
    eta = validate_eta(rep.quiver, eta)
    vertices = [v for v in rep.quiver.vertices]

    s = zero_displacement(rep)
    trajectory = [dict(s)]

    def functional(point):
        return kempf_ness_value(rep, point, eta, kahler)

    def gradient(point):
        return kempf_ness_gradient(rep, point, eta, kahler)

    def residual_at(point):
        metric = {v: hermitian_exp(point[v]) for v in vertices}
        return king_residual(rep, metric, eta, kahler).sup, metric

    try:
        value = functional(s)
        grad = gradient(s)
    except MomentMapError as exc:
        raise SolverError("initial evaluation failed", {"iteration": 0}) from exc
    if not np.isfinite(value):
        raise SolverError("non-finite functional", {"iteration": 0})
    residual, metric = residual_at(s)
    history = [HistoryRecord(0, value, residual)]

    def finish(status, res, met, cert=None):
        return SolveOutcome(
            status=status,
            metric=met if status is SolveStatus.CONVERGED else None,
            history=history,
            final_sup=res,
            certificate=cert,
        )

    if residual <= opts.tol:
        # Already a solution at h = Id; gradient and residual agree at s = 0.
        return finish(SolveStatus.CONVERGED, residual, metric)

    prev_s = None
    prev_grad = None
    force_descent = False
    basis_index = [(v, b) for v in vertices for b in hermitian_basis(rep.dims[v])]

    for iteration in range(1, opts.max_iters + 1):
        gnorm2 = _family_inner(grad, grad)
        gsup = _family_sup(grad)
        if gnorm2 <= 0.0:
            # Exactly critical but residual > tol cannot happen (criticality
            # is equivalent to a zero residual); treat as stalled defensively.
            return finish(SolveStatus.MAX_ITERS, residual, metric)

        # --- choose a direction
        probe = force_descent
        force_descent = False
        use_newton = residual < opts.newton_switch_tol and not probe
        direction = None
        deriv = None
        if use_newton:
            direction, deriv = _newton_direction(
                rep, s, eta, kahler, grad, residual, basis_index
            )
            if direction is None:
                use_newton = False
        if direction is None:
            direction = {v: -grad[v] for v in vertices}
            deriv = -gnorm2

        # --- initial step: unit for Newton, safeguarded BB for descent.
        # BB is capped by trial *step length*, not raw alpha: along escaping
        # directions the gradient decays exponentially while alpha grows to
        # compensate, and their product is the quantity to control.
        dir_sup = _family_sup(direction)
        if use_newton:
            alpha = 1.0
        elif probe and dir_sup > 0:
            # Stationarity probe: force a full-length trial along steepest
            # descent.  At a genuine minimum the line search shrinks it back
            # to a negligible step; along an escaping valley it is accepted
            # at full length and the trajectory keeps growing.
            alpha = STEP_CAP / dir_sup
        elif prev_s is not None:
            ds = {v: s[v] - prev_s[v] for v in vertices}
            dg = {v: grad[v] - prev_grad[v] for v in vertices}
            num = _family_inner(ds, dg)
            den = _family_inner(dg, dg)
            alpha = num / den if (den > 0 and num > 0) else 1.0 / max(1.0, gsup)
        else:
            alpha = 1.0 / max(1.0, gsup)
        if dir_sup > 0:
            alpha = float(min(alpha, STEP_CAP / dir_sup))

        # --- Armijo backtracking
        step = _armijo_search(
            functional, vertices, s, value, direction, deriv, alpha, opts
        )
        accepted = step is not None
        if accepted:
            new_s, new_value = step
        if not accepted or not new_value < value:
            # Steepest descent can stall with strict progress still available:
            # near-flat valleys flanked by exponentially steep walls reject
            # every trial once any wall component enters the direction.  The
            # damped Newton direction suppresses wall components, so try it
            # as a rescue before concluding anything.
            if not use_newton:
                r_dir, r_deriv = _newton_direction(
                    rep, s, eta, kahler, grad, residual, basis_index
                )
                if r_dir is not None:
                    r_sup = _family_sup(r_dir)
                    r_alpha = min(1.0, STEP_CAP / r_sup) if r_sup > 0 else 1.0
                    step = _armijo_search(
                        functional, vertices, s, value, r_dir, r_deriv, r_alpha, opts
                    )
                    if step is not None and step[1] < value:
                        new_s, new_value = step
                        accepted = True
        if not accepted or not new_value < value:
            # The functional's decrease per step has fallen below its own
            # floating-point resolution.  Polish the residual if needed, then
            # separate a genuine minimum from an escaping flat valley (where
            # the residual also decays) with one full-length descent trial.
            if residual >= opts.newton_switch_tol:
                logger.debug("line search stalled at iteration %d", iteration)
                return finish(SolveStatus.MAX_ITERS, residual, metric)
            refined = residual > opts.tol
            if refined:
                s, residual, metric = _refine_by_residual(
                    rep, s, eta, kahler, opts, residual, metric
                )
                try:
                    value = functional(s)
                except MomentMapError as exc:
                    raise SolverError(
                        "functional evaluation failed", {"iteration": iteration}
                    ) from exc
                if residual > opts.tol:
                    logger.debug("refinement stalled at iteration %d", iteration)
                    history.append(HistoryRecord(iteration, value, residual))
                    return finish(SolveStatus.MAX_ITERS, residual, metric)
                try:
                    grad = gradient(s)
                except MomentMapError as exc:
                    raise SolverError(
                        "gradient evaluation failed", {"iteration": iteration}
                    ) from exc
            probe_step = _descent_probe(vertices, s, grad, functional)
            if probe_step is None:
                if refined:
                    # Refinement moved the iterate after the last logged
                    # record; log the state actually being returned.
                    history.append(HistoryRecord(iteration, value, residual))
                return finish(SolveStatus.CONVERGED, residual, metric)
            new_s, new_value = probe_step
            accepted = True

        prev_s, prev_grad = s, grad
        s, value = new_s, new_value
        last_step_sup = _family_sup({v: s[v] - prev_s[v] for v in vertices})
        trajectory.append(dict(s))
        try:
            grad = gradient(s)
        except MomentMapError as exc:
            raise SolverError(
                "gradient evaluation failed", {"iteration": iteration}
            ) from exc
        if not np.isfinite(value):
            raise SolverError("non-finite functional", {"iteration": iteration})
        residual, metric = residual_at(s)
        history.append(HistoryRecord(iteration, value, residual))

        # --- termination checks: escape first, then stationarity
        if _family_sup(s) > opts.divergence_norm:
            cert = extract_destabilizer(trajectory, rep, eta)
            return finish(SolveStatus.DIVERGED, residual, metric, cert)
        if residual <= opts.tol and last_step_sup <= STATIONARY_STEP * max(
            1.0, _family_sup(s)
        ):
            # A tiny step certifies stationarity only when it survived a
            # full-length descent probe; damped Newton and BB steps can be
            # tiny along escaping valleys too.  Otherwise schedule a probe.
            if probe:
                return finish(SolveStatus.CONVERGED, residual, metric)
            force_descent = True

    return finish(SolveStatus.MAX_ITERS, residual, metric)

"""Finite truncations of the quantized Hermitian-metric equation on
monomial modules, with a damped-Newton solver and commutator diagnostics.

A truncation enumerates the monomials of a module (the full polynomial ring
or a monomial ideal) up to total degree ``D`` in graded-lexicographic order
and records shift neighbors.  A diagonal metric assigns a positive weight
``c_mu`` to each basis monomial; the multiplication operators ``Z_i`` act on
the orthonormalized basis as weighted shifts with matrix elements
``sqrt(c_{mu+e_i}/c_mu)``.  The per-site residual of the metric equation is

    r(mu) = sum_i [ c_{mu+e_i}/c_mu - c_mu/c_{mu-e_i} ] - hbar m,

where the downward term is dropped when ``mu - e_i`` leaves the module, and
sites on the top level ``|mu| = D`` are boundary, not interior.  On the full
ring the Bargmann weights ``prod_i k_i! hbar^{k_i}`` solve the equation
exactly; on ideals the solver freezes the weights near the cap to those
Bargmann values (the stand-in for the trace-class boundary condition at
infinity) and runs damped Newton in ``x = log c`` on the remaining sites.

:func:`commutator_diagnostics` measures how far the truncated shifts are
from the exact commutation relations ``[Z_i^dagger, Z_j] = hbar delta_ij``
level by level, which quantifies the trace-class boundary behaviour.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConsistencyError, SolverError, ValidationError
from .solver import SolveOptions

__all__ = [
    "FockTruncation",
    "DiagonalMetric",
    "build_truncation",
    "fock_weights",
    "nekrasov_residual",
    "residual_profile",
    "solve_nekrasov",
    "CommutatorReport",
    "commutator_diagnostics",
    "truncation_from_json",
]

logger = logging.getLogger(__name__)

Monomial = Tuple[int, ...]

#: Default number of top levels whose weights are frozen to Bargmann values.
DEFAULT_BUFFER = 2


def _check_monomial(n: int, m, name: str) -> Monomial:
    m = tuple(m)
    if len(m) != n:
        raise ValidationError(f"{name}: expected {n} exponents, got {len(m)}")
    out = []
    for e in m:
        if not isinstance(e, (int, np.integer)) or isinstance(e, bool) or e < 0:
            raise ValidationError(f"{name}: exponents must be integers >= 0, got {e!r}")
        out.append(int(e))
    return tuple(out)


def _grlex_key(m: Monomial):
    # graded order, earlier variables ranking higher within a degree
    return (sum(m), tuple(-e for e in m))


@dataclass(frozen=True)
class FockTruncation:
    """Monomial basis of a truncated module with shift-neighbor tables.

    Attributes
    ----------
    n : int
        Number of variables.
    generators : tuple or None
        ``None`` for the full ring, else the monomial-ideal generators.
    D : int
        Total-degree cap.
    basis : tuple of monomials
        Module monomials with ``|mu| <= D`` in graded-lex order.
    up, down : ndarray
        ``(n, len(basis))`` integer tables: ``up[i, p]`` is the basis index
        of ``mu + e_i`` (``-1`` past the cap) and ``down[i, p]`` of
        ``mu - e_i`` (``-1`` when it leaves the module).
    """

    n: int
    generators: Optional[Tuple[Monomial, ...]]
    D: int
    basis: Tuple[Monomial, ...]
    up: np.ndarray
    down: np.ndarray

    def index(self, m) -> int:
        """Basis position of a monomial."""
        key = _check_monomial(self.n, m, "monomial")
        try:
            return self._lookup[key]
        except KeyError:
            raise ValidationError(f"monomial {key} is not in the basis") from None

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_lookup", {m: p for p, m in enumerate(self.basis)}
        )

    def contains(self, m) -> bool:
        """Module membership (ignoring the degree cap)."""
        key = _check_monomial(self.n, m, "monomial")
        if self.generators is None:
            return True
        return any(all(k >= g for k, g in zip(key, gen)) for gen in self.generators)

    def levels(self) -> Tuple[int, ...]:
        """Sorted distinct total degrees present in the basis."""
        return tuple(sorted({sum(m) for m in self.basis}))


def build_truncation(
    n: int, module: Union[str, Sequence[Sequence[int]]], D: int
) -> FockTruncation:
    """Enumerate the truncated basis and its shift-neighbor tables.

    Parameters
    ----------
    n : int
        Number of variables (>= 1).
    module : "full" or sequence of multi-indices
        The full polynomial ring, or the generators of a monomial ideal
        (nonempty; an element belongs to the ideal when it is divisible by
        some generator).
    D : int
        Degree cap; must be at least the largest generator degree.

    Raises
    ------
    ValidationError
        On bad counts, an empty generator list, a cap below the largest
        generator degree, or an empty top level.
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise ValidationError(f"n must be an integer >= 1, got {n!r}")
    if not isinstance(D, (int, np.integer)) or isinstance(D, bool) or D < 0:
        raise ValidationError(f"D must be an integer >= 0, got {D!r}")
    n, D = int(n), int(D)

    if isinstance(module, str):
        if module != "full":
            raise ValidationError(f"unknown module kind {module!r}")
        generators: Optional[Tuple[Monomial, ...]] = None
    else:
        gens = [_check_monomial(n, g, "generator") for g in module]
        if not gens:
            raise ValidationError("monomial ideal needs at least one generator")
        max_deg = max(sum(g) for g in gens)
        if D < max_deg:
            raise ValidationError(
                f"degree cap D={D} is below the largest generator degree {max_deg}"
            )
        generators = tuple(gens)

    def member(m: Monomial) -> bool:
        if generators is None:
            return True
        return any(all(k >= g for k, g in zip(m, gen)) for gen in generators)

    basis = [
        m
        for total in range(D + 1)
        for m in sorted(_compositions(n, total), key=_grlex_key)
        if member(m)
    ]
    if not any(sum(m) == D for m in basis):
        raise ValidationError(f"module has no monomials at the cap degree {D}")

    lookup = {m: p for p, m in enumerate(basis)}
    size = len(basis)
    up = -np.ones((n, size), dtype=np.int64)
    down = -np.ones((n, size), dtype=np.int64)
    for p, m in enumerate(basis):
        for i in range(n):
            raised = m[:i] + (m[i] + 1,) + m[i + 1 :]
            if sum(raised) <= D:
                # module monomials stay in the module when multiplied
                up[i, p] = lookup[raised]
            if m[i] >= 1:
                lowered = m[:i] + (m[i] - 1,) + m[i + 1 :]
                if lowered in lookup:
                    down[i, p] = lookup[lowered]
    up.flags.writeable = False
    down.flags.writeable = False
    return FockTruncation(n, generators, D, tuple(basis), up, down)


def _compositions(n: int, total: int):
    if n == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(n - 1, total - head):
            yield (head,) + tail


@dataclass(frozen=True)
class DiagonalMetric:
    """Positive weight per basis monomial of a truncation."""

    truncation: FockTruncation
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (len(self.truncation.basis),):
            raise ValidationError(
                f"weights shape {vals.shape} != ({len(self.truncation.basis)},)"
            )
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValidationError("weights must be finite and positive")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def weight(self, m) -> float:
        """Weight of a basis monomial."""
        return float(self.values[self.truncation.index(m)])


def fock_weights(t: FockTruncation, hbar: float) -> DiagonalMetric:
    """Bargmann weights ``c_mu = prod_i mu_i! hbar^{|mu|}``."""
    hbar = float(hbar)
    if not np.isfinite(hbar) or hbar <= 0:
        raise ValidationError(f"hbar must be positive, got {hbar}")
    vals = np.array(
        [
            float(math.prod(math.factorial(e) for e in m)) * hbar ** sum(m)
            for m in t.basis
        ]
    )
    return DiagonalMetric(t, vals)


def _residual_vector(
    t: FockTruncation, values: np.ndarray, hbar: float, m: int
) -> np.ndarray:
    """Residuals over the full basis; boundary sites hold NaN."""
    size = len(t.basis)
    out = np.full(size, np.nan)
    for p, mono in enumerate(t.basis):
        if sum(mono) >= t.D:
            continue
        total = -hbar * m
        for i in range(t.n):
            iu = t.up[i, p]
            if iu < 0:
                raise ConsistencyError(
                    f"missing upward neighbor for interior site {mono} in variable {i + 1}"
                )
            total += values[iu] / values[p]
            idn = t.down[i, p]
            if idn >= 0:
                total -= values[p] / values[idn]
        out[p] = total
    return out


def nekrasov_residual(
    t: FockTruncation, c: DiagonalMetric, hbar: float, m: int
) -> dict:
    """Per-site residuals at interior sites (``|mu| <= D - 1``).

    Returns a mapping from basis monomial to residual value; boundary sites
    at the cap are excluded.
    """
    if not isinstance(t, FockTruncation):
        raise ValidationError(f"expected FockTruncation, got {type(t).__name__}")
    if not isinstance(c, DiagonalMetric) or c.truncation.basis != t.basis:
        raise ValidationError("metric does not belong to this truncation")
    hbar = float(hbar)
    if not np.isfinite(hbar):
        raise ValidationError("hbar must be finite")
    if not isinstance(m, (int, np.integer)) or isinstance(m, bool) or m < 1:
        raise ValidationError(f"m must be an integer >= 1, got {m!r}")
    vec = _residual_vector(t, c.values, hbar, int(m))
    return {
        mono: float(vec[p])
        for p, mono in enumerate(t.basis)
        if not np.isnan(vec[p])
    }


def residual_profile(residuals: Mapping[Monomial, float]) -> list:
    """Per-degree maxima ``[{"degree": d, "max_abs": r}, ...]`` of a residual
    mapping, sorted by degree."""
    by_degree: dict[int, float] = {}
    for mono, val in residuals.items():
        d = sum(mono)
        by_degree[d] = max(by_degree.get(d, 0.0), abs(val))
    return [
        {"degree": d, "max_abs": by_degree[d]} for d in sorted(by_degree)
    ]


def solve_nekrasov(
    t: FockTruncation,
    hbar: float,
    m: Optional[int] = None,
    opts: Optional[SolveOptions] = None,
    buffer: int = DEFAULT_BUFFER,
) -> DiagonalMetric:
    """Damped-Newton solution of the truncated metric equation.

    Weights at the ``buffer + 1`` top levels (``|mu| >= D - buffer``) are
    frozen to Bargmann values, realizing the boundary condition; the
    logarithms of the remaining weights are Newton unknowns.  Convergence is
    declared when ``max |r(mu)| <= opts.tol`` over the free sites
    (``|mu| <= D - buffer - 1``).

    Parameters
    ----------
    t : FockTruncation
    hbar : float
        Positive deformation parameter.
    m : int, optional
        Dimension parameter of the equation; defaults to ``t.n``.
    opts : SolveOptions, optional
    buffer : int
        Number of frozen levels below the cap (default 2).

    Raises
    ------
    ValidationError
        If ``hbar <= 0``, ``m < 1``, or no free sites remain.
    SolverError
        On stalling or non-convergence; ``details`` carries the residual
        profile achieved.
    """
    if not isinstance(t, FockTruncation):
        raise ValidationError(f"expected FockTruncation, got {type(t).__name__}")
    hbar = float(hbar)
    if not np.isfinite(hbar) or hbar <= 0:
        raise ValidationError(f"hbar must be positive, got {hbar}")
    if m is None:
        m = t.n
    if not isinstance(m, (int, np.integer)) or isinstance(m, bool) or m < 1:
        raise ValidationError(f"m must be an integer >= 1, got {m!r}")
    m = int(m)
    if not isinstance(buffer, (int, np.integer)) or isinstance(buffer, bool) or buffer < 0:
        raise ValidationError(f"buffer must be an integer >= 0, got {buffer!r}")
    if opts is None:
        opts = SolveOptions()

    free = [p for p, mono in enumerate(t.basis) if sum(mono) <= t.D - buffer - 1]
    if not free:
        raise ValidationError(
            f"no free sites: cap D={t.D} with buffer {buffer} freezes everything"
        )
    free_pos = {p: q for q, p in enumerate(free)}

    boundary = fock_weights(t, hbar).values
    x = np.log(boundary)

    def assemble(xvec) -> np.ndarray:
        # frozen coordinates never move; bypass the exp(log(.)) round trip
        vals = boundary.copy()
        vals[free] = np.exp(xvec[free])
        return vals

    def residual_and_jacobian(xvec):
        values = assemble(xvec)
        r = np.empty(len(free))
        jac = np.zeros((len(free), len(free)))
        for q, p in enumerate(free):
            total = -hbar * m
            for i in range(t.n):
                iu = t.up[i, p]
                if iu < 0:
                    raise ConsistencyError(
                        f"missing upward neighbor for free site {t.basis[p]}"
                    )
                ratio_up = values[iu] / values[p]
                total += ratio_up
                jac[q, q] -= ratio_up
                if iu in free_pos:
                    jac[q, free_pos[iu]] += ratio_up
                idn = t.down[i, p]
                if idn >= 0:
                    ratio_dn = values[p] / values[idn]
                    total -= ratio_dn
                    jac[q, q] -= ratio_dn
                    if idn in free_pos:
                        jac[q, free_pos[idn]] += ratio_dn
            r[q] = total
        return r, jac

    r, jac = residual_and_jacobian(x)
    best_sup = float(np.max(np.abs(r)))
    for iteration in range(opts.max_iters):
        sup = float(np.max(np.abs(r)))
        best_sup = min(best_sup, sup)
        if sup <= opts.tol:
            metric = DiagonalMetric(t, assemble(x))
            logger.info(
                "metric equation solved: %d free sites, %d iterations, sup %.3e",
                len(free),
                iteration,
                sup,
            )
            return metric
        norm = float(np.linalg.norm(r))
        lam = max(1e-12, norm)
        stepped = False
        for _ in range(10):
            lhs = jac.T @ jac + lam * np.eye(len(free))
            rhs = -jac.T @ r
            try:
                delta = np.linalg.solve(lhs, rhs)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = x.copy()
            x_new[free] += delta
            with np.errstate(over="ignore", invalid="ignore"):
                r_new, jac_new = residual_and_jacobian(x_new)
            if np.all(np.isfinite(r_new)) and np.linalg.norm(r_new) < norm:
                x, r, jac = x_new, r_new, jac_new
                stepped = True
                break
            lam *= 10.0
        if not stepped:
            break

    profile = residual_profile(
        nekrasov_residual(t, DiagonalMetric(t, assemble(x)), hbar, m)
    )
    raise SolverError(
        f"metric equation not solved to tol={opts.tol} (best sup {best_sup:.3e})",
        details={"residual_profile": profile, "best_sup": best_sup},
    )


@dataclass(frozen=True)
class CommutatorReport:
    """Per-level deviations of the truncated shifts from canonical
    commutation.

    Attributes
    ----------
    levels : tuple of int
        Graded levels present in the basis.
    per_pair : mapping
        ``(i, j)`` (1-based) -> tuple of per-level sup norms of
        ``[Z_i^dagger, Z_j] - hbar delta_ij Id`` restricted to each level.
    max_per_level : tuple of float
        Maximum over all pairs, per level.
    """

    levels: Tuple[int, ...]
    per_pair: Mapping[Tuple[int, int], Tuple[float, ...]]
    max_per_level: Tuple[float, ...]


def commutator_diagnostics(
    t: FockTruncation, c: DiagonalMetric, hbar: float
) -> CommutatorReport:
    """Assemble the weighted shifts and measure ``[Z_i^dagger, Z_j]`` against
    ``hbar delta_ij`` on every graded level.

    The shifts act on the orthonormalized basis, ``Z_i e_mu =
    sqrt(c_{mu+e_i}/c_mu) e_{mu+e_i}``, and annihilate the top level (the
    truncation cut); deviations at the highest levels reflect that cut while
    interior levels witness the equation.
    """
    if not isinstance(t, FockTruncation):
        raise ValidationError(f"expected FockTruncation, got {type(t).__name__}")
    if not isinstance(c, DiagonalMetric) or c.truncation.basis != t.basis:
        raise ValidationError("metric does not belong to this truncation")
    hbar = float(hbar)
    if not np.isfinite(hbar):
        raise ValidationError("hbar must be finite")

    size = len(t.basis)
    shifts = []
    for i in range(t.n):
        z = np.zeros((size, size))
        for p in range(size):
            iu = t.up[i, p]
            if iu >= 0:
                z[iu, p] = np.sqrt(c.values[iu] / c.values[p])
        shifts.append(z)

    levels = t.levels()
    level_sites = {lev: [p for p, mono in enumerate(t.basis) if sum(mono) == lev] for lev in levels}
    per_pair = {}
    max_per_level = [0.0] * len(levels)
    for i in range(t.n):
        for j in range(t.n):
            m = shifts[i].T @ shifts[j] - shifts[j] @ shifts[i].T
            if i == j:
                m = m - hbar * np.eye(size)
            sups = []
            for li, lev in enumerate(levels):
                sites = level_sites[lev]
                block = m[np.ix_(sites, sites)]
                sup = float(np.linalg.norm(block, 2)) if block.size else 0.0
                sups.append(sup)
                max_per_level[li] = max(max_per_level[li], sup)
            per_pair[(i + 1, j + 1)] = tuple(sups)
    return CommutatorReport(
        levels=levels, per_pair=per_pair, max_per_level=tuple(max_per_level)
    )


def truncation_from_json(text: str):
    """Parse a problem description ``{"n", "module", "D", "hbar", "m",
    "buffer"}``; returns ``(truncation, hbar, m, buffer)`` with defaults
    ``m = n`` and ``buffer = 2``."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValidationError("problem JSON must be an object")
    missing = {"n", "module", "D", "hbar"} - set(obj)
    if missing:
        raise ValidationError(f"problem JSON missing keys {sorted(missing)}")
    module = obj["module"]
    if isinstance(module, dict):
        if set(module) != {"ideal"}:
            raise ValidationError('module object must have the single key "ideal"')
        module = module["ideal"]
    elif module != "full":
        raise ValidationError(f'module must be "full" or an ideal object, got {module!r}')
    n = obj["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ValidationError(f"n must be an integer >= 1, got {n!r}")
    t = build_truncation(n, module, obj["D"])
    hbar = float(obj["hbar"])
    m = obj.get("m", n)
    buffer = obj.get("buffer", DEFAULT_BUFFER)
    return t, hbar, m, buffer

"""Exact normal-ordering engine for the flat noncommutative coordinate
algebra and the Gaussian state on it.

The *-algebra has generators ``z_1..z_n, z_1*..z_n*`` with relations

    [z_i, z_j] = 0,   [z_i*, z_j*] = 0,   [z_i*, z_j] = hbar delta_ij,

where ``hbar`` is kept symbolic: every coefficient is a polynomial in
``hbar`` with Gaussian-rational coefficients, so all identities in this
module are checked exactly.  A :class:`NormalForm` stores an element as a
combination of normal-ordered monomials ``z^k (z*)^l`` (all plain
generators left of all starred ones).  The Gaussian state evaluates

    state( z^k (z*)^l )  =  prod_i delta_{k_i l_i} k_i! rho^{k_i},

and satisfies two exchange identities used as exact oracles:

    (rho + hbar) * state(dbar_i(a))  =  state(a z_i),
    (rho + hbar) * state(z_i a)     =  rho * state(a z_i),

where ``dbar_i`` is the derivation killing plain generators with
``dbar_i(z_j*) = delta_ij``.  :func:`verify_state_identities` sweeps both
identities over all normal monomials up to a degree cap, exactly in
rational arithmetic; :func:`gram_matrix` assembles the positivity witness
``G = state(m_p m_q*)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ValidationError

__all__ = [
    "QQi",
    "HbarPoly",
    "Word",
    "NormalForm",
    "normal_order",
    "nf_multiply",
    "state_rho",
    "dbar",
    "verify_state_identities",
    "gram_matrix",
]

RationalLike = Union[int, Fraction]


def _as_fraction(x, name: str = "value") -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return Fraction(int(x))
    if isinstance(x, float):
        if not np.isfinite(x):
            raise ValidationError(f"{name} must be finite")
        return Fraction(x)
    raise ValidationError(f"{name} must be rational or float, got {type(x).__name__}")


@dataclass(frozen=True)
class QQi:
    """Gaussian rational ``re + i im`` with exact :class:`Fraction` parts."""

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    @staticmethod
    def of(x) -> "QQi":
        """Coerce an int, Fraction, complex, or QQi to a Gaussian rational."""
        if isinstance(x, QQi):
            return x
        if isinstance(x, complex):
            return QQi(_as_fraction(x.real), _as_fraction(x.imag))
        return QQi(_as_fraction(x))

    def __add__(self, other):
        try:
            o = QQi.of(other)
        except ValidationError:
            return NotImplemented
        return QQi(self.re + o.re, self.im + o.im)

    def __sub__(self, other):
        try:
            o = QQi.of(other)
        except ValidationError:
            return NotImplemented
        return QQi(self.re - o.re, self.im - o.im)

    def __mul__(self, other):
        try:
            o = QQi.of(other)
        except ValidationError:
            return NotImplemented
        return QQi(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self) -> "QQi":
        return QQi(-self.re, -self.im)

    def conjugate(self) -> "QQi":
        return QQi(self.re, -self.im)

    def __bool__(self) -> bool:
        return bool(self.re) or bool(self.im)

    def to_complex(self) -> complex:
        return complex(float(self.re), float(self.im))

    def abs2(self) -> Fraction:
        """Exact squared modulus."""
        return self.re * self.re + self.im * self.im


_ZERO = QQi()
_ONE = QQi(Fraction(1))


@dataclass(frozen=True)
class HbarPoly:
    """Polynomial in ``hbar`` with Gaussian-rational coefficients.

    ``coeffs`` maps degree to a nonzero :class:`QQi`.
    """

    coeffs: Mapping[int, QQi]

    def __post_init__(self) -> None:
        clean = {}
        for deg, val in self.coeffs.items():
            if not isinstance(deg, int) or deg < 0:
                raise ValidationError(f"bad hbar degree {deg!r}")
            val = QQi.of(val)
            if val:
                clean[deg] = val
        object.__setattr__(self, "coeffs", clean)

    @staticmethod
    def of(x) -> "HbarPoly":
        """Coerce an int/Fraction/QQi (degree 0) or HbarPoly."""
        if isinstance(x, HbarPoly):
            return x
        if isinstance(x, NormalForm):
            raise ValidationError("cannot coerce a NormalForm to a coefficient")
        return HbarPoly({0: QQi.of(x)})

    @staticmethod
    def hbar(power: int = 1) -> "HbarPoly":
        return HbarPoly({power: _ONE})

    def __add__(self, other):
        try:
            o = HbarPoly.of(other)
        except ValidationError:
            return NotImplemented
        out = dict(self.coeffs)
        for deg, val in o.coeffs.items():
            out[deg] = out.get(deg, _ZERO) + val
        return HbarPoly(out)

    def __sub__(self, other):
        try:
            o = HbarPoly.of(other)
        except ValidationError:
            return NotImplemented
        out = dict(self.coeffs)
        for deg, val in o.coeffs.items():
            out[deg] = out.get(deg, _ZERO) - val
        return HbarPoly(out)

    def __mul__(self, other):
        try:
            o = HbarPoly.of(other)
        except ValidationError:
            return NotImplemented
        out: dict[int, QQi] = {}
        for d1, v1 in self.coeffs.items():
            for d2, v2 in o.coeffs.items():
                d = d1 + d2
                out[d] = out.get(d, _ZERO) + v1 * v2
        return HbarPoly(out)

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self) -> "HbarPoly":
        return HbarPoly({d: -v for d, v in self.coeffs.items()})

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, HbarPoly):
            try:
                other = HbarPoly.of(other)
            except ValidationError:
                return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    def conjugate(self) -> "HbarPoly":
        return HbarPoly({d: v.conjugate() for d, v in self.coeffs.items()})

    def evaluate_exact(self, hbar: RationalLike) -> QQi:
        """Exact evaluation at a rational ``hbar``."""
        h = _as_fraction(hbar, "hbar")
        total = _ZERO
        for deg, val in self.coeffs.items():
            total = total + val * QQi(h**deg)
        return total

    def evaluate(self, hbar: float) -> complex:
        """Floating evaluation at a numeric ``hbar``."""
        return sum(
            (val.to_complex() * float(hbar) ** deg for deg, val in self.coeffs.items()),
            0j,
        )


_ZERO_POLY = HbarPoly({})


def _check_index(n: int, i: int) -> int:
    if not isinstance(i, (int, np.integer)) or isinstance(i, bool) or not 1 <= i <= n:
        raise ValidationError(f"generator index must be in 1..{n}, got {i!r}")
    return int(i)


def _check_exponents(n: int, m, name: str) -> Tuple[int, ...]:
    m = tuple(m)
    if len(m) != n:
        raise ValidationError(f"{name}: expected {n} exponents, got {len(m)}")
    for e in m:
        if not isinstance(e, (int, np.integer)) or isinstance(e, bool) or e < 0:
            raise ValidationError(f"{name}: exponents must be integers >= 0, got {e!r}")
    return tuple(int(e) for e in m)


@dataclass(frozen=True)
class Word:
    """Scalar multiple of a product of generators, as written.

    ``letters`` is a sequence of ``(index, starred)`` pairs with indices in
    ``1..n``; ``(2, True)`` denotes ``z_2*``.
    """

    n: int
    letters: Tuple[Tuple[int, bool], ...]
    scalar: QQi = _ONE

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool) or self.n < 1:
            raise ValidationError(f"n must be an integer >= 1, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        letters = []
        for letter in self.letters:
            idx, star = letter
            letters.append((_check_index(self.n, idx), bool(star)))
        object.__setattr__(self, "letters", tuple(letters))
        object.__setattr__(self, "scalar", QQi.of(self.scalar))

    def star(self) -> "Word":
        """Involution: reverse the letters, star each, conjugate the scalar."""
        flipped = tuple((i, not s) for i, s in reversed(self.letters))
        return Word(self.n, flipped, self.scalar.conjugate())

    def concat(self, other: "Word") -> "Word":
        """Product of two words (letter concatenation)."""
        if other.n != self.n:
            raise ValidationError("words over different generator counts")
        return Word(self.n, self.letters + other.letters, self.scalar * other.scalar)


@dataclass(frozen=True)
class NormalForm:
    """Exact combination of normal-ordered monomials ``z^k (z*)^l``.

    ``terms`` maps ``(k, l)`` exponent pairs to nonzero ``hbar``-polynomial
    coefficients.
    """

    n: int
    terms: Mapping[Tuple[Tuple[int, ...], Tuple[int, ...]], HbarPoly]

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool) or self.n < 1:
            raise ValidationError(f"n must be an integer >= 1, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        clean = {}
        for (k, l), coeff in self.terms.items():
            key = (_check_exponents(self.n, k, "k"), _check_exponents(self.n, l, "l"))
            coeff = HbarPoly.of(coeff)
            if coeff:
                clean[key] = coeff
        object.__setattr__(self, "terms", clean)

    @classmethod
    def zero(cls, n: int) -> "NormalForm":
        return cls(n, {})

    @classmethod
    def one(cls, n: int) -> "NormalForm":
        zero = (0,) * n
        return cls(n, {(zero, zero): HbarPoly.of(1)})

    @classmethod
    def monomial(cls, n: int, k, l, coeff=1) -> "NormalForm":
        return cls(n, {(tuple(k), tuple(l)): HbarPoly.of(coeff)})

    def __add__(self, other: "NormalForm") -> "NormalForm":
        if not isinstance(other, NormalForm) or other.n != self.n:
            return NotImplemented
        out = dict(self.terms)
        for key, coeff in other.terms.items():
            out[key] = out.get(key, _ZERO_POLY) + coeff
        return NormalForm(self.n, out)

    def __sub__(self, other: "NormalForm") -> "NormalForm":
        if not isinstance(other, NormalForm) or other.n != self.n:
            return NotImplemented
        out = dict(self.terms)
        for key, coeff in other.terms.items():
            out[key] = out.get(key, _ZERO_POLY) - coeff
        return NormalForm(self.n, out)

    def scale(self, factor) -> "NormalForm":
        f = HbarPoly.of(factor)
        return NormalForm(self.n, {key: coeff * f for key, coeff in self.terms.items()})

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, NormalForm)
            and other.n == self.n
            and dict(other.terms) == dict(self.terms)
        )

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __bool__(self) -> bool:
        return bool(self.terms)

    def mul_z(self, i: int) -> "NormalForm":
        """Right multiplication by ``z_i``: commute it through the starred
        block, producing the ladder term ``hbar l_i``."""
        i = _check_index(self.n, i) - 1
        out: dict = {}

        def add(key, coeff):
            out[key] = out.get(key, _ZERO_POLY) + coeff

        for (k, l), coeff in self.terms.items():
            bumped = k[:i] + (k[i] + 1,) + k[i + 1 :]
            add((bumped, l), coeff)
            if l[i] >= 1:
                lowered = l[:i] + (l[i] - 1,) + l[i + 1 :]
                add((k, lowered), coeff * HbarPoly.hbar() * l[i])
        return NormalForm(self.n, out)

    def mul_zstar(self, i: int) -> "NormalForm":
        """Right multiplication by ``z_i*`` (already normal-ordered)."""
        i = _check_index(self.n, i) - 1
        out: dict = {}
        for (k, l), coeff in self.terms.items():
            bumped = l[:i] + (l[i] + 1,) + l[i + 1 :]
            key = (k, bumped)
            out[key] = out.get(key, _ZERO_POLY) + coeff
        return NormalForm(self.n, out)

    def lmul_z(self, i: int) -> "NormalForm":
        """Left multiplication by ``z_i`` (no reordering needed)."""
        i = _check_index(self.n, i) - 1
        out: dict = {}
        for (k, l), coeff in self.terms.items():
            bumped = k[:i] + (k[i] + 1,) + k[i + 1 :]
            key = (bumped, l)
            out[key] = out.get(key, _ZERO_POLY) + coeff
        return NormalForm(self.n, out)

    def star(self) -> "NormalForm":
        """Involution: ``(z^k (z*)^l)* = z^l (z*)^k`` with conjugated
        coefficients (``hbar`` is real)."""
        return NormalForm(
            self.n, {(l, k): coeff.conjugate() for (k, l), coeff in self.terms.items()}
        )


def normal_order(w: Union[Word, Iterable[Word]]) -> NormalForm:
    """Rewrite a word (or a sum of words) into its exact normal form by
    moving every plain generator left through the starred block via
    ``z_i* z_j = z_j z_i* + hbar delta_ij``."""
    words = [w] if isinstance(w, Word) else list(w)
    if not words:
        raise ValidationError("empty word sum has no generator count")
    n = words[0].n
    total = NormalForm.zero(n)
    for word in words:
        if not isinstance(word, Word):
            raise ValidationError(f"expected Word, got {type(word).__name__}")
        if word.n != n:
            raise ValidationError("words over different generator counts")
        acc = NormalForm.one(n).scale(HbarPoly({0: word.scalar}))
        for idx, star in word.letters:
            acc = acc.mul_zstar(idx) if star else acc.mul_z(idx)
        total = total + acc
    return total


def nf_multiply(x: NormalForm, y: NormalForm) -> NormalForm:
    """Product of two normal forms via the per-variable closed form

        (z*)^m z^p = sum_j j! C(m,j) C(p,j) hbar^j z^{p-j} (z*)^{m-j},

    applied independently in each variable (distinct variables commute).
    """
    if not isinstance(x, NormalForm) or not isinstance(y, NormalForm):
        raise ValidationError("nf_multiply expects two NormalForm operands")
    if x.n != y.n:
        raise ValidationError("normal forms over different generator counts")
    n = x.n
    out: dict = {}
    for (k1, l1), c1 in x.terms.items():
        for (k2, l2), c2 in y.terms.items():
            base = c1 * c2
            # iterate over contraction vectors j <= min(l1, k2) componentwise
            ranges = [range(min(l1[i], k2[i]) + 1) for i in range(n)]
            for j in _cartesian(ranges):
                factor = 1
                for i in range(n):
                    ji = j[i]
                    factor *= (
                        math.factorial(ji)
                        * math.comb(l1[i], ji)
                        * math.comb(k2[i], ji)
                    )
                coeff = base * HbarPoly.hbar(sum(j)) * factor
                key = (
                    tuple(k1[i] + k2[i] - j[i] for i in range(n)),
                    tuple(l1[i] + l2[i] - j[i] for i in range(n)),
                )
                out[key] = out.get(key, _ZERO_POLY) + coeff
    return NormalForm(n, out)


def _cartesian(ranges):
    if not ranges:
        yield ()
        return
    for head in ranges[0]:
        for tail in _cartesian(ranges[1:]):
            yield (head,) + tail


def state_rho(x: NormalForm, rho) -> HbarPoly:
    """Gaussian state: only balanced monomials ``k = l`` survive, each
    contributing ``prod_i k_i! rho^{k_i}`` times its coefficient.

    The result stays a polynomial in ``hbar`` (exact when ``rho`` is
    rational); evaluate it to obtain a number.
    """
    if not isinstance(x, NormalForm):
        raise ValidationError(f"expected NormalForm, got {type(x).__name__}")
    rho = _as_fraction(rho, "rho")
    total = _ZERO_POLY
    for (k, l), coeff in x.terms.items():
        if k != l:
            continue
        weight = Fraction(1)
        for e in k:
            weight *= math.factorial(e) * rho**e
        total = total + coeff * QQi(weight)
    return total


def dbar(x: NormalForm, i: int) -> NormalForm:
    """Derivation in the starred directions: ``dbar_i(z_j*) = delta_ij``,
    ``dbar_i(z_j) = 0``; on monomials ``l_i z^k (z*)^{l - e_i}``."""
    if not isinstance(x, NormalForm):
        raise ValidationError(f"expected NormalForm, got {type(x).__name__}")
    i = _check_index(x.n, i) - 1
    out: dict = {}
    for (k, l), coeff in x.terms.items():
        if l[i] == 0:
            continue
        lowered = l[:i] + (l[i] - 1,) + l[i + 1 :]
        key = (k, lowered)
        out[key] = out.get(key, _ZERO_POLY) + coeff * l[i]
    return NormalForm(x.n, out)


def _monomials_up_to(n: int, degree: int):
    """All exponent multi-indices over ``n`` variables with sum <= degree,
    in graded lexicographic order."""
    out = []
    for total in range(degree + 1):
        out.extend(sorted(_compositions(n, total), reverse=True))
    return out


def _compositions(n: int, total: int):
    if n == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(n - 1, total - head):
            yield (head,) + tail


def verify_state_identities(n: int, max_degree: int, rho, hbar) -> float:
    """Sweep the two exchange identities over all normal monomials of total
    degree up to ``max_degree`` and report the largest deviation.

    Both identities are checked in their multiplied-through form, which is a
    polynomial identity:

        (rho + hbar) state(dbar_i(a)) - state(a z_i)        == 0,
        (rho + hbar) state(z_i a)     - rho state(a z_i)    == 0.

    With rational ``rho`` and ``hbar`` the computation is exact and the
    return value is ``0.0`` exactly; with floats it is the max absolute
    deviation.
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise ValidationError(f"n must be an integer >= 1, got {n!r}")
    if not isinstance(max_degree, (int, np.integer)) or max_degree < 0:
        raise ValidationError(f"max_degree must be an integer >= 0, got {max_degree!r}")
    exact = not (isinstance(rho, float) or isinstance(hbar, float))
    rho_frac = _as_fraction(rho, "rho")
    hbar_frac = _as_fraction(hbar, "hbar")
    rho_plus_hbar = HbarPoly({0: QQi(rho_frac), 1: _ONE})

    def magnitude(poly: HbarPoly) -> float:
        if exact:
            value = poly.evaluate_exact(hbar_frac)
            return 0.0 if not value else float(value.abs2()) ** 0.5
        return abs(poly.evaluate(float(hbar_frac)))

    worst = 0.0
    exponents = _monomials_up_to(n, max_degree)
    for k in exponents:
        for l in exponents:
            if sum(k) + sum(l) > max_degree:
                continue
            a = NormalForm.monomial(n, k, l)
            for i in range(1, n + 1):
                az = state_rho(a.mul_z(i), rho_frac)
                byparts = rho_plus_hbar * state_rho(dbar(a, i), rho_frac) - az
                exch = rho_plus_hbar * state_rho(a.lmul_z(i), rho_frac) - az * QQi(
                    rho_frac
                )
                worst = max(worst, magnitude(byparts), magnitude(exch))
    return worst


def gram_matrix(n: int, max_degree: int, rho, hbar) -> np.ndarray:
    """Positivity witness: ``G[p, q] = state(m_p m_q*)`` over all normal
    monomials of total degree up to ``max_degree``, evaluated numerically."""
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise ValidationError(f"n must be an integer >= 1, got {n!r}")
    exponents = _monomials_up_to(n, max_degree)
    basis = [
        (k, l)
        for k in exponents
        for l in exponents
        if sum(k) + sum(l) <= max_degree
    ]
    rho_f = _as_fraction(rho, "rho")
    hbar_f = float(_as_fraction(hbar, "hbar"))
    size = len(basis)
    gram = np.zeros((size, size), dtype=np.complex128)
    forms = [NormalForm.monomial(n, k, l) for k, l in basis]
    stars = [f.star() for f in forms]
    for p in range(size):
        for q in range(size):
            gram[p, q] = state_rho(nf_multiply(forms[p], stars[q]), rho_f).evaluate(
                hbar_f
            )
    return gram

"""Exact scalar arithmetic in Q(q^(1/D)).

Three layers, all immutable and exact:

  Fraction     -- rational coefficients and rational exponents (stdlib).
  QLaurent     -- Laurent polynomial in q: finite term list (exponent, coeff),
                  sorted ascending by exponent, no zero coefficients.
  FieldElement -- quotient num/den of two QLaurent in canonical form.

Canonical form of a quotient: the numerator and denominator share no
polynomial or monomial factor, and the denominator's highest-exponent term is
exactly 1*q^0 (so the denominator is 1 plus terms of negative exponent). This
representative is unique, so equality and hashing are structural, emitted JSON
is byte-stable, and the denominator never vanishes at q = infinity, which
makes regularity at infinity a one-line test on the numerator.

The bar involution q -> q^(-1) is exponent negation followed by
re-canonicalization; it is an exact field automorphism.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Mapping, Optional, Sequence, Tuple, Union

Rat = Union[int, Fraction]


class AmbientMismatchError(ValueError):
    """Arithmetic combined scalars tagged with different root orders D."""


def _frac(x: Rat) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected int or Fraction, got {type(x).__name__}")


# ---------------------------------------------------------------------------
# Laurent polynomials
# ---------------------------------------------------------------------------

class QLaurent:
    """Laurent polynomial sum_e c_e q^e with rational exponents and coefficients.

    terms is a tuple of (exponent, coefficient) pairs, strictly ascending in
    exponent, with every coefficient nonzero.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Union[Mapping[Rat, Rat], Iterable[Tuple[Rat, Rat]], None] = None):
        items = terms.items() if isinstance(terms, Mapping) else (terms or ())
        acc: dict = {}
        for e, c in items:
            e = _frac(e)
            c = _frac(c)
            if c:
                acc[e] = acc.get(e, Fraction(0)) + c
        object.__setattr__(self, "terms", tuple(sorted((e, c) for e, c in acc.items() if c)))

    def __setattr__(self, name, value):  # immutability guard
        raise AttributeError("QLaurent is immutable")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero() -> "QLaurent":
        return _L_ZERO

    @staticmethod
    def one() -> "QLaurent":
        return _L_ONE

    @staticmethod
    def const(c: Rat) -> "QLaurent":
        return QLaurent(((Fraction(0), _frac(c)),))

    @staticmethod
    def q_power(e: Rat, c: Rat = 1) -> "QLaurent":
        return QLaurent(((_frac(e), _frac(c)),))

    # -- predicates and views ------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def degree(self) -> Optional[Fraction]:
        """Top exponent, or None for the zero polynomial."""
        return self.terms[-1][0] if self.terms else None

    def valuation(self) -> Optional[Fraction]:
        """Bottom exponent, or None for the zero polynomial."""
        return self.terms[0][0] if self.terms else None

    def coeff(self, e: Rat) -> Fraction:
        e = _frac(e)
        for ee, cc in self.terms:
            if ee == e:
                return cc
        return Fraction(0)

    def exponent_denominator(self) -> int:
        """lcm of the denominators of all exponents (1 for the zero poly)."""
        out = 1
        for e, _ in self.terms:
            out = lcm(out, e.denominator)
        return out

    # -- ring operations -----------------------------------------------------

    def __add__(self, other: "QLaurent") -> "QLaurent":
        if not isinstance(other, QLaurent):
            return NotImplemented
        if not self.terms:
            return other
        if not other.terms:
            return self
        acc = dict(self.terms)
        for e, c in other.terms:
            s = acc.get(e, Fraction(0)) + c
            if s:
                acc[e] = s
            else:
                acc.pop(e, None)
        return _laurent_from_clean(acc)

    def __neg__(self) -> "QLaurent":
        return _laurent_from_sorted(tuple((e, -c) for e, c in self.terms))

    def __sub__(self, other: "QLaurent") -> "QLaurent":
        if not isinstance(other, QLaurent):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other: "QLaurent") -> "QLaurent":
        if not isinstance(other, QLaurent):
            return NotImplemented
        if not self.terms or not other.terms:
            return _L_ZERO
        if len(self.terms) == 1:
            (e, c), = self.terms
            return other.scale(c, e)
        if len(other.terms) == 1:
            (e, c), = other.terms
            return self.scale(c, e)
        acc: dict = {}
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                e = e1 + e2
                s = acc.get(e, Fraction(0)) + c1 * c2
                if s:
                    acc[e] = s
                else:
                    acc.pop(e, None)
        return _laurent_from_clean(acc)

    def scale(self, c: Rat, e: Rat = 0) -> "QLaurent":
        """Multiply by the monomial c*q^e."""
        c = _frac(c)
        if not c:
            return _L_ZERO
        e = _frac(e)
        return _laurent_from_sorted(tuple((ee + e, cc * c) for ee, cc in self.terms))

    def __pow__(self, n: int) -> "QLaurent":
        if not isinstance(n, int) or n < 0:
            raise ValueError("QLaurent power wants a nonnegative integer")
        out = _L_ONE
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base if n > 1 else base
            n >>= 1
        return out

    def bar(self) -> "QLaurent":
        """The involution q -> q^(-1): negate every exponent."""
        return _laurent_from_sorted(tuple((-e, c) for e, c in reversed(self.terms)))

    def subs_q_one(self) -> Fraction:
        """Evaluate at q = 1 (the classical specialization)."""
        return sum((c for _, c in self.terms), Fraction(0))

    # -- comparisons ---------------------------------------------------------

    def __eq__(self, other) -> bool:
        return isinstance(other, QLaurent) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(self.terms)

    def __repr__(self) -> str:
        return f"QLaurent({_fmt_terms(self.terms) or '0'})"


def _laurent_from_sorted(terms: Tuple[Tuple[Fraction, Fraction], ...]) -> QLaurent:
    out = object.__new__(QLaurent)
    object.__setattr__(out, "terms", terms)
    return out


def _laurent_from_clean(acc: Mapping[Fraction, Fraction]) -> QLaurent:
    return _laurent_from_sorted(tuple(sorted(acc.items())))


_L_ZERO = _laurent_from_sorted(())
_L_ONE = _laurent_from_sorted(((Fraction(0), Fraction(1)),))


def _fmt_terms(terms) -> str:
    bits = []
    for e, c in reversed(terms):
        if e == 0:
            bits.append(str(c))
        elif c == 1:
            bits.append(f"q^{e}")
        elif c == -1:
            bits.append(f"-q^{e}")
        else:
            bits.append(f"{c}*q^{e}")
    return " + ".join(bits).replace("+ -", "- ")


# ---------------------------------------------------------------------------
# Dense univariate helpers for GCD cancellation
#
# A Laurent polynomial with exponent denominators dividing s is q^(v) * P(u)
# with u = q^(1/s), v its valuation and P an ordinary polynomial over Q with
# nonzero constant term. GCDs are computed on the dense coefficient lists of
# such P, ascending degree.
# ---------------------------------------------------------------------------

def _dense(p: QLaurent, s: int) -> Tuple[list, Fraction]:
    """Return (coeffs ascending in u = q^(1/s), valuation of p)."""
    v = p.valuation()
    assert v is not None
    span = (p.degree() - v) * s
    assert span.denominator == 1
    out = [Fraction(0)] * (int(span) + 1)
    for e, c in p.terms:
        k = (e - v) * s
        out[int(k)] = c
    return out, v


def _dense_trim(a: list) -> list:
    n = len(a)
    while n and not a[n - 1]:
        n -= 1
    return a[:n]


def _int_parts(a: Sequence[Fraction]) -> Tuple[list, Fraction]:
    """Split a trimmed nonzero Fraction list as content * primitive int list."""
    scale = lcm(*(c.denominator for c in a)) if len(a) > 1 else a[0].denominator
    ints = [int(c * scale) for c in a]
    cont = gcd(*ints) if len(ints) > 1 else abs(ints[0])
    return [c // cont for c in ints], Fraction(cont, scale)


def _int_prem(a: list, b: list) -> list:
    """Pseudo-remainder of integer lists: lb^k * a mod b stays over Z."""
    db, lb = len(b) - 1, b[-1]
    r = list(a)
    for k in range(len(a) - 1, db - 1, -1):
        c = r[k]
        if c:
            for j in range(len(r)):
                r[j] *= lb
            for j in range(db + 1):
                r[k - db + j] -= c * b[j]
    return _dense_trim(r)


def _int_gcd_primitive(ia: list, ib: list) -> list:
    """GCD of nonzero primitive integer lists via the primitive PRS.

    Each pseudo-remainder is reduced to its primitive part, which keeps
    coefficient growth minimal; the result is primitive with positive lead.
    """
    while ib:
        r = _int_prem(ia, ib)
        if r:
            cont = gcd(*r) if len(r) > 1 else abs(r[0])
            r = [c // cont for c in r]
        ia, ib = ib, r
    return [-c for c in ia] if ia[-1] < 0 else list(ia)


def _int_div_exact(a: list, b: list) -> list:
    """Exact division of integer lists; raises when the division is inexact."""
    a = list(a)
    db, lb = len(b) - 1, b[-1]
    quot = [0] * max(len(a) - db, 0)
    for k in range(len(a) - 1, db - 1, -1):
        c = a[k]
        if c:
            f, rem = divmod(c, lb)
            if rem:
                raise ArithmeticError("inexact polynomial division")
            quot[k - db] = f
            for j in range(db + 1):
                a[k - db + j] -= f * b[j]
    if any(a):
        raise ArithmeticError("inexact polynomial division")
    return _dense_trim(quot)


def _dense_gcd(a: list, b: list) -> list:
    a, b = _dense_trim(list(a)), _dense_trim(list(b))
    if not b:
        a, b = b, a
    if not b:
        return []
    if not a:
        lc = b[-1]
        return [c / lc for c in b]
    # rational scaling never changes the monic gcd, so work over Z
    g = _int_gcd_primitive(_int_parts(a)[0], _int_parts(b)[0])
    lc = g[-1]
    return [Fraction(c, lc) for c in g]


def laurent_cancel(num: QLaurent, den: QLaurent) -> Tuple[QLaurent, QLaurent]:
    """Cancel the GCD of num/den and normalize den's top term to 1*q^0.

    Returns the unique pair (n, d) with n/d = num/den, gcd(n, d) a unit, and
    d = 1 + (terms of strictly negative exponent).
    """
    if den.is_zero():
        raise ZeroDivisionError("zero denominator")
    if num.is_zero():
        return _L_ZERO, _L_ONE
    s = lcm(num.exponent_denominator(), den.exponent_denominator())
    a, va = _dense(num, s)
    b, vb = _dense(den, s)
    # all polynomial work over Z: num = ca * ia, den = cb * ib with ia, ib
    # primitive; Gauss's lemma keeps the exact divisions by the gcd integral
    ia, ca = _int_parts(a)
    ib, cb = _int_parts(b)
    g = _int_gcd_primitive(ia, ib)
    if len(g) > 1:
        ia = _int_div_exact(ia, g)
        ib = _int_div_exact(ib, g)
    # divide both by (leading coeff of den) * q^(top exponent of den)
    lb = ib[-1]
    top_e = vb + Fraction(len(ib) - 1, s)
    nf = ca / (cb * lb)
    n = QLaurent([(va + Fraction(j, s) - top_e, nf * c)
                  for j, c in enumerate(ia) if c])
    d = QLaurent([(vb + Fraction(j, s) - top_e, Fraction(c, lb))
                  for j, c in enumerate(ib) if c])
    return n, d


# ---------------------------------------------------------------------------
# The field
# ---------------------------------------------------------------------------

class FieldElement:
    """Element of Q(q^(1/D)) as a canonical quotient of Laurent polynomials.

    ambient_D, when set, records the root order the exponents must respect
    (every exponent denominator divides D). Arithmetic merges the tags of its
    operands and raises AmbientMismatchError on conflict; None means untagged
    and combines with anything. Tags never affect equality or hashing.
    """

    __slots__ = ("num", "den", "ambient_D")

    def __init__(self, num: QLaurent, den: QLaurent = _L_ONE, ambient_D: Optional[int] = None):
        if not isinstance(num, QLaurent) or not isinstance(den, QLaurent):
            raise TypeError("FieldElement wants QLaurent parts")
        if den == _L_ONE and not num.is_zero():
            n, d = num, _L_ONE
        else:
            n, d = laurent_cancel(num, den)
        object.__setattr__(self, "num", n)
        object.__setattr__(self, "den", d)
        object.__setattr__(self, "ambient_D", ambient_D)
        if ambient_D is not None:
            self._check_ambient()

    def __setattr__(self, name, value):
        raise AttributeError("FieldElement is immutable")

    def _check_ambient(self) -> None:
        D = self.ambient_D
        need = lcm(self.num.exponent_denominator(), self.den.exponent_denominator())
        if D % need != 0:
            raise AmbientMismatchError(
                f"exponent denominators do not divide ambient root order D={D}")

    # -- constructors --------------------------------------------------------

    @staticmethod
    def from_int(n: int) -> "FieldElement":
        return FieldElement(QLaurent.const(n))

    @staticmethod
    def from_fraction(c: Rat) -> "FieldElement":
        return FieldElement(QLaurent.const(c))

    @staticmethod
    def q_power(e: Rat, c: Rat = 1) -> "FieldElement":
        return FieldElement(QLaurent.q_power(e, c))

    def with_ambient(self, D: Optional[int]) -> "FieldElement":
        out = object.__new__(FieldElement)
        object.__setattr__(out, "num", self.num)
        object.__setattr__(out, "den", self.den)
        object.__setattr__(out, "ambient_D", D)
        if D is not None:
            out._check_ambient()
        return out

    # -- predicates ----------------------------------------------------------

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __bool__(self) -> bool:
        return bool(self.num)

    def is_one(self) -> bool:
        return self.num == _L_ONE and self.den == _L_ONE

    def is_laurent(self) -> bool:
        """True when the denominator is 1."""
        return self.den == _L_ONE

    # -- arithmetic -----------------------------------------------------------

    @staticmethod
    def _merge_ambient(a: "FieldElement", b: "FieldElement") -> Optional[int]:
        if a.ambient_D is None:
            return b.ambient_D
        if b.ambient_D is None or a.ambient_D == b.ambient_D:
            return a.ambient_D
        raise AmbientMismatchError(
            f"mixed root orders D={a.ambient_D} and D={b.ambient_D}")

    def _coerce(self, other) -> Optional["FieldElement"]:
        if isinstance(other, FieldElement):
            return other
        if isinstance(other, (int, Fraction)):
            return FieldElement.from_fraction(other)
        return None

    def __add__(self, other) -> "FieldElement":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        D = FieldElement._merge_ambient(self, o)
        if self.den == _L_ONE and o.den == _L_ONE:
            return _field_raw(self.num + o.num, _L_ONE, D)
        if self.den == o.den:
            return FieldElement(self.num + o.num, self.den, D)
        return FieldElement(self.num * o.den + o.num * self.den, self.den * o.den, D)

    __radd__ = __add__

    def __neg__(self) -> "FieldElement":
        return _field_raw(-self.num, self.den, self.ambient_D)

    def __sub__(self, other) -> "FieldElement":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other) -> "FieldElement":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other) -> "FieldElement":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        D = FieldElement._merge_ambient(self, o)
        if self.den == _L_ONE and o.den == _L_ONE:
            return _field_raw(self.num * o.num, _L_ONE, D)
        return FieldElement(self.num * o.num, self.den * o.den, D)

    __rmul__ = __mul__

    def inv(self) -> "FieldElement":
        if self.is_zero():
            raise ZeroDivisionError("inverting zero")
        return FieldElement(self.den, self.num, self.ambient_D)

    def __truediv__(self, other) -> "FieldElement":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if o.is_zero():
            raise ZeroDivisionError("division by zero")
        D = FieldElement._merge_ambient(self, o)
        return FieldElement(self.num * o.den, self.den * o.num, D)

    def __rtruediv__(self, other) -> "FieldElement":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __pow__(self, n: int) -> "FieldElement":
        if not isinstance(n, int):
            raise TypeError("integer power only")
        if n < 0:
            return self.inv() ** (-n)
        return _field_raw(self.num ** n, self.den ** n, self.ambient_D) if self.den == _L_ONE \
            else FieldElement(self.num ** n, self.den ** n, self.ambient_D)

    def bar(self) -> "FieldElement":
        """Apply q -> q^(-1) and re-canonicalize."""
        return FieldElement(self.num.bar(), self.den.bar(), self.ambient_D)

    def subs_q_one(self) -> Fraction:
        """Classical specialization q = 1; raises ZeroDivisionError at poles."""
        d = self.den.subs_q_one()
        return self.num.subs_q_one() / d

    # -- regularity at q = infinity -------------------------------------------

    def regular_at_infinity(self) -> Tuple[bool, Fraction]:
        """(flag, residue): flag iff no pole at q = infinity; residue = value there.

        In canonical form the denominator tends to 1 at q = infinity, so the
        quotient is regular iff the numerator has no positive exponent, and the
        value is the numerator's q^0 coefficient.
        """
        d = self.num.degree()
        if d is not None and d > 0:
            return False, Fraction(0)
        return True, self.num.coeff(0)

    def vanishes_at_infinity(self) -> bool:
        flag, res = self.regular_at_infinity()
        return flag and res == 0

    # -- comparisons and display ----------------------------------------------

    def __eq__(self, other) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.num == o.num and self.den == o.den

    def __hash__(self) -> int:
        return hash((self.num, self.den))

    def __repr__(self) -> str:
        n = _fmt_terms(self.num.terms) or "0"
        if self.den == _L_ONE:
            return n
        return f"({n})/({_fmt_terms(self.den.terms)})"

    # -- serialization ---------------------------------------------------------

    def to_json_obj(self) -> dict:
        """Normative scalar JSON: term lists ascending by exponent."""
        def dump(p: QLaurent):
            return [[e.numerator, e.denominator, c.numerator, c.denominator]
                    for e, c in p.terms]
        return {"num": dump(self.num), "den": dump(self.den)}

    @staticmethod
    def from_json_obj(obj: Mapping) -> "FieldElement":
        def load(rows) -> QLaurent:
            return QLaurent([(Fraction(en, ed), Fraction(cn, cd))
                             for en, ed, cn, cd in rows])
        return FieldElement(load(obj["num"]), load(obj["den"]))


def _field_raw(num: QLaurent, den: QLaurent, D: Optional[int]) -> FieldElement:
    # caller guarantees canonical form already holds
    out = object.__new__(FieldElement)
    object.__setattr__(out, "num", num)
    object.__setattr__(out, "den", den)
    object.__setattr__(out, "ambient_D", D)
    return out


ZERO = FieldElement(_L_ZERO)
ONE = FieldElement(_L_ONE)
Q = FieldElement.q_power(1)


# ---------------------------------------------------------------------------
# Quantum integers, factorials, binomials
# ---------------------------------------------------------------------------

def q_int(n: int, d: int = 1) -> FieldElement:
    """[n]_{q^d} = (q^{dn} - q^{-dn}) / (q^d - q^{-d}), a Laurent polynomial.

    Expands to q^{d(n-1)} + q^{d(n-3)} + ... + q^{-d(n-1)}; [-n] = -[n], [0] = 0.
    """
    if d <= 0:
        raise ValueError("d must be a positive integer")
    if n == 0:
        return ZERO
    if n < 0:
        return -q_int(-n, d)
    return FieldElement(QLaurent([(d * k, 1) for k in range(-(n - 1), n, 2)]))


def q_factorial(n: int, d: int = 1) -> FieldElement:
    """[n]! = [n][n-1]...[1]; [0]! = 1."""
    if n < 0:
        raise ValueError("factorial of a negative quantum integer")
    out = ONE
    for k in range(2, n + 1):
        out = out * q_int(k, d)
    return out


def q_binom(a: int, b: int, d: int = 1) -> FieldElement:
    """Quantum binomial [a choose b] for 0 <= b <= a; always a Laurent polynomial."""
    if b < 0 or b > a:
        return ZERO
    out = q_factorial(a, d) / (q_factorial(b, d) * q_factorial(a - b, d))
    assert out.is_laurent()  # the quotient of factorials divides exactly
    return out

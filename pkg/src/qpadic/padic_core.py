"""Exact p-adic arithmetic: valuations, unit-group characters, and
certified evaluation of polynomial absolute values on residue cells.

Everything here is exact (integers and ``fractions.Fraction``); complex
numbers enter only as character values, which are roots of unity.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

from .errors import DomainError

Rational = Union[int, Fraction]

# Witness set makes Miller-Rabin deterministic for n < 3.3e24.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)

_MAX_CHARACTER_GROUP = 10**6


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin primality test (exact for n < 3.3e24)."""
    if n < 2:
        return False
    for w in _MR_WITNESSES:
        if n == w:
            return True
        if n % w == 0:
            return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for w in _MR_WITNESSES:
        x = pow(w, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class Prime(int):
    """An odd prime, validated at construction.

    p = 2 is rejected: the unit groups (Z/2^K)^x are not cyclic, and the
    character machinery below assumes a single generator.
    """

    def __new__(cls, p) -> "Prime":
        p = int(p)
        if p == 2:
            raise DomainError("p = 2 is not supported (unit groups are not cyclic)")
        if not is_prime(p):
            raise DomainError(f"{p} is not prime")
        return super().__new__(cls, p)


def _int_valuation(n: int, p: int) -> int:
    """p-adic valuation of a nonzero integer."""
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def valuation(x, p: int) -> Union[int, float]:
    """p-adic valuation of a rational number; ``math.inf`` for zero."""
    if isinstance(x, PAdicRational):
        if x.p != p:
            raise DomainError(f"value carries p = {x.p}, asked for p = {p}")
        return x.valuation
    x = Fraction(x)
    if x == 0:
        return math.inf
    return _int_valuation(x.numerator, p) - _int_valuation(abs(x.denominator), p)


def abs_p(x, p: int) -> Fraction:
    """p-adic absolute value |x|_p as an exact Fraction (0 for x = 0)."""
    v = valuation(x, p)
    if v is math.inf:
        return Fraction(0)
    return Fraction(1, p**v) if v >= 0 else Fraction(p ** (-v))


@dataclass(frozen=True)
class PAdicRational:
    """A rational number viewed p-adically; caches its valuation."""

    value: Fraction
    p: int

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))

    @property
    def valuation(self) -> Union[int, float]:
        x = self.value
        if x == 0:
            return math.inf
        return _int_valuation(x.numerator, self.p) - _int_valuation(
            abs(x.denominator), self.p
        )

    @property
    def abs(self) -> Fraction:
        return abs_p(self.value, self.p)


def _primitive_root(p: int) -> int:
    """Smallest generator of (Z/p)^x, bumped by p if it fails mod p^2.

    The bump guarantees the result generates (Z/p^k)^x for every k >= 1.
    """
    order = p - 1
    factors = set()
    n = order
    d = 2
    while d * d <= n:
        while n % d == 0:
            factors.add(d)
            n //= d
        d += 1
    if n > 1:
        factors.add(n)
    for g in range(2, p):
        if all(pow(g, order // f, p) != 1 for f in factors):
            if pow(g, p - 1, p * p) == 1:
                g += p
            return g
    raise DomainError(f"no primitive root found mod {p}")  # unreachable for prime p


def _root_of_unity(num: int, den: int) -> complex:
    """exp(2*pi*i*num/den), exact for den in {1, 2, 4}."""
    num %= den
    frac = Fraction(num, den)
    if frac.denominator == 1:
        return 1.0 + 0.0j
    if frac.denominator == 2:
        return -1.0 + 0.0j
    if frac.denominator == 4:
        return 1.0j if frac.numerator == 1 else -1.0j
    return cmath.rect(1.0, 2.0 * math.pi * float(frac))


class UnitCharacter:
    """A character of the unit group Z_p^x with finite conductor.

    ``conductor_exponent`` is the least L >= 0 such that the character is
    trivial on 1 + p^L Z_p (L = 0 means the trivial character).  Values are
    roots of unity of order dividing (p-1) p^(L-1); they are tabulated on
    units modulo p^max(L,1).
    """

    __slots__ = ("p", "conductor_exponent", "dual_index", "level", "modulus",
                 "order", "_table")

    def __init__(self, p: int, level: int, dual_index: int):
        p = Prime(p)
        if level < 1:
            raise DomainError("character level must be >= 1")
        n = (p - 1) * p ** (level - 1)
        if not 0 <= dual_index < n:
            raise DomainError(f"dual index must lie in [0, {n})")
        if dual_index == 0:
            ell = 0
        else:
            ell = max(1, level - _int_valuation(dual_index, p))
        self.p = int(p)
        self.conductor_exponent = ell
        self.level = max(ell, 1)
        self.modulus = self.p ** self.level
        m_small = (p - 1) * p ** (self.level - 1)
        # dual index reduced to the character's own level
        self.dual_index = dual_index // p ** (level - self.level)
        self.order = (
            m_small // math.gcd(self.dual_index, m_small) if self.dual_index else 1
        )
        g = _primitive_root(self.p)
        table = {}
        u = 1 % self.modulus
        for t in range(m_small):
            table[u] = _root_of_unity(self.dual_index * t, m_small)
            u = u * g % self.modulus
        self._table = table

    @property
    def is_trivial(self) -> bool:
        return self.conductor_exponent == 0

    def descriptor(self) -> tuple:
        """(p, conductor exponent, index among same-conductor characters)."""
        return (self.p, self.conductor_exponent, self.index_in_conductor_class())

    def index_in_conductor_class(self) -> int:
        js = _dual_indices_with_conductor(self.p, self.level, self.conductor_exponent)
        return js.index(self.dual_index)

    def __call__(self, u) -> complex:
        return self.value(u)

    def value(self, u) -> complex:
        """Character value at a unit (rational with valuation 0)."""
        u = Fraction(u)
        if u == 0 or valuation(u, self.p) != 0:
            raise DomainError("character evaluated off the unit group")
        num = u.numerator % self.modulus
        den = u.denominator % self.modulus
        r = num * pow(den, -1, self.modulus) % self.modulus
        return self._table[r]

    def __eq__(self, other) -> bool:
        if not isinstance(other, UnitCharacter):
            return NotImplemented
        return (self.p, self.modulus, self.dual_index) == (
            other.p, other.modulus, other.dual_index)

    def __hash__(self) -> int:
        return hash((self.p, self.modulus, self.dual_index))

    def __repr__(self) -> str:
        if self.is_trivial:
            return f"UnitCharacter(p={self.p}, trivial)"
        return (f"UnitCharacter(p={self.p}, conductor_exponent="
                f"{self.conductor_exponent}, order={self.order})")


def _dual_indices_with_conductor(p: int, level: int, ell: int) -> list:
    n = (p - 1) * p ** (level - 1)
    out = []
    for j in range(n):
        if j == 0:
            this_ell = 0
        else:
            this_ell = max(1, level - _int_valuation(j, p))
        if this_ell == ell:
            out.append(j)
    return out


def enumerate_characters(p: int, K: int) -> list:
    """All characters of (Z/p^K)^x, ordered by dual index.

    Returns (p-1) p^(K-1) characters; the trivial character comes first.
    """
    p = Prime(p)
    if K < 1:
        raise DomainError("K must be >= 1")
    n = (p - 1) * p ** (K - 1)
    if n > _MAX_CHARACTER_GROUP:
        raise DomainError(f"unit group of size {n} exceeds the enumeration guard")
    return [UnitCharacter(p, K, j) for j in range(n)]


def trivial_character(p: int) -> UnitCharacter:
    return UnitCharacter(p, 1, 0)


def character_by_descriptor(p: int, ell: int, index: int) -> UnitCharacter:
    """Character with given conductor exponent, by position in its class.

    Same-conductor characters are ordered by dual index at level max(ell,1).
    """
    p = Prime(p)
    if ell < 0:
        raise DomainError("conductor exponent must be >= 0")
    if ell == 0:
        if index != 0:
            raise DomainError("the trivial character has index 0")
        return trivial_character(p)
    level = ell
    js = _dual_indices_with_conductor(p, level, ell)
    if not 0 <= index < len(js):
        raise DomainError(
            f"index {index} out of range: {len(js)} characters have "
            f"conductor exponent {ell} at p = {p}")
    return UnitCharacter(p, level, js[index])


def character_value(chi: UnitCharacter, u) -> complex:
    return chi.value(u)


# ---------------------------------------------------------------------------
# Certified |Q| on residue cells
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellOutcome:
    """Certified behaviour of |Q(x)|_p on a cell a + p^K Z_p.

    kind:
      * "constant_abs": |Q| is provably constant on the cell;
        ``value_valuation`` is v_p(Q) there.
      * "simple_root": Q has a unique simple root z in the cell and
        |Q(x)| = |Q'(z)| * |x - z| for every x in the cell;
        ``root`` is z mod p^root_level, ``derivative_valuation`` is v_p(Q'(z)).
      * "undetermined": neither certificate applies at this level.
    """

    kind: str
    value_valuation: Union[int, None] = None
    root: Union[int, None] = None
    root_level: Union[int, None] = None
    derivative_valuation: Union[int, None] = None


def _poly_eval(coeffs: Sequence[Fraction], x) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _poly_derivative(coeffs: Sequence[Fraction]) -> list:
    return [j * c for j, c in enumerate(coeffs)][1:]


def _taylor_coefficients(coeffs: Sequence[Fraction], a: Fraction) -> list:
    """Coefficients of Q(a + h) in powers of h, by repeated synthetic division."""
    work = list(coeffs)
    out = []
    while work:
        quot = [Fraction(0)] * (len(work) - 1)
        acc = Fraction(0)
        for j in range(len(work) - 1, 0, -1):
            acc = work[j] + a * acc
            quot[j - 1] = acc
        rem = work[0] + a * quot[0] if quot else work[0]
        out.append(rem)
        work = quot
    return out


def _frac_mod(x: Fraction, modulus: int) -> int:
    """Reduce a p-integral rational mod p^k (denominator coprime to p)."""
    return x.numerator * pow(x.denominator, -1, modulus) % modulus


def _lift_simple_root(coeffs, dcoeffs, a: int, p: int, target: int) -> int:
    """Newton-lift the cell's simple root to an integer mod p^target.

    Requires p-integral coefficients; the caller's certificate guarantees
    quadratic convergence from x = a.
    """
    modulus = p ** (target + 2)
    x = Fraction(a)
    for _ in range(64):
        f = _poly_eval(coeffs, x)
        if f == 0:
            break
        fp = _poly_eval(dcoeffs, x)
        x = x - f / fp
        x = Fraction(_frac_mod(x, modulus))
        if valuation(_poly_eval(coeffs, x), p) >= target + 2:
            break
    return _frac_mod(Fraction(x), p**target)


def poly_abs_on_cell(Q: Sequence[Rational], a: int, K: int, p: int) -> CellOutcome:
    """Certify the behaviour of |Q(x)|_p on the cell a + p^K Z_p.

    Two sound certificates are attempted, in order:

    1. constant absolute value: v_p(Q(a)) < K + min_{j>=1} v_p(c_j), so no
       point of the cell can change the leading term's valuation;
    2. simple root: writing f0 = Q(a), f1 = Q'(a), require
       v(f0) >= 2 v(f1) + 1 (Hensel), v(f0) - v(f1) >= K (the root lies in
       the cell), and v(c~_j(a)) + K (j-1) >= v(f1) + 1 for all Taylor
       coefficients c~_j of order j >= 2 (higher terms stay dominated along
       the whole cell, not just at the Newton iterates).

    If neither holds the outcome is "undetermined" and the caller should
    subdivide.  Coefficients may have negative valuation.
    """
    if K < 1:
        raise DomainError("cell level K must be >= 1")
    p = int(p)
    coeffs = [Fraction(c) for c in Q]
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    if not coeffs:
        raise DomainError("the zero polynomial has no certified |Q|")
    a = a % p**K

    f0 = _poly_eval(coeffs, Fraction(a))
    v0 = valuation(f0, p)
    tail_vals = [valuation(c, p) for c in coeffs[1:] if c != 0]
    if not tail_vals:
        return CellOutcome(kind="constant_abs", value_valuation=v0)
    bound = K + min(tail_vals)
    if v0 < bound:
        return CellOutcome(kind="constant_abs", value_valuation=v0)

    dcoeffs = _poly_derivative(coeffs)
    f1 = _poly_eval(dcoeffs, Fraction(a))
    v1 = valuation(f1, p)
    if v1 is not math.inf:
        taylor = _taylor_coefficients(coeffs, Fraction(a))
        hensel = v0 >= 2 * v1 + 1
        contained = v0 - v1 >= K
        dominated = all(
            valuation(taylor[j], p) + K * (j - 1) >= v1 + 1
            for j in range(2, len(taylor))
            if taylor[j] != 0
        )
        if hensel and contained and dominated:
            # scale to p-integral coefficients before lifting
            shift = min(valuation(c, p) for c in coeffs if c != 0)
            scale = Fraction(p) ** max(0, -shift) if shift < 0 else Fraction(1)
            sc = [c * scale for c in coeffs]
            sdc = _poly_derivative(sc)
            level = K + max(v1, 0) + 8
            root = _lift_simple_root(sc, sdc, a, p, level)
            return CellOutcome(
                kind="simple_root",
                root=root,
                root_level=level,
                derivative_valuation=v1,
            )
    return CellOutcome(kind="undetermined")

"""Local zeta integrals over the p-adic units, exactly and numerically.

The central object is zeta(Q, chi, s) = (1 - 1/p)^(-1) * int_{Z_p^x}
|Q(x)|^s chi(x) |dx| for a one-variable polynomial Q with unit constant
term.  In exact mode (trivial character) the result is a rational function
of t = p^(-s); in numeric mode it is a complex number.  Scaled arguments
Q_m(x) = Q(x p^(-m)) stabilize for m outside a finite window; the window's
coefficients form the profile consumed by the operator realizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence, Union

from .errors import ComputationError, DomainError
from .padic_core import (
    Prime,
    Rational,
    UnitCharacter,
    _int_valuation,
    poly_abs_on_cell,
    valuation,
)

# ---------------------------------------------------------------------------
# Exact rational functions of t = p^(-s)
# ---------------------------------------------------------------------------


def _pstrip(c: list) -> list:
    while c and c[-1] == 0:
        c.pop()
    return c


def _padd(a: Sequence[Fraction], b: Sequence[Fraction]) -> list:
    n = max(len(a), len(b))
    out = [Fraction(0)] * n
    for i, x in enumerate(a):
        out[i] += x
    for i, x in enumerate(b):
        out[i] += x
    return _pstrip(out)


def _pmul(a: Sequence[Fraction], b: Sequence[Fraction]) -> list:
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return _pstrip(out)


def _pdivmod(a: Sequence[Fraction], b: Sequence[Fraction]):
    a = list(a)
    b = list(b)
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    q = [Fraction(0)] * max(0, len(a) - len(b) + 1)
    inv = 1 / b[-1]
    while len(a) >= len(b) and _pstrip(a):
        k = len(a) - len(b)
        c = a[-1] * inv
        q[k] = c
        for j, y in enumerate(b):
            a[k + j] -= c * y
        a.pop()
    return _pstrip(q), _pstrip(a)


def _pgcd(a: Sequence[Fraction], b: Sequence[Fraction]) -> list:
    a, b = list(a), list(b)
    while _pstrip(b):
        _, r = _pdivmod(a, b)
        a, b = b, r
    a = _pstrip(a)
    if a:
        lead = a[-1]
        a = [c / lead for c in a]
    return a


class ExactRationalFunction:
    """A rational function of one formal variable, with Fraction coefficients.

    Stored as numerator/denominator coefficient tuples (constant term first)
    in lowest terms, with the denominator's lowest nonzero coefficient
    normalized to 1.  Negative powers of the variable are represented by
    monomial denominators.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den=(Fraction(1),)):
        num = [Fraction(c) for c in num]
        den = [Fraction(c) for c in den]
        _pstrip(num)
        _pstrip(den)
        if not den:
            raise ZeroDivisionError("zero denominator")
        if not num:
            self.num = ()
            self.den = (Fraction(1),)
            return
        # cancel shared monomial factors
        zn = next(i for i, c in enumerate(num) if c != 0)
        zd = next(i for i, c in enumerate(den) if c != 0)
        k = min(zn, zd)
        if k:
            num = num[k:]
            den = den[k:]
        g = _pgcd(num, den)
        if len(g) > 1:
            num, _ = _pdivmod(num, g)
            den, _ = _pdivmod(den, g)
        lead = next(c for c in den if c != 0)
        num = [c / lead for c in num]
        den = [c / lead for c in den]
        self.num = tuple(num)
        self.den = tuple(den)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero() -> "ExactRationalFunction":
        return ExactRationalFunction(())

    @staticmethod
    def one() -> "ExactRationalFunction":
        return ExactRationalFunction((Fraction(1),))

    @staticmethod
    def constant(c) -> "ExactRationalFunction":
        return ExactRationalFunction((Fraction(c),))

    @staticmethod
    def monomial(c, k: int) -> "ExactRationalFunction":
        """c * t^k, any integer k."""
        c = Fraction(c)
        if k >= 0:
            return ExactRationalFunction([Fraction(0)] * k + [c])
        return ExactRationalFunction((c,), [Fraction(0)] * (-k) + [Fraction(1)])

    # -- structure ----------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.num

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = ExactRationalFunction.constant(other)
        if not isinstance(other, ExactRationalFunction):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self) -> int:
        return hash((self.num, self.den))

    def __repr__(self) -> str:
        def fmt(coeffs):
            if not coeffs:
                return "0"
            parts = []
            for i, c in enumerate(coeffs):
                if c == 0:
                    continue
                if i == 0:
                    parts.append(str(c))
                elif i == 1:
                    parts.append(f"{c}*t")
                else:
                    parts.append(f"{c}*t^{i}")
            return " + ".join(parts)

        if self.den == (Fraction(1),):
            return fmt(self.num)
        return f"({fmt(self.num)}) / ({fmt(self.den)})"

    # -- arithmetic ----------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, ExactRationalFunction):
            return other
        if isinstance(other, (int, Fraction)):
            return ExactRationalFunction.constant(other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        num = _padd(_pmul(self.num, other.den), _pmul(other.num, self.den))
        return ExactRationalFunction(num, _pmul(self.den, other.den))

    __radd__ = __add__

    def __neg__(self):
        return ExactRationalFunction([-c for c in self.num], self.den)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return ExactRationalFunction(
            _pmul(self.num, other.num), _pmul(self.den, other.den))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        if other.is_zero:
            raise ZeroDivisionError("division by zero rational function")
        return ExactRationalFunction(
            _pmul(self.num, other.den), _pmul(self.den, other.num))

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other / self

    def __pow__(self, k: int):
        if k < 0:
            return ExactRationalFunction(self.den, self.num) ** (-k)
        out = ExactRationalFunction.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- evaluation ----------------------------------------------------------

    def __call__(self, t):
        num = Fraction(0) if isinstance(t, (int, Fraction)) else 0 * t
        for c in reversed(self.num):
            num = num * t + c
        den = Fraction(0) if isinstance(t, (int, Fraction)) else 0 * t
        for c in reversed(self.den):
            den = den * t + c
        return num / den

    def to_json_dict(self) -> dict:
        def ser(coeffs):
            return [
                {"numerator": str(c.numerator), "denominator": str(c.denominator)}
                for c in coeffs
            ]

        return {"num": ser(self.num), "den": ser(self.den)}


# ---------------------------------------------------------------------------
# The unit-group integral
# ---------------------------------------------------------------------------


def _validate_Q(Q: Sequence[Rational], p: int) -> list:
    coeffs = [Fraction(c) for c in Q]
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    if not coeffs:
        raise DomainError("Q must be nonzero")
    if valuation(coeffs[0], p) != 0:
        raise DomainError("the constant term of Q must be a p-adic unit")
    return coeffs


def _depth_limit(coeffs, p, ell) -> int:
    vs = [abs(valuation(c, p)) for c in coeffs if c != 0]
    return 2 * max(vs) + 10 + max(1, ell)


def _unit_integral_exact(coeffs, p: int, limit: int):
    """Unnormalized exact integral (trivial character), as monomial and
    root-term tallies returned as an ExactRationalFunction."""
    poly_terms: dict = {}
    root_terms: dict = {}
    work = [(a, 1) for a in range(1, p)]
    while work:
        a, K = work.pop()
        out = poly_abs_on_cell(coeffs, a, K, p)
        if out.kind == "constant_abs":
            v0 = out.value_valuation
            poly_terms[v0] = poly_terms.get(v0, Fraction(0)) + Fraction(1, p**K)
        elif out.kind == "simple_root":
            # (1 - 1/p) t^v1 (t/p)^K / (1 - t/p)
            k = out.derivative_valuation + K
            root_terms[k] = root_terms.get(k, Fraction(0)) + (
                Fraction(p - 1, p) * Fraction(1, p**K)
            )
        else:
            if K + 1 > limit:
                raise DomainError(
                    "cell refinement exceeded its depth limit; Q likely has a "
                    "repeated root in Z_p")
            work.extend((a + i * p**K, K + 1) for i in range(p))
    shift = min([0] + list(poly_terms) + list(root_terms))
    num_poly = {}
    for k, c in poly_terms.items():
        num_poly[k - shift] = num_poly.get(k - shift, Fraction(0)) + c
    num_root = {}
    for k, c in root_terms.items():
        num_root[k - shift] = num_root.get(k - shift, Fraction(0)) + c

    def to_list(d):
        if not d:
            return []
        out = [Fraction(0)] * (max(d) + 1)
        for k, c in d.items():
            out[k] = c
        return out

    den_root = [Fraction(1), Fraction(-1, p)]  # 1 - t/p
    t_shift = [Fraction(0)] * (-shift) + [Fraction(1)] if shift < 0 else [Fraction(1)]
    num = _padd(_pmul(to_list(num_poly), den_root), to_list(num_root))
    return ExactRationalFunction(num, _pmul(den_root, t_shift))


def _unit_integral_numeric(coeffs, chi: UnitCharacter, p: int, t: complex,
                           limit: int) -> complex:
    total = 0j
    ell = chi.conductor_exponent
    L0 = max(1, ell)
    work = [(a, L0) for a in range(p**L0) if a % p != 0]
    geom = (1 - 1 / p) / (1 - t / p)
    while work:
        a, K = work.pop()
        out = poly_abs_on_cell(coeffs, a, K, p)
        if out.kind == "constant_abs":
            total += chi.value(a) * (p ** (-K)) * t ** out.value_valuation
        elif out.kind == "simple_root":
            total += (
                chi.value(a)
                * t ** out.derivative_valuation
                * geom
                * (t / p) ** K
            )
        else:
            if K + 1 > limit:
                raise DomainError(
                    "cell refinement exceeded its depth limit; Q likely has a "
                    "repeated root in Z_p")
            work.extend((a + i * p**K, K + 1) for i in range(p))
    return total


def zeta(Q: Sequence[Rational], chi: UnitCharacter, p: int,
         s: Optional[complex] = None):
    """Normalized unit-group integral of |Q|^s against a character.

    With s None (exact mode, trivial character only) returns an
    ExactRationalFunction of t = p^(-s); with complex s returns a complex
    value.  Q needs a unit constant term; numeric mode needs
    Re(s) > -1/deg(Q) so the root-cell geometric series converge.
    """
    p = Prime(p)
    if chi.p != p:
        raise DomainError("character and integral use different primes")
    coeffs = _validate_Q(Q, p)
    r = len(coeffs) - 1
    if s is None:
        if not chi.is_trivial:
            raise DomainError("exact mode supports the trivial character only")
        if r == 0:
            return ExactRationalFunction.one()
        limit = _depth_limit(coeffs, p, 0)
        integral = _unit_integral_exact(coeffs, p, limit)
        return integral / Fraction(p - 1, p)
    s = complex(s)
    if r >= 1 and s.real <= -1.0 / r:
        raise DomainError(f"numeric mode needs Re(s) > -1/{r}")
    if r == 0:
        return 1.0 + 0j if chi.is_trivial else 0j
    t = p ** (-s)
    limit = _depth_limit(coeffs, p, chi.conductor_exponent)
    total = _unit_integral_numeric(coeffs, chi, p, t, limit)
    return total / (1 - 1 / p)


def stabilization_bounds(Q: Sequence[Rational], p: int) -> tuple:
    """(m_minus, m_plus): zeta of the scaled argument Q(x p^-m) equals its
    small-m limit for every m <= m_minus and its large-m monomial form for
    every m >= m_plus."""
    p = Prime(p)
    coeffs = _validate_Q(Q, p)
    r = len(coeffs) - 1
    if r == 0:
        return (0, 0)
    m_minus = min(
        (valuation(c, p) - 1) // j
        for j, c in enumerate(coeffs)
        if j >= 1 and c != 0
    )
    vr = valuation(coeffs[r], p)
    m_plus = max(
        (vr - valuation(c, p)) // (r - j) + 1
        for j, c in enumerate(coeffs)
        if j < r and c != 0
    )
    return (m_minus, m_plus)


def _shifted_coeffs(coeffs, p: int, m: int) -> list:
    return [c * Fraction(p) ** (-j * m) for j, c in enumerate(coeffs)]


def zeta_shift(Q: Sequence[Rational], m: int, chi: UnitCharacter, p: int,
               s: Optional[complex] = None):
    """zeta of the scaled argument Q_m(x) = Q(x p^-m).

    Outside the stabilization window the value is structural (no integration):
    the character-orthogonality constant below m_minus, a monomial in
    t = p^(-s) above m_plus.
    """
    p = Prime(p)
    coeffs = _validate_Q(Q, p)
    r = len(coeffs) - 1
    m_minus, m_plus = stabilization_bounds(coeffs, p)
    delta = chi.is_trivial
    if s is None and not delta:
        raise DomainError("exact mode supports the trivial character only")
    if m <= m_minus:
        if s is None:
            return ExactRationalFunction.one()
        return (1.0 + 0j) if delta else 0j
    if m >= m_plus:
        k = valuation(coeffs[r], p) - m * r
        if s is None:
            return ExactRationalFunction.monomial(1, k)
        return (p ** (-complex(s))) ** k if delta else 0j
    return zeta(_shifted_coeffs(coeffs, p, m), chi, p, s)


@dataclass(frozen=True)
class ZetaProfile:
    """Nonstabilized Laurent coefficients of the two-variable generating
    function: z0[m] carries zeta(Q_m) minus its structural tail term.

    With the trivial character the subtracted term is 1 for m < 0 and
    |leading|^s p^(m r s) for m >= 0; for nontrivial characters nothing is
    subtracted (the structural terms vanish).
    """

    p: int
    coeffs: tuple
    chi: UnitCharacter
    s: Optional[complex]
    degree: int
    leading_valuation: int
    m_minus: int
    m_plus: int
    z0: dict = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        return self.s is None

    def window(self) -> tuple:
        """The full candidate window [min(m_minus+1,0), max(m_plus-1,0)]."""
        return (min(self.m_minus + 1, 0), max(self.m_plus - 1, 0))

    def support(self) -> tuple:
        """(lo, hi) over coefficients that are actually nonzero."""
        keys = [m for m, v in self.z0.items() if not _profile_is_zero(v)]
        if not keys:
            return (0, -1)
        return (min(keys), max(keys))

    def z0_at(self, m: int):
        if m in self.z0:
            return self.z0[m]
        return ExactRationalFunction.zero() if self.exact else 0j

    def z0_value(self, m: int, t=None):
        """Numeric coefficient; exact profiles need the evaluation point t."""
        v = self.z0_at(m)
        if isinstance(v, ExactRationalFunction):
            if t is None:
                raise DomainError("exact profile needs t = p^(-s) to evaluate")
            return complex(v(t)) if not isinstance(t, (int, Fraction)) else v(t)
        return v


def _profile_is_zero(v) -> bool:
    if isinstance(v, ExactRationalFunction):
        return v.is_zero
    return abs(v) == 0.0


def z0_profile(Q: Sequence[Rational], chi: UnitCharacter, p: int,
               s: Optional[complex] = None) -> ZetaProfile:
    """Profile of nonstabilized coefficients, with certified boundaries.

    The values just outside the window are recomputed by integration and
    checked against their structural forms; disagreement raises
    ComputationError (it would mean the stabilization bounds are wrong).
    """
    p = Prime(p)
    coeffs = _validate_Q(Q, p)
    r = len(coeffs) - 1
    m_minus, m_plus = stabilization_bounds(coeffs, p)
    lo = min(m_minus + 1, 0)
    hi = max(m_plus - 1, 0)
    delta = chi.is_trivial
    vr = valuation(coeffs[r], p) if r >= 1 else 0

    def structural(m):
        if not delta:
            return ExactRationalFunction.zero() if s is None else 0j
        if m < 0:
            return ExactRationalFunction.one() if s is None else 1.0 + 0j
        k = vr - m * r
        if s is None:
            return ExactRationalFunction.monomial(1, k)
        return (p ** (-complex(s))) ** k

    def raw(m):
        return zeta(_shifted_coeffs(coeffs, p, m), chi, p, s)

    z0 = {}
    for m in range(lo, hi + 1):
        z0[m] = raw(m) - structural(m)

    for m in (lo - 1, hi + 1):
        dev = raw(m) - structural(m)
        if s is None:
            ok = dev.is_zero
        else:
            scale = max([1.0] + [abs(v) for v in z0.values()])
            ok = abs(dev) <= 1e-9 * scale
        if not ok:
            raise ComputationError(
                f"profile boundary m = {m} failed its stabilization check")

    return ZetaProfile(
        p=int(p),
        coeffs=tuple(coeffs),
        chi=chi,
        s=None if s is None else complex(s),
        degree=r,
        leading_valuation=vr,
        m_minus=m_minus,
        m_plus=m_plus,
        z0=z0,
    )


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


class BruteforceResult(NamedTuple):
    value: complex
    error_bound: float


def _chi_weight(chi: UnitCharacter, r: int, lam: int, p: int, K: int) -> complex:
    """Sum of chi over the units of a + p^lam Z_p, times p^-K measure units."""
    ell = chi.conductor_exponent
    if lam >= max(ell, 1):
        return chi.value(r) * p ** (K - lam)
    step = p**lam
    total = 0j
    for u in range(r % step, p ** max(ell, 1), step):
        if u % p != 0:
            total += chi.value(u)
    return total * p ** (K - max(ell, 1))


def zeta_bruteforce(Q: Sequence[Rational], chi: UnitCharacter, p: int,
                    s: complex, K: int = 8, cap: int = 40) -> BruteforceResult:
    """Riemann-sum estimate of zeta over units mod p^K, |Q| clamped at p^-cap.

    Identical in value to the literal residue sum (see
    zeta_bruteforce_naive), but organized by valuation level sets so large
    p^K stay fast: the set {v(Q) >= j} is tracked by Hensel-style lifting of
    the root set mod p^j.  Requires roots to stay near-simple (the lifted
    sets must stay small); polynomials with repeated p-adic roots are
    rejected.
    """
    p = Prime(p)
    coeffs = _validate_Q(Q, p)
    s = complex(s)
    r = len(coeffs) - 1
    ell = chi.conductor_exponent
    if K < max(ell, 1):
        raise DomainError("K must be at least the character's conductor exponent")
    if cap < 1:
        raise DomainError("cap must be >= 1")

    denom_lcm = 1
    for c in coeffs:
        denom_lcm = denom_lcm * c.denominator // math.gcd(denom_lcm, c.denominator)
    e = _int_valuation(denom_lcm, p) if denom_lcm % p == 0 else 0
    W = [int(c * denom_lcm) for c in coeffs]

    def weval(x: int) -> int:
        acc = 0
        for c in reversed(W):
            acc = acc * x + c
        return acc

    t = p ** (-s)
    guard = max(60, 50 * max(r, 1))

    # root sets mod p^lam, units only
    top = min(cap + e, K)
    current = [a for a in range(1, p) if weval(a) % p == 0]
    levels = {1: list(current)} if top >= 1 else {}
    lam = 1
    while lam < top:
        nxt = []
        mod = p ** (lam + 1)
        for root in current:
            for i in range(p):
                cand = root + i * p**lam
                if weval(cand) % mod == 0:
                    nxt.append(cand)
        if len(nxt) > guard:
            raise DomainError(
                "level sets grew beyond the fast-path guard; Q appears to "
                "have a repeated p-adic root (reduce cap or use the naive sum)")
        lam += 1
        current = nxt
        levels[lam] = list(current)

    # residues mod p^K needing exact valuations (j + e > K)
    exact_vals = []
    if cap + e > K:
        for root in levels.get(K, []):
            w = weval(root)
            if w == 0:
                exact_vals.append((root, math.inf))
            else:
                exact_vals.append((root, _int_valuation(w, p)))

    def T(j: int) -> complex:
        lam_j = j + e
        if lam_j <= 0:
            return (p - 1) * p ** (K - 1) if chi.is_trivial else 0j
        if lam_j <= K:
            return sum(
                (_chi_weight(chi, root, lam_j, p, K) for root in levels[lam_j]),
                start=0j,
            )
        return sum(
            (chi.value(root) for root, v in exact_vals if v >= lam_j), start=0j)

    total = T(-e) * t ** (-e)
    prev = t ** (-e)
    for j in range(-e + 1, cap + 1):
        tj = t**j
        total += T(j) * (tj - prev)
        prev = tj

    value = total * p ** (-K) / (1 - 1 / p)
    sigma = s.real
    bound = (
        (r + 1) * 4.0 / (1 - 1 / p)
        * (p ** (-K * (1 + sigma) + e * max(sigma, 0.0)) + p ** (-sigma * cap))
    )
    return BruteforceResult(value=complex(value), error_bound=float(bound))


def zeta_bruteforce_naive(Q: Sequence[Rational], chi: UnitCharacter, p: int,
                          s: complex, K: int = 4, cap: int = 40) -> BruteforceResult:
    """Literal residue sum (reference implementation; small p^K only)."""
    p = Prime(p)
    coeffs = _validate_Q(Q, p)
    s = complex(s)
    if p**K > 200_000:
        raise DomainError("naive sum is limited to p^K <= 200000")
    denom_lcm = 1
    for c in coeffs:
        denom_lcm = denom_lcm * c.denominator // math.gcd(denom_lcm, c.denominator)
    e = _int_valuation(denom_lcm, p) if denom_lcm % p == 0 else 0
    W = [int(c * denom_lcm) for c in coeffs]
    t = p ** (-s)
    total = 0j
    for a in range(p**K):
        if a % p == 0:
            continue
        acc = 0
        for c in reversed(W):
            acc = acc * a + c
        if acc == 0:
            v = cap
        else:
            v = min(_int_valuation(acc, p) - e, cap)
        total += chi.value(a) * t**v
    value = total * p ** (-K) / (1 - 1 / p)
    sigma = s.real
    r = len(coeffs) - 1
    bound = (
        (r + 1) * 4.0 / (1 - 1 / p)
        * (p ** (-K * (1 + sigma) + e * max(sigma, 0.0)) + p ** (-sigma * cap))
    )
    return BruteforceResult(value=complex(value), error_bound=float(bound))

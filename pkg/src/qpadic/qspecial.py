"""Basic hypergeometric series and the entire functions built from them.

All evaluators follow one numeric convention: they accept Python complex
scalars, numpy arrays of complex, or mpmath scalars, and return the same
flavor.  Series are summed by term recursion with a smallness-plus-ratio
stopping rule; nothing here chooses a precision on its own, the caller
does (by passing mpmath inputs).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import mpmath as mp
import numpy as np

from .errors import ComputationError, DomainError

_MAX_TERMS = 20_000


def _is_mp(*vals) -> bool:
    return any(isinstance(v, (mp.mpf, mp.mpc)) for v in vals)


def _amax(x) -> float:
    """max |entry| as a float, for scalars, arrays and mp numbers."""
    if isinstance(x, np.ndarray):
        return float(np.max(np.abs(x))) if x.size else 0.0
    return float(abs(x))


def _amin(x) -> float:
    if isinstance(x, np.ndarray):
        return float(np.min(np.abs(x))) if x.size else 0.0
    return float(abs(x))


def _default_eps(*vals) -> float:
    if _is_mp(*vals):
        return float(mp.mpf(10) ** (5 - mp.mp.dps))
    return 1e-14


def _one_like(u):
    if isinstance(u, np.ndarray):
        return np.ones_like(u, dtype=complex)
    if _is_mp(u):
        return mp.mpf(1)
    return 1.0 + 0.0j


def qpochhammer(a, q, n: Optional[float] = None, eps: Optional[float] = None):
    """(a; q)_n; n integer >= 0, or None / math.inf for the infinite product."""
    if n is not None and n is not math.inf:
        n = int(n)
        if n < 0:
            raise DomainError("q-Pochhammer length must be >= 0")
        out = _one_like(a) * _one_like(q)
        qk = _one_like(q)
        for _ in range(n):
            out = out * (1 - a * qk)
            qk = qk * q
        return out
    if abs(q) >= 1:
        raise DomainError("infinite q-Pochhammer needs |q| < 1")
    if eps is None:
        eps = _default_eps(a, q) if not isinstance(a, np.ndarray) else 1e-15
    out = _one_like(a) * _one_like(q)
    qk = _one_like(q)
    for k in range(_MAX_TERMS):
        factor = 1 - a * qk
        out = out * factor
        qk = qk * q
        if _amax(a) * _amax(qk) < eps:
            break
    else:
        raise ComputationError("q-Pochhammer did not converge")
    return out


def theta(u, q, eps: Optional[float] = None):
    """Jacobi-style theta: (q;q)_inf (-u;q)_inf (-q/u;q)_inf.

    Satisfies theta(q u) = u^(-1) theta(u); zeros exactly at u in -q^Z.
    u = 0 is outside the domain.
    """
    if _amin(u) == 0.0:
        raise DomainError("theta is singular at u = 0")
    if abs(q) >= 1:
        raise DomainError("theta needs |q| < 1")
    if eps is None:
        eps = _default_eps(u, q) if not isinstance(u, np.ndarray) else 1e-15
    qq = qpochhammer(q, q, None, eps=eps)
    one = _one_like(u)
    out = one * qq
    qk = _one_like(q)
    w = one / u
    top = max(_amax(u), _amax(w), 1.0)
    for k in range(_MAX_TERMS):
        out = out * (1 + u * qk) * (1 + q * w * qk)
        qk = qk * q
        if top * _amax(qk) * abs(q) < eps:
            break
    else:
        raise ComputationError("theta product did not converge")
    return out


def _elementary_symmetric(values: Sequence) -> list:
    """e_0..e_len over the given values."""
    es = [1]
    for v in values:
        es = [es[0]] + [es[i] + v * es[i - 1] for i in range(1, len(es))] + [v * es[-1]]
    return es


def _check_no_lower_pole(b_list, q, max_terms: int):
    for b in b_list:
        for m in range(max_terms):
            ref = q ** (-m) if m else 1
            if abs(complex(b) - complex(ref)) <= 1e-12 * abs(complex(ref)):
                raise DomainError(
                    f"lower parameter {b} sits on a pole q^(-{m}) of the series")
            if abs(complex(ref)) > 1e18:
                break


def _termination_order(a_list, q) -> Optional[int]:
    """Smallest m with some upper parameter equal to q^(-m), else None."""
    best = None
    for a in a_list:
        for m in range(200):
            ref = q ** (-m) if m else 1
            if abs(complex(a) - complex(ref)) <= 1e-12 * abs(complex(ref)):
                best = m if best is None else min(best, m)
                break
            if abs(complex(ref)) > 1e18:
                break
    return best


def basic_phi(ell: int, r: int, a_list: Sequence, b_list: Sequence, q, u,
              variant: str = "phi", eps: Optional[float] = None,
              max_terms: int = _MAX_TERMS):
    """Basic hypergeometric series with ell upper and r-1 lower parameters.

    variant "phi" includes the balancing factor ((-1)^n q^(n(n-1)/2))^(r-ell)
    in each term (entire in u when r > ell, radius 1 when r = ell); variant
    "bailey" omits it (radius 1 regardless).  The two agree when r = ell.
    """
    if len(a_list) != ell or len(b_list) != r - 1:
        raise DomainError("parameter list lengths must be (ell, r-1)")
    if variant not in ("phi", "bailey"):
        raise DomainError(f"unknown variant {variant!r}")
    if abs(q) >= 1:
        raise DomainError("the series needs |q| < 1")
    if eps is None:
        eps = _default_eps(q, u, *a_list, *b_list)
        if isinstance(u, np.ndarray):
            eps = 1e-15
    _check_no_lower_pole(b_list, q, 80)
    stop_at = _termination_order(a_list, q)
    entire = variant == "phi" and r > ell
    if not entire and stop_at is None:
        if variant == "phi" and r < ell:
            raise DomainError(
                "phi variant with r < ell has radius 0; needs a terminating "
                "upper parameter")
        if _amax(u) >= 1.0:
            raise DomainError("series argument must satisfy |u| < 1")

    one = _one_like(u) * _one_like(q)
    term = one
    total = one
    qn = _one_like(q)  # q^n
    small_run = 0
    for n in range(1, max_terms):
        if stop_at is not None and n > stop_at:
            return total
        num = one
        for a in a_list:
            num = num * (1 - a * qn)
        den = 1 - q * qn
        for b in b_list:
            den = den * (1 - b * qn)
        factor = num / den * u
        if variant == "phi" and r != ell:
            factor = factor * (-qn) ** (r - ell)
        term = term * factor
        total = total + term
        qn = qn * q
        tmax = _amax(term)
        if tmax <= eps * max(_amax(total), 1e-290):
            small_run += 1
            if small_run >= 5:
                return total
        else:
            small_run = 0
    raise ComputationError("basic_phi hit its term budget without converging")


def hahn_exton_J(a, q, u, eps: Optional[float] = None):
    """Entire series sum_n (-1)^n q^(n(n-1)/2) u^n / ((a;q)_n (q;q)_n).

    Equals basic_phi(1, 2, [0], [a], q, u) and underlies the third Jackson
    (Hahn-Exton) q-Bessel function.
    """
    if abs(q) >= 1:
        raise DomainError("needs |q| < 1")
    for m in range(120):
        ref = q ** (-m) if m else 1
        if abs(complex(a) - complex(ref)) <= 1e-12 * abs(complex(ref)):
            raise DomainError(f"parameter a = {a} sits on a pole q^(-{m})")
        if abs(complex(ref)) > 1e18:
            break
    if eps is None:
        eps = _default_eps(a, q, u) if not isinstance(u, np.ndarray) else 1e-15
    one = _one_like(u) * _one_like(q)
    term = one
    total = one
    qn1 = _one_like(q)  # q^(n-1) at step n
    small_run = 0
    for n in range(1, _MAX_TERMS):
        term = term * (-qn1 * u) / ((1 - a * qn1) * (1 - q * qn1))
        total = total + term
        qn1 = qn1 * q
        if _amax(term) <= eps * max(_amax(total), 1e-290):
            small_run += 1
            if small_run >= 5:
                return total
        else:
            small_run = 0
    raise ComputationError("hahn_exton_J did not converge")


def hahn_exton_J_nu(nu, q, x):
    """Third Jackson q-Bessel function J_nu(x; q) via the entire series."""
    pref = x**nu * qpochhammer(q ** (nu + 1), q) / qpochhammer(q, q)
    return pref * hahn_exton_J(q ** (nu + 1), q, q * x**2)


@dataclass(frozen=True)
class EntireFunctionHandle:
    """A callable entire function with provenance, safe to pass to the
    zero finder.  evaluator may support numpy-array arguments."""

    evaluator: Callable
    tag: str
    params: dict = field(default_factory=dict)

    def __call__(self, u):
        return self.evaluator(u)


def j_handle(a, q) -> EntireFunctionHandle:
    return EntireFunctionHandle(
        evaluator=lambda u: hahn_exton_J(a, q, u),
        tag="hahn_exton_J",
        params={"a": a, "q": q},
    )


# ---------------------------------------------------------------------------
# Solutions of the rational q-difference equation
# ---------------------------------------------------------------------------


def _entire_from_series(series: Callable, eA: Sequence, eBt: Sequence, q,
                        u, depth: int):
    """(u;q)_inf * series(u) continued to all u by the cleared recursion

        g(u) = sum_{m>=1} (-1)^m [u e_m(A) - e~_m] prod_{t=1}^{m-1}(1-q^t u) g(q^m u),

    which has entire coefficients, so stepping outward never divides.
    """
    absu = _amax(u)
    aq = abs(q)
    M = 0
    while absu * aq**M > 0.55:
        M += 1
    vals = []
    for tshift in range(depth):
        w = u * q ** (M + tshift)
        vals.append(qpochhammer(w, q) * series(w))
    for j in range(M - 1, -1, -1):
        w = u * q**j
        g = 0 * vals[0]
        prod = _one_like(w)
        qt = q
        for m in range(1, depth + 1):
            cm = w * (eA[m] if m < len(eA) else 0) - (eBt[m] if m < len(eBt) else 0)
            g = g + (-1) ** m * cm * prod * vals[m - 1]
            prod = prod * (1 - qt * w)
            qt = qt * q
        vals = [g] + vals[:-1]
    return vals[0]


@dataclass(frozen=True)
class PhiSolution:
    """One of the r independent solutions attached to the pole base b_i.

    The stored series S_i is Bailey-type with parameters a_t/b_i over
    q b_j/b_i (j != i); the full solution is u^(nu_i) S_i(u) where
    b_i = q^(-nu_i), but only S_i and integer powers of b_i are ever used,
    so no branch of u^nu is chosen.
    """

    a_list: tuple
    b_list: tuple
    index: int
    q: complex
    base: object
    _eA: tuple
    _eBt: tuple

    @property
    def shifted_uppers(self) -> tuple:
        return tuple(a / self.base for a in self.a_list)

    @property
    def shifted_lowers(self) -> tuple:
        return tuple(
            self.q * b / self.base
            for j, b in enumerate(self.b_list)
            if j != self.index
        )

    def series(self, u):
        """S_i(u); requires |u| < 1."""
        r = len(self.b_list)
        return basic_phi(
            len(self.a_list), r, list(self.shifted_uppers),
            list(self.shifted_lowers), self.q, u, variant="bailey")

    def entire(self, u):
        """(u;q)_inf S_i(u), valid for every u."""
        depth = len(self.b_list)
        return _entire_from_series(
            self.series, self._eA, self._eBt, self.q, u, depth)

    def residual(self, u) -> float:
        """Relative defect in the original-parameter difference equation

            u prod_t (1 - a_t T) Phi = prod_j (1 - b_j T) Phi,

        expressed through S_i (the u^nu prefactor cancels into integer
        powers of b_i).  Needs |u| small enough that all shifted series
        arguments stay inside the unit disk.
        """
        if _amax(u) >= 1.0:
            raise DomainError("residual check needs |u| < 1")
        eA_orig = _elementary_symmetric(list(self.a_list))
        eB_orig = _elementary_symmetric(list(self.b_list))
        svals = [self.series(u * self.q**m) for m in range(len(self.b_list) + 1)]
        binv = 1
        lhs = 0 * svals[0]
        rhs = 0 * svals[0]
        for m in range(len(self.b_list) + 1):
            if m < len(eA_orig):
                lhs = lhs + (-1) ** m * eA_orig[m] * binv * svals[m] * u
            rhs = rhs + (-1) ** m * eB_orig[m] * binv * svals[m]
            binv = binv / self.base
        denom = _amax(lhs) + _amax(rhs)
        return _amax(lhs - rhs) / denom if denom else 0.0


def phi_solution(ell: int, r: int, a_list: Sequence, b_list: Sequence,
                 i: int, q) -> PhiSolution:
    """Solution of the degree-(ell, r) rational q-difference equation
    attached to the i-th entry of b_list (0-based).

    Requires distinct nonzero b's with no two differing by an integer power
    of q (resonance makes the series parameters hit poles), and ell <= r.
    """
    if len(a_list) != ell or len(b_list) != r:
        raise DomainError("need len(a_list) = ell and len(b_list) = r")
    if not 0 <= i < r:
        raise DomainError("solution index out of range")
    if ell > r:
        raise DomainError("ell must be <= r")
    if abs(q) >= 1 or q == 0:
        raise DomainError("needs 0 < |q| < 1")
    for b in b_list:
        if b == 0:
            raise DomainError("pole bases must be nonzero")
    for j, bj in enumerate(b_list):
        for k, bk in enumerate(b_list):
            if j == k:
                continue
            ratio = complex(bj) / complex(bk)
            for t in range(-60, 61):
                ref = complex(q) ** t
                if abs(ratio - ref) <= 1e-10 * abs(ref):
                    raise DomainError(
                        f"resonant pole bases: b[{j}]/b[{k}] = q^{t}")
    base = b_list[i]
    uppers = [a / base for a in a_list]
    lowers = [q * b / base for j, b in enumerate(b_list) if j != i]
    _check_no_lower_pole(lowers, q, 80)
    eA = _elementary_symmetric(uppers)
    # the cleared outward recursion for (u;q)_inf * S uses the lower
    # parameters divided by q (cf. the Heine relation's c/q coefficients)
    eBt = _elementary_symmetric(
        [1] + [b / base for j, b in enumerate(b_list) if j != i])
    return PhiSolution(
        a_list=tuple(a_list), b_list=tuple(b_list), index=i, q=q,
        base=base, _eA=tuple(eA), _eBt=tuple(eBt))


# ---------------------------------------------------------------------------
# The (u;q)_inf-normalized Heine series, continued outward
# ---------------------------------------------------------------------------


def phi_tilde_2_1(a, b, c, q, u, min_steps: int = 0,
                  eps: Optional[float] = None):
    """(u;q)_inf * 2phi1(a, b; c; q, u), entire in u.

    Inside |u| <= 0.55 the product and series are evaluated directly;
    outside, the value is continued by the cleared contiguous relation

        g(u) = [1 + c/q - u(a+b)] g(qu) + [u a b - c/q] (1-qu) g(q^2 u),

    stepping out from a seed disk.  The stepping coefficients are entire, so
    no step can divide by zero.  min_steps forces extra steps (used by the
    consistency test comparing different continuation paths).
    """
    if abs(q) >= 1 or q == 0:
        raise DomainError("needs 0 < |q| < 1")
    _check_no_lower_pole([c], q, 80)

    def seed(w):
        return qpochhammer(w, q) * basic_phi(2, 2, [a, b], [c], q, w,
                                             variant="phi", eps=eps)

    absu = _amax(u)
    M = max(0, int(min_steps))
    while absu * abs(q) ** M > 0.55:
        M += 1
    if M == 0:
        return seed(u)
    g2 = seed(u * q ** (M + 1))
    g1 = seed(u * q**M)
    coq = c / q
    for j in range(M - 1, -1, -1):
        w = u * q**j
        g0 = (1 + coq - w * (a + b)) * g1 + (w * a * b - coq) * (1 - q * w) * g2
        g2 = g1
        g1 = g0
    return g1


# ---------------------------------------------------------------------------
# Closed-form characteristic functions
# ---------------------------------------------------------------------------


def E_func(a, b, q, u, eps: Optional[float] = None):
    """Entire two-parameter function with E(0) = 1 solving

        a b q u^2 E(q^2 u) - (1 + (a+b) u) E(q u) + E(u) = 0.

    Away from the origin it is evaluated by the theta/J closed form

        theta(a u) J(aq/b; q, -q^2/(b u)) / ((b/a;q)_inf (q;q)_inf) + (a <-> b);

    near the origin (|u| < 0.1 min(1/|a|, 1/|b|)) by its Taylor series,
    whose coefficients follow from the difference equation.  Requires
    a != b with a/b not an integer power of q (else the closed form
    degenerates).
    """
    if abs(q) >= 1 or q == 0:
        raise DomainError("needs 0 < |q| < 1")
    if a == 0 or b == 0:
        raise DomainError("parameters must be nonzero")
    ratio = complex(a) / complex(b)
    for t in range(-60, 61):
        ref = complex(q) ** t
        if abs(ratio - ref) <= 1e-12 * abs(ref):
            raise DomainError(f"degenerate parameters: a/b = q^{t}")
    if eps is None:
        eps = _default_eps(a, b, q, u) if not isinstance(u, np.ndarray) else 1e-15
    switch = 0.1 * min(1.0 / _amax(a), 1.0 / _amax(b))

    def series_part(w):
        s = a + b
        pr = a * b
        c_prev = _one_like(q)
        c_cur = s / (1 - q)
        total = _one_like(w) + c_cur * w
        wn = w
        qn = q  # q^n at step n
        small = 0
        for n in range(2, _MAX_TERMS):
            qn = qn * q
            c_next = (s * (qn / q) * c_cur - pr * (qn * qn / q**3) * c_prev) / (1 - qn)
            wn = wn * w
            term = c_next * wn
            total = total + term
            c_prev, c_cur = c_cur, c_next
            if _amax(term) <= eps * max(_amax(total), 1e-290):
                small += 1
                if small >= 5:
                    return total
            else:
                small = 0
        raise ComputationError("E series did not converge")

    def formula_part(w):
        qq = qpochhammer(q, q, None)
        ca = qpochhammer(b / a, q, None)
        cb = qpochhammer(a / b, q, None)
        term_a = theta(a * w, q) * hahn_exton_J(a * q / b, q, -q**2 / (b * w)) / (ca * qq)
        term_b = theta(b * w, q) * hahn_exton_J(b * q / a, q, -q**2 / (a * w)) / (cb * qq)
        return term_a + term_b

    if isinstance(u, np.ndarray):
        out = np.empty_like(u, dtype=complex)
        inner = np.abs(u) < switch
        if inner.any():
            out[inner] = series_part(u[inner])
        if (~inner).any():
            out[~inner] = formula_part(u[~inner])
        return out
    if _amax(u) < switch:
        return series_part(u)
    return formula_part(u)


def e_handle(a, b, q) -> EntireFunctionHandle:
    return EntireFunctionHandle(
        evaluator=lambda u: E_func(a, b, q, u),
        tag="E",
        params={"a": a, "b": b, "q": q},
    )


def K_mahler(a, q, d: int, u, eps: Optional[float] = None):
    """Entire series with doubly exponential coefficient decay:

        sum_n (-1)^n q^((d^n - 1)/(d - 1)) u^n / ([a;q]_{d,n} [q^(-1); q^d]_{d,n}),

    where [a;q]_{d,n} = (1 - a q)(1 - a q^d) ... (1 - a q^(d^(n-1))).
    """
    d = int(d)
    if d < 2:
        raise DomainError("needs d >= 2")
    if abs(q) >= 1 or q == 0:
        raise DomainError("needs 0 < |q| < 1")
    if eps is None:
        eps = _default_eps(a, q, u) if not isinstance(u, np.ndarray) else 1e-15
    one = _one_like(u) * _one_like(q)
    total = one
    term = one
    small = 0
    for n in range(1, 400):
        expo = d ** (n - 1)
        # underflow guard: remaining terms are negligible at this point
        if expo * (-math.log10(abs(q))) > 600:
            break
        qe = q**expo
        term = term * (-qe * u) / ((1 - a * qe) * (1 - q ** (expo * d - 1)))
        total = total + term
        if _amax(term) <= eps * max(_amax(total), 1e-290):
            small += 1
            if small >= 3:
                break
        else:
            small = 0
    return total


def k_mahler_handle(a, q, d: int) -> EntireFunctionHandle:
    return EntireFunctionHandle(
        evaluator=lambda u: K_mahler(a, q, d, u),
        tag="K_mahler",
        params={"a": a, "q": q, "d": d},
    )


def watson_connection(a, b, c, q, x) -> tuple:
    """Both sides of the two-term connection formula for 2phi1:

        2phi1(a,b;c;q,x) = (b, c/a;q)_inf / (c, b/a;q)_inf
                           * theta(-a x) / theta(-x)
                           * 2phi1(a, aq/c; aq/b; q, cq/(abx))   + (a <-> b).

    Needs |x| < 1 and |cq/(abx)| < 1 so both sides are direct series.
    Returns (lhs, rhs); their relative difference is the residual.
    """
    if _amax(x) >= 1:
        raise DomainError("needs |x| < 1")
    y = c * q / (a * b * x)
    if _amax(y) >= 1:
        raise DomainError("needs |c q / (a b x)| < 1")
    lhs = basic_phi(2, 2, [a, b], [c], q, x)

    def half(a1, b1):
        pref = (
            qpochhammer(b1, q) * qpochhammer(c / a1, q)
            / (qpochhammer(c, q) * qpochhammer(b1 / a1, q))
        )
        th = theta(-a1 * x, q) / theta(-x, q)
        tail = basic_phi(2, 2, [a1, a1 * q / c], [a1 * q / b1], q,
                         c * q / (a1 * b1 * x))
        return pref * th * tail

    rhs = half(a, b) + half(b, a)
    return lhs, rhs


def watson_residual(a, b, c, q, x) -> float:
    lhs, rhs = watson_connection(a, b, c, q, x)
    return _amax(lhs - rhs) / max(_amax(lhs) + _amax(rhs), 1e-290)

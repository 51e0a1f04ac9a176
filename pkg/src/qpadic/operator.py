"""Truncated matrix realizations of the p-adic kernel operators.

Three routes to the same spectra:

* build_sequence_matrix: entries p^(-(m+n)/2 - d m s) zeta(Q_{m-n}) in the
  shell basis of a character eigenspace;
* build_BR_matrix: the Taylor-coefficient action F -> R(z) F(q z) minus the
  principal parts at the marked poles of a rational symbol R;
* discretize_kernel: a literal Riemann sum of the two-variable kernel on
  residue classes, block-diagonalized by unit characters.

The first two agree exactly under the diagonal rescaling z -> p^(-1/2) z
(which commutes with truncation); the third is an independent oracle.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import mpmath as mp
import numpy as np

from .errors import ComputationError, DomainError
from .padic_core import Prime, UnitCharacter, _int_valuation, valuation
from .zeta import (
    ExactRationalFunction,
    ZetaProfile,
    _validate_Q,
    stabilization_bounds,
    z0_profile,
    zeta,
    zeta_shift,
)


def _as_fraction_degree(d) -> Fraction:
    if isinstance(d, float):
        if not d.is_integer():
            raise DomainError(
                "pass non-integer degrees as Fraction, not float")
        d = int(d)
    return Fraction(d)


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of one kernel |P(x, y)|^s on a character eigenspace.

    P is homogeneous of degree d with y-degree l and Q(x) = P(x, 1) of
    degree r <= l <= d; only Q, d and l enter the realizations.  The
    convergence threshold on Re(s) is -1/max(2(d-l), 2(l-r), d) for the
    trivial character and -1/d otherwise.
    """

    p: int
    d: Fraction
    l: int
    Q: tuple
    chi: UnitCharacter
    s: complex

    def __init__(self, p, d, l, Q, chi, s):
        p = Prime(p)
        d = _as_fraction_degree(d)
        coeffs = _validate_Q(Q, p)
        r = len(coeffs) - 1
        if not (0 <= r <= l):
            raise DomainError(f"need deg Q = {r} <= l = {l}")
        if Fraction(l) > d:
            raise DomainError(f"need l = {l} <= d = {d}")
        if d <= 0:
            raise DomainError("d must be positive")
        if chi.p != p:
            raise DomainError("character prime differs from kernel prime")
        s = complex(s)
        df = float(d)
        if chi.is_trivial:
            gap = max(2 * (df - l), 2 * (l - r), df)
        else:
            gap = df
        if s.real <= -1.0 / gap:
            raise DomainError(
                f"Re(s) = {s.real} is outside the convergence region "
                f"(needs > {-1.0 / gap:.6g})")
        object.__setattr__(self, "p", int(p))
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "l", int(l))
        object.__setattr__(self, "Q", tuple(coeffs))
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "s", s)

    @property
    def degree(self) -> int:
        return len(self.Q) - 1

    @property
    def leading_valuation(self) -> int:
        return valuation(self.Q[-1], self.p)

    @property
    def t(self) -> complex:
        return complex(self.p) ** (-self.s)

    @property
    def q(self) -> complex:
        """p^(-1 - d s); always |q| < 1 inside the convergence region."""
        return cmath.exp(-math.log(self.p) * (1 + float(self.d) * self.s))

    def q_mp(self, dps: int):
        with mp.workdps(dps):
            return mp.exp(-mp.log(self.p) * (1 + mp.mpf(self.d.numerator)
                                             / self.d.denominator * mp.mpc(self.s)))

    def provenance(self) -> dict:
        return {
            "p": self.p,
            "d": str(self.d),
            "l": self.l,
            "Q": [str(c) for c in self.Q],
            "chi": list(self.chi.descriptor()),
            "s": [self.s.real, self.s.imag],
        }


@dataclass
class TruncatedOperator:
    """An N x N matrix truncation plus provenance and a tail estimate."""

    entries: object
    N: int
    backend: str
    provenance: dict = field(default_factory=dict)
    tail_estimate: float = 0.0
    dps: Optional[int] = None

    def to_numpy(self) -> np.ndarray:
        if isinstance(self.entries, np.ndarray):
            return self.entries
        out = np.empty((self.N, self.N), dtype=complex)
        for m in range(self.N):
            for n in range(self.N):
                out[m, n] = complex(self.entries[m, n])
        return out

    def entry(self, m: int, n: int):
        return self.entries[m, n]

    def to_json_dict(self) -> dict:
        arr = self.to_numpy()
        return {
            "N": self.N,
            "backend": self.backend,
            "provenance": self.provenance,
            "tail_estimate": self.tail_estimate,
            "entries": [[[z.real, z.imag] for z in row] for row in arr],
        }

    def save_csv(self, path: str):
        arr = self.to_numpy()
        with open(path, "w") as fh:
            fh.write("m,n,re,im\n")
            for m in range(self.N):
                for n in range(self.N):
                    z = arr[m, n]
                    fh.write(f"{m},{n},{z.real!r},{z.imag!r}\n")


# ---------------------------------------------------------------------------
# Sequence matrix
# ---------------------------------------------------------------------------


def _zeta_band_values(spec: KernelSpec, N: int):
    """zeta(Q_k) for k in [-(N-1), N-1], exact where possible.

    Returns (values, exact_flag): exact mode gives ExactRationalFunctions
    (trivial character), numeric mode complex values.
    """
    ks = range(-(N - 1), N)
    if spec.chi.is_trivial:
        return {k: zeta_shift(spec.Q, k, spec.chi, spec.p) for k in ks}, True
    return {k: zeta_shift(spec.Q, k, spec.chi, spec.p, s=spec.s) for k in ks}, False


def _sequence_tail_estimate(spec: KernelSpec, N: int, zabs) -> float:
    lnp = math.log(spec.p)
    sigma = spec.s.real
    df = float(spec.d)
    M = N + 120
    r = spec.degree
    vr = spec.leading_valuation
    m_minus, m_plus = stabilization_bounds(spec.Q, spec.p)

    def log_zmag(k):
        # log magnitude, so the growing structural branch cannot overflow
        # before it is damped by the row weight
        if k in zabs:
            return math.log(zabs[k]) if zabs[k] > 0 else -math.inf
        if not spec.chi.is_trivial:
            return -math.inf
        if k <= m_minus:
            return 0.0
        return -lnp * sigma * (vr - k * r)

    total = 0.0
    for m in range(M):
        start = N if m < N else 0
        for n in range(start, M):
            lg = -lnp * ((m + n) / 2 + df * m * sigma) + log_zmag(m - n)
            if lg > -350.0:
                mag = math.exp(lg)
                total += mag * mag
    return math.sqrt(total)


def build_sequence_matrix(spec: KernelSpec, N: int = 60, backend: str = "float",
                          dps: Optional[int] = None) -> TruncatedOperator:
    """Entries a_{mn} = p^(-(m+n)/2 - d m s) zeta(Q_{m-n}, chi, s).

    The y-degree l is normalized to d here (the two orderings of the
    half-kernel factorization share their nonzero spectrum); provenance
    records when that normalization was applied.  The extended backend
    evaluates exact zeta values at an mpmath t = p^(-s) and needs the
    trivial character.
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    zvals, exact = _zeta_band_values(spec, N)
    lnp = math.log(spec.p)
    df = float(spec.d)

    if backend == "float":
        t = spec.t
        zs = {k: (complex(v(t)) if exact else v) for k, v in zvals.items()}
        m_idx = np.arange(N)
        row = np.exp(-lnp * (m_idx / 2 + df * m_idx * spec.s))
        col = np.exp(-lnp * (m_idx / 2))
        band = np.array([zs[k] for k in range(-(N - 1), N)])
        Z = band[m_idx[:, None] - m_idx[None, :] + N - 1]
        A = row[:, None] * col[None, :] * Z
        zabs = {k: abs(v) for k, v in zs.items()}
        tail = _sequence_tail_estimate(spec, N, zabs)
        underflow = int(np.sum(np.max(np.abs(A), axis=1) == 0.0))
        prov = spec.provenance()
        prov.update({"builder": "sequence", "N": N, "backend": "float",
                     "l_normalized": spec.l != spec.d,
                     "underflow_rows": underflow})
        return TruncatedOperator(entries=A, N=N, backend="float",
                                 provenance=prov, tail_estimate=tail)

    if backend != "mp":
        raise DomainError(f"unknown backend {backend!r}")
    if not exact:
        raise DomainError(
            "extended-precision sequence matrices need the trivial character")
    if dps is None:
        dps = 40
    with mp.workdps(dps):
        tmp = mp.power(mp.mpf(spec.p), -mp.mpc(spec.s))
        zs_mp = {k: v(tmp) for k, v in zvals.items()}
        dmp = mp.mpf(spec.d.numerator) / spec.d.denominator
        lnp_mp = mp.log(spec.p)
        rowf = [mp.exp(-lnp_mp * (mp.mpf(m) / 2 + dmp * m * mp.mpc(spec.s)))
                for m in range(N)]
        colf = [mp.exp(-lnp_mp * mp.mpf(n) / 2) for n in range(N)]
        A = mp.matrix(N, N)
        for m in range(N):
            for n in range(N):
                A[m, n] = rowf[m] * colf[n] * zs_mp[m - n]
    zabs = {k: float(abs(complex(v))) for k, v in zs_mp.items()}
    tail = _sequence_tail_estimate(spec, N, zabs)
    prov = spec.provenance()
    prov.update({"builder": "sequence", "N": N, "backend": "mp", "dps": dps,
                 "l_normalized": spec.l != spec.d})
    return TruncatedOperator(entries=A, N=N, backend="mp", provenance=prov,
                             tail_estimate=tail, dps=dps)


# ---------------------------------------------------------------------------
# Rational symbols
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RationalR:
    """R(z) = beta z^z_exp prod_i (1 - zeros[i] z) / prod_j (1 - poles[j] z),
    with a subset of the (reciprocal) pole locations marked.

    marked indexes into poles.  Every pole strictly inside the open unit
    disk must be marked (poles exactly on |z| = 1 may stay unmarked, which
    is where the canonical kernels put them); marked poles must stay inside
    |z| < 1/|q| for the operator to exist.  A negative z_exp is an origin
    pole, always treated as marked.
    """

    beta: complex
    zeros: tuple = ()
    poles: tuple = ()
    marked: tuple = ()
    z_exp: int = 0

    def __post_init__(self):
        for j in self.marked:
            if not 0 <= j < len(self.poles):
                raise DomainError("marked index out of range")
        if len(set(self.marked)) != len(self.marked):
            raise DomainError("duplicate marked index")
        for b in self.poles:
            if b == 0:
                raise DomainError("pole bases must be nonzero (use z_exp)")
        for i, bi in enumerate(self.poles):
            for bj in self.poles[i + 1:]:
                if abs(complex(bi) - complex(bj)) <= 1e-12 * abs(complex(bi)):
                    raise DomainError("poles must be simple")

    @property
    def origin_order(self) -> int:
        return max(0, -self.z_exp)

    @property
    def marked_bases(self) -> tuple:
        return tuple(self.poles[j] for j in self.marked)

    @property
    def unmarked_bases(self) -> tuple:
        return tuple(b for j, b in enumerate(self.poles) if j not in self.marked)

    def __call__(self, z):
        out = self.beta * z**self.z_exp
        for a in self.zeros:
            out = out * (1 - a * z)
        for b in self.poles:
            out = out / (1 - b * z)
        return out

    def to_json_dict(self) -> dict:
        c = lambda w: [complex(w).real, complex(w).imag]
        return {
            "beta": c(self.beta),
            "zeros": [c(a) for a in self.zeros],
            "poles": [c(b) for b in self.poles],
            "marked": list(self.marked),
            "z_exp": self.z_exp,
        }


def _poly_from_roots_conv(c0, zero_bases) -> list:
    """c0 * prod (1 - a z) as ascending coefficients."""
    out = [c0]
    for a in zero_bases:
        out = [out[0]] + [out[i] - a * out[i - 1] for i in range(1, len(out))] \
              + [-a * out[-1]]
    return out


def _polyval_ascending(coeffs, z):
    acc = 0j
    for c in reversed(coeffs):
        acc = acc * z + c
    return acc


def build_R_from_profile(spec: KernelSpec, profile: Optional[ZetaProfile] = None):
    """Assemble the rational symbol of the analytic-model operator.

    The symbol's Taylor/Laurent coefficients are R_k = zeta(Q_k) p^(-k(d s
    + 1/2)), so that the coefficient-action matrix (build_BR_matrix at q =
    p^(-1-d s)) reproduces build_sequence_matrix entrywise.  For the
    trivial character the stabilized zeta tails sum to two geometric poles:
    at z = p^((d-r)s + 1/2) (unmarked; outside the unit disk exactly on the
    convergence region) and at z = p^(d s + 1/2) (marked, inside 1/|q|).
    For nontrivial characters the symbol is the windowed Laurent polynomial
    alone and only the origin pole (if any) is marked.  Returns
    (RationalR, description) where the description lists the marked
    principal-part data.

    The rank-one cases r = 0 or s = 0 (trivial character) admit no rational
    symbol and raise DomainError.
    """
    if profile is None:
        profile = z0_profile(spec.Q, spec.chi, spec.p, s=spec.s)
    delta = spec.chi.is_trivial
    s = spec.s
    p = spec.p
    r = spec.degree
    df = float(spec.d)
    t = spec.t
    if delta and (r == 0 or s == 0):
        raise DomainError(
            "rank-one case (r = 0 or s = 0): the operator is "
            "F -> F(1/p)/(1 - p q z) with sole eigenvalue 1/(1-q); "
            "no rational symbol exists")

    nu = cmath.exp(-math.log(p) * (df * s + 0.5))  # p^(-d s - 1/2)
    lo_raw, hi_raw = profile.window()
    zv = {}
    for m in range(lo_raw, hi_raw + 1):
        zv[m] = complex(profile.z0_value(m, t=t)) * nu**m
    scale = max([1.0] + [abs(v) for v in zv.values()])
    keys = [m for m in zv if abs(zv[m]) > 1e-13 * scale]
    if keys:
        lo, hi = min(keys), max(keys)
    else:
        lo, hi = 0, -1

    vr = spec.leading_valuation
    abs_c_s = t**vr  # |leading|^s

    if delta:
        b1 = cmath.exp(math.log(p) * r * s) * nu     # pole at z = p^((d-r)s+1/2)
        b2 = nu                                      # pole at z = p^(d s + 1/2)
        if abs(b1 - b2) <= 1e-12 * abs(b2):
            raise DomainError("structural poles coincide (rank-one regime)")
        k0 = max(0, -lo) if keys else 0
        # numerator of  Z0-window(nu z) + |c|^s/(1-b1 z) - 1/(1-b2 z)
        # over z^k0 (1 - b1 z)(1 - b2 z)
        den_pair = _poly_from_roots_conv(1.0 + 0j, [b1, b2])
        num = [0j] * (max(hi + k0, 0) + 3)
        for m in range(lo, hi + 1):
            for j, c in enumerate(den_pair):
                num[m + k0 + j] += zv[m] * c
        struct = _poly_from_roots_conv(abs_c_s, [b2])
        for j, c in enumerate(struct):
            num[k0 + j] += c
        struct2 = _poly_from_roots_conv(1.0 + 0j, [b1])
        for j, c in enumerate(struct2):
            num[k0 + j] -= c
        poles = [b1, b2]
        marked_bases = {1}
    else:
        if not keys:
            raise DomainError("the symbol vanishes identically")
        k0 = max(0, -lo)
        num = [0j] * (hi + k0 + 1)
        for m in range(lo, hi + 1):
            num[m + k0] = zv[m]
        poles = []
        marked_bases = set()

    while num and abs(num[-1]) <= 1e-13 * scale:
        num.pop()
    lead_zeros = 0
    while lead_zeros < len(num) and abs(num[lead_zeros]) <= 1e-13 * scale:
        lead_zeros += 1
    num = num[lead_zeros:]
    if not num:
        raise DomainError("the symbol vanishes identically")

    # structural poles can be cancelled by the numerator; deflate if so
    for bidx in (1, 0) if delta else ():
        b = poles[bidx]
        w = 1.0 / b
        if abs(_polyval_ascending(num, w)) <= 1e-10 * sum(abs(c) for c in num):
            num = _deflate_linear(num, b)
            poles.pop(bidx)
            marked_bases = {j - (1 if j > bidx else 0)
                            for j in marked_bases if j != bidx}

    z_exp = lead_zeros - k0
    beta = num[0]
    monic = [c / beta for c in num]
    if len(monic) > 1:
        roots = np.roots(list(reversed(monic)))
        zeros = tuple(1.0 / rho for rho in roots)
    else:
        zeros = ()
    marked = tuple(sorted(marked_bases))
    R = RationalR(beta=beta, zeros=zeros, poles=tuple(poles), marked=marked,
                  z_exp=z_exp)

    expected_k = max(0, -z_exp) + (1 if delta else 0)
    actual_k = max(0, -z_exp) + len(marked)
    if actual_k != expected_k:
        raise ComputationError(
            f"marked-pole count {actual_k} disagrees with the structural "
            f"count {expected_k}")

    Pi, rho, sigma = _partial_fractions(R)
    description = {
        "origin_order": R.origin_order,
        "sigma": [[c.real, c.imag] for c in sigma],
        "marked": [
            {"base": [complex(R.poles[j]).real, complex(R.poles[j]).imag],
             "pole": [complex(1 / R.poles[j]).real, complex(1 / R.poles[j]).imag],
             "residue_coefficient": [rho[j].real, rho[j].imag]}
            for j in R.marked
        ],
        "window": [lo, hi],
    }
    return R, description


def _deflate_linear(num, b):
    """Divide the ascending polynomial num by (1 - b z), dropping the remainder."""
    n = len(num)
    quot = [0j] * (n - 1)
    acc = 0j
    for i in range(n - 1):
        acc = num[i] + b * acc
        quot[i] = acc
    return quot


def _partial_fractions(R: RationalR):
    """R = Pi(z) + sum_j rho_j/(1 - b_j z) + sum_t sigma_t z^(-t).

    Returns (Pi ascending coefficients, {pole index: rho}, sigma list with
    sigma[t] for t = 1..k0 at positions 1..k0; sigma[0] unused).
    """
    k0 = R.origin_order
    e = R.z_exp
    num = _poly_from_roots_conv(complex(R.beta), [complex(a) for a in R.zeros])
    if e > 0:
        num = [0j] * e + num
    den = _poly_from_roots_conv(1.0 + 0j, [complex(b) for b in R.poles])
    den_full = [0j] * k0 + den

    # polynomial long division (ascending representation, divide descending)
    nd = list(reversed(num))
    dd = list(reversed(den_full))
    if len(nd) >= len(dd):
        qd, rd = np.polydiv(np.array(nd, dtype=complex),
                            np.array(dd, dtype=complex))
        Pi = list(reversed(np.atleast_1d(qd).tolist()))
        rem = list(reversed(np.atleast_1d(rd).tolist()))
    else:
        Pi = []
        rem = num

    rho = {}
    for j, b in enumerate(R.poles):
        b = complex(b)
        w = 1.0 / b
        other = 1.0 + 0j
        for m, bm in enumerate(R.poles):
            if m != j:
                other *= 1 - complex(bm) * w
        rho[j] = _polyval_ascending(rem, w) / (w**k0 * other)

    sigma = [0j] * (k0 + 1)
    if k0:
        # Taylor coefficients of rem(z)/prod(1 - b_j z) at the origin
        c = [0j] * k0
        inv_series = [1.0 + 0j] + [0j] * (k0 - 1)
        for b in R.poles:
            b = complex(b)
            geo = [b**i for i in range(k0)]
            inv_series = _series_mul(inv_series, geo, k0)
        remc = [complex(rem[i]) if i < len(rem) else 0j for i in range(k0)]
        c = _series_mul(remc, inv_series, k0)
        for tt in range(1, k0 + 1):
            sigma[tt] = c[k0 - tt]
    return Pi, rho, sigma


def _series_mul(a, b, n):
    out = [0j] * n
    for i, x in enumerate(a[:n]):
        if x == 0:
            continue
        for j, y in enumerate(b[: n - i]):
            out[i + j] += x * y
    return out


def build_BR_matrix(R: RationalR, q, N: int = 60, backend: str = "float",
                    dps: Optional[int] = None) -> TruncatedOperator:
    """Matrix of F(z) -> R(z) F(q z) - (principal parts at marked poles)
    on Taylor coefficients, truncated to the first N.

    Column n holds the Taylor coefficients of R(z) (q z)^n with the
    principal parts at the marked poles (and at the origin, via negative
    z_exp) removed.  Unmarked poles must lie on or outside the unit circle;
    marked poles strictly inside |z| = 1/|q|.
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    qc = complex(q)
    if abs(qc) >= 1:
        raise DomainError("needs |q| < 1")
    marked_set = set(R.marked)
    for j, b in enumerate(R.poles):
        zj = 1.0 / abs(complex(b))
        if j in marked_set:
            if zj >= (1 - 1e-9) / abs(qc):
                raise DomainError(
                    f"marked pole at |z| = {zj:.6g} is not inside |z| < 1/|q|")
        else:
            if zj < 1 - 1e-9:
                raise DomainError(
                    f"unmarked pole at |z| = {zj:.6g} lies inside the open "
                    "unit disk; it must be marked")

    Pi, rho, sigma = _partial_fractions(R)
    k0 = R.origin_order
    unmarked = [j for j in range(len(R.poles)) if j not in marked_set]

    def entry_val(m, n):
        d = m - n
        val = Pi[d] if 0 <= d < len(Pi) else 0j
        for j in unmarked:
            if m >= n:
                val += rho[j] * complex(R.poles[j]) ** d
        for j in marked_set:
            if m < n:
                val -= rho[j] * complex(R.poles[j]) ** d
        if 1 <= -d <= k0:
            val += sigma[-d]
        return val

    prov = {"builder": "BR", "R": R.to_json_dict(),
            "q": [qc.real, qc.imag], "N": N, "backend": backend}

    # Hilbert-Schmidt tail over the L-shaped complement
    M = N + 100
    tail2 = 0.0
    for n in range(M):
        qn = abs(qc) ** n
        rows = range(N, M) if n < N else range(0, M)
        for m in rows:
            tail2 += (qn * abs(entry_val(m, n))) ** 2
    tail = math.sqrt(tail2)

    if backend == "float":
        A = np.empty((N, N), dtype=complex)
        qn = 1.0 + 0j
        for n in range(N):
            for m in range(N):
                A[m, n] = qn * entry_val(m, n)
            qn *= qc
        return TruncatedOperator(entries=A, N=N, backend="float",
                                 provenance=prov, tail_estimate=tail)
    if backend != "mp":
        raise DomainError(f"unknown backend {backend!r}")
    if dps is None:
        dps = 40
    with mp.workdps(dps):
        qm = mp.mpc(q)
        A = mp.matrix(N, N)
        qn = mp.mpc(1)
        for n in range(N):
            for m in range(N):
                A[m, n] = qn * mp.mpc(entry_val(m, n))
            qn *= qm
    return TruncatedOperator(entries=A, N=N, backend="mp", provenance=prov,
                             tail_estimate=tail, dps=dps)


# ---------------------------------------------------------------------------
# Special families
# ---------------------------------------------------------------------------


def build_nonhomog_matrix(p: int, s: float, d: int, N: int = 60,
                          backend: str = "float",
                          dps: Optional[int] = None) -> TruncatedOperator:
    """Entries p^(-(m+n)/2 - 2 s min(m, d n)) for the degree-d monomial
    substitution kernel (d >= 2, real s >= 0).

    The natural base is q = p^(-(2s+1)/(d-1)), recorded in provenance.
    """
    p = Prime(p)
    d = int(d)
    if d < 2:
        raise DomainError("needs d >= 2")
    s = complex(s)
    if s.imag != 0 or s.real < 0:
        raise DomainError("needs real s >= 0")
    sr = s.real
    qval = p ** (-(2 * sr + 1) / (d - 1))
    prov = {"builder": "nonhomog", "p": int(p), "d": d, "s": [sr, 0.0],
            "N": N, "backend": backend, "q": [qval, 0.0]}
    if backend == "float":
        lnp = math.log(p)
        A = np.empty((N, N), dtype=complex)
        for m in range(N):
            for n in range(N):
                A[m, n] = math.exp(-lnp * ((m + n) / 2 + 2 * sr * min(m, d * n)))
        tail = _plain_tail(lambda m, n: math.exp(
            -math.log(p) * ((m + n) / 2 + 2 * sr * min(m, d * n))), N)
        return TruncatedOperator(entries=A, N=N, backend="float",
                                 provenance=prov, tail_estimate=tail)
    if backend != "mp":
        raise DomainError(f"unknown backend {backend!r}")
    if dps is None:
        dps = 40
    with mp.workdps(dps):
        lnp = mp.log(p)
        A = mp.matrix(N, N)
        for m in range(N):
            for n in range(N):
                A[m, n] = mp.exp(-lnp * (mp.mpf(m + n) / 2
                                         + 2 * mp.mpf(sr) * min(m, d * n)))
    tail = _plain_tail(lambda m, n: math.exp(
        -math.log(p) * ((m + n) / 2 + 2 * sr * min(m, d * n))), N)
    return TruncatedOperator(entries=A, N=N, backend="mp", provenance=prov,
                             tail_estimate=tail, dps=dps)


def _plain_tail(mag, N, pad=100) -> float:
    M = N + pad
    tot = 0.0
    for m in range(M):
        for n in range(N, M):
            tot += mag(m, n) ** 2
    for m in range(N, M):
        for n in range(0, N):
            tot += mag(m, n) ** 2
    return math.sqrt(tot)


def build_rank1_perturbation_matrix(p: int, s, d=1, N: int = 60) -> TruncatedOperator:
    """The deg-1 kernel matrix restricted to the complement of its kernel
    vector: entries p^(-(m+n+2)/2) g(min(m,n)+1) with
    g(k) = (p^(-k d s) - 1)/(1 - p^(-d s)), and g(k) = -k at s = 0.
    """
    p = Prime(p)
    d = _as_fraction_degree(d)
    s = complex(s)
    lnp = math.log(p)
    df = float(d)
    A = np.empty((N, N), dtype=complex)
    if s == 0:
        gvals = [-(k + 1) for k in range(N)]
    else:
        w = cmath.exp(-lnp * df * s)  # p^(-d s)
        gvals = [(w ** (k + 1) - 1) / (1 - w) for k in range(N)]
    for m in range(N):
        for n in range(N):
            A[m, n] = math.exp(-lnp * (m + n + 2) / 2) * gvals[min(m, n)]
    qval = cmath.exp(-lnp * (1 + df * s))
    prov = {"builder": "rank1_perturbation", "p": int(p), "d": str(d),
            "s": [s.real, s.imag], "N": N, "backend": "float",
            "q": [qval.real, qval.imag]}
    tail = _plain_tail(lambda m, n: math.exp(-math.log(p) * (m + n + 2) / 2)
                       * abs(gvals[min(min(m, n), N - 1)]), N)
    return TruncatedOperator(entries=A, N=N, backend="float", provenance=prov,
                             tail_estimate=tail)


def rank1_inverse_defect(p: int, s, d=1, N: int = 60, dps: int = 60) -> float:
    """max |(L B - I)_{mn}| over interior rows m <= N-2, where B is the
    rank-one-perturbation matrix and L the explicit tridiagonal

        (L g)_m = q^(-m-1) (sqrt(p) g_{m+1} - (1+pq) g_m + sqrt(p) q g_{m-1}),

    with g_{-1} = 0.  Computed in extended precision because L's rows grow
    like q^(-m) and the cancellation is catastrophic in binary64.
    """
    p = Prime(p)
    d = _as_fraction_degree(d)
    s = complex(s)
    with mp.workdps(dps):
        lnp = mp.log(p)
        df = mp.mpf(d.numerator) / d.denominator
        sm = mp.mpc(s)
        q = mp.exp(-lnp * (1 + df * sm))
        rp = mp.sqrt(mp.mpf(p))
        if s == 0:
            g = [-(k + 1) for k in range(N + 1)]
        else:
            w = mp.exp(-lnp * df * sm)
            g = [(w ** (k + 1) - 1) / (1 - w) for k in range(N + 1)]

        def B(m, n):
            return mp.exp(-lnp * mp.mpf(m + n + 2) / 2) * g[min(m, n)]

        worst = mp.mpf(0)
        for m in range(N - 1):
            pref = q ** (-m - 1)
            for n in range(N):
                acc = rp * B(m + 1, n) - (1 + p * q) * B(m, n)
                if m >= 1:
                    acc += rp * q * B(m - 1, n)
                val = pref * acc
                target = 1 if m == n else 0
                dev = abs(val - target)
                if dev > worst:
                    worst = dev
        return float(worst)


def build_min_kernel_matrix(qq: Fraction, N: int) -> list:
    """Exact (N+1) x (N+1) matrix with entries qq^(-min(m,n))."""
    qq = Fraction(qq)
    if qq == 0:
        raise DomainError("qq must be nonzero")
    vals = [qq ** (-k) for k in range(N + 1)]
    return [[vals[min(m, n)] for n in range(N + 1)] for m in range(N + 1)]


# ---------------------------------------------------------------------------
# Discretized kernel and character blocks
# ---------------------------------------------------------------------------


def _bivariate_scaled(P: dict, p: int):
    """Clear denominators: returns (integer coefficient dict, e) with
    v_p(P(x,y)) = v_p(W(x,y)) - e."""
    items = {k: Fraction(v) for k, v in P.items() if Fraction(v) != 0}
    if not items:
        raise DomainError("P must be nonzero")
    denom_lcm = 1
    for v in items.values():
        denom_lcm = denom_lcm * v.denominator // math.gcd(denom_lcm, v.denominator)
    e = _int_valuation(denom_lcm, p) if denom_lcm % p == 0 else 0
    W = {k: int(v * denom_lcm) for k, v in items.items()}
    return W, e


def discretize_kernel(P: dict, p: int, s: complex, K: int,
                      cap: Optional[int] = None,
                      chi: Optional[UnitCharacter] = None) -> TruncatedOperator:
    """Riemann sum of the normalized kernel on residues mod p^K:

        M[b, a] = p^(-K) (1 - 1/p)^(-1) max(|P(a, b)|, p^(-cap))^s.

    With chi given, returns the block of M on the character eigenspace
    spanned by the shell vectors e_v[u p^v] = chi(u) (v <= K - conductor;
    the trivial character also gets the delta at 0), orthonormalized.
    The kernel's unit-scaling invariance makes these blocks exact.
    """
    p = Prime(p)
    if K < 1:
        raise DomainError("K must be >= 1")
    if p**K > 1000:
        raise DomainError("discretization is limited to p^K <= 1000")
    s = complex(s)
    if cap is None:
        cap = int(math.ceil(40 * max(s.real, 0) + 20))
    W, e = _bivariate_scaled(P, p)
    n = p**K

    max_i = max(k[0] for k in W)
    gi = {}
    for i in range(max_i + 1):
        row = {j: c for (ii, j), c in W.items() if ii == i}
        if row:
            gi[i] = row

    lnp = math.log(p)
    t_pows = [cmath.exp(-lnp * s * v) for v in range(-e, cap + 1)]

    Mfull = np.empty((n, n), dtype=complex)
    norm = (1 - 1 / p) ** -1 * p ** (-K) + 0.0
    pk = p**K
    cap_shift = cap + e
    for b in range(n):
        gvals = {}
        for i, row in gi.items():
            acc = 0
            for j in range(max(row), -1, -1):
                acc = acc * b + row.get(j, 0)
            gvals[i] = acc
        for a in range(n):
            acc = 0
            for i in range(max_i, -1, -1):
                acc = acc * a + gvals.get(i, 0)
            if acc == 0:
                v = cap_shift
            else:
                v = 0
                while acc % p == 0 and v < cap_shift:
                    acc //= p
                    v += 1
            Mfull[b, a] = norm * t_pows[v]

    if chi is None:
        prov = {"builder": "discretized", "p": int(p), "K": K, "cap": cap,
                "s": [s.real, s.imag], "chi": None}
        return TruncatedOperator(entries=Mfull, N=n, backend="float",
                                 provenance=prov, tail_estimate=0.0)

    if chi.p != p:
        raise DomainError("character prime differs from kernel prime")
    ell = chi.conductor_exponent
    cols = []
    vmaxes = list(range(0, K - max(ell, 1) + 1))
    for v in vmaxes:
        col = np.zeros(n, dtype=complex)
        step = p**v
        for u in range(1, p ** (K - v)):
            if u % p:
                col[u * step] = chi.value(u)
        col /= math.sqrt((p - 1) * p ** (K - v - 1))
        cols.append(col)
    if chi.is_trivial:
        col = np.zeros(n, dtype=complex)
        col[0] = 1.0
        cols.append(col)
    E = np.column_stack(cols)
    block = E.conj().T @ Mfull @ E
    prov = {"builder": "discretized", "p": int(p), "K": K, "cap": cap,
            "s": [s.real, s.imag], "chi": list(chi.descriptor())}
    return TruncatedOperator(entries=block, N=block.shape[0], backend="float",
                             provenance=prov, tail_estimate=0.0)

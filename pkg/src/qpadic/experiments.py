"""Scripted end-to-end reproductions of the solvable operator families.

Each runner builds a truncated operator, evaluates the closed-form
characteristic function predicted for that family, certifies the zeros of
that function inside an explicit disk, and pairs eigenvalues with
reciprocal zeros.  Every PASS couples the zero matching with at least one
independent consistency check (an exact identity, an orthogonality
relation, a discretization oracle, or a structural fact), and every
numeric claim in the report carries its tolerance.

A report serializes to JSON (schema version "1", complex numbers as
[re, im] pairs, rationals as numerator/denominator strings) and to a flat
CSV of (instance, eigenvalue, reciprocal zero, mismatch) rows.  Reruns
with the same configuration reproduce the JSON byte for byte except for
the single volatile "timestamp" entry.

Runners take a ``formula_perturbation`` knob that multiplies the base
parameter of the *formula* side by (1 + delta) while leaving the operator
untouched; a nonzero value is the negative control proving the matcher
can fail.
"""

from __future__ import annotations

import cmath
import json
import math
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from mpmath import mp

from .errors import ComputationError, DomainError
from .padic_core import (Prime, UnitCharacter, character_by_descriptor,
                         enumerate_characters, trivial_character, valuation)
from .zeta import z0_profile, zeta
from .operator import (KernelSpec, RationalR, build_BR_matrix,
                       build_nonhomog_matrix, build_R_from_profile,
                       build_rank1_perturbation_matrix,
                       build_sequence_matrix, discretize_kernel,
                       rank1_inverse_defect)
from .qspecial import (EntireFunctionHandle, E_func, K_mahler, e_handle,
                       hahn_exton_J, j_handle, phi_tilde_2_1, qpochhammer,
                       watson_residual)
from .spectral import (eigenvalues, find_zeros, fredholm_det_truncated,
                       m_matrix, match_spectra, mp_top_eigenvalues,
                       wronski_char_fn)

__all__ = [
    "CheckResult", "ExperimentConfig", "ExperimentReport",
    "run_noroots", "run_rank1_perturbation", "run_z0_constant",
    "run_chi_nontrivial", "run_mahler", "run_generic_R",
    "run_union_over_chi", "run_experiment", "run_from_config",
    "EXPERIMENT_NAMES",
]


# ---------------------------------------------------------------------------
# Report plumbing
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    """One named pass/fail item: `observed` is the measured scalar that was
    compared against `tolerance`; `kind` names the type of evidence
    (dual-route, closed-form, identity, oracle, structural, informational).
    Checks with gating=False are recorded but do not affect report.passed."""

    name: str
    passed: bool
    tolerance: Optional[float]
    observed: Optional[float]
    kind: str
    detail: dict = field(default_factory=dict)
    gating: bool = True

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "tolerance": self.tolerance,
            "observed": self.observed,
            "kind": self.kind,
            "gating": self.gating,
            "detail": _jsonable(self.detail),
        }


@dataclass
class ExperimentConfig:
    """Name + parameter mapping for one experiment, optionally read from a
    key = value text file (# starts a comment; values are parsed as int,
    float, complex, fraction or left as strings)."""

    name: str
    parameters: dict = field(default_factory=dict)
    output_dir: Optional[str] = None

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        name = None
        output_dir = None
        params = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise DomainError(
                        f"{path}:{lineno}: expected 'key = value'")
                key, val = (part.strip() for part in line.split("=", 1))
                if key == "name":
                    name = val
                elif key in ("output_dir", "output"):
                    output_dir = val
                else:
                    params[key] = _parse_config_value(val)
        if name is None:
            raise DomainError(f"{path}: missing required key 'name'")
        return cls(name=name, parameters=params, output_dir=output_dir)


def _parse_config_value(val: str):
    low = val.lower()
    if low in ("true", "false"):
        return low == "true"
    for caster in (int, float, complex):
        try:
            return caster(val)
        except ValueError:
            pass
    if "/" in val:
        try:
            return Fraction(val)
        except ValueError:
            pass
    if "," in val:
        return tuple(_parse_config_value(part.strip())
                     for part in val.split(","))
    return val


@dataclass
class ExperimentReport:
    """Everything one runner produced: the echoed configuration, the check
    list, free-form artifacts (spectra, zeros, pairings, formula
    descriptions), and wall-clock timings (volatile, excluded from the
    reproducible part of the JSON)."""

    name: str
    parameters: dict
    checks: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.gating)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary_lines(self) -> list:
        lines = [f"[{'PASS' if self.passed else 'FAIL'}] {self.name}"]
        for c in self.checks:
            mark = "pass" if c.passed else "FAIL"
            tol = "" if c.tolerance is None else f" tol={c.tolerance:g}"
            obs = "" if c.observed is None else f" observed={c.observed:.3g}"
            gate = "" if c.gating else " (informational)"
            lines.append(f"  [{mark}] {c.name}{obs}{tol}{gate}")
        return lines

    def to_json_dict(self) -> dict:
        return {
            "schema_version": "1",
            "experiment": self.name,
            "parameters": _jsonable(self.parameters),
            "passed": self.passed,
            "checks": [c.to_json_dict() for c in self.checks],
            "artifacts": _jsonable(self.artifacts),
            "timestamp": {
                "generated_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
                "timings_seconds": _jsonable(self.timings),
            },
        }

    def save(self, out_dir: Optional[str] = None) -> dict:
        """Write <name>.json and <name>.csv atomically; returns the paths."""
        if out_dir is None:
            out_dir = "."
        os.makedirs(out_dir, exist_ok=True)
        json_path = os.path.join(out_dir, f"{self.name}.json")
        csv_path = os.path.join(out_dir, f"{self.name}.csv")
        _atomic_write(json_path, json.dumps(self.to_json_dict(),
                                            sort_keys=True, indent=1) + "\n")
        rows = [["instance", "eigenvalue_re", "eigenvalue_im",
                 "reciprocal_zero_re", "reciprocal_zero_im", "mismatch"]]
        for instance, pairs in self.artifacts.get("pairings", {}).items():
            for lam, rec, dev in pairs:
                lam = complex(lam)
                rec = complex(rec)
                rows.append([instance, repr(lam.real), repr(lam.imag),
                             repr(rec.real), repr(rec.imag), repr(float(dev))])
        buf = []
        for row in rows:
            buf.append(",".join(str(x) for x in row))
        _atomic_write(csv_path, "\n".join(buf) + "\n")
        return {"json": json_path, "csv": csv_path}


def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _jsonable(obj):
    """Recursively convert to JSON-safe types: complex -> [re, im],
    Fraction -> numerator/denominator strings, mpmath/numpy scalars ->
    floats, tuples -> lists."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return obj
    if isinstance(obj, Fraction):
        return {"numerator": str(obj.numerator),
                "denominator": str(obj.denominator)}
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer)):
        return float(obj)
    if isinstance(obj, (np.complexfloating,)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (mp.mpf,)):
        return float(obj)
    if isinstance(obj, (mp.mpc,)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if hasattr(obj, "to_json_dict"):
        return obj.to_json_dict()
    return str(obj)


# ---------------------------------------------------------------------------
# Shared numeric helpers
# ---------------------------------------------------------------------------


def _cx(v) -> complex:
    return complex(v)


def _radius_between(lams: Sequence, count: int) -> float:
    """A contour radius separating the first `count` reciprocal eigenvalues
    from the rest: the geometric mean of 1/|lam_{count-1}| and 1/|lam_count|
    (or 1.5x the former when there is no next eigenvalue)."""
    mags = sorted((abs(_cx(v)) for v in lams), reverse=True)
    mags = [m for m in mags if m > 0]
    if count > len(mags):
        raise DomainError(f"need {count} nonzero eigenvalues, have {len(mags)}")
    inner = 1.0 / mags[count - 1]
    if count < len(mags) and mags[count] > 0:
        outer = 1.0 / mags[count]
        if outer / inner > 1.2:
            return math.sqrt(inner * outer)
    return 1.5 * inner


def _matched_pairs_artifact(rep) -> list:
    return [(_cx(a), _cx(b), float(d)) for a, b, d in rep.pairs]


def _match_check(name: str, eigs, handle: EntireFunctionHandle, count: int,
                 tol: float, dps: Optional[int] = None,
                 kind: str = "dual-route"):
    """find_zeros + match_spectra packaged as a CheckResult; returns
    (check, pairs, zero_result)."""
    radius = _radius_between(list(eigs), count)
    zres = find_zeros(handle, radius, dps=dps)
    rep = match_spectra(eigs, zres, count=count, tol=tol, mode="rel")
    detail = {
        "radius": radius,
        "winding": zres.winding,
        "zeros": [_cx(z) for z, _ in zres.zeros],
        "multiplicities": [mult for _, mult in zres.zeros],
        "flags": list(zres.flags),
        "cardinality": rep.diagnostics,
        "worst_index": rep.worst_index,
    }
    chk = CheckResult(name=name, passed=rep.passed, tolerance=tol,
                      observed=rep.worst, kind=kind, detail=detail)
    return chk, _matched_pairs_artifact(rep), zres


def _geo_mul(x: np.ndarray, c: complex) -> np.ndarray:
    """Multiply a truncated power series by 1/(1 - c z): y_n = x_n + c y_{n-1}."""
    y = np.array(x, dtype=complex)
    for n in range(1, len(y)):
        y[n] += c * y[n - 1]
    return y


def _linear_mul(x: np.ndarray, a: complex) -> np.ndarray:
    """Multiply a truncated power series by (1 - a z)."""
    y = np.array(x, dtype=complex)
    y[1:] -= a * x[:-1]
    return y


def _operator_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A, 2))


def _eig_residual(A: np.ndarray, lam: complex, v: np.ndarray) -> float:
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return float("inf")
    return float(np.linalg.norm(A @ v - lam * v)) / (nv * _operator_norm(A))


def _seq0_series(q, u):
    """sum_n (-1)^n q^(n(n+1)/2) u^n / ((q;q)_n (q;q)_{n+1}), the entire
    limit of (a-1) J(a, q, u)/u as a -> 1."""
    if isinstance(u, np.ndarray):
        qc = complex(q)
        arr = np.asarray(u, dtype=complex)
        term = np.full(arr.shape, 1.0 / (1 - qc), dtype=complex)
        total = term.copy()
        small = 0
        for n in range(1, 500):
            term = term * (-(qc ** n) * arr) / ((1 - qc ** n)
                                                * (1 - qc ** (n + 1)))
            total = total + term
            if np.max(np.abs(term)) <= 1e-18 * max(np.max(np.abs(total)),
                                                   1e-290):
                small += 1
                if small >= 3:
                    break
            else:
                small = 0
        return total
    if isinstance(u, (mp.mpf, mp.mpc)) or isinstance(q, (mp.mpf, mp.mpc)):
        one = mp.mpf(1)
        term = one / (1 - q)
        total = term
        for n in range(1, 500):
            term = term * (-(q ** n) * u) / ((1 - q ** n) * (1 - q ** (n + 1)))
            total += term
            if abs(term) <= mp.mpf(10) ** (-mp.dps - 5) * max(abs(total), 1):
                break
        return total
    return complex(_seq0_series(q, np.array([u], dtype=complex))[0])


def _seq0_handle(q) -> EntireFunctionHandle:
    return EntireFunctionHandle(
        evaluator=lambda u: _seq0_series(q, u),
        tag="seq0_limit_series",
        params={"q": q},
    )


def _padic_abs_pow(p: int, s: complex, n_max: int) -> np.ndarray:
    """|a|_p^s for a = 0..n_max-1 (|0|^s treated as 0)."""
    out = np.zeros(n_max, dtype=complex)
    for a in range(1, n_max):
        v = 0
        x = a
        while x % p == 0:
            x //= p
            v += 1
        out[a] = p ** (-s * v)
    return out


def _fourier_eigenvalue(p: int, s: complex, k: int, K: int) -> complex:
    """Character-sum value of the normalized |x|^s transform at frequency
    of level k (k = 0 is the constant character), discretized mod p^K."""
    if k > K:
        raise DomainError("need k <= K for the discretized transform")
    N = p ** K
    absvals = _padic_abs_pow(p, s, N)
    a = np.arange(N)
    if k == 0:
        phase = np.ones(N, dtype=complex)
    else:
        phase = np.exp(-2j * np.pi * (a % p ** k) / p ** k)
    return complex((absvals * phase).sum()) / N / (1 - 1 / p)


def _left_null_vector(M: np.ndarray) -> np.ndarray:
    """Row vector C (normalized) with C @ M minimal, via SVD."""
    U, sing, Vh = np.linalg.svd(M)
    return np.conj(U[:, -1])


def _simple_unit_roots(Q: Sequence, p: int) -> tuple:
    """(number of simple roots of Q mod p among units, any multiple?)."""
    coeffs = [Fraction(c) % p if isinstance(c, int) else
              (Fraction(c).numerator * pow(Fraction(c).denominator, -1, p)) % p
              for c in Q]
    coeffs = [int(c) % p for c in coeffs]
    m = 0
    multiple = False
    for u in range(1, p):
        val = 0
        for c in reversed(coeffs):
            val = (val * u + c) % p
        if val % p == 0:
            der = 0
            for j, c in enumerate(coeffs):
                if j >= 1:
                    der = (der + j * c * pow(u, j - 1, p)) % p
            if der % p == 0:
                multiple = True
            else:
                m += 1
    return m, multiple


# ---------------------------------------------------------------------------
# Eigenvector coefficient extraction
# ---------------------------------------------------------------------------


def _noroots_eigvec_coeffs(b: complex, ab: complex, c: complex, q: complex,
                           N: int) -> np.ndarray:
    """Taylor coefficients (length N) of

        1/(1 - b z) * sum_m (-1)^m q^(m(m-1)/2) (c z)^m
                              / ((b q z; q)_m (a b z; q)_m),

    the candidate eigenvector generating function for the no-unit-roots
    family (c carries the eigenvalue dependence)."""
    G = np.zeros(N, dtype=complex)
    H = np.zeros(N, dtype=complex)
    H[0] = 1.0
    t = 1.0 + 0j
    for mdx in range(N):
        if mdx > 0:
            t *= -q ** (mdx - 1) * c
            H = _geo_mul(H, b * q * q ** (mdx - 1))
            H = _geo_mul(H, ab * q ** (mdx - 1))
        if t == 0:
            break
        G[mdx:] += t * H[: N - mdx]
    return _geo_mul(G, b)


def _generic_eigvec_coeffs(R: RationalR, q: complex, lam: complex,
                           C: np.ndarray, N: int,
                           max_m: int = 400) -> np.ndarray:
    """Taylor coefficients of the reconstructed eigenvector

        F(z) = sum_j lam^{-1} C_j / (1 - b_j z)
               * phi(a_1 z, ..., a_ell z, q; b_1 z, .., q b_j z, .., b_r z;
                     q, beta/lam),

    where phi is the plain-ratio (Bailey) series: the explicit q in the
    upper list cancels the (q;q)_m factorial and no balancing powers
    appear, so convergence needs |beta/lam| < 1.  Pole bases are ordered
    marked-first, matching the M-matrix."""
    beta = _cx(R.beta)
    u0 = beta / lam
    if abs(u0) >= 0.999:
        raise DomainError(f"eigenvector series needs |beta/lam| < 1, "
                          f"got {abs(u0):.3g}")
    perm = list(R.marked) + [j for j in range(len(R.poles))
                             if j not in R.marked]
    bases = [_cx(R.poles[j]) for j in perm]
    a_list = [_cx(a) for a in R.zeros]
    r = len(bases)
    k = len(R.marked)
    out = np.zeros(N, dtype=complex)
    for jpos in range(k):
        sig = [(q * bases[m] if m == jpos else bases[m]) for m in range(r)]
        W = np.zeros(N, dtype=complex)
        W[0] = 1.0
        acc = np.zeros(N, dtype=complex)
        tm = 1.0 + 0j
        small = 0
        for mdx in range(max_m):
            if mdx > 0:
                qpow = q ** (mdx - 1)
                for a in a_list:
                    W = _linear_mul(W, a * qpow)
                for sg in sig:
                    W = _geo_mul(W, sg * qpow)
                tm *= u0
            acc += tm * W
            size = abs(tm) * float(np.max(np.abs(W)))
            ref = max(float(np.max(np.abs(acc))), 1e-290)
            if size <= 1e-18 * ref:
                small += 1
                if small >= 3:
                    break
            else:
                small = 0
        else:
            raise ComputationError("eigenvector series did not converge")
        out += (C[jpos] / lam) * _geo_mul(acc, bases[jpos])
    return out


# ---------------------------------------------------------------------------
# Runner: no unit roots
# ---------------------------------------------------------------------------


def run_noroots(p: int = 3, s: complex = 1.0, d: int = 2, r: int = 2,
                N: int = 60, dps: int = 40, seed: int = 0,
                formula_perturbation: float = 0.0,
                output_dir: Optional[str] = None) -> ExperimentReport:
    """The family whose reduced kernel polynomial has no roots among the
    units: Q = (1 + x^2)^(r/2), homogenized to degree d.

    Checks: top-5 eigenvalues (extended precision) against reciprocal
    zeros of the confluent q-Bessel function J(p^(rs), q, (1-p^(rs))u);
    the explicit eigenvector generating function (both argument-scaling
    variants are scored and the working one recorded); eigenvector
    orthogonality; and the rank-one collapses at r = 0 and s = 0 with
    sole eigenvalue 1/(1-q)."""
    t0 = time.perf_counter()
    p = int(Prime(p))
    if r < 0 or r % 2 != 0:
        raise DomainError("r must be a nonnegative even integer")
    if r > 0 and p % 4 != 3:
        raise DomainError("the (1 + x^2) block needs p = 3 mod 4")
    if d < max(r, 1):
        raise DomainError("need d >= max(r, 1)")
    sc = complex(s)
    chi1 = trivial_character(p)
    Q = _poly_power((1, 0, 1), r // 2) if r else (1,)
    report = ExperimentReport(
        name="noroots",
        parameters={"p": p, "s": sc, "d": d, "r": r, "N": N, "dps": dps,
                    "seed": seed, "formula_perturbation": formula_perturbation},
    )
    delta = formula_perturbation

    if r == 0 or sc == 0:
        spec = KernelSpec(p, d, d, Q, chi1, sc)
        _rank_one_checks(report, spec, "rank_one", delta)
        report.timings["total_seconds"] = time.perf_counter() - t0
        if output_dir:
            report.artifacts["paths"] = report.save(output_dir)
        return report

    spec = KernelSpec(p, d, d, Q, chi1, sc)
    q = spec.q
    a_par = p ** (r * sc)
    q_f = q * (1 + delta)
    report.artifacts["characteristic_function"] = {
        "form": "J(a, q, (1 - a) u) with J the order-zero confluent "
                "q-Bessel series",
        "a": a_par, "q": q_f,
    }
    nu_index = -1 - (r * sc) / (1 + d * sc)
    report.checks.append(CheckResult(
        name="bessel_index_recorded", passed=True, tolerance=None,
        observed=None, kind="informational", gating=False,
        detail={"nu": nu_index,
                "relation": "q-Bessel index from the kernel exponents"}))

    t_build = time.perf_counter()
    A_mp = build_sequence_matrix(spec, N=N, backend="mp", dps=dps)
    S = mp_top_eigenvalues(A_mp, k=6)
    report.timings["eigen_seconds"] = time.perf_counter() - t_build

    handle = EntireFunctionHandle(
        evaluator=lambda u: hahn_exton_J(a_par, q_f, (1 - a_par) * u),
        tag="J_scaled", params={"a": a_par, "q": q_f, "scale": 1 - a_par})
    chk, pairs, zres = _match_check(
        "spectrum_matches_confluent_bessel_zeros", S.values, handle,
        count=5, tol=1e-8)
    report.checks.append(chk)
    report.artifacts["pairings"] = {"noroots": pairs}
    report.artifacts["top_eigenvalues"] = [_cx(v) for v in S.values]
    report.artifacts["eigen_residuals"] = [float(x) for x in S.residuals]

    # Eigenvector generating function 1/(1 - b z) 2phi2-type series with
    # b = p^(1/2) q; the matrix acts on its Taylor coefficients directly.
    # Two candidate scalings of the series argument are scored and the
    # working one is recorded.
    A_f = build_sequence_matrix(spec, N=N).to_numpy()
    b_base = math.sqrt(p) * q
    u_roots = [1.0 / _cx(lam) * (1 - a_par) for lam in S.values[:3]]
    variants = {"b_z_u": lambda ui: b_base * ui,
                "b2_over_q_z_u": lambda ui: b_base ** 2 / q * ui}
    var_residuals = {}
    var_vectors = {}
    for tag, argmap in variants.items():
        res = []
        vecs = []
        for i, ui in enumerate(u_roots):
            v = _noroots_eigvec_coeffs(b_base, a_par * b_base,
                                       argmap(ui), q, N)
            res.append(_eig_residual(A_f, _cx(S.values[i]), v))
            vecs.append(v)
        var_residuals[tag] = res
        var_vectors[tag] = vecs
    best = min(var_residuals, key=lambda tg: max(var_residuals[tg]))
    report.checks.append(CheckResult(
        name="eigenvector_formula", passed=max(var_residuals[best]) <= 1e-7,
        tolerance=1e-7, observed=max(var_residuals[best]), kind="closed-form",
        detail={"variant_residuals": var_residuals, "working_variant": best}))
    vecs = var_vectors[best]
    worst_ortho = 0.0
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            gij = abs(np.dot(vecs[i], vecs[j]))
            gii = abs(np.dot(vecs[i], vecs[i]))
            gjj = abs(np.dot(vecs[j], vecs[j]))
            worst_ortho = max(worst_ortho, gij / math.sqrt(gii * gjj))
    report.checks.append(CheckResult(
        name="eigenvector_orthogonality", passed=worst_ortho <= 1e-8,
        tolerance=1e-8, observed=worst_ortho, kind="identity",
        detail={"pairs_checked": len(vecs) * (len(vecs) - 1) // 2}))

    # rank-one collapses of the same family
    _rank_one_checks(report, KernelSpec(p, d, d, (1,), chi1, sc),
                     "rank_one_r0", delta, N=40)
    _rank_one_checks(report, KernelSpec(p, d, d, Q, chi1, 0.0),
                     "rank_one_s0", delta, N=40)

    report.timings["total_seconds"] = time.perf_counter() - t0
    if output_dir:
        report.artifacts["paths"] = report.save(output_dir)
    return report


def _poly_power(base: tuple, k: int) -> tuple:
    out = (1,)
    for _ in range(k):
        new = [0] * (len(out) + len(base) - 1)
        for i, x in enumerate(out):
            for j, y in enumerate(base):
                new[i + j] += x * y
        out = tuple(new)
    return out


def _rank_one_checks(report: ExperimentReport, spec: KernelSpec, label: str,
                     delta: float, N: int = 40):
    A = build_sequence_matrix(spec, N=N)
    S = eigenvalues(A)
    lam0 = _cx(S.values[0])
    expected = 1.0 / (1 - spec.q * (1 + delta))
    dev = abs(lam0 - expected) / abs(expected)
    report.checks.append(CheckResult(
        name=f"{label}_top_eigenvalue", passed=dev <= 1e-12,
        tolerance=1e-12, observed=dev, kind="closed-form",
        detail={"eigenvalue": lam0, "expected": expected,
                "s": spec.s, "Q": [str(c) for c in spec.Q]}))
    rest = max((abs(_cx(v)) for v in S.values[1:]), default=0.0) / abs(lam0)
    report.checks.append(CheckResult(
        name=f"{label}_remainder_vanishes", passed=rest <= 1e-12,
        tolerance=1e-12, observed=rest, kind="structural",
        detail={"second_over_first": rest}))


# ---------------------------------------------------------------------------
# Runner: rank-one perturbation (inverse is a Jacobi difference operator)
# ---------------------------------------------------------------------------


def run_rank1_perturbation(p: int = 3, s: complex = 1.0, d: int = 1,
                           N: int = 60, seed: int = 0,
                           formula_perturbation: float = 0.0,
                           output_dir: Optional[str] = None
                           ) -> ExperimentReport:
    """The compact part of the degree-d max-kernel on the complement of its
    kernel vector; its inverse is an explicit tridiagonal difference
    operator and its characteristic function is J(1/p, q, -u/p).

    Checks: spectrum vs zeros of J(1/p, q, -u/p); the tridiagonal inverse
    identity on interior rows; the q-analog Fourier-Bessel orthogonality
    sums; the explicit q-Bessel eigenvector coefficients; the s = 0
    specialization; and the a -> 1 limit identity for the series
    sum (-1)^n q^(n(n+1)/2) u^n / ((q;q)_n (q;q)_{n+1})."""
    t0 = time.perf_counter()
    p = int(Prime(p))
    sc = complex(s)
    if sc == 0:
        raise DomainError("use the built-in s = 0 variant of the default run")
    q = cmath.exp(-math.log(p) * (1 + d * sc))
    delta = formula_perturbation
    q_f = q * (1 + delta)
    report = ExperimentReport(
        name="rank1",
        parameters={"p": p, "s": sc, "d": d, "N": N, "seed": seed,
                    "formula_perturbation": delta},
    )
    report.artifacts["characteristic_function"] = {
        "form": "J(1/p, q, -u/p)", "q": q_f}

    B = build_rank1_perturbation_matrix(p, sc, d, N)
    S = eigenvalues(B)
    handle = EntireFunctionHandle(
        evaluator=lambda u: hahn_exton_J(1.0 / p, q_f, -u / p),
        tag="J_scaled", params={"a": 1.0 / p, "q": q_f, "scale": -1.0 / p})
    chk, pairs, _ = _match_check("spectrum_matches_bessel_zeros",
                                 S.values, handle, count=5, tol=1e-8)
    report.checks.append(chk)
    report.artifacts["pairings"] = {"rank1": pairs}
    report.artifacts["top_eigenvalues"] = [_cx(v) for v in S.top(8)]

    defect = rank1_inverse_defect(p, sc, d, N=40, dps=60)
    report.checks.append(CheckResult(
        name="tridiagonal_inverse_identity", passed=defect <= 1e-10,
        tolerance=1e-10, observed=defect, kind="identity",
        detail={"rows": 39, "dps": 60}))

    # orthogonality of the q-Bessel eigenvector coefficient sequences;
    # the plain Bessel zeros sit at u = -1/(p lam), so a contour that
    # separates the third from the fourth comes from the eigenvalue gaps
    r_u = _radius_between([p * _cx(v) for v in S.values], 3)
    zres = find_zeros(j_handle(1.0 / p, q), radius=r_u)
    u_roots = [_cx(z) for z, _ in zres.zeros][:3]
    if len(u_roots) < 3:
        raise ComputationError("expected at least three Bessel zeros")
    M_terms = 140
    coeff = np.empty((3, M_terms), dtype=complex)
    for i, ui in enumerate(u_roots):
        for n in range(M_terms):
            coeff[i, n] = hahn_exton_J(1.0 / p, q, q ** (n + 1) * ui)
    weights = np.array([p ** (-float(n)) for n in range(M_terms)])
    worst_orth = 0.0
    diag = []
    for i in range(3):
        sii = abs(np.sum(weights * coeff[i] * coeff[i]))
        diag.append(sii)
    for i in range(3):
        for j in range(i + 1, 3):
            sij = abs(np.sum(weights * coeff[i] * coeff[j]))
            worst_orth = max(worst_orth, sij / math.sqrt(diag[i] * diag[j]))
    report.checks.append(CheckResult(
        name="q_fourier_bessel_orthogonality", passed=worst_orth <= 1e-8,
        tolerance=1e-8, observed=worst_orth, kind="identity",
        detail={"zeros_used": u_roots, "diagonal_sums": diag,
                "terms": M_terms}))

    # explicit eigenvector coefficients v_m = p^(-m/2) J(1/p, q, q^(m+1) u_i)
    Bn = B.to_numpy()
    worst_res = 0.0
    for i, ui in enumerate(u_roots):
        v = np.array([p ** (-m / 2.0) * coeff[i, m] for m in range(N)],
                     dtype=complex)
        lam_i = -1.0 / (p * ui)
        worst_res = max(worst_res, _eig_residual(Bn, lam_i, v))
    report.checks.append(CheckResult(
        name="eigenvector_bessel_coefficients", passed=worst_res <= 1e-8,
        tolerance=1e-8, observed=worst_res, kind="closed-form",
        detail={"eigenvalue_relation": "lam = -1/(p u) at each Bessel zero"}))

    # s = 0 specialization: q = 1/p
    q0 = 1.0 / p
    B0 = build_rank1_perturbation_matrix(p, 0.0, d, N)
    S0 = eigenvalues(B0)
    handle0 = EntireFunctionHandle(
        evaluator=lambda u: hahn_exton_J(1.0 / p, q0 * (1 + delta), -u / p),
        tag="J_scaled", params={"a": 1.0 / p, "q": q0 * (1 + delta)})
    chk0, pairs0, _ = _match_check("s_zero_spectrum_matches_bessel_zeros",
                                   S0.values, handle0, count=4, tol=1e-8)
    report.checks.append(chk0)
    report.artifacts["pairings"]["rank1_s0"] = pairs0

    _seq0_checks(report, p, q0)

    report.timings["total_seconds"] = time.perf_counter() - t0
    if output_dir:
        report.artifacts["paths"] = report.save(output_dir)
    return report


def _seq0_checks(report: ExperimentReport, p: int, q0: float):
    """The a -> 1 limit: (a-1) J(a, q, u)/u converges (first order in a-1)
    to the series sum (-1)^n q^(n(n+1)/2) u^n/((q;q)_n (q;q)_{n+1}), whose
    zeros are the limits of the Bessel zeros away from the one escaping to
    the origin."""
    samples = [0.5 + 0j, 1.2 + 0.7j]
    errs = {}
    with mp.workdps(40):
        qm = mp.mpf(1) / p
        for eps_a in (1e-6, 1e-7):
            am = 1 + mp.mpf(eps_a)
            worst = 0.0
            for u in samples:
                um = mp.mpc(u)
                lhs = (am - 1) * hahn_exton_J(am, qm, um) / um
                rhs = _seq0_series(qm, um)
                worst = max(worst, float(abs(lhs - rhs) / abs(rhs)))
            errs[eps_a] = worst
    ratio = errs[1e-6] / max(errs[1e-7], 1e-300)
    ok = errs[1e-7] <= 1e-5 and 4.0 <= ratio <= 25.0
    report.checks.append(CheckResult(
        name="limit_series_identity", passed=ok, tolerance=1e-5,
        observed=errs[1e-7], kind="identity",
        detail={"errors": {str(k): v for k, v in errs.items()},
                "first_order_ratio": ratio,
                "value_at_origin_times_(1-q)": float(
                    abs(_seq0_series(q0, 0.0) * (1 - q0)))}))

    h_seq0 = _seq0_handle(q0)
    radius = 1.0 / q0 ** 2
    zs = find_zeros(h_seq0, radius=radius)
    for _ in range(4):
        if len(zs.expanded()) >= 4:
            break
        radius /= q0
        zs = find_zeros(h_seq0, radius=radius)
    mags = sorted(abs(_cx(z)) for z in zs.expanded())
    if len(mags) < 4:
        raise ComputationError("could not isolate four limit-series zeros")
    radius = math.sqrt(mags[2] * mags[3])
    zs = find_zeros(h_seq0, radius=radius)
    seq0_zeros = sorted((_cx(z) for z, _ in zs.zeros), key=abs)[:3]
    a_near = 1 + 1e-6
    hJ = EntireFunctionHandle(
        evaluator=lambda u: hahn_exton_J(a_near, q0, u),
        tag="J", params={"a": a_near, "q": q0})
    zsJ = find_zeros(hJ, radius=radius)
    j_zeros = sorted((_cx(z) for z, _ in zsJ.zeros
                      if abs(_cx(z)) > 1e-3), key=abs)
    worst = max(abs(a - b) / abs(a)
                for a, b in zip(seq0_zeros, j_zeros[:3]))
    report.checks.append(CheckResult(
        name="limit_series_zero_convergence", passed=worst <= 1e-4,
        tolerance=1e-4, observed=worst, kind="identity",
        detail={"limit_zeros": seq0_zeros, "near_limit_zeros": j_zeros[:3],
                "escaping_zero_near_origin": [
                    _cx(z) for z, _ in zsJ.zeros if abs(_cx(z)) <= 1e-3]}))


# ---------------------------------------------------------------------------
# Runner: constant zeroth symbol (little q-Jacobi regime)
# ---------------------------------------------------------------------------


def run_z0_constant(p: int = 5, s: complex = 1.0, Q: Sequence = (1, -1),
                    N: int = 60, seed: int = 0,
                    formula_perturbation: float = 0.0,
                    output_dir: Optional[str] = None) -> ExperimentReport:
    """Kernels whose symbol profile is constant: unit coefficients, unit
    leading reduction, degree equal to the homogenization degree.

    The characteristic function is the normalized Heine series
    (u;q)_inf 2phi1(a/(pq), 1/a; 1/(pq); q, beta u) for either root a of
    the profile quadratic (both are evaluated and compared).  The scale
    beta is cross-checked against its closed form in the number of simple
    unit roots.  Degenerate parameter values a = q^k or a = p q^(1-k)
    produce the geometric family beta q^j plus k extra roots; for the
    degree-one kernel the full eigenvalue list and an independent
    character-sum transform oracle are asserted."""
    t0 = time.perf_counter()
    p = int(Prime(p))
    sc = complex(s)
    Qt = tuple(Q)
    r = len(Qt) - 1
    if r < 1:
        raise DomainError("need deg Q >= 1")
    chi1 = trivial_character(p)
    spec = KernelSpec(p, r, r, Qt, chi1, sc)
    if valuation(Qt[-1], p) != 0:
        raise DomainError("the reduced degree must equal deg Q "
                          "(unit leading coefficient)")
    delta = formula_perturbation
    q = spec.q
    report = ExperimentReport(
        name="z0_constant",
        parameters={"p": p, "s": sc, "Q": [str(c) for c in Qt], "N": N,
                    "seed": seed, "formula_perturbation": delta},
    )

    R, desc = build_R_from_profile(spec)
    if desc["window"] != [0, 0]:
        raise DomainError(f"the symbol profile {desc['window']} is not "
                          "constant; this family needs window [0, 0]")
    report.artifacts["symbol"] = R.to_json_dict()
    if abs(_cx(R.beta)) < 1e-300:
        raise DomainError("the reduced polynomial has no simple unit roots; "
                          "use the no-unit-roots family instead")

    m_roots, has_multiple = _simple_unit_roots(Qt, p)
    beta = _cx(R.beta)
    if not has_multiple:
        t_val = p ** (-sc)
        beta_formula = -m_roots * (1.0 / p) * (1 - t_val) / (
            (1 - 1.0 / p) * (1 - t_val / p))
        dev_beta = abs(beta - beta_formula) / max(abs(beta_formula), 1e-300)
        report.checks.append(CheckResult(
            name="beta_closed_form", passed=dev_beta <= 1e-10,
            tolerance=1e-10, observed=dev_beta, kind="closed-form",
            detail={"beta": beta, "simple_unit_roots": m_roots}))

    if len(R.zeros) != 2 or len(R.unmarked_bases) != 1:
        raise ComputationError("expected two symbol zeros and one unmarked "
                               "pole in the constant-profile family")
    b_unm = _cx(R.unmarked_bases[0])
    a_cands = sorted((_cx(zv) / b_unm for zv in R.zeros), key=abs)
    qq = 1.0 / (p * q)   # the Heine lower parameter 1/(p q)
    dev_prod = abs(a_cands[0] * a_cands[1] - p * q) / abs(p * q)
    report.checks.append(CheckResult(
        name="parameter_quadratic_product", passed=dev_prod <= 1e-9,
        tolerance=1e-9, observed=dev_prod, kind="structural",
        detail={"a_candidates": a_cands, "product_target": p * q}))

    q_f = q * (1 + delta)

    def h_for(a):
        return EntireFunctionHandle(
            evaluator=lambda u: phi_tilde_2_1(a * qq, 1.0 / a, qq, q_f,
                                              beta * u),
            tag="heine_normalized",
            params={"a": a, "c": qq, "q": q_f, "beta": beta})

    h1, h2 = h_for(a_cands[0]), h_for(a_cands[1])
    h0_dev = abs(h1(0.0) - 1.0)
    report.checks.append(CheckResult(
        name="normalization_at_zero", passed=h0_dev <= 1e-12,
        tolerance=1e-12, observed=h0_dev, kind="structural", detail={}))

    A = build_sequence_matrix(spec, N=N)
    S = eigenvalues(A)
    lam_abs0 = abs(_cx(S.values[0]))
    count = min(4, sum(1 for v in S.values if abs(_cx(v)) >= 1e-6 * lam_abs0))
    rng = np.random.default_rng(seed)
    sample_r = 0.8 / lam_abs0
    worst_agree = 0.0
    for _ in range(8):
        u = sample_r * cmath.exp(2j * math.pi * rng.random())
        v1, v2 = h1(u), h2(u)
        worst_agree = max(worst_agree,
                          abs(v1 - v2) / max(abs(v1) + abs(v2), 1e-300))
    report.checks.append(CheckResult(
        name="both_quadratic_roots_agree", passed=worst_agree <= 1e-9,
        tolerance=1e-9, observed=worst_agree, kind="identity",
        detail={"sample_radius": sample_r}))

    chk, pairs, _ = _match_check("spectrum_matches_heine_zeros", S.values,
                                 h1, count=count, tol=1e-7)
    report.checks.append(chk)
    report.artifacts["pairings"] = {"z0_constant": pairs}
    report.artifacts["top_eigenvalues"] = [_cx(v) for v in S.top(8)]

    # degenerate-parameter branch
    degen = None
    for a in a_cands:
        for kk in range(1, 9):
            if abs(a - q ** kk) <= 1e-8 * abs(a):
                degen = ("q^k", kk)
            if abs(a - p * q ** (1 - kk)) <= 1e-8 * abs(a):
                degen = ("p q^(1-k)", kk)
    report.artifacts["degenerate_parameter"] = (
        {"form": degen[0], "k": degen[1]} if degen else None)
    if degen:
        kk = degen[1]
        fam = [beta * q ** j for j in range(4)]
        worst_fam = 0.0
        lam_list = [_cx(v) for v in S.values]
        for target in fam:
            dev = min(abs(lam - target) for lam in lam_list) / abs(target)
            worst_fam = max(worst_fam, dev)
        report.checks.append(CheckResult(
            name="degenerate_geometric_family", passed=worst_fam <= 1e-9,
            tolerance=1e-9, observed=worst_fam, kind="closed-form",
            detail={"family_head": fam, "extra_roots_expected": kk}))
    if Qt == (1, -1):
        expected = [1.0 / (1 - q * (1 + delta))]
        for kk in range(7):
            expected.append((1 - p * q) * q ** kk * (1 + delta)
                            / ((1 - p) * (1 - q)))
        worst_list = 0.0
        for lam, tgt in zip([_cx(v) for v in S.values[:8]], expected):
            worst_list = max(worst_list, abs(lam - tgt))
        report.checks.append(CheckResult(
            name="degree_one_eigenvalue_list", passed=worst_list <= 1e-10,
            tolerance=1e-10, observed=worst_list, kind="closed-form",
            detail={"expected_head": expected[:4]}))
        K_f = 6 if p ** 6 <= 20000 else 5
        worst_ft = 0.0
        ft_vals = []
        for kk in range(5):
            ft = _fourier_eigenvalue(p, sc, kk, K_f)
            ft_vals.append(ft)
            worst_ft = max(worst_ft, abs(ft - expected[kk]))
        report.checks.append(CheckResult(
            name="fourier_transform_oracle", passed=worst_ft <= 1e-7,
            tolerance=1e-7, observed=worst_ft, kind="oracle",
            detail={"transform_values": ft_vals, "levels": 5,
                    "resolution_exponent": K_f}))

    report.timings["total_seconds"] = time.perf_counter() - t0
    if output_dir:
        report.artifacts["paths"] = report.save(output_dir)
    return report


# ---------------------------------------------------------------------------
# Runner: nontrivial character block
# ---------------------------------------------------------------------------


def run_chi_nontrivial(p: int = 5, s: complex = 1.0, d: int = 2,
                       pstar: Sequence = (1,),
                       chi_descriptor: Optional[tuple] = None,
                       N: int = 60, seed: int = 0,
                       formula_perturbation: float = 0.0,
                       output_dir: Optional[str] = None) -> ExperimentReport:
    """A nontrivial-character block of the kernel built from
    P = x^d - (1/p) x y P*(x, y) + y^d.

    The symbol is a three-term Laurent polynomial; its normalized form
    z^{-1}(1 - a z)(1 - b z) determines a, b through the coupling constant
    gamma (computed two independent ways) and a b = 1/(p q).  Checks: the
    operator built from the normalized symbol against the zeros of the
    two-parameter entire function E(a, b; q, u); truncated determinant
    against E with the physical scale; E(0) = 1; the two-term connection
    formula residuals at seeded random points."""
    t0 = time.perf_counter()
    p = int(Prime(p))
    sc = complex(s)
    if d < 2:
        raise DomainError("need d >= 2")
    if len(pstar) != d - 1:
        raise DomainError("P* must be homogeneous of degree d - 2 "
                          f"({d - 1} coefficients)")
    if chi_descriptor is None:
        chi = UnitCharacter(p, 1, (p - 1) // 2)
    else:
        chi = character_by_descriptor(p, chi_descriptor[0], chi_descriptor[1])
    if chi.is_trivial:
        raise DomainError("this family needs a nontrivial character")
    coeffs = [Fraction(0)] * (d + 1)
    coeffs[0] = Fraction(1)
    coeffs[d] += Fraction(1)
    for j, c in enumerate(pstar):
        coeffs[j + 1] -= Fraction(c, p)
    Qt = tuple(coeffs)
    spec = KernelSpec(p, d, d, Qt, chi, sc)
    q = spec.q
    delta = formula_perturbation
    q_f = q * (1 + delta)
    report = ExperimentReport(
        name="chi_nontrivial",
        parameters={"p": p, "s": sc, "d": d, "pstar": [str(c) for c in pstar],
                    "chi": list(chi.descriptor()), "N": N, "seed": seed,
                    "formula_perturbation": delta},
    )

    prof = z0_profile(Qt, chi, p, s=sc)
    lo, hi = prof.support()
    if lo < -1 or hi > 1:
        raise ComputationError(f"expected a three-term symbol, got support "
                               f"[{lo}, {hi}]")
    z_m1 = complex(prof.z0_value(-1))
    z_0 = complex(prof.z0_value(0))
    z_p1 = complex(prof.z0_value(1))
    if abs(z_m1) < 1e-300:
        raise ComputationError("vanishing lowest symbol coefficient")
    qq = 1.0 / (p * q)

    zeta1 = complex(zeta((1, -1), chi, p, sc))
    zeta_star = complex(zeta(tuple(pstar), chi, p, sc))
    gamma_direct = p ** sc * zeta_star / zeta1
    gamma_profile = z_0 / z_m1
    dev_gamma = abs(gamma_direct - gamma_profile) / max(
        1.0, abs(gamma_direct))
    report.checks.append(CheckResult(
        name="gamma_two_routes", passed=dev_gamma <= 1e-12,
        tolerance=1e-12, observed=dev_gamma, kind="dual-route",
        detail={"from_zeta_values": gamma_direct,
                "from_symbol_profile": gamma_profile,
                "deg1_zeta": zeta1, "pstar_zeta": zeta_star,
                "profile_minus_one_vs_deg1_zeta":
                    abs(z_m1 - zeta1) / abs(zeta1)}))

    dev_ratio = abs(z_p1 / z_m1 - qq) / abs(qq)
    report.checks.append(CheckResult(
        name="symbol_laurent_ratio", passed=dev_ratio <= 1e-10,
        tolerance=1e-10, observed=dev_ratio, kind="structural",
        detail={"ratio": z_p1 / z_m1, "target": qq}))

    gamma = gamma_profile
    disc = cmath.sqrt(gamma * gamma - 4 * qq)
    a_par = (-gamma + disc) / 2
    b_par = (-gamma - disc) / 2
    report.artifacts["symbol_parameters"] = {
        "a": a_par, "b": b_par, "gamma": gamma, "product": qq,
        "scale": z_m1}
    if abs(a_par - b_par) <= 1e-8 * max(abs(a_par), abs(b_par)):
        report.checks.append(CheckResult(
            name="degenerate_parameter_pair", passed=True, tolerance=None,
            observed=abs(a_par - b_par), kind="informational", gating=False,
            detail={"note": "a = b degeneration; the E-based checks do not "
                            "apply and were skipped"}))
        report.timings["total_seconds"] = time.perf_counter() - t0
        if output_dir:
            report.artifacts["paths"] = report.save(output_dir)
        return report

    R0 = RationalR(beta=1.0, zeros=(a_par, b_par), poles=(), marked=(),
                   z_exp=-1)
    B = build_BR_matrix(R0, q, N=N)
    S = eigenvalues(B)
    handle = e_handle(a_par, b_par, q_f)
    chk, pairs, _ = _match_check("spectrum_matches_E_zeros", S.values,
                                 handle, count=4, tol=1e-7)
    report.checks.append(chk)
    report.artifacts["pairings"] = {"chi_nontrivial": pairs}
    report.artifacts["top_eigenvalues"] = [_cx(v) for v in S.top(6)]

    e0_dev = abs(E_func(a_par, b_par, q, 0.0) - 1.0)
    report.checks.append(CheckResult(
        name="E_normalization", passed=e0_dev <= 1e-10, tolerance=1e-10,
        observed=e0_dev, kind="structural", detail={}))

    # physical block: the character-eigenspace matrix carries the scale z_m1
    A_seq = build_sequence_matrix(spec, N=N)
    S_seq = eigenvalues(A_seq)
    seq_top = [_cx(v) for v in S_seq.values[:4]]
    scaled_b = [z_m1 * _cx(v) for v in S.values[:4]]
    worst_scale = 0.0
    used_b = [False] * len(scaled_b)
    for lam_seq in seq_top:
        # nearest unused partner: +/- pairs tie in modulus, so sorted order
        # alone cannot align the two lists
        j = min((j for j in range(len(scaled_b)) if not used_b[j]),
                key=lambda j: abs(lam_seq - scaled_b[j]))
        used_b[j] = True
        worst_scale = max(worst_scale,
                          abs(lam_seq - scaled_b[j]) / abs(lam_seq))
    report.checks.append(CheckResult(
        name="character_block_scaled_spectrum", passed=worst_scale <= 1e-7,
        tolerance=1e-7, observed=worst_scale, kind="dual-route",
        detail={"scale": z_m1}))

    rng = np.random.default_rng(seed)
    worst_det = 0.0
    for _ in range(4):
        u = (0.6 / abs(_cx(S_seq.values[0]))
             * cmath.exp(2j * math.pi * rng.random()))
        lhs = fredholm_det_truncated(A_seq, u)
        rhs = E_func(a_par, b_par, q, z_m1 * u)
        worst_det = max(worst_det, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    report.checks.append(CheckResult(
        name="determinant_scale_identity", passed=worst_det <= 1e-9,
        tolerance=1e-9, observed=worst_det, kind="identity",
        detail={"relation": "det(1 - u A_chi) = E(a, b; q, scale * u)",
                "scale": z_m1}))

    worst_watson = 0.0
    c_w = a_par * b_par * q * q
    for _ in range(20):
        rho = 0.25 + 0.55 * rng.random()
        x = rho * cmath.exp(2j * math.pi * rng.random())
        worst_watson = max(worst_watson,
                           watson_residual(a_par, b_par, c_w, q, x))
    report.checks.append(CheckResult(
        name="connection_formula_residuals", passed=worst_watson <= 1e-9,
        tolerance=1e-9, observed=worst_watson, kind="identity",
        detail={"points": 20, "parameters": [a_par, b_par, c_w]}))

    report.timings["total_seconds"] = time.perf_counter() - t0
    if output_dir:
        report.artifacts["paths"] = report.save(output_dir)
    return report


# ---------------------------------------------------------------------------
# Runner: non-homogeneous max-kernel (automatic Pochhammer regime)
# ---------------------------------------------------------------------------


def run_mahler(p: int = 3, s: float = 1.0, d: int = 2, N: int = 60,
               dps: int = 60, seed: int = 0,
               formula_perturbation: float = 0.0,
               output_dir: Optional[str] = None) -> ExperimentReport:
    """The kernel max(|x|^d, |y|) family: entries
    p^(-(m+n)/2 - 2 s min(m, d n)), base q = p^(-(2s+1)/(d-1)).

    Checks: extended-precision top-5 eigenvalues against reciprocal zeros
    of the doubly-lacunary series K(p^-1 q^-d; q, (q^-1 - p^-1 q^-d) u);
    the normalization at the origin; nonvanishing of every computed
    eigenvalue; and the super-geometric tail bound of the series at the
    largest sampled argument."""
    t0 = time.perf_counter()
    p = int(Prime(p))
    if d < 2:
        raise DomainError("need d >= 2")
    sr = float(s)
    q = p ** (-(2 * sr + 1) / (d - 1))
    delta = formula_perturbation
    q_f = q * (1 + delta)
    a_K = p ** (-1.0) * q_f ** (-d)
    scale = 1.0 / q_f - a_K
    report = ExperimentReport(
        name="mahler",
        parameters={"p": p, "s": sr, "d": d, "N": N, "dps": dps,
                    "seed": seed, "formula_perturbation": delta},
    )
    report.artifacts["characteristic_function"] = {
        "form": "K(a; q, (1/q - a) u), a = 1/(p q^d)",
        "a": a_K, "q": q_f}

    A = build_nonhomog_matrix(p, sr, d, N, backend="mp", dps=dps)
    S = mp_top_eigenvalues(A, k=6)
    handle = EntireFunctionHandle(
        evaluator=lambda u: K_mahler(a_K, q_f, d, scale * u),
        tag="K_scaled", params={"a": a_K, "q": q_f, "d": d, "scale": scale})
    chk, pairs, zres = _match_check("spectrum_matches_lacunary_zeros",
                                    S.values, handle, count=5, tol=1e-8)
    report.checks.append(chk)
    report.artifacts["pairings"] = {"mahler": pairs}
    report.artifacts["top_eigenvalues"] = [_cx(v) for v in S.values]

    h0_dev = abs(complex(handle(0.0)) - 1.0)
    report.checks.append(CheckResult(
        name="normalization_at_zero", passed=h0_dev <= 1e-12,
        tolerance=1e-12, observed=h0_dev, kind="structural", detail={}))

    min_lam = min(abs(_cx(v)) for v in S.values)
    report.checks.append(CheckResult(
        name="eigenvalues_nonzero", passed=min_lam > 0.0, tolerance=None,
        observed=min_lam, kind="structural",
        detail={"note": "value at the origin is 1, so no zero eigenvalue"}))

    # Tail of the series at the largest argument the zero search touched,
    # in log10: term_n = |x|^n |q|^((d^n - 1)/(d - 1)) / denominators; the
    # denominator product is crudely bounded below by (3 p)^(-n), which
    # only weakens the bound.  The 60th term must sit >= 14 decades below
    # the largest term.
    x_max = abs(scale) * zres.radius
    log_x = math.log10(max(x_max, 1e-300))
    log_q = math.log10(q)

    def log_term(n: int) -> float:
        return (n * log_x + (d ** n - 1) / (d - 1) * log_q
                + n * math.log10(3 * p))

    log_peak = max(log_term(n) for n in range(0, 61))
    margin = log_term(60) - log_peak
    report.checks.append(CheckResult(
        name="series_tail_bound", passed=margin <= -14.0,
        tolerance=-14.0, observed=margin, kind="structural",
        detail={"largest_argument": x_max,
                "log10_peak_term": log_peak,
                "log10_term_60": log_term(60)}))

    report.timings["total_seconds"] = time.perf_counter() - t0
    if output_dir:
        report.artifacts["paths"] = report.save(output_dir)
    return report


# ---------------------------------------------------------------------------
# Runner: randomized rational symbols
# ---------------------------------------------------------------------------


def run_generic_R(seed: int = 0, k: int = 1, ell: int = 2, r: int = 2,
                  N: int = 50, triangular: bool = False,
                  formula_perturbation: float = 0.0,
                  output_dir: Optional[str] = None) -> ExperimentReport:
    """A randomized rational symbol with k marked poles: draws beta, ell
    zero parameters, r pole bases (k marked, inside the allowed annulus or
    the unit disk) and |q| in [0.15, 0.35], redrawing on near-resonance.

    Checks: top-4 eigenvalues of the coefficient-action matrix against the
    q-Wronskian characteristic function's zeros; the M-matrix determinant
    proportionality at 10 points; reconstructed eigenvector residuals for
    every eigenvalue whose series argument converges; and, in triangular
    mode (k = r = ell, all poles marked), the explicit geometric spectrum
    beta (prod a / prod b) q^n."""
    t0 = time.perf_counter()
    if not 1 <= k <= r:
        raise DomainError("need 1 <= k <= r")
    if ell > r:
        raise DomainError("need ell <= r")
    if triangular and not (k == r == ell):
        raise DomainError("triangular mode needs k = r = ell")
    if k == r and ell < r:
        # A proper rational symbol with every pole marked equals its
        # principal parts, so the coefficient action is strictly triangular
        # and quasinilpotent: det(1 - u B) is identically 1 and there are
        # no eigenvalues to match.
        raise DomainError("fully marked symbols need ell = r; with ell < r "
                          "the operator is quasinilpotent")
    rng = np.random.default_rng(seed)
    delta = formula_perturbation
    report = ExperimentReport(
        name="generic_R",
        parameters={"seed": seed, "k": k, "ell": ell, "r": r, "N": N,
                    "triangular": triangular, "formula_perturbation": delta},
    )

    R = None
    q = None
    attempts = 0
    # With every pole marked the top eigenvalue scales like
    # beta prod(a)/prod(b), so unconstrained moduli rarely leave the
    # eigenvector series convergent; tighter draw windows keep that check
    # substantive instead of vacuously skipped.
    fully_marked = k == r
    for attempts in range(1, 41):
        q = (0.15 + 0.2 * rng.random()) * cmath.exp(2j * math.pi
                                                    * rng.random())
        poles = []
        for i in range(r):
            if i < k:
                hi = 1.3 if fully_marked and ell >= 1 \
                    else min(2.0, 0.85 / abs(q))
                loc = 0.75 + rng.random() * (hi - 0.75)
            else:
                loc = 1.1 + 1.4 * rng.random()
            poles.append(1.0 / (loc * cmath.exp(2j * math.pi
                                                * rng.random())))
        span = 0.8 if fully_marked and ell >= 1 else 1.9
        zeros = [1.0 / ((0.3 + span * rng.random())
                        * cmath.exp(2j * math.pi * rng.random()))
                 for _ in range(ell)]
        beta = ((0.5 + rng.random())
                * cmath.exp(2j * math.pi * rng.random()))
        if _is_resonant(zeros, poles, q):
            continue
        cand = RationalR(beta=beta, zeros=tuple(zeros), poles=tuple(poles),
                         marked=tuple(range(k)), z_exp=0)
        B = build_BR_matrix(cand, q, N=N)
        S = eigenvalues(B)
        lam0 = _cx(S.values[0])
        if lam0 == 0:
            continue         # fully-marked pure-pole symbol: the matrix is
                             # strictly triangular (quasinilpotent), nothing
                             # to match; redraw
        if abs(beta / lam0) > 0.8:
            continue         # no convergent eigenvector series; redraw
        R = cand
        break
    if R is None:
        raise ComputationError("could not draw a non-resonant symbol in 40 "
                               "attempts")
    report.parameters["attempts"] = attempts
    report.artifacts["symbol"] = R.to_json_dict()
    report.artifacts["q"] = q

    q_f = q * (1 + delta)
    h = wronski_char_fn(R, q_f)
    h0_dev = abs(complex(h(0.0)) - 1.0)
    report.checks.append(CheckResult(
        name="normalization_at_zero", passed=h0_dev <= 1e-12,
        tolerance=1e-12, observed=h0_dev, kind="structural", detail={}))

    count = min(4, sum(1 for v in S.values
                       if abs(_cx(v)) >= 1e-7 * abs(_cx(S.values[0]))))
    chk, pairs, _ = _match_check("spectrum_matches_wronskian_zeros",
                                 S.values, h.handle, count=count, tol=1e-7)
    report.checks.append(chk)
    report.artifacts["pairings"] = {"generic_R": pairs}
    report.artifacts["top_eigenvalues"] = [_cx(v) for v in S.top(6)]

    # The connection-matrix determinant, cleared by a single (u; q)_inf,
    # must be a constant multiple of the normalized characteristic
    # function; constancy of the ratio at 10 points is the check.
    ratios = []
    for tdx in range(10):
        u = (0.05 + 0.07 * tdx) * cmath.exp(2j * math.pi * rng.random())
        detM = complex(np.linalg.det(m_matrix(R, q, u)))
        pref = complex(qpochhammer(u, q))
        rhs = complex(h.theorem_form(u))
        if abs(rhs) < 1e-12:
            continue
        ratios.append(detM * pref / rhs)
    if len(ratios) < 8:
        raise ComputationError("too many sample points fell on zeros of "
                               "the characteristic function")
    center = sum(ratios) / len(ratios)
    worst_prop = max(abs(r - center) / abs(center) for r in ratios)
    report.checks.append(CheckResult(
        name="m_matrix_determinant_proportionality",
        passed=worst_prop <= 1e-9, tolerance=1e-9, observed=worst_prop,
        kind="identity",
        detail={"points": len(ratios), "ratio": center}))

    # eigenvector reconstruction for convergent arguments
    Bn = B.to_numpy()
    beta_c = _cx(R.beta)
    res_list = []
    used = []
    for lam in [_cx(v) for v in S.values[:count]]:
        if abs(beta_c / lam) > 0.8:
            continue
        u0 = beta_c / lam
        M = m_matrix(R, q, u0)
        C = (np.array([1.0 + 0j]) if len(R.marked) == 1
             else _left_null_vector(M))
        v = _generic_eigvec_coeffs(R, q, lam, C, N)
        res_list.append(_eig_residual(Bn, lam, v))
        used.append(lam)
    if not res_list:
        raise ComputationError("no eigenvalue with a convergent "
                               "eigenvector series")
    report.checks.append(CheckResult(
        name="eigenvector_reconstruction", passed=max(res_list) <= 1e-7,
        tolerance=1e-7, observed=max(res_list), kind="closed-form",
        detail={"eigenvalues_used": used, "residuals": res_list}))

    if triangular:
        ratio = beta_c
        for a in R.zeros:
            ratio *= _cx(a)
        for b in R.poles:
            ratio /= _cx(b)
        worst_tri = 0.0
        for n, lam in enumerate([_cx(v) for v in S.values[:6]]):
            worst_tri = max(worst_tri,
                            abs(lam - ratio * q ** n) / abs(ratio * q ** n))
        report.checks.append(CheckResult(
            name="triangular_geometric_spectrum", passed=worst_tri <= 1e-10,
            tolerance=1e-10, observed=worst_tri, kind="closed-form",
            detail={"leading_value": ratio}))

    report.timings["total_seconds"] = time.perf_counter() - t0
    if output_dir:
        report.artifacts["paths"] = report.save(output_dir)
    return report


def _is_resonant(zeros, poles, q, margin: float = 1e-3) -> bool:
    vals = list(zeros) + list(poles)
    for i, x in enumerate(vals):
        for j, y in enumerate(vals):
            if i == j:
                continue
            ratio = x / y
            for t in range(-40, 41):
                ref = q ** t
                if abs(ratio - ref) <= margin * abs(ref):
                    return True
    return False


# ---------------------------------------------------------------------------
# Runner: union over characters
# ---------------------------------------------------------------------------


def run_union_over_chi(p: int = 3, s: complex = 1.0, K: int = 3,
                       which: str = "deg1", seed: int = 0,
                       formula_perturbation: float = 0.0,
                       output_dir: Optional[str] = None) -> ExperimentReport:
    """Level-K discretization of a homogeneous kernel, decomposed over the
    character eigenspaces.

    Checks: the multiset of all character-block eigenvalues equals the
    spectrum of the full discretized kernel; block dimensions partition
    p^K; for the no-unit-roots kernel every nontrivial block vanishes; and
    each block's top eigenvalue converges, as the internal level grows,
    to the sequence-space realization of the same character."""
    t0 = time.perf_counter()
    p = int(Prime(p))
    sc = complex(s)
    delta = formula_perturbation
    if which == "deg1":
        P = {(1, 0): 1, (0, 1): -1}
        Qt = (1, -1)
        d = 1
    elif which == "noroots":
        P = {(2, 0): 1, (0, 2): 1}
        Qt = (1, 0, 1)
        d = 2
    else:
        raise DomainError("which must be 'deg1' or 'noroots'")
    report = ExperimentReport(
        name="union_over_chi",
        parameters={"p": p, "s": sc, "K": K, "which": which, "seed": seed,
                    "formula_perturbation": delta},
    )

    def sort_key(z):
        z = complex(z)
        return (-abs(z), z.real, z.imag)

    M_full = discretize_kernel(P, p, sc, K)
    full_eigs = sorted(np.linalg.eigvals(M_full.to_numpy()), key=sort_key)

    chars = enumerate_characters(p, K)
    union = []
    dims = []
    block_tops = {}
    nontrivial_norms = []
    for chi in chars:
        blk = discretize_kernel(P, p, sc, K, chi=chi).to_numpy()
        dims.append(blk.shape[0])
        evs = np.linalg.eigvals(blk) * (1 + delta) if blk.size \
            else np.array([])
        union.extend(evs.tolist())
        key = f"chi_{chi.conductor_exponent}_{chi.index_in_conductor_class()}"
        block_tops[key] = (chi, sorted(evs, key=abs, reverse=True))
        if not chi.is_trivial:
            nontrivial_norms.append(float(np.linalg.norm(blk)))
    union.sort(key=sort_key)

    dim_ok = sum(dims) == p ** K
    report.checks.append(CheckResult(
        name="dimension_partition", passed=dim_ok, tolerance=None,
        observed=float(sum(dims)), kind="structural",
        detail={"dims": dims, "total": p ** K,
                "characters": len(chars)}))

    scale_ref = max(max(abs(z) for z in full_eigs), 1e-300)
    worst_union = max(abs(complex(a) - complex(b))
                      for a, b in zip(full_eigs, union)) / scale_ref
    report.checks.append(CheckResult(
        name="block_union_equals_full_spectrum", passed=worst_union <= 1e-9,
        tolerance=1e-9, observed=worst_union, kind="structural",
        detail={"matrix_size": p ** K}))
    pairs_art = [(complex(a), complex(b), abs(complex(a) - complex(b)))
                 for a, b in zip(full_eigs, union)]
    report.artifacts["pairings"] = {"union_over_chi": pairs_art}

    if which == "noroots":
        worst_nontriv = max(nontrivial_norms) if nontrivial_norms else 0.0
        report.checks.append(CheckResult(
            name="nontrivial_blocks_vanish", passed=worst_nontriv <= 1e-12,
            tolerance=1e-12, observed=worst_nontriv, kind="closed-form",
            detail={"blocks": len(nontrivial_norms)}))
    else:
        # Finer-level oracle: each block's top eigenvalue approaches the
        # sequence-space realization of the same character.  The
        # discretization error depends on the conductor, so the honest
        # assertion is two-sided: small at the finer level and strictly
        # shrinking between consecutive levels.
        Kp = 5 if p ** 5 <= 1000 else 4
        worst_seq = 0.0
        ratio_ok = True
        per_char = {}
        for key, (chi, _evs) in block_tops.items():
            spec_chi = KernelSpec(p, d, d, Qt, chi, sc)
            A_chi = build_sequence_matrix(spec_chi, N=40)
            lam_seq = _cx(eigenvalues(A_chi).values[0]) * (1 + delta)
            devs = []
            for lvl in (Kp - 1, Kp):
                blk_l = discretize_kernel(P, p, sc, lvl, chi=chi).to_numpy()
                top_l = complex(max(np.linalg.eigvals(blk_l), key=abs))
                devs.append(abs(top_l - lam_seq)
                            / max(abs(lam_seq), 1e-300))
            per_char[key] = {"sequence": lam_seq,
                             "deviation_coarse": devs[0],
                             "deviation_fine": devs[1]}
            worst_seq = max(worst_seq, devs[1])
            if devs[1] > max(0.6 * devs[0], 1e-10):
                ratio_ok = False
        report.checks.append(CheckResult(
            name="block_top_converges_to_sequence_realization",
            passed=worst_seq <= 0.02 and ratio_ok, tolerance=0.02,
            observed=worst_seq, kind="oracle",
            detail={"internal_levels": [Kp - 1, Kp],
                    "shrinking": ratio_ok, "per_character": per_char}))

    report.timings["total_seconds"] = time.perf_counter() - t0
    if output_dir:
        report.artifacts["paths"] = report.save(output_dir)
    return report


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


EXPERIMENT_NAMES = ("noroots", "rank1", "z0_constant", "chi_nontrivial",
                    "mahler", "generic_R", "union_over_chi")

_RUNNERS: dict = {
    "noroots": run_noroots,
    "rank1": run_rank1_perturbation,
    "z0_constant": run_z0_constant,
    "chi_nontrivial": run_chi_nontrivial,
    "mahler": run_mahler,
    "generic_R": run_generic_R,
    "union_over_chi": run_union_over_chi,
}


def run_experiment(name: str, **params) -> ExperimentReport:
    """Dispatch by experiment name; unknown parameter keys are rejected."""
    if name not in _RUNNERS:
        raise DomainError(f"unknown experiment {name!r}; choose from "
                          f"{', '.join(EXPERIMENT_NAMES)}")
    fn = _RUNNERS[name]
    allowed = set(fn.__code__.co_varnames[: fn.__code__.co_argcount])
    bad = set(params) - allowed
    if bad:
        raise DomainError(f"unknown parameters for {name}: "
                          f"{', '.join(sorted(bad))}")
    return fn(**params)


def run_from_config(config: ExperimentConfig) -> ExperimentReport:
    params = dict(config.parameters)
    if config.output_dir is not None:
        params["output_dir"] = config.output_dir
    return run_experiment(config.name, **params)

"""Command-line front end.

Subcommands: ``zeta`` (unit-group integrals, exact or numeric), ``spectrum``
(truncated realizations of the integral operators), ``charfn``
(characteristic-function samples), ``zeros`` (certified zero lists of the
special entire functions), and ``verify`` (experiment runners with
PASS/FAIL reports).

One command per process.  Output is JSON with sorted keys (complex numbers
as [re, im], exact rationals as numerator/denominator strings) or
plot-ready CSV, written atomically; re-running a command byte-reproduces
the output except for the timestamp field.  Exit codes: 0 success / all
checks passed, 1 verification failure, 2 usage error, 3 domain or
computation error.  The environment variable QPADIC_PRECISION sets the
default working precision (decimal digits; 0 selects machine floats).
"""

from __future__ import annotations

import argparse
import cmath
import json
import math
import os
import sys
import time
from fractions import Fraction

from .experiments import (EXPERIMENT_NAMES, ExperimentConfig,
                          _atomic_write, _jsonable, _parse_config_value,
                          run_experiment, run_from_config)
from .operator import KernelSpec, build_R_from_profile, build_sequence_matrix
from .errors import ComputationError, DomainError
from .padic_core import character_by_descriptor
from .qspecial import e_handle, j_handle, k_mahler_handle, phi_tilde_2_1
from .spectral import (eigenvalues, find_zeros, mp_top_eigenvalues,
                       wronski_char_fn)
from .zeta import zeta

SCHEMA_VERSION = "1"


class UsageError(Exception):
    """Bad flag combination detected after argparse (exit code 2)."""


# ---------------------------------------------------------------------------
# Flag value parsers
# ---------------------------------------------------------------------------


def _parse_rationals(text: str) -> tuple:
    parts = [piece.strip() for piece in text.split(",")]
    if not parts or any(not piece for piece in parts):
        raise UsageError(f"expected comma-separated rationals, got {text!r}")
    try:
        return tuple(Fraction(piece) for piece in parts)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad rational list {text!r}: {exc}") from None


def _parse_complex(text: str) -> complex:
    text = text.strip()
    try:
        if "," in text:
            re_s, im_s = text.split(",", 1)
            return complex(float(Fraction(re_s.strip())),
                           float(Fraction(im_s.strip())))
        return complex(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(
            f"bad complex value {text!r}; use 're,im' or a Python literal"
        ) from None


def _parse_character(text: str, p: int):
    parts = [piece.strip() for piece in text.split(",")]
    if len(parts) != 2:
        raise UsageError(f"bad character descriptor {text!r}; use 'l,index'")
    try:
        ell, index = int(parts[0]), int(parts[1])
    except ValueError:
        raise UsageError(f"bad character descriptor {text!r}") from None
    return character_by_descriptor(p, ell, index)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _emit(args, payload: dict, csv_rows: list) -> None:
    payload = dict(payload)
    payload["schema_version"] = SCHEMA_VERSION
    payload["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    if args.format == "json":
        text = json.dumps(_jsonable(payload), sort_keys=True, indent=1) + "\n"
    else:
        text = "\n".join(",".join(str(x) for x in row)
                         for row in csv_rows) + "\n"
    if args.out:
        out_dir = os.path.dirname(os.path.abspath(args.out))
        os.makedirs(out_dir, exist_ok=True)
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_zeta(args) -> int:
    Q = _parse_rationals(args.Q)
    chi = _parse_character(args.chi, args.p)
    params = {"p": args.p, "Q": [str(c) for c in Q],
              "chi": list(chi.descriptor())}
    if args.exact:
        f = zeta(Q, chi, args.p, s=None)
        result = {
            "kind": "exact_rational_function",
            "variable": "t = p^(-s)",
            "text": repr(f),
            "numerator": list(f.num),
            "denominator": list(f.den),
        }
        csv_rows = [["part", "power", "numerator", "denominator"]]
        for label, coeffs in (("numerator", f.num), ("denominator", f.den)):
            for k, c in enumerate(coeffs):
                csv_rows.append([label, k, c.numerator, c.denominator])
        params["mode"] = "exact"
    else:
        s = _parse_complex(args.s)
        value = complex(zeta(Q, chi, args.p, s=s))
        result = {"kind": "value", "s": s, "value": value}
        csv_rows = [["s_re", "s_im", "zeta_re", "zeta_im"],
                    [s.real, s.imag, value.real, value.imag]]
        params["s"] = s
    _emit(args, {"command": "zeta", "parameters": params, "result": result},
          csv_rows)
    return 0


def _spec_from_args(args) -> KernelSpec:
    Q = _parse_rationals(args.Q)
    r = len(Q) - 1
    d = Fraction(args.d) if args.d is not None else Fraction(max(r, 1))
    l = args.l if args.l is not None else max(r, min(1, int(d)))
    chi = _parse_character(args.chi, args.p)
    s = _parse_complex(args.s)
    return KernelSpec(args.p, d, l, Q, chi, s)


def _cmd_spectrum(args) -> int:
    spec = _spec_from_args(args)
    top = max(1, args.top)
    if args.precision:
        T = build_sequence_matrix(spec, N=args.N, backend="mp",
                                  dps=args.precision)
        S = mp_top_eigenvalues(T, k=min(top, args.N))
    else:
        T = build_sequence_matrix(spec, N=args.N)
        S = eigenvalues(T)
    values = [complex(v) for v in S.values[:top]]
    residuals = [float(r) for r in S.residuals[:top]]
    payload = {
        "command": "spectrum",
        "parameters": spec.provenance() | {"N": args.N, "top": top,
                                           "precision": args.precision},
        "result": {
            "q": complex(spec.q),
            "values": values,
            "residuals": residuals,
            "backend": S.backend,
            "diagnostics": S.diagnostics,
        },
    }
    csv_rows = [["index", "eigenvalue_re", "eigenvalue_im", "residual"]]
    for i, (v, r) in enumerate(zip(values, residuals)):
        csv_rows.append([i, repr(v.real), repr(v.imag), repr(r)])
    _emit(args, payload, csv_rows)
    return 0


def _cmd_charfn(args) -> int:
    spec = _spec_from_args(args)
    R, description = build_R_from_profile(spec)
    h = wronski_char_fn(R, spec.q)
    n = max(2, args.samples)
    direction = cmath.exp(1j * math.radians(args.angle))
    us = [args.radius * (j / (n - 1)) * direction for j in range(n)]
    vals = [complex(h(u)) for u in us]
    payload = {
        "command": "charfn",
        "parameters": spec.provenance() | {
            "radius": args.radius, "samples": n, "angle_degrees": args.angle},
        "result": {
            "construction": h.params | {"tag": h.tag},
            "symbol": description,
            "samples": [[u, v] for u, v in zip(us, vals)],
        },
    }
    csv_rows = [["u_re", "u_im", "h_re", "h_im"]]
    for u, v in zip(us, vals):
        csv_rows.append([repr(u.real), repr(u.imag),
                         repr(v.real), repr(v.imag)])
    _emit(args, payload, csv_rows)
    return 0


def _cmd_zeros(args) -> int:
    q = _parse_complex(args.q)

    def need(flag, value):
        if value is None:
            raise UsageError(f"--fn {args.fn} requires --{flag}")
        return _parse_complex(value)

    params: dict = {"q": q}
    if args.fn == "J":
        handle = j_handle(need("a", args.a), q)
        params["a"] = handle.params["a"]
    elif args.fn == "E":
        handle = e_handle(need("a", args.a), need("b", args.b), q)
        params |= {"a": handle.params["a"], "b": handle.params["b"]}
    elif args.fn == "K":
        if args.degree is None:
            raise UsageError("--fn K requires --degree")
        handle = k_mahler_handle(need("a", args.a), q, args.degree)
        params |= {"a": handle.params["a"], "degree": args.degree}
    else:  # phi21
        a = need("a", args.a)
        b = need("b", args.b)
        c = need("c", args.c)
        params |= {"a": a, "b": b, "c": c}

        def handle(u):
            return phi_tilde_2_1(a, b, c, q, u)

    dps = args.precision or None
    result = find_zeros(handle, radius=args.radius, tol=args.tol, dps=dps)
    payload = {
        "command": "zeros",
        "parameters": {"fn": args.fn, "radius": args.radius,
                       "tol": args.tol, "precision": args.precision,
                       **params},
        "result": result.to_json_dict(),
    }
    csv_rows = [["zero_re", "zero_im", "multiplicity"]]
    for z, mult in result.zeros:
        zc = complex(z)
        csv_rows.append([repr(zc.real), repr(zc.imag), mult])
    _emit(args, payload, csv_rows)
    return 0


def _cmd_verify(args) -> int:
    reports = []
    if args.config:
        config = ExperimentConfig.from_file(args.config)
        if args.out and config.output_dir is None:
            config.output_dir = args.out
        reports.append(run_from_config(config))
    elif args.name is None:
        raise UsageError("verify needs an experiment name or --config FILE")
    elif args.name == "all":
        for name in EXPERIMENT_NAMES:
            params = {"output_dir": args.out} if args.out else {}
            reports.append(run_experiment(name, **params))
    else:
        params = {}
        for key, value in (("p", args.p), ("K", args.K), ("N", args.N),
                           ("seed", args.seed)):
            if value is not None:
                params[key] = value
        if args.s is not None:
            params["s"] = _parse_complex(args.s)
        for item in args.param or ():
            if "=" not in item:
                raise UsageError(f"--param needs key=value, got {item!r}")
            key, value = item.split("=", 1)
            params[key.strip()] = _parse_config_value(value.strip())
        if args.out:
            params.setdefault("output_dir", args.out)
        reports.append(run_experiment(args.name, **params))
    all_passed = True
    for report in reports:
        for line in report.summary_lines():
            print(line)
        if args.out:
            paths = report.save(args.out)
            print(f"  wrote {paths['json']} and {paths['csv']}")
        all_passed = all_passed and report.passed
    return 0 if all_passed else 1


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def _default_precision() -> int:
    raw = os.environ.get("QPADIC_PRECISION", "0")
    try:
        dps = int(raw)
    except ValueError:
        return 0
    return max(0, dps)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None,
                        help="output path (file; directory for verify); "
                             "default stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--precision", type=int, default=_default_precision(),
                        help="working precision in decimal digits "
                             "(0 = machine floats; default from "
                             "QPADIC_PRECISION)")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for randomized instance generation")

    parser = argparse.ArgumentParser(
        prog="qpadic",
        description="Integral operators attached to p-adic kernels: zeta "
                    "integrals, spectra, characteristic functions, zero "
                    "certification, and verification experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    pz = sub.add_parser("zeta", parents=[common],
                        help="unit-group zeta integral of a polynomial")
    pz.add_argument("--p", type=int, required=True)
    pz.add_argument("--Q", required=True,
                    help="polynomial coefficients 'c0,c1,...' "
                         "(constant term first)")
    pz.add_argument("--chi", default="0,0",
                    help="character 'conductor_exponent,index' "
                         "(default trivial)")
    mode = pz.add_mutually_exclusive_group(required=True)
    mode.add_argument("--s", help="complex exponent 're,im' or 're'")
    mode.add_argument("--exact", action="store_true",
                      help="exact rational function of t = p^(-s) "
                           "(trivial character only)")
    pz.set_defaults(func=_cmd_zeta)

    kernel = argparse.ArgumentParser(add_help=False)
    kernel.add_argument("--p", type=int, required=True)
    kernel.add_argument("--Q", required=True,
                        help="coefficients of Q(x) = P(x, 1)")
    kernel.add_argument("--d", default=None,
                        help="homogeneity degree (default deg Q)")
    kernel.add_argument("--l", type=int, default=None,
                        help="y-degree of P (default deg Q)")
    kernel.add_argument("--chi", default="0,0")
    kernel.add_argument("--s", required=True,
                        help="complex exponent 're,im' or 're'")

    ps = sub.add_parser("spectrum", parents=[common, kernel],
                        help="eigenvalues of the truncated sequence "
                             "realization")
    ps.add_argument("--N", type=int, default=60, help="truncation order")
    ps.add_argument("--top", type=int, default=8,
                    help="number of eigenvalues to report")
    ps.set_defaults(func=_cmd_spectrum)

    pc = sub.add_parser("charfn", parents=[common, kernel],
                        help="sample the characteristic function "
                             "det(1 - u B)")
    pc.add_argument("--radius", type=float, default=1.0,
                    help="sample along [0, radius]")
    pc.add_argument("--samples", type=int, default=33)
    pc.add_argument("--angle", type=float, default=0.0,
                    help="ray angle in degrees")
    pc.set_defaults(func=_cmd_charfn)

    pr = sub.add_parser("zeros", parents=[common],
                        help="certified zeros of a special entire function")
    pr.add_argument("--fn", choices=("J", "E", "K", "phi21"), required=True)
    pr.add_argument("--a", default=None)
    pr.add_argument("--b", default=None)
    pr.add_argument("--c", default=None)
    pr.add_argument("--q", required=True)
    pr.add_argument("--degree", type=int, default=None,
                    help="argument-scaling degree for --fn K")
    pr.add_argument("--radius", type=float, required=True)
    pr.add_argument("--tol", type=float, default=1e-10)
    pr.set_defaults(func=_cmd_zeros)

    pv = sub.add_parser("verify", parents=[common],
                        help="run an experiment (or 'all') and report "
                             "PASS/FAIL")
    pv.add_argument("name", nargs="?", default=None,
                    choices=EXPERIMENT_NAMES + ("all",))
    pv.add_argument("--config", default=None,
                    help="key = value config file (overrides the name)")
    pv.add_argument("--p", type=int, default=None)
    pv.add_argument("--s", default=None)
    pv.add_argument("--K", type=int, default=None)
    pv.add_argument("--N", type=int, default=None)
    pv.add_argument("--param", action="append", default=[],
                    help="extra runner parameter key=value (repeatable)")
    pv.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, ComputationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()

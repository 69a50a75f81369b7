"""Batch command-line front end.

Subcommands: ``family``, ``transform``, ``convolve``, ``verify``, ``oracle``
and ``density``. Results are JSON (schema ``v1``) or CSV, written atomically.
Exit codes: 0 success or pass, 1 verification failure or numerical failure,
2 usage or input error; errors are JSON objects on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .errors import BranchError, EvaluationError, FreeProbError, InversionError
from .measure import SCHEMA, SpectralMeasure

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad flags or unreadable input."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- io helpers -------------------------------------------------------------


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory and a rename."""
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target), prefix=".tmp-", suffix=os.path.basename(target))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, path: str | None) -> None:
    if path:
        atomic_write(path, text)
    else:
        sys.stdout.write(text)


def _dumps(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _with_metadata(payload: dict) -> dict:
    out = dict(payload)
    out.setdefault("schema", SCHEMA)
    out["metadata"] = {"generated_unix": round(time.time(), 3), "version": __version__}
    return out


def load_measure(path: str) -> SpectralMeasure:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: {exc}") from None
    if isinstance(data, dict) and "measure" in data and isinstance(data["measure"], dict):
        data = data["measure"]
    if not isinstance(data, dict):
        raise UsageError(f"{path} does not hold a measure object")
    try:
        return SpectralMeasure.from_dict(data)
    except FreeProbError as exc:
        raise UsageError(f"invalid measure in {path}: {exc}") from None


def parse_points(text: str) -> np.ndarray:
    """Comma-separated Python complex literals, e.g. ``"1+1j,2j,-0.5"``."""
    try:
        return np.array([complex(t.strip().replace(" ", "")) for t in text.split(",") if t.strip()])
    except ValueError:
        raise UsageError(f"cannot parse points {text!r}") from None


# --- family -----------------------------------------------------------------

_FAMILY_PARAMS = {"meixner": ("a", "b"), "mp": ("lam", "alpha"), "binomial": ("sigma", "theta")}


def _family_from_args(args) -> SpectralMeasure:
    from .families import build_family

    names = _FAMILY_PARAMS[args.kind]
    params = {}
    for n in names:
        v = getattr(args, n)
        if v is None:
            raise UsageError(f"family {args.kind} needs --{n}")
        params[n] = v
    return build_family(args.kind, params, args.nodes)


def _add_family_flags(p, required_kind=True):
    p.add_argument("--kind", choices=sorted(_FAMILY_PARAMS), required=required_kind)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--nodes", type=int, default=2000)


def cmd_family(args) -> int:
    m = _family_from_args(args)
    payload = {"kind": args.kind, "params": {n: getattr(args, n) for n in _FAMILY_PARAMS[args.kind]},
               "measure": m.to_dict()}
    _emit(_dumps(_with_metadata(payload)), args.out)
    return EXIT_OK


# --- transform --------------------------------------------------------------


def _law_from_args(args) -> SpectralMeasure:
    if args.law:
        return load_measure(args.law)
    if args.kind:
        return _family_from_args(args)
    raise UsageError("give --law FILE or --kind with family parameters")


def cmd_transform(args) -> int:
    from . import transforms as tr

    m = _law_from_args(args)
    z = parse_points(args.z)
    fn = {
        "G": tr.cauchy_G, "L": tr.reciprocal_L, "phi": tr.voiculescu_phi, "R": tr.r_transform,
        "psi": tr.psi_transform, "chi": tr.chi_inverse, "S": tr.s_transform,
    }[args.type]
    vals = np.asarray(fn(m, z), dtype=complex)
    buf = io.StringIO()
    buf.write(json.dumps({"schema": SCHEMA, "kind": args.type, "params": {"law": args.law or args.kind}}) + "\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["re_z", "im_z", "re_f", "im_f"])
    for a, b in zip(z.ravel(), vals.ravel()):
        wr.writerow([repr(float(a.real)), repr(float(a.imag)), repr(float(b.real)), repr(float(b.imag))])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


# --- convolve ---------------------------------------------------------------


def cmd_convolve(args) -> int:
    from . import convolution as cv

    mu = load_measure(args.mu)
    cfg = cv.FixedPointConfig(tol=args.tol, n_nodes=args.nodes)
    extra = {}
    if args.op in ("add", "mult", "monotone"):
        if not args.nu:
            raise UsageError(f"--op {args.op} needs --nu")
        nu = load_measure(args.nu)
    if args.op in ("add-power", "boolean-power") and args.t is None:
        raise UsageError(f"--op {args.op} needs --t")
    if args.op == "add":
        out, pair = cv.free_add(mu, nu, cfg)
        extra["subordination"] = pair.to_dict()
    elif args.op == "mult":
        out = cv.free_mult(mu, nu, cfg)
    elif args.op == "monotone":
        out = cv.monotone_add(mu, nu, cfg)
    elif args.op == "add-power":
        out = cv.free_add_power(mu, args.t, cfg)
    else:
        out = cv.boolean_power(mu, args.t, cfg)
    payload = {"op": args.op, "measure": out.to_dict(), **extra}
    _emit(_dumps(_with_metadata(payload)), args.out)
    return EXIT_OK


# --- verify -----------------------------------------------------------------


def cmd_verify(args) -> int:
    from . import characterizations as ch

    def need(*names):
        missing = [n for n in names if getattr(args, n) is None]
        if missing:
            raise UsageError(f"theorem {args.theorem} needs " + ", ".join("--" + n.replace("_", "-") for n in missing))

    tol = args.tol
    if args.theorem in ("4", "5"):
        need("alpha", "a", "b")
        spec = ch.RegressionSpec(args.alpha, args.a, args.b)
        fn = ch.verify_free_laha_lukacs if args.theorem == "4" else ch.verify_monotone_laha_lukacs
        rep = fn(spec, tol=tol if tol is not None else 1e-7)
    elif args.theorem == "6":
        if args.c is not None and args.d is not None:
            need("lam")
            lam, alpha, sigma, theta = ch.thm6_params(args.c, args.d, args.lam)
        else:
            need("lam", "alpha_jump", "sigma", "theta")
            lam, alpha, sigma, theta = args.lam, args.alpha_jump, args.sigma, args.theta
        rep = ch.verify_poisson_binomial(lam, alpha, sigma, theta, tol=tol if tol is not None else 1e-5)
    else:
        need("c", "d")
        rep = ch.verify_beta_characterization(args.c, args.d, args.alpha1, tol=tol if tol is not None else 1e-5)
    _emit(_dumps(_with_metadata(rep.to_dict())), args.report)
    return EXIT_OK if rep.passed else EXIT_FAIL


# --- oracle -----------------------------------------------------------------


def cmd_oracle(args) -> int:
    from . import oracle as orc
    from .characterizations import RegressionSpec
    from .families import FreeBinomialParams, MarchenkoPasturParams, MeixnerParams, binomial_measure, meixner_measure, mp_measure

    cfg = orc.MatrixEnsembleConfig(args.n, args.trials, args.seed, args.degree, args.field, args.sampling)
    if args.check == "add":
        mu = load_measure(args.mu) if args.mu else meixner_measure(MeixnerParams(0.0, 0.0))
        nu = load_measure(args.nu) if args.nu else meixner_measure(MeixnerParams(0.0, 0.0))
        rep = orc.empirical_free_add(mu, nu, cfg)
        ok = rep.ks_distance < args.tol
    elif args.check == "mult":
        mu = load_measure(args.mu) if args.mu else mp_measure(MarchenkoPasturParams(1.0, 1.0))
        nu = load_measure(args.nu) if args.nu else binomial_measure(FreeBinomialParams(1.0, 1.0))
        rep = orc.empirical_free_mult(mu, nu, cfg)
        ok = rep.ks_distance < args.tol
    else:
        spec = RegressionSpec(args.alpha, args.a, args.b)
        rep = orc.conditional_regression_check(spec, cfg)
        ok = rep.regression_residual < args.tol
    payload = rep.to_dict()
    payload["pass"] = bool(ok)
    payload["tolerance"] = args.tol
    _emit(_dumps(_with_metadata(payload)), args.report)
    return EXIT_OK if ok else EXIT_FAIL


# --- density ----------------------------------------------------------------


def cmd_density(args) -> int:
    m = _law_from_args(args)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["x", "density"])
    if m.ac is not None:
        x, y = m.ac.nodes, m.ac.values
        if args.points:
            lo, hi = m.ac.support_lo, m.ac.support_hi
            xs = np.linspace(lo, hi, args.points)
            y = np.interp(xs, x, y, left=0.0, right=0.0)
            x = xs
        for a, b in zip(x, y):
            wr.writerow([repr(float(a)), repr(float(b))])
    _emit(buf.getvalue(), args.out)
    atoms = io.StringIO()
    aw = csv.writer(atoms, lineterminator="\n")
    aw.writerow(["x", "mass"])
    for a in m.atoms:
        aw.writerow([repr(a.location), repr(a.mass)])
    if args.out:
        atomic_write(args.atoms or args.out + ".atoms.csv", atoms.getvalue())
    elif args.atoms:
        atomic_write(args.atoms, atoms.getvalue())
    else:
        sys.stdout.write("\n" + atoms.getvalue())
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="freeprob", description="Free, monotone and boolean probability toolkit.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    f = sub.add_parser("family", help="closed-form family law as measure JSON")
    _add_family_flags(f)
    f.add_argument("--out")
    f.set_defaults(func=cmd_family)

    t = sub.add_parser("transform", help="evaluate a transform at given points (CSV)")
    t.add_argument("--law", help="measure JSON file")
    _add_family_flags(t, required_kind=False)
    t.add_argument("--type", choices=["G", "L", "phi", "R", "psi", "chi", "S"], required=True)
    t.add_argument("--z", required=True, help='comma-separated complex points, e.g. "1+1j,2j"')
    t.add_argument("--out")
    t.set_defaults(func=cmd_transform)

    c = sub.add_parser("convolve", help="convolve measure JSON files")
    c.add_argument("--op", choices=["add", "mult", "monotone", "add-power", "boolean-power"], required=True)
    c.add_argument("--mu", required=True)
    c.add_argument("--nu")
    c.add_argument("--t", type=float)
    c.add_argument("--tol", type=_positive, default=1e-13)
    c.add_argument("--nodes", type=int, default=2000)
    c.add_argument("--out")
    c.set_defaults(func=cmd_convolve)

    v = sub.add_parser("verify", help="certify a regression characterization")
    v.add_argument("--theorem", choices=["4", "5", "6", "7"], required=True)
    for name in ("alpha", "a", "b", "c", "d", "lam", "sigma", "theta", "alpha1"):
        v.add_argument("--" + name, type=float)
    v.add_argument("--alpha-jump", dest="alpha_jump", type=float)
    v.add_argument("--tol", type=_positive)
    v.add_argument("--report")
    v.set_defaults(func=cmd_verify)

    o = sub.add_parser("oracle", help="random-matrix checks")
    o.add_argument("--check", choices=["add", "mult", "regression"], required=True)
    o.add_argument("--n", type=int, default=1000)
    o.add_argument("--trials", type=int, default=25)
    o.add_argument("--seed", type=int, default=7)
    o.add_argument("--degree", type=int, default=6)
    o.add_argument("--field", choices=["real", "complex"], default="real")
    o.add_argument("--sampling", choices=["quantile", "iid"], default="quantile")
    o.add_argument("--mu")
    o.add_argument("--nu")
    o.add_argument("--alpha", type=float, default=0.5)
    o.add_argument("--a", type=float, default=0.0)
    o.add_argument("--b", type=float, default=0.0)
    o.add_argument("--tol", type=_positive, default=0.05)
    o.add_argument("--report")
    o.set_defaults(func=cmd_oracle)

    d = sub.add_parser("density", help="(x, density) CSV plus atom table")
    d.add_argument("--law", help="measure JSON file")
    _add_family_flags(d, required_kind=False)
    d.add_argument("--points", type=int)
    d.add_argument("--out")
    d.add_argument("--atoms", help="atom table path (default: OUT.atoms.csv)")
    d.set_defaults(func=cmd_density)
    return p


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"schema": SCHEMA, "error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        return _error("usage", str(exc), EXIT_USAGE)
    except (InversionError, EvaluationError, BranchError) as exc:
        return _error(type(exc).__name__, str(exc), EXIT_FAIL)
    except FreeProbError as exc:
        return _error(type(exc).__name__, str(exc), EXIT_USAGE)
    except OSError as exc:
        return _error("io", str(exc), EXIT_USAGE)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line front end.

Subcommands::

    spherical  evaluate Φ, Ψ or the constant C at given (s, L, a)
    transform  Mellin / spherical transform of a catalog weight (optionally inverted)
    jpdf       joint density of the product eigenvalues on a grid
    kernel     correlation kernel (or level density) on a grid
    sample     Monte Carlo eigenvalues of g x g*
    verify     run the acceptance matrix and emit a JSON report

Exit codes: 0 success, 1 a validation check failed, 2 usage or
configuration error.  CSV output carries a ``#`` header block (version,
seed, spec echo) and 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from . import __version__
from .ensembles import (WEIGHT_KINDS, PolyaWeight, gue_ensemble, make_weight, polya_jpdf, spherical_transform_polya,
                        wishart_ensemble)
from .numerics import make_rng
from .products import (FixedSpectrum, ProductSpec, jpdf_fixed, jpdf_random, kernel_fixed, transform_biorth)
from .spherical import inverse_spherical_phi, normalization_C, phi, psi

THREADS_ENV = "POLYAPROD_THREADS"
SCHEMA_VERSION = 1
CHUNK = 20000

_TOP_FIELDS = {"schema", "l", "m", "n1", "n2", "n", "branch", "weight", "x"}
_WEIGHT_FIELDS = {"kind", "nu", "mu", "theta", "n", "M", "m", "l"}
_X_FIELDS = {"fixed", "ensemble", "n", "nu", "sign"}


class ConfigError(ValueError):
    """Malformed configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"field '{field_name}': {message}")
        self.field = field_name


# ---------------------------------------------------------------------------
# parsing helpers

def parse_vector(text: str, name: str, kind=float) -> np.ndarray:
    try:
        vals = [kind(tok.strip().replace("i", "j")) if kind is complex else kind(tok.strip())
                for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(name, f"cannot parse {text!r}") from exc
    if not vals:
        raise ConfigError(name, "empty vector")
    return np.asarray(vals, dtype=complex if kind is complex else (int if kind is int else float))


def parse_grid(text: str, name: str = "grid") -> tuple:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(name, "expected min:max:points")
    try:
        lo, hi, pts = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(name, f"cannot parse {text!r}") from exc
    if not hi > lo:
        raise ConfigError(name, "grid must be increasing (max > min)")
    if pts < 1:
        raise ConfigError(name, "need at least one point")
    return lo, hi, pts


def _check_fields(obj: dict, allowed: set, prefix: str):
    if not isinstance(obj, dict):
        raise ConfigError(prefix or "spec", "expected a JSON object")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{prefix}{key}", "unknown field")


def _int_field(obj: dict, key: str, prefix: str, required: bool = True, default=None):
    if key not in obj:
        if required:
            raise ConfigError(f"{prefix}{key}", "missing")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or int(val) != val:
        raise ConfigError(f"{prefix}{key}", f"expected an integer, got {val!r}")
    return int(val)


def build_weight(obj: dict, rank: Optional[int] = None) -> PolyaWeight:
    _check_fields(obj, _WEIGHT_FIELDS, "weight.")
    kind = obj.get("kind")
    if kind not in WEIGHT_KINDS:
        raise ConfigError("weight.kind", f"expected one of {', '.join(WEIGHT_KINDS)}, got {kind!r}")
    kw = {}
    for key in ("nu", "mu", "theta"):
        if key in obj:
            if isinstance(obj[key], bool) or not isinstance(obj[key], (int, float)):
                raise ConfigError(f"weight.{key}", f"expected a number, got {obj[key]!r}")
            kw[key] = float(obj[key])
    for key in ("n", "M", "m", "l"):
        if key in obj:
            kw[key] = _int_field(obj, key, "weight.")
    if kind == "jacobi" and "n" not in kw and rank is not None:
        kw["n"] = rank
    try:
        return make_weight(kind, **kw)
    except ValueError as exc:
        raise ConfigError("weight", str(exc)) from exc


def build_x(obj: dict, n2: int):
    _check_fields(obj, _X_FIELDS, "x.")
    if ("fixed" in obj) == ("ensemble" in obj):
        raise ConfigError("x", "give exactly one of 'fixed' or 'ensemble'")
    if "fixed" in obj:
        vals = obj["fixed"]
        if not isinstance(vals, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                                 for v in vals):
            raise ConfigError("x.fixed", "expected a list of numbers")
        if len(vals) != n2:
            raise ConfigError("x.fixed", f"expected {n2} eigenvalues (n2), got {len(vals)}")
        try:
            return FixedSpectrum(tuple(vals))
        except ValueError as exc:
            raise ConfigError("x.fixed", str(exc)) from exc
    name = obj["ensemble"]
    n = _int_field(obj, "n", "x.", required=False, default=n2)
    if n != n2:
        raise ConfigError("x.n", "ensemble rank must equal n2")
    if name == "gue":
        return gue_ensemble(n)
    if name == "wishart":
        nu = _int_field(obj, "nu", "x.", required=False, default=0)
        sign = _int_field(obj, "sign", "x.", required=False, default=1)
        if sign not in (1, -1):
            raise ConfigError("x.sign", "must be +1 or -1")
        return wishart_ensemble(n, nu=nu, sign=sign)
    raise ConfigError("x.ensemble", f"expected 'gue' or 'wishart', got {name!r}")


def load_spec(text_or_path: str) -> dict:
    """Read a spec from a JSON file path or an inline JSON string."""
    if text_or_path.lstrip().startswith("{"):
        text = text_or_path
    else:
        try:
            with open(text_or_path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("spec", f"cannot read {text_or_path!r}: {exc.strerror}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("spec", f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    _check_fields(obj, _TOP_FIELDS, "")
    schema = obj.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ConfigError("schema", f"unsupported schema version {schema!r}")
    return obj


def build_product(obj: dict) -> ProductSpec:
    for key in ("l", "m", "n1", "n2", "weight", "x"):
        if key not in obj:
            raise ConfigError(key, "missing")
    l, m, n1, n2 = (_int_field(obj, k, "") for k in ("l", "m", "n1", "n2"))
    branch = obj.get("branch", "geq" if n1 >= n2 else "less")
    if branch not in ("geq", "less"):
        raise ConfigError("branch", "expected 'geq' or 'less'")
    weight = build_weight(obj["weight"], rank=n1)
    x = build_x(obj["x"], n2)
    try:
        return ProductSpec(l, m, n1, n2, weight, x, branch)
    except (ValueError, TypeError) as exc:
        msg = str(exc)
        name = next((k for k in ("n1", "n2", "branch") if k in msg), "spec")
        raise ConfigError(name, msg) from exc


# ---------------------------------------------------------------------------
# output

def header_lines(args, spec: Optional[dict]) -> list:
    lines = [f"# polyaprod {__version__}", f"# command: {args.command}",
             f"# seed: {getattr(args, 'seed', None)}"]
    if spec is not None:
        lines.append("# spec: " + json.dumps(spec, sort_keys=True, separators=(",", ":")))
    return lines


def fmt(v) -> str:
    return "%.17g" % v


def write_csv(path: Optional[str], header: list, columns: list, rows: np.ndarray):
    lines = list(header) + [",".join(columns)]
    rows = np.atleast_2d(rows)
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def format_number(z) -> str:
    """Scalar for the terminal: 15 significant digits hide last-bit noise of exp/log."""
    z = complex(z)
    if abs(z.imag) <= 1e-14 * max(1.0, abs(z.real)):
        return "%.15g" % z.real
    return "%.15g%s%.15gj" % (z.real, "+" if z.imag >= 0 else "-", abs(z.imag))


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        val = int(raw)
    except ValueError:
        raise ConfigError(THREADS_ENV, f"expected a positive integer, got {raw!r}")
    if val < 1:
        raise ConfigError(THREADS_ENV, "must be >= 1")
    return val


def _grid(args) -> np.ndarray:
    lo, hi, pts = parse_grid(args.grid)
    return np.linspace(lo, hi, pts)


# ---------------------------------------------------------------------------
# subcommands

def cmd_spherical(args) -> int:
    s = parse_vector(args.s, "s", complex)
    if args.C:
        if args.l is None:
            raise ConfigError("l", "the constant C needs --l")
        value = normalization_C(args.l, len(s), s)
    else:
        if args.a is None:
            raise ConfigError("a", "missing spectrum --a")
        a = parse_vector(args.a, "a")
        if len(a) != len(s):
            raise ConfigError("a", f"expected {len(s)} entries to match s")
        if args.psi:
            if np.any(a <= 0):
                raise ConfigError("a", "Ψ needs positive entries")
            value = psi(s, a)
        else:
            L = parse_vector(args.L, "L", int) if args.L else np.zeros(len(s), dtype=int)
            if len(L) != len(s) or np.any((L != 0) & (L != 1)):
                raise ConfigError("L", "expected parities 0/1 matching s")
            if np.any(a == 0):
                raise ConfigError("a", "zero eigenvalue")
            value = phi(s, L, a)
    sys.stdout.write(format_number(value) + "\n")
    return 0


def cmd_transform(args) -> int:
    spec = load_spec(args.spec)
    if "weight" not in spec:
        raise ConfigError("weight", "missing")
    n = _int_field(spec, "n", "", required=False, default=1)
    weight = build_weight(spec["weight"], rank=n)
    header = header_lines(args, spec)
    if args.invert:
        if n > 2:
            raise ConfigError("n", "inversion is implemented for n <= 2")
        pts = _grid(args)
        rows = []
        for x in pts:
            at = np.full(n, x) if n == 1 else np.array([x, x + args.gap])
            if np.any(at <= 0):
                continue
            val = inverse_spherical_phi(lambda f, L: np.array([spherical_transform_polya(weight, n, r) for r in f]),
                                        at)
            rows.append([*at, val, float(polya_jpdf(weight, n, at))])
        cols = [f"a{j + 1}" for j in range(n)] + ["inverted", "density"]
        write_csv(args.output, header, cols, np.array(rows).reshape(-1, len(cols)))
        return 0
    if args.s is None:
        raise ConfigError("s", "give --s (comma separated frequencies) or --invert")
    s = parse_vector(args.s, "s", complex)
    if len(s) != n:
        raise ConfigError("s", f"expected {n} frequencies (n)")
    val = complex(weight.mellin(s[0])) if n == 1 else spherical_transform_polya(weight, n, s)
    write_csv(args.output, header, ["re", "im"], np.array([[val.real, val.imag]]))
    return 0


def cmd_jpdf(args) -> int:
    raw = load_spec(args.spec)
    spec = build_product(raw)
    x = _grid(args)
    if spec.r > 2:
        raise ConfigError("n1", "grid output is implemented for r <= 2")
    pts = x[:, None] if spec.r == 1 else np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1).reshape(-1, 2)
    with np.errstate(all="ignore"):
        vals = jpdf_fixed(spec, pts) if spec.fixed else jpdf_random(spec, pts)
    vals = np.nan_to_num(np.real(vals))
    cols = [f"x{j + 1}" for j in range(spec.r)] + ["density"]
    write_csv(args.output, header_lines(args, raw), cols, np.column_stack([pts, vals]))
    return 0


def cmd_kernel(args) -> int:
    raw = load_spec(args.spec)
    spec = build_product(raw)
    K = kernel_fixed(spec) if spec.fixed else transform_biorth(spec).kernel()
    x = _grid(args)
    with np.errstate(all="ignore"):
        if args.diagonal:
            rows = np.column_stack([x, np.nan_to_num(K.diagonal(x) / spec.r)])
            cols = ["x", "level_density"]
        else:
            x1, x2 = np.meshgrid(x, x, indexing="ij")
            vals = np.nan_to_num(np.real(K(x1.ravel(), x2.ravel())))
            rows = np.column_stack([x1.ravel(), x2.ravel(), vals])
            cols = ["x1", "x2", "kernel"]
    write_csv(args.output, header_lines(args, raw), cols, rows)
    return 0


def sample_parallel(spec: ProductSpec, count: int, seed: int, threads: int) -> np.ndarray:
    """Eigenvalues from independent child streams, one per fixed-size chunk.

    The chunking depends only on ``count`` so the output is identical for
    any number of worker threads.
    """
    from .montecarlo import sample_product_eigs

    sizes = [min(CHUNK, count - i) for i in range(0, count, CHUNK)]
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def job(i):
        return sample_product_eigs(spec, sizes[i], seed=make_rng(seeds[i]), chunk=CHUNK).eigenvalues

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(job, range(len(sizes))))
    return np.concatenate(parts)


def cmd_sample(args) -> int:
    raw = load_spec(args.spec)
    spec = build_product(raw)
    if args.count < 1:
        raise ConfigError("count", "must be >= 1")
    if not spec.weight.sampleable:
        raise ConfigError("weight.kind", f"{spec.weight.kind} has no matrix sampler")
    threads = args.threads or default_threads()
    ev = sample_parallel(spec, args.count, args.seed, threads)
    write_csv(args.output, header_lines(args, raw), [f"lambda{j + 1}" for j in range(spec.r)], ev)
    return 0


def cmd_verify(args) -> int:
    from .validation import CRITERIA, SUITES, run_criteria

    if args.only:
        try:
            numbers = [int(t) for t in args.only.split(",")]
        except ValueError as exc:
            raise ConfigError("only", f"cannot parse {args.only!r}") from exc
        bad = [k for k in numbers if k not in CRITERIA]
        if bad:
            raise ConfigError("only", f"unknown criteria {bad}")
    else:
        if args.suite not in SUITES:
            raise ConfigError("suite", f"expected one of {', '.join(SUITES)}")
        numbers = SUITES[args.suite]

    def progress(res):
        sys.stderr.write(res.line() + "\n")
        sys.stderr.flush()

    report = run_criteria(numbers, seed=args.seed, samples=args.samples, progress=progress)
    report = {"header": {"version": __version__, "seed": args.seed, "suite": args.suite,
                         "command": "verify"}, **report}
    text = json.dumps(report, indent=2, sort_keys=False, default=float) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if report["passed"] else 1


# ---------------------------------------------------------------------------

_VALUE_FLAGS = {"--s", "--L", "--a", "--grid", "--gap"}


def _join_negative_values(argv: list) -> list:
    """Allow ``--grid -5:5:200`` and ``--a -1,2`` (argparse would read an option)."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv):
            nxt = argv[i + 1]
            if nxt.startswith("-") and len(nxt) > 1 and (nxt[1].isdigit() or nxt[1] == "."):
                out.append(f"{tok}={nxt}")
                i += 2
                continue
        out.append(tok)
        i += 1
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polyaprod", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"polyaprod {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spherical", help="evaluate Φ, Ψ or C")
    mode = sp.add_mutually_exclusive_group(required=True)
    mode.add_argument("--phi", action="store_true")
    mode.add_argument("--psi", action="store_true")
    mode.add_argument("--C", action="store_true", help="normalisation constant C_{l,n}(s)")
    sp.add_argument("--s", required=True, help="comma separated (complex) frequencies")
    sp.add_argument("--L", help="comma separated parities (Φ only; default zeros)")
    sp.add_argument("--a", help="comma separated spectrum")
    sp.add_argument("--l", type=int, help="ambient dimension for C")

    def common(q, spec_required=True, grid=True):
        q.add_argument("--spec", required=spec_required, help="JSON spec file or inline JSON")
        q.add_argument("--output", "-o", help="output path (default stdout)")
        q.add_argument("--seed", type=int, default=0)
        if grid:
            q.add_argument("--grid", default="-5:5:200", help="min:max:points")

    tp = sub.add_parser("transform", help="Mellin/spherical transform of a catalog weight")
    common(tp)
    tp.add_argument("--s", help="comma separated frequencies")
    tp.add_argument("--invert", action="store_true", help="round trip: invert the transform on the grid")
    tp.add_argument("--gap", type=float, default=1.0, help="a2 − a1 for n = 2 inversion")

    jp = sub.add_parser("jpdf", help="joint density of the product eigenvalues on a grid")
    common(jp)
    kp = sub.add_parser("kernel", help="correlation kernel on a grid")
    common(kp)
    kp.add_argument("--diagonal", action="store_true", help="emit the level density K(x,x)/r")

    sa = sub.add_parser("sample", help="Monte Carlo eigenvalues of g x g*")
    common(sa, grid=False)
    sa.add_argument("--count", type=int, default=100_000)
    sa.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or 1)")

    vp = sub.add_parser("verify", help="run the acceptance matrix")
    vp.add_argument("--suite", default="core")
    vp.add_argument("--only", help="comma separated criterion numbers")
    vp.add_argument("--seed", type=int, default=42)
    vp.add_argument("--samples", type=int, default=100_000)
    vp.add_argument("--output", "-o")
    return p


COMMANDS = {"spherical": cmd_spherical, "transform": cmd_transform, "jpdf": cmd_jpdf, "kernel": cmd_kernel,
            "sample": cmd_sample, "verify": cmd_verify}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_negative_values(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        sys.stderr.write(f"polyaprod {args.command}: error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(run())

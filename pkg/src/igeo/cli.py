"""``igeo`` command-line entry point.

Exit codes: 0 success, 1 check or precondition failure, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import sys

from .diagnostics import Sampling, run_suite
from .expr import DomainError, ParseError
from .families import random_spec
from .manifold import ManifoldFormatError, dumps_manifold, load_manifold, validate
from .prior import NotEquiaffineError, parallel_volume

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="igeo", description="Statistical-manifold diagnostics and α-parallel priors.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="parse a manifold file and check g is SPD on a sample")
    v.add_argument("file")
    v.add_argument("--points", type=int, default=200)
    v.add_argument("--seed", type=int, default=0)

    c = sub.add_parser("check", help="run the diagnostic suite")
    c.add_argument("file")
    c.add_argument("--tol", type=float, default=1e-8)
    c.add_argument("--points", type=int, default=200)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--alpha", type=float, action="append", help="repeatable; default -1, 0, 1")
    c.add_argument("--alpha0", type=float, default=0.7)
    c.add_argument("--json", action="store_true", help="emit a JSON report")
    c.add_argument("--workers", type=int, default=1, help="threads used to run checks")

    pr = sub.add_parser("prior", help="log density of the α-parallel volume form on a grid")
    pr.add_argument("file")
    pr.add_argument("--alpha", type=float, required=True)
    pr.add_argument("--grid", type=_ints, default=None, help="per-axis counts k1,...,kn (default 20)")
    pr.add_argument("--base", type=_floats, default=None, help="base point x1,...,xn")
    pr.add_argument("--tol", type=float, default=1e-8)
    pr.add_argument("--normalize", action="store_true", help="divide by the trapezoid integral over the grid")
    pr.add_argument("-o", "--output", default="-")

    r = sub.add_parser("random", help="write a random statistical manifold file")
    r.add_argument("--dim", type=int, required=True)
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--degree", type=int, default=2)
    r.add_argument("--amplitude", type=float, default=0.3)
    r.add_argument("-o", "--output", default="-")
    return p


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _load(path):
    try:
        return load_manifold(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")


def cmd_validate(args) -> int:
    report = validate(_load(args.file), sample_count=args.points, seed=args.seed)
    sys.stdout.write("\n".join(report.lines()) + "\n")
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_check(args) -> int:
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    spec = _load(args.file)
    check = validate(spec, sample_count=max(args.points, 1), seed=args.seed)
    if not check.ok:
        sys.stdout.write("\n".join(check.lines()) + "\n")
        return EXIT_FAIL
    try:
        sampling = Sampling(points=args.points, seed=args.seed, tol=args.tol)
        report = run_suite(
            spec, sampling, alphas=tuple(args.alpha or (-1.0, 0.0, 1.0)), alpha0=args.alpha0, workers=args.workers
        )
    except ValueError as exc:
        raise UsageError(str(exc))
    sys.stdout.write(report.to_json() if args.json else report.to_text())
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_prior(args) -> int:
    spec = _load(args.file)
    grid = 20 if args.grid is None else (args.grid[0] if len(args.grid) == 1 else args.grid)
    try:
        out = parallel_volume(spec, args.alpha, base_point=args.base, grid=grid, tol=args.tol, normalize=args.normalize)
    except NotEquiaffineError as exc:
        print(f"igeo: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        raise UsageError(str(exc))
    _write(args.output, out.to_csv())
    return EXIT_OK


def cmd_random(args) -> int:
    try:
        spec = random_spec(args.dim, args.seed, degree=args.degree, amplitude=args.amplitude)
    except ValueError as exc:
        raise UsageError(str(exc))
    _write(args.output, dumps_manifold(spec))
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "check": cmd_check, "prior": cmd_prior, "random": cmd_random}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ManifoldFormatError, ParseError) as exc:
        print(f"igeo: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"igeo: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

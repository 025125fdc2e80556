"""Command-line front end: ``lpshrink <subcommand> ...``.

Exit status is 0 on success, 1 when a check (``check-minimax``, ``verify``)
fails, and 2 on invalid input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from lpshrink.estimators import (
    ConstantPhi,
    Observation,
    ScaleMode,
    ShrinkageConfig,
    parse_phi_spec,
    shrink,
    zero_set,
)
from lpshrink.exceptions import DomainError, ValidationError
from lpshrink.minimax import Grid, check_minimax, precondition_report
from lpshrink.norms import format_pnorm, parse_pnorm
from lpshrink.reporting import risk_curve_svg, risk_sweep, rows_to_csv
from lpshrink.risk import sure
from lpshrink.verification import run_suite

DEFAULT_REPS = 10**5
DEFAULT_SEED = 0
DEFAULT_GRID = Grid()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


def _flag_type(name, conv):
    def parse(text):
        try:
            return conv(text)
        except (ValueError, ValidationError) as exc:
            raise argparse.ArgumentTypeError(f"invalid value for {name}: {text!r} ({exc})") from None

    return parse


def _float_list(text: str) -> list[float]:
    parts = [t for t in text.replace(",", " ").split()]
    if not parts:
        raise ValueError("empty list")
    return [float(t) for t in parts]


def _vector_arg(text: str) -> list[float]:
    """Inline comma-separated numbers, or the path of a one-row / one-column CSV file."""
    if os.path.isfile(text):
        lines = [ln for ln in Path(text).read_text().splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        return _float_list(" ".join(lines))
    return _float_list(text)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError("must be a positive integer")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise ValueError("must be an unsigned 64-bit integer")
    return value


def _add_estimator_flags(sp, with_d: bool) -> None:
    if with_d:
        sp.add_argument("--d", type=_flag_type("--d", _positive_int), required=True, help="dimension")
    sp.add_argument("--p", type=_flag_type("--p", parse_pnorm), default=2.0, help="norm exponent, or 'inf' (default 2)")
    sp.add_argument("--alpha", type=_flag_type("--alpha", float), default=0.0, help="exponent alpha in [0, 1) (default 0)")
    sp.add_argument(
        "--phi", default="auto", help="constant:<c> | ds:<lambda> | ds-unknown:<lambda> | auto (default auto)"
    )
    sp.add_argument("--positive-part", action="store_true", help="clamp the shrinkage factor at 0")


def _add_observation_flags(sp) -> None:
    sp.add_argument("--z", type=_flag_type("--z", _vector_arg), required=True,
                    help="observation: comma-separated values or a CSV file path")
    sp.add_argument("--sigma2", type=_flag_type("--sigma2", float), help="known variance (default 1)")
    sp.add_argument("--s", type=_flag_type("--s", float), help="residual sum of squares (unknown scale)")
    sp.add_argument("--n", type=_flag_type("--n", _positive_int), help="degrees of freedom of s")


def _add_sweep_flags(sp) -> None:
    _add_estimator_flags(sp, with_d=True)
    sp.add_argument("--theta-norms", type=_flag_type("--theta-norms", _float_list), required=True,
                    help="comma-separated list of ||theta|| values")
    sp.add_argument("--direction", default="first-axis",
                    help="'first-axis' or a comma-separated direction vector (default first-axis)")
    sp.add_argument("--scale", choices=["known", "unknown"], default="known", help="scale mode (default known)")
    sp.add_argument("--n", type=_flag_type("--n", _positive_int), help="degrees of freedom (unknown scale)")
    sp.add_argument("--sigma2", type=_flag_type("--sigma2", float), default=1.0, help="true variance (default 1)")
    sp.add_argument("--reps", type=_flag_type("--reps", _positive_int), default=DEFAULT_REPS,
                    help=f"Monte Carlo replicates (default {DEFAULT_REPS})")
    sp.add_argument("--seed", type=_flag_type("--seed", _seed), default=DEFAULT_SEED,
                    help=f"random seed (default {DEFAULT_SEED})")
    sp.add_argument("--workers", type=_flag_type("--workers", _positive_int), default=1,
                    help="parallel workers; output does not depend on it (default 1)")
    sp.add_argument("--out", default="-", help="CSV output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lpshrink", description="lp-norm James-Stein shrinkage estimation toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("estimate", help="shrink an observation; prints estimate and zero set as JSON")
    _add_estimator_flags(sp, with_d=False)
    _add_observation_flags(sp)
    sp.add_argument("--out", help="also write the JSON to this path")

    sp = sub.add_parser("sure", help="Stein unbiased risk estimate at an observation (JSON)")
    _add_estimator_flags(sp, with_d=False)
    _add_observation_flags(sp)

    sp = sub.add_parser("risk-sim", help="Monte Carlo risk over a radial theta grid (CSV)")
    _add_sweep_flags(sp)

    sp = sub.add_parser("risk-curve", help="risk-sim plus an SVG risk curve")
    _add_sweep_flags(sp)
    sp.add_argument("--svg", required=True, help="SVG output path")

    sp = sub.add_parser("check-minimax", help="check a theorem's hypotheses; exit 0 iff they hold")
    _add_estimator_flags(sp, with_d=True)
    sp.add_argument("--theorem", choices=["t1", "t2", "t3", "t4"], required=True)
    sp.add_argument("--n", type=_flag_type("--n", _positive_int), help="degrees of freedom (t3, t4)")
    sp.add_argument("--grid-lo", type=_flag_type("--grid-lo", float), default=DEFAULT_GRID.lo,
                    help=f"grid lower end (default {DEFAULT_GRID.lo:g})")
    sp.add_argument("--grid-hi", type=_flag_type("--grid-hi", float), default=DEFAULT_GRID.hi,
                    help=f"grid upper end (default {DEFAULT_GRID.hi:g})")
    sp.add_argument("--grid-points", type=_flag_type("--grid-points", _positive_int), default=DEFAULT_GRID.points,
                    help=f"log-spaced grid points (default {DEFAULT_GRID.points})")

    sp = sub.add_parser("verify", help="run randomized property suites; exit 0 iff all pass")
    sp.add_argument("--suite", choices=["lemmas", "identities", "all"], default="all")
    sp.add_argument("--trials", type=_flag_type("--trials", _positive_int), default=10**4,
                    help="random trials per property (default 10000)")
    sp.add_argument("--seed", type=_flag_type("--seed", _seed), default=DEFAULT_SEED,
                    help=f"random seed (default {DEFAULT_SEED})")
    sp.add_argument("--reps", type=_flag_type("--reps", _positive_int), default=DEFAULT_REPS,
                    help=f"Monte Carlo replicates per identity check (default {DEFAULT_REPS})")
    return parser


def _config(args, d: int, scale_mode: ScaleMode, n: int | None = None) -> ShrinkageConfig:
    phi = parse_phi_spec(args.phi, n=n)
    return ShrinkageConfig(d, args.p, args.alpha, phi, args.positive_part, scale_mode)


def _observation(args) -> Observation:
    if args.s is not None or args.n is not None:
        if args.sigma2 is not None:
            raise ValidationError("use either --sigma2 or --s/--n, not both")
        if args.s is None or args.n is None:
            raise ValidationError("unknown scale needs both --s and --n")
        return Observation.unknown(args.z, args.s, args.n)
    return Observation.known(args.z, 1.0 if args.sigma2 is None else args.sigma2)


def _scale_dict(obs: Observation) -> dict:
    if obs.scale_mode is ScaleMode.KNOWN:
        return {"mode": "known", "sigma2": obs.sigma2}
    return {"mode": "unknown", "s": obs.s, "n": obs.n, "sigma2_hat": obs.scale2}


def _emit(obj, stream=None) -> str:
    text = json.dumps(obj, indent=2)
    print(text, file=stream or sys.stdout)
    return text


def cmd_estimate(args) -> int:
    obs = _observation(args)
    config = _config(args, obs.z.size, obs.scale_mode, obs.n)
    est = shrink(obs, config)
    sparse = config.positive_part and config.alpha > 0 and isinstance(config.phi_fn, ConstantPhi)
    out = {
        "estimate": [float(x) for x in est],
        "zero_set": zero_set(obs, config) if sparse else [],
        "config": config.describe(),
        "scale": _scale_dict(obs),
    }
    text = _emit(out)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def cmd_sure(args) -> int:
    obs = _observation(args)
    config = _config(args, obs.z.size, obs.scale_mode, obs.n)
    report = sure(obs, config)
    _emit({**report.to_dict(), "config": config.describe(), "scale": _scale_dict(obs)})
    return 0


def _direction(args, d: int):
    if args.direction == "first-axis":
        return None
    try:
        return _float_list(args.direction)
    except ValueError:
        raise ValidationError(f"invalid value for --direction: {args.direction!r}") from None


def _sweep(args):
    scale = ScaleMode(args.scale)
    if scale is ScaleMode.UNKNOWN and args.n is None:
        raise ValidationError("--scale unknown requires --n")
    n = args.n if scale is ScaleMode.UNKNOWN else None
    config = _config(args, args.d, scale, n)
    rows = risk_sweep(config, args.theta_norms, args.reps, args.seed, sigma2=args.sigma2, n=n,
                      direction=_direction(args, args.d), workers=args.workers)
    header = [
        "lpshrink risk-sim",
        f"d={config.d} p={format_pnorm(config.p)} alpha={config.alpha!r} phi={config.phi_label} "
        f"phi_resolved={config.phi_fn.label} positive_part={str(config.positive_part).lower()}",
        f"scale={scale.value} n={'' if n is None else n} sigma2={args.sigma2!r} direction={args.direction}",
        f"reps={args.reps} seed={args.seed}",
        f"defaults: reps={DEFAULT_REPS} seed={DEFAULT_SEED} grid={DEFAULT_GRID.describe()}",
    ]
    return rows, rows_to_csv(rows, header)


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_risk_sim(args) -> int:
    _, text = _sweep(args)
    _write(args.out, text)
    return 0


def cmd_risk_curve(args) -> int:
    rows, text = _sweep(args)
    _write(args.out, text)
    Path(args.svg).write_text(risk_curve_svg(rows))
    return 0


def cmd_check_minimax(args) -> int:
    grid = Grid(args.grid_lo, args.grid_hi, args.grid_points)
    theorem = args.theorem
    if theorem in ("t3", "t4") and args.n is None:
        raise ValidationError(f"--theorem {theorem} requires --n")
    d, alpha = args.d, args.alpha
    try:
        config = _config(args, d, ScaleMode.KNOWN, args.n)
    except ValidationError:
        if d >= 3 and 0 <= alpha < (d - 2) / (d - 1):
            raise
        config = None
        report = precondition_report(theorem, d, alpha, grid, "band limit 2(d-2)gamma undefined")
    else:
        report = check_minimax(config, theorem, args.n, grid)
    out = report.to_dict()
    out["config"] = config.describe() if config else {"d": d, "p": format_pnorm(args.p), "alpha": alpha,
                                                      "phi": args.phi}
    _emit(out)
    return 0 if report.verdict else 1


def cmd_verify(args) -> int:
    results = run_suite(args.suite, args.trials, args.seed, args.reps)
    ok = all(r.passed for r in results)
    _emit({"suite": args.suite, "trials": args.trials, "seed": args.seed, "passed": ok,
           "checks": [r.to_dict() for r in results]})
    return 0 if ok else 1


COMMANDS = {
    "estimate": cmd_estimate,
    "sure": cmd_sure,
    "risk-sim": cmd_risk_sim,
    "risk-curve": cmd_risk_curve,
    "check-minimax": cmd_check_minimax,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValidationError, DomainError) as exc:
        print(f"lpshrink {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

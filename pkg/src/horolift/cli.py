"""Command-line front end.

Every subcommand writes CSV and/or JSON with a ``config`` echo of the fully
resolved options. ``--config FILE`` reads ``key=value`` lines (keys are the
long option names without dashes); flags given on the command line win.

Exit status: 0 on success, 1 when a computation fails, 2 on bad usage.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import expsums, fourier, lifts
from ._io import read_csv, write_csv, write_json

COMMANDS = ("expsum", "verify-bounds", "lift-check", "coeffs", "equidist", "fit", "mu-ref")
RUN_KEYS = ("output", "seed", "workers")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    output: Optional[str] = None
    seed: int = 0
    workers: int = 1

    def echo(self) -> dict:
        """Resolved configuration as written into outputs (the output path
        and worker count do not affect results and are left out)."""
        return {"command": self.command, "seed": self.seed, **self.params}


# --------------------------------------------------------------------------
# argument types
# --------------------------------------------------------------------------

def _typed(func, what: str):
    def convert(text):
        try:
            return func(text)
        except (TypeError, ValueError) as exc:
            raise argparse.ArgumentTypeError(f"invalid {what} {text!r}: {exc}") from None
    convert.__name__ = what
    return convert


def _int_min(lo: int):
    def parse(text):
        value = int(text)
        if value < lo:
            raise ValueError(f"must be >= {lo}")
        return value
    return _typed(parse, f"integer >= {lo}")


def _positive_float(text):
    value = float(text)
    if not (math.isfinite(value) and value > 0):
        raise ValueError("must be positive")
    return value


def _float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _range(text: str) -> str:
    """``a:b`` inclusive integer range (or a single integer); kept as text."""
    parse_range(text)
    return text


def parse_range(text: str) -> range:
    lo, sep, hi = text.partition(":")
    a = int(lo)
    b = int(hi) if sep else a
    return range(a, b + 1)


def _lift(text: str) -> str:
    lifts.lift_from_string(text)
    return text


def _psi(text: str) -> str:
    fourier.psi_from_string(text)
    return text


def _ygrid(text: str) -> str:
    from .equidist import parse_y_grid

    ymin, ymax, count = parse_y_grid(text)
    if not 0 < ymin < ymax < 1:
        raise ValueError("need 0 < ymin < ymax < 1")
    if count < 2:
        raise ValueError("need at least two points")
    return text


def _unit_open(text):
    value = float(text)
    if not 0 < value < 1:
        raise ValueError("must lie in (0, 1)")
    return value


POS_INT = _int_min(1)
NONNEG_INT = _int_min(0)
INT = _typed(int, "integer")
FLOAT = _typed(_float, "number")
POS_FLOAT = _typed(_positive_float, "positive number")
UNIT_OPEN = _typed(_unit_open, "number in (0, 1)")
RANGE = _typed(_range, "range a:b")
LIFT = _typed(_lift, "lift preset")
PSI = _typed(_psi, "test function")
YGRID = _typed(_ygrid, "y grid")


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="horolift", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, allow_abbrev=False)
        p.add_argument("--config", metavar="FILE", help="key=value defaults file")
        p.add_argument("--output", "-o", metavar="PATH",
                       help="output file (default stdout); JSON summaries go to PATH.json")
        p.add_argument("--seed", type=INT, default=0)
        p.add_argument("--workers", type=POS_INT, default=1, help="process pool size")
        return p

    p = command("expsum", "evaluate one exponential sum")
    p.add_argument("--kind", choices=("S", "U", "T"), default="U")
    p.add_argument("--c", type=POS_INT, required=True)
    p.add_argument("--h", type=INT, default=0)
    p.add_argument("--k", type=INT, default=0)
    p.add_argument("--l", type=INT, default=0)
    p.add_argument("--n", type=NONNEG_INT, default=0)
    p.add_argument("--lift", type=LIFT, default="quadratic")
    p.add_argument("--eps", type=POS_FLOAT, default=expsums.DEFAULT_EPS)

    p = command("verify-bounds", "sweep sums against their bounds")
    p.add_argument("--kind", choices=expsums.SWEEP_KINDS, default="U")
    p.add_argument("--c-range", type=RANGE, default="1:100")
    p.add_argument("--h-range", type=RANGE, default="0")
    p.add_argument("--k-range", type=RANGE, default="1")
    p.add_argument("--l-range", type=RANGE, default="0")
    p.add_argument("--n-range", type=RANGE, default="1")
    p.add_argument("--lift", type=LIFT, default="quadratic")
    p.add_argument("--eps", type=POS_FLOAT, default=expsums.DEFAULT_EPS)

    p = command("lift-check", "D-nice and rational-linearity report for a lift")
    p.add_argument("--lift", type=LIFT, default="quadratic")

    p = command("coeffs", "tabulate horocycle Fourier coefficients")
    p.add_argument("--kind", choices=("b", "a"), default="b")
    p.add_argument("--psi", type=PSI, default="annulus:1,2")
    p.add_argument("--n", type=POS_INT, default=1)
    p.add_argument("--c", type=POS_INT, default=1)
    p.add_argument("--l-range", type=RANGE, default="0:10")
    p.add_argument("--k-range", type=RANGE, default="-10:10")
    p.add_argument("--theta", type=FLOAT, default=1.0)
    p.add_argument("--y", type=UNIT_OPEN, default=0.01)
    p.add_argument("--m", type=NONNEG_INT, default=2, help="decay order for the bound column")

    p = command("equidist", "horocycle averages against the Haar mean over a y grid")
    p.add_argument("--lift", type=LIFT, default="quadratic")
    p.add_argument("--psi", type=PSI, default="annulus:1,2")
    p.add_argument("--y", type=YGRID, default="geom:1e-4,1e-1,20")
    p.add_argument("--tol", type=POS_FLOAT, default=1e-9)
    p.add_argument("--mc-samples", type=NONNEG_INT, default=0)

    p = command("fit", "power-law fit of an error column")
    p.add_argument("--input", required=True, metavar="CSV")
    p.add_argument("--column", default="abs_err")

    p = command("mu-ref", "Monte Carlo mean of a test function over Y")
    p.add_argument("--psi", type=PSI, default="annulus:1,2")
    p.add_argument("--samples", type=_int_min(1000), default=100_000)
    return parser


def _read_config_file(path: str) -> list[str]:
    tokens = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("_", "-")
        if not sep or not key or key == "config":
            raise UsageError(f"{path}:{lineno}: expected key=value")
        tokens.append(f"--{key}={value.strip()}")
    return tokens


def parse_args(argv: Sequence[str]) -> RunConfig:
    """Parse a token list into a :class:`RunConfig` (SystemExit(2) on error)."""
    argv = list(argv)
    parser = build_parser()
    if argv and argv[0] in COMMANDS:
        pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv[1:])
        if known.config:
            try:
                file_tokens = _read_config_file(known.config)
            except UsageError as exc:
                parser.exit(2, f"horolift: error: {exc}\n")
            argv = [argv[0]] + file_tokens + argv[1:]
    ns = vars(parser.parse_args(argv))
    command = ns.pop("command")
    ns.pop("config", None)
    run = {k: ns.pop(k) for k in RUN_KEYS}
    return RunConfig(command, ns, **run)


def render(cfg: RunConfig) -> list[str]:
    """Token list that parses back to ``cfg``."""
    argv = [cfg.command]
    for key, value in cfg.params.items():
        text = repr(value) if isinstance(value, float) else str(value)
        argv.append(f"--{key.replace('_', '-')}={text}")
    argv += [f"--seed={cfg.seed}", f"--workers={cfg.workers}"]
    if cfg.output is not None:
        argv += ["--output", cfg.output]
    return argv


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

@contextlib.contextmanager
def _open_out(path: Optional[str], suffix: str = ""):
    if path is None:
        yield sys.stdout
        return
    target = Path(path + suffix) if suffix else Path(path)
    with open(target, "w", newline="") as fh:
        yield fh


def _json_out(cfg: RunConfig, payload: dict, alongside: bool) -> None:
    """JSON summary: next to the CSV when there is one, else the main output."""
    if alongside:
        if cfg.output is None:
            return
        with _open_out(cfg.output, ".json") as fh:
            write_json(fh, payload)
    else:
        with _open_out(cfg.output) as fh:
            write_json(fh, payload)


def _run_expsum(cfg: RunConfig) -> None:
    p = cfg.params
    lift = lifts.lift_from_string(p["lift"])
    params = expsums.ExpSumParams(p["c"], p["h"], p["k"], p["l"], p["n"])
    u, v = expsums.arith.squarefree_squarefull_split(p["c"])
    bound = math.nan
    if p["kind"] == "U":
        val = expsums.eval_U_fast(p["c"], p["h"], p["k"], p["l"])
        bound = expsums.bound_U(p["c"], p["h"], p["k"], p["l"], p["eps"])
    elif p["kind"] == "S":
        val = expsums.eval_S(params, lift)
        if p["n"] >= 1:
            bound = expsums.bound_S(p["c"], p["k"], p["l"], p["n"], lift, p["eps"])
    else:
        val = expsums.eval_T(p["c"], p["h"], p["l"], p["n"], lift)
    row = (p["c"], u, v, p["h"], p["k"], p["l"], p["n"], val.re, val.im, abs(val),
           bound, abs(val) / bound if bound == bound else math.nan)
    with _open_out(cfg.output) as fh:
        write_csv(fh, expsums.CSV_HEADER, [row], cfg.echo())


def _run_verify(cfg: RunConfig) -> None:
    p = cfg.params
    grid = {name: parse_range(p[f"{name}_range"]) for name in "chkln"}
    summary = expsums.sweep_verify(p["kind"], grid, lifts.lift_from_string(p["lift"]),
                                   p["eps"], cfg.workers)
    with _open_out(cfg.output) as fh:
        expsums.write_sweep_csv(fh, summary.reports, cfg.echo())
    _json_out(cfg, {"max_ratio": summary.max_ratio, "slope": summary.slope,
                    "blocks": [list(b) for b in summary.blocks], "count": len(summary.reports),
                    "config": cfg.echo()}, alongside=True)


def _run_lift_check(cfg: RunConfig) -> None:
    lift = lifts.lift_from_string(cfg.params["lift"])
    density = lifts.default_density()
    report = lifts.check_D_nice(lift, density)
    rl = lifts.detect_rational_linear(lift, density)
    payload = {
        "D": lift.D, "x0": lift.x0,
        "d_nice": report._asdict(),
        "rational_linearity": {"verdict": rl.verdict,
                               "interval": list(rl.interval) if rl.interval else None,
                               "alpha": rl.alpha, "beta": rl.beta},
        "consistency": lifts.lift_consistency(lift, density),
        "config": cfg.echo(),
    }
    _json_out(cfg, payload, alongside=False)


def _run_coeffs(cfg: RunConfig) -> None:
    p = cfg.params
    if p["kind"] == "a":
        density = lifts.default_density()
        rows = [(k, fourier.a_coeff(density, k), fourier.a_bound(density, k))
                for k in parse_range(p["k_range"])]
        with _open_out(cfg.output) as fh:
            fourier.write_a_table(fh, rows, cfg.echo())
        return
    f = fourier.psi_from_string(p["psi"])
    rows = []
    for l in parse_range(p["l_range"]):
        z = fourier.b_coeff(f, p["n"], p["c"], l, p["theta"], p["y"])
        m = p["m"] if l == 0 else max(p["m"], 4)
        rows.append((p["n"], p["c"], l, p["theta"], p["y"], z,
                     fourier.b_bound(p["n"], p["c"], l, p["theta"], p["y"], m)))
    with _open_out(cfg.output) as fh:
        fourier.write_b_table(fh, rows, cfg.echo())


def _run_equidist(cfg: RunConfig) -> None:
    from .equidist import ExperimentConfig, parse_y_grid, run_experiment, write_equidist

    p = cfg.params
    exp = ExperimentConfig(
        lift=lifts.lift_from_string(p["lift"]),
        testfn=fourier.psi_from_string(p["psi"]),
        y_grid=parse_y_grid(p["y"]),
        quad_tol=p["tol"],
        seed=cfg.seed,
        workers=cfg.workers,
        mc_samples=p["mc_samples"],
    )
    result = run_experiment(exp)
    with _open_out(cfg.output) as fh:
        write_equidist(fh, None, result, cfg.echo())
    _json_out(cfg, result.summary(cfg.echo()), alongside=True)


def _run_fit(cfg: RunConfig) -> None:
    from .equidist import decay_fit

    p = cfg.params
    try:
        with open(p["input"], newline="") as fh:
            records = read_csv(fh)
    except OSError as exc:
        raise ValueError(f"cannot read {p['input']}: {exc}") from None
    col = p["column"]
    if records and col not in records[0] and "err" in records[0]:
        col = "err"
    try:
        points = [(float(r["y"]), float(r[col])) for r in records]
    except KeyError as exc:
        raise ValueError(f"input lacks column {exc}") from None
    fit = decay_fit(points)
    _json_out(cfg, {**fit.as_dict(), "points": len(fit.points), "config": cfg.echo()},
              alongside=False)


def _run_mu_ref(cfg: RunConfig) -> None:
    from .equidist import mu_Y_reference

    f = fourier.psi_from_string(cfg.params["psi"])
    mean, stderr = mu_Y_reference(f, cfg.params["samples"], cfg.seed, cfg.workers)
    _json_out(cfg, {"mean": mean, "stderr": stderr, "psi_integral": f.psi_integral,
                    "config": cfg.echo()}, alongside=False)


HANDLERS = {
    "expsum": _run_expsum,
    "verify-bounds": _run_verify,
    "lift-check": _run_lift_check,
    "coeffs": _run_coeffs,
    "equidist": _run_equidist,
    "fit": _run_fit,
    "mu-ref": _run_mu_ref,
}


def dispatch(cfg: RunConfig) -> int:
    try:
        HANDLERS[cfg.command](cfg)
    except (ArithmeticError, RuntimeError, ValueError, TypeError, OSError) as exc:
        print(f"horolift {cfg.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())

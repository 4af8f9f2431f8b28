"""
Command-line entry point.

``hetlab <subcommand> [flags]``. Every subcommand accepts ``--config FILE``, a
key = value file with one section per subcommand whose keys are the long flag
names; explicit flags win over file values. Each run that writes ``--out``
also writes ``<out>.manifest`` in the same format, which can be passed back
through ``--config`` to repeat the run.

Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
4 indeterminate verdict under ``--strict``.
"""

from __future__ import annotations

import argparse
import configparser
import io
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .chaos_map import APERIODIC, ScalarMapSpec, bifurcation_scan
from .coupled_sim import DEFAULT_BURN_IN, SimConfig, simulate_coupled, simulate_coupled_coords, write_path_csv
from .errors import ConfigurationError, DivergenceError
from .experiments import (
    DIVERGED,
    Axis,
    SweepGrid,
    run_divergence,
    run_heatmap,
    run_pair_lln,
    write_bifurcation_csv,
    write_divergence_csv,
    write_heatmap_csv,
    write_lln_csv,
)
from .innovations import from_name
from .models import INDETERMINATE, PARAM_KEYS, Egarch, Garch, check_stationarity, make_model
from .parallel import resolve_threads
from .stability import (
    estimate_default,
    lambda_analytic,
    lambda_egarch_closed,
    lambda_ergodic,
    lambda_quadrature,
    lambda_vgarch_two_draw,
    write_lambda_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_INDETERMINATE = 4

LAMBDA_METHODS = ("auto", "closed_form_mc", "ergodic_mc", "quadrature", "two_draw", "analytic")

# remaining parameters of the heatmap defaults when they are not swept
HEATMAP_FIXED = {
    "egarch": {"alpha": 0.1, "beta": 0.25, "gamma": 5.4, "delta": 0.0},
    "vgarch": {"alpha": 0.001, "beta": 0.01, "gamma": 1.0, "delta": -0.3},
}
HEATMAP_DIST = {"egarch": "normal", "vgarch": "exp_mixture"}

# keys never written to a manifest section
_META = {"command", "config", "func", "written"}


class CliError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt_value(x) for x in v)
    return str(v)


# --- parser -----------------------------------------------------------------

def _common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--config", help="key = value file with a section named after the subcommand")
    p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.add_argument("--out", required=out_required, help="output CSV; a manifest is written next to it")
    p.add_argument("--threads", type=int, default=None, help="worker count (default $HETLAB_THREADS or CPU count)")
    p.add_argument("--strict", action="store_true", help="exit 4 on an indeterminate verdict")


def _model_flags(p: argparse.ArgumentParser, model_required: bool = True) -> None:
    p.add_argument("--model", choices=("garch", "egarch", "vgarch"), required=model_required)
    p.add_argument("--alpha0", type=float, help="GARCH intercept")
    p.add_argument("--alphas", type=_float_list, help="GARCH ARCH coefficients, comma-separated")
    p.add_argument("--betas", type=_float_list, help="GARCH lag coefficients, comma-separated, most recent first")
    p.add_argument("--alpha", type=float, help="EGARCH/VGARCH intercept (EGARCH default 0.1)")
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--delta", type=float, help="asymmetry (default 0)")
    p.add_argument("--dist", default="normal", help="normal, exp_mixture or rademacher (default normal)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetlab", description="Invertibility diagnostics for volatility filters.")
    parser.add_argument("--version", action="version", version=f"hetlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a true path and its filter")
    _model_flags(p)
    p.add_argument("--steps", type=int, required=True, help="number of emitted time steps")
    p.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    p.add_argument("--init", default="constant:1.0", help="constant:<s2>, sample-mean or log-offset:<d0>")
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument(
        "--engine",
        choices=("auto", "direct", "coords"),
        default="auto",
        help="direct recursion or transformed coordinates; auto picks coords for egarch",
    )
    p.add_argument("--offsets", type=_float_list, help="emit divergence paths for these log-offsets instead")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("lambda", help="estimate the stability coefficient")
    _model_flags(p)
    p.add_argument("--method", choices=LAMBDA_METHODS, default="auto")
    p.add_argument("--budget", type=int, default=1_000_000, help="draws or path length (default 1e6)")
    p.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    _common(p, out_required=False)
    p.set_defaults(func=cmd_lambda)

    p = sub.add_parser("heatmap", help="coefficient over a two-parameter grid")
    p.add_argument("--family", choices=("egarch", "vgarch"), required=True)
    p.add_argument("--axis1", default="beta:0.05:0.95:10", help="name:min:max:steps")
    p.add_argument("--axis2", default="gamma:0.1:8:10", help="name:min:max:steps")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--dist", default=None, help="default normal for egarch, exp_mixture for vgarch")
    p.add_argument("--budget", type=int, default=100_000, help="draws or path length per cell")
    _common(p)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("bifurcation", help="period scan of the deterministic EGARCH map")
    p.add_argument("--variant", choices=("derived", "literal"), default="derived")
    p.add_argument("--alpha", type=float, default=0.2, help="literal variant only")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--gamma-min", type=float, required=True)
    p.add_argument("--gamma-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True, help="grid points")
    p.add_argument("--x0", type=float, default=0.5)
    p.add_argument("--transient", type=int, default=10_000)
    p.add_argument("--keep", type=int, default=512)
    _common(p)
    p.set_defaults(func=cmd_bifurcation)

    p = sub.add_parser("lln", help="long-run distribution of the filter error for several starts")
    _model_flags(p)
    p.add_argument("--steps", type=int, default=1_000_000)
    p.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    p.add_argument("--starts", type=_float_list, default=[0.5, 2.0])
    p.add_argument("--mu", type=_float_list, default=[0.01, 0.05])
    _common(p)
    p.set_defaults(func=cmd_lln)
    return parser


def _subparsers(parser: argparse.ArgumentParser) -> dict[str, argparse.ArgumentParser]:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return dict(action.choices)
    return {}


def _config_argv(sub: argparse.ArgumentParser, command: str, path: str) -> list[str]:
    """Turn the ``[command]`` section of a config file into leading flags."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise CliError(f"cannot read config {path!r}: {exc}", EXIT_CONFIG) from None
    if not cp.has_section(command):
        return []
    actions = {a.dest: a for a in sub._actions if a.option_strings}
    argv = []
    for key, value in cp.items(command):
        dest = key.replace("-", "_")
        action = actions.get(dest)
        if action is None or dest in _META:
            raise CliError(f"config key {key!r} is not a {command} option", EXIT_CONFIG)
        flag = max(action.option_strings, key=len)
        if isinstance(action, argparse._StoreTrueAction):
            if value.strip().lower() in ("1", "true", "yes", "on"):
                argv.append(flag)
        elif value.strip() != "":
            argv.append(f"{flag}={value.strip()}")
    return argv


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    subs = _subparsers(parser)
    pos = next((i for i, a in enumerate(argv) if a in subs), None)
    config = None
    if pos is not None:
        rest = argv[pos + 1:]
        for i, a in enumerate(rest):
            if a == "--config" and i + 1 < len(rest):
                config = rest[i + 1]
            elif a.startswith("--config="):
                config = a.split("=", 1)[1]
    if config is None:
        return parser.parse_args(argv)
    command = argv[pos]
    extra = _config_argv(subs[command], command, config)
    # argparse keeps the last occurrence, so explicit flags placed after the file values win
    return parser.parse_args([*argv[:pos], command, *extra, *argv[pos + 1:]])


# --- helpers ------------------------------------------------------------------

def _model(args):
    family = args.model
    given = {k: getattr(args, k) for k in ("alpha0", "alphas", "betas", "alpha", "beta", "gamma", "delta")}
    given = {k: v for k, v in given.items() if v is not None}
    stray = set(given) - set(PARAM_KEYS[family])
    if stray:
        raise ConfigurationError(f"flags {sorted('--' + s for s in stray)} do not apply to {family}")
    if family == "egarch":
        given.setdefault("alpha", 0.1)
    if family in ("egarch", "vgarch"):
        given.setdefault("delta", 0.0)
    missing = [k for k in PARAM_KEYS[family] if k not in given]
    if missing:
        raise ConfigurationError(f"{family} needs {', '.join('--' + k for k in missing)}")
    return make_model(family, **given)


def _init(text: str) -> tuple[str, float]:
    kind, _, value = text.partition(":")
    kind = kind.strip().lower().replace("_", "-")
    if kind == "sample-mean" and not value:
        return "sample_mean", 0.0
    if kind in ("constant", "log-offset") and value:
        try:
            return kind.replace("-", "_"), float(value)
        except ValueError:
            pass
    raise ConfigurationError(f"--init {text!r} must be constant:<s2>, sample-mean or log-offset:<d0>")


def _manifest(args, outputs: list[str], started: float) -> None:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["run"] = {
        "subcommand": args.command,
        "version": __version__,
        "base_seed": str(args.seed),
        "wall_time_s": f"{time.perf_counter() - started:.3f}",
        "outputs": ",".join(outputs),
    }
    section = {}
    for key, value in sorted(vars(args).items()):
        if key in _META or value is None:
            continue
        section[key.replace("_", "-")] = _fmt_value(value)
    cp[args.command] = section
    buf = io.StringIO()
    cp.write(buf)
    Path(args.out + ".manifest").write_text(buf.getvalue(), encoding="utf-8")


def _write(args, writer, payload) -> None:
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer(payload, fh)
    args.written.append(args.out)


# --- subcommands ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    model = _model(args)
    dist = from_name(args.dist)
    mode, value = _init(args.init)
    config = SimConfig(model, dist, args.steps, args.seed, args.burn_in, mode, value, args.record_every)
    if args.offsets:
        results = run_divergence(config, args.offsets, threads=resolve_threads(args.threads))
        _write(args, write_divergence_csv, results)
        diverged = any(p.any_diverged for _, p in results)
    else:
        engine = args.engine
        if engine == "auto":
            engine = "coords" if isinstance(model, Egarch) else "direct"
        if engine == "coords" and isinstance(model, Garch):
            raise ConfigurationError("transformed coordinates exist for egarch and vgarch only")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RuntimeWarning)
            path = simulate_coupled_coords(config) if engine == "coords" else simulate_coupled(config)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        _write(args, write_path_csv, path)
        diverged = path.any_diverged
    if diverged:
        raise CliError("path diverged; rows after the divergence are frozen and flagged", EXIT_DIVERGED)
    return EXIT_OK


def _lambda_estimate(args, model, dist):
    method = args.method
    if method == "auto":
        return estimate_default(model, dist, args.budget, args.seed, threads=resolve_threads(args.threads))
    if method == "closed_form_mc":
        return lambda_egarch_closed(model, dist, args.budget, args.seed, threads=resolve_threads(args.threads))
    if method == "ergodic_mc":
        return lambda_ergodic(model, dist, args.budget, burn_in=args.burn_in, seed=args.seed)
    if method == "quadrature":
        return lambda_quadrature(model, dist)
    if method == "two_draw":
        return lambda_vgarch_two_draw(model, dist, args.budget, args.seed)
    if not isinstance(model, Garch):
        raise ConfigurationError("analytic coefficient exists for garch only")
    return lambda_analytic(model)


def cmd_lambda(args) -> int:
    model = _model(args)
    dist = from_name(args.dist)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        est = _lambda_estimate(args, model, dist)
        stat = check_stationarity(model, dist, n=min(args.budget, 200_000), seed=args.seed)
    print(f"lambda = {est.value!r}")
    print(f"stderr = {est.stderr!r}")
    print(f"method = {est.method}")
    print(f"verdict = {est.verdict}")
    print(f"stationarity = {stat.status}")
    if args.out:
        _write(args, lambda e, fh: write_lambda_csv(model, dist, e, fh), est)
    if args.strict and est.verdict == INDETERMINATE:
        raise CliError("verdict is indeterminate", EXIT_INDETERMINATE)
    return EXIT_OK


def cmd_heatmap(args) -> int:
    a1, a2 = Axis.parse(args.axis1), Axis.parse(args.axis2)
    swept = {a1.name, a2.name}
    for name in swept:
        if getattr(args, name, None) is not None:
            raise ConfigurationError(f"--{name} is swept by an axis and cannot also be fixed")
    fixed = dict(HEATMAP_FIXED[args.family])
    for k in fixed:
        if getattr(args, k) is not None:
            fixed[k] = getattr(args, k)
    fixed = {k: v for k, v in fixed.items() if k not in swept}
    dist = from_name(args.dist or HEATMAP_DIST[args.family])
    grid = SweepGrid(args.family, a1, a2, fixed, dist, args.budget, args.seed)
    cells = run_heatmap(grid, threads=resolve_threads(args.threads))
    _write(args, write_heatmap_csv, cells)
    if any(c.verdict == DIVERGED for c in cells):
        print(f"warning: {sum(c.verdict == DIVERGED for c in cells)} cells diverged", file=sys.stderr)
    if args.strict and any(c.verdict == INDETERMINATE for c in cells):
        raise CliError("at least one cell is indeterminate", EXIT_INDETERMINATE)
    return EXIT_OK


def cmd_bifurcation(args) -> int:
    if args.steps < 2:
        raise ConfigurationError("--steps must be >= 2")
    if not args.gamma_max > args.gamma_min:
        raise ConfigurationError("--gamma-max must exceed --gamma-min")
    fmap = ScalarMapSpec(args.alpha, args.beta, args.gamma_min, args.variant)
    grid = np.linspace(args.gamma_min, args.gamma_max, args.steps)
    scan = bifurcation_scan(fmap, grid, args.x0, args.transient, args.keep, threads=resolve_threads(args.threads))
    _write(args, write_bifurcation_csv, scan)
    if args.strict and any(c.period == APERIODIC for c in scan.cells):
        raise CliError("aperiodic cells present", EXIT_INDETERMINATE)
    return EXIT_OK


def cmd_lln(args) -> int:
    model = _model(args)
    dist = from_name(args.dist)
    if not args.starts or not args.mu:
        raise ConfigurationError("--starts and --mu need at least one value")
    if any(not (s > 0 and math.isfinite(s)) for s in args.starts):
        raise ConfigurationError("--starts must be positive")
    config = SimConfig(model, dist, args.steps, args.seed, args.burn_in)
    reports = run_pair_lln(config, args.starts, args.mu, threads=resolve_threads(args.threads))
    _write(args, write_lln_csv, reports)
    for r in reports:
        print(f"start = {r.start!r}  ks_halves = {r.ks_halves:.4f}  ks_vs_first = {r.ks_vs_first_start:.4f}")
    if any(r.diverged for r in reports):
        raise CliError("at least one path diverged", EXIT_DIVERGED)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    started = time.perf_counter()
    try:
        args = parse_args(argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SystemExit as exc:
        return int(exc.code or 0)
    args.written = []
    code = EXIT_OK
    try:
        code = args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_DIVERGED
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = exc.code
    if args.written:
        _manifest(args, args.written, started)
    return code


if __name__ == "__main__":
    sys.exit(main())

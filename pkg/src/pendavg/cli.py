"""Command-line front end: averaging -> zeros -> shooting pipelines.

Subcommands
-----------
freqs    print the two mode frequencies and periods
average  evaluate the mean bifurcation pair on points or a grid (CSV)
zeros    locate simple zeros over the annulus (JSON report)
verify   continue each zero to periodic orbits of the forced system
         at the configured eps ladder (JSON + trajectory CSVs)
orbit    sample a closed-form unperturbed orbit (CSV)

Experiments come from ``--preset``, a JSON ``--config`` file, and/or
direct flags; later sources override earlier ones.  Exit codes: 0 on
success (an empty zero list is a success), 2 for configuration errors,
3 for numerical failures.  Set PENDAVG_LOG=debug|info|... for logging.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .averaging import (
    AveragedSystem,
    AveragingError,
    QuadratureError,
    antipodal_pairing,
    find_zeros,
    is_identically_zero,
)
from .config import PRESETS, ConfigError, ExperimentConfig, merge_config, read_config_file
from .constants import OMEGA1, OMEGA2, T1, T2
from .continuation import (
    IntegrationError,
    ShootingError,
    predicted_initial_state,
    shoot_periodic,
)
from .expr import ExprDomainError, ExprSyntaxError
from .model import Mode, PeriodicityError, unperturbed_orbit
from .reporting import csv_lines, fmt_float, json_dumps, write_text

log = logging.getLogger("pendavg")

DEGENERATE_MESSAGE = "identically zero averaged function, no isolated zeros"


# ---------------------------------------------------------------------------
# Argument plumbing
# ---------------------------------------------------------------------------

def _add_experiment_flags(sub):
    sub.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
    sub.add_argument("--config", metavar="PATH", help="JSON config file")
    sub.add_argument("--f1", metavar="EXPR", help="forcing on th1'' (expression text)")
    sub.add_argument("--f2", metavar="EXPR", help="forcing on th2'' (expression text)")
    sub.add_argument("--mode", choices=["mode1", "mode2"], help="resonant mode")
    sub.add_argument("--p", type=int, help="resonance numerator")
    sub.add_argument("--q", type=int, help="resonance denominator")
    sub.add_argument("--r1", type=float, help="inner annulus radius")
    sub.add_argument("--r2", type=float, help="outer annulus radius")
    sub.add_argument("--tol", type=float, help="quadrature tolerance")
    sub.add_argument("--eps", metavar="LIST", help="comma-separated epsilon ladder")
    sub.add_argument("--jobs", type=int, help="parallel workers for the zero search")


def _parse_eps_list(text):
    if text.strip() == "":
        return ()
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"--eps: {exc}") from exc


def _config_from_args(args):
    cfg = ExperimentConfig()
    if getattr(args, "preset", None):
        cfg = PRESETS[args.preset]
    if getattr(args, "config", None):
        cfg = merge_config(cfg, read_config_file(args.config), source=args.config)
    overrides = {}
    for flag, key in (
        ("f1", "f1"),
        ("f2", "f2"),
        ("mode", "mode"),
        ("p", "p"),
        ("q", "q"),
        ("r1", "r1"),
        ("r2", "r2"),
        ("tol", "quad_tol"),
        ("jobs", "jobs"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "eps", None) is not None:
        overrides["epsilons"] = _parse_eps_list(args.eps)
    return merge_config(cfg, overrides, source="flags")


def _parse_pair(text, what):
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"{what} must be two comma-separated numbers, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def _parse_grid(text):
    """'min:max:n' for both axes, or 'amin:amax:n,bmin:bmax:n'."""
    axes = text.split(",")
    if len(axes) == 1:
        axes = [axes[0], axes[0]]
    if len(axes) != 2:
        raise ConfigError(f"--grid wants one or two axis specs, got {text!r}")
    out = []
    for axis in axes:
        parts = axis.split(":")
        if len(parts) != 3:
            raise ConfigError(f"--grid axis must be min:max:n, got {axis!r}")
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"--grid: {exc}") from exc
        if n < 1:
            raise ConfigError("--grid needs at least one point per axis")
        out.append(np.linspace(lo, hi, n))
    return out


def _emit(args, filename, text):
    sys.stdout.write(text)
    out_dir = getattr(args, "out", None)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_text(os.path.join(out_dir, filename), text)


def _config_echo(cfg):
    return {
        "f1": cfg.f1,
        "f2": cfg.f2,
        "mode": cfg.mode,
        "p": cfg.p,
        "q": cfg.q,
        "r1": cfg.r1,
        "r2": cfg.r2,
        "quad_tol": cfg.quad_tol,
        "newton_tol": cfg.newton_tol,
        "epsilons": list(cfg.epsilons),
    }


# ---------------------------------------------------------------------------
# Zero search shared by `zeros` and `verify`
# ---------------------------------------------------------------------------

def _search(cfg):
    spec = cfg.to_spec()
    system = AveragedSystem(spec, tol=cfg.quad_tol)
    if is_identically_zero(system, cfg.r1, cfg.r2):
        log.info("averaged pair is identically zero on the probe grid")
        return spec, system, [], [], True
    zeros = find_zeros(
        system,
        r1=cfg.r1,
        r2=cfg.r2,
        grid=(cfg.grid_radial, cfg.grid_angular),
        newton_tol=cfg.newton_tol,
        dedup_radius=cfg.dedup_radius,
        det_threshold=cfg.det_threshold,
        jobs=cfg.jobs,
    )
    classes = antipodal_pairing(zeros)
    log.info("found %d zeros in %d orbit classes", len(zeros), len(classes))
    return spec, system, zeros, classes, False


def _zeros_payload(cfg, zeros, classes, degenerate):
    zero_records = [
        {
            "alpha": z.alpha.tolist(),
            "residual": z.residual,
            "jacobian": z.jacobian.tolist(),
            "det": z.det,
            "simple": z.simple,
            "iterations": z.iterations,
        }
        for z in zeros
    ]
    index_of = {id(z): i for i, z in enumerate(zeros)}
    payload = {
        "config": _config_echo(cfg),
        "zeros": zero_records,
        "orbit_classes": len(classes),
        "classes": [[index_of[id(z)] for z in group] for group in classes],
    }
    if degenerate:
        payload["message"] = DEGENERATE_MESSAGE
    return payload


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_freqs(args):
    lines = [
        f"omega1 = {fmt_float(OMEGA1)}",
        f"omega2 = {fmt_float(OMEGA2)}",
        f"T1 = {fmt_float(T1)}",
        f"T2 = {fmt_float(T2)}",
    ]
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def cmd_average(args):
    cfg = _config_from_args(args)
    spec = cfg.to_spec()
    system = AveragedSystem(spec, tol=cfg.quad_tol)
    if args.point:
        alphas = np.array([_parse_pair(p, "--point") for p in args.point])
    elif args.grid:
        a_axis, b_axis = _parse_grid(args.grid)
        alphas = np.array([[a, b] for a in a_axis for b in b_axis])
    else:
        raise ConfigError("average needs --point A,B (repeatable) or --grid min:max:n")
    values = system.eval_many(alphas)
    rows = np.hstack([alphas, values])
    _emit(args, "average.csv", csv_lines(["a1", "a2", "g1", "g2"], rows))
    return 0


def cmd_zeros(args):
    cfg = _config_from_args(args)
    _, _, zeros, classes, degenerate = _search(cfg)
    payload = _zeros_payload(cfg, zeros, classes, degenerate)
    _emit(args, "zeros.json", json_dumps(payload) + "\n")
    return 0


def cmd_verify(args):
    cfg = _config_from_args(args)
    spec, _, zeros, classes, degenerate = _search(cfg)
    payload = _zeros_payload(cfg, zeros, classes, degenerate)
    class_of = {
        id(zero): ci for ci, group in enumerate(classes) for zero in group
    }

    cases = [
        (eps, zi)
        for zi, z in enumerate(zeros)
        for eps in cfg.epsilons
    ]
    cases.sort(key=lambda c: (c[0], zeros[c[1]].alpha[0], zeros[c[1]].alpha[1]))

    runs = []
    failures = 0
    out_dir = getattr(args, "out", None)
    for idx, (eps, zi) in enumerate(cases):
        zero = zeros[zi]
        prediction = predicted_initial_state(spec.mode, zero.alpha)
        record = {
            "zero_index": zi,
            "alpha": zero.alpha.tolist(),
            "epsilon": eps,
        }
        try:
            orbit = shoot_periodic(
                spec,
                eps,
                prediction,
                predicted=prediction,
                tol=cfg.shoot_tol,
            )
        except (ShootingError, IntegrationError, ExprDomainError) as exc:
            log.warning("shooting failed for zero %d at eps=%g: %s", zi, eps, exc)
            record["converged"] = False
            record["error"] = str(exc)
            failures += 1
            runs.append(record)
            continue
        record.update(
            {
                "converged": True,
                "period": orbit.period,
                "initial_state": orbit.initial_state.tolist(),
                "residual": orbit.residual,
                "predicted_initial": orbit.predicted_initial.tolist(),
                "distance_to_prediction": orbit.distance_to_prediction,
                "distance_over_eps": orbit.distance_to_prediction / abs(eps),
                "iterations": orbit.iterations,
            }
        )
        if out_dir:
            name = f"trajectory_{idx:03d}.csv"
            rows = np.vstack([orbit.samples_tau, orbit.samples]).T
            os.makedirs(out_dir, exist_ok=True)
            write_text(
                os.path.join(out_dir, name),
                csv_lines(["tau", "th1", "th1d", "th2", "th2d"], rows),
            )
            record["trajectory_file"] = name
        runs.append(record)

    payload["runs"] = runs
    # Distinct periodic orbits verified per eps: antipodal zeros continue
    # to orbits of the same class, so classes are the honest orbit count.
    summary = []
    for eps in sorted(set(cfg.epsilons)):
        converged = {
            class_of[id(zeros[run["zero_index"]])]
            for run in runs
            if run["epsilon"] == eps and run.get("converged")
        }
        summary.append({"epsilon": eps, "verified_orbit_classes": len(converged)})
    payload["verified"] = summary
    _emit(args, "verify.json", json_dumps(payload) + "\n")
    return 3 if failures else 0


def cmd_orbit(args):
    if args.mode is None or args.alpha is None:
        raise ConfigError("orbit needs --mode and --alpha A,B")
    mode = Mode(args.mode)
    alpha = _parse_pair(args.alpha, "--alpha")
    n = args.samples
    if n < 1:
        raise ConfigError("--samples must be at least 1")
    taus = np.arange(n) * (mode.period / n)
    states = unperturbed_orbit(mode, alpha, taus)
    rows = np.vstack([taus, states]).T
    _emit(args, "orbit.csv", csv_lines(["tau", "th1", "th1d", "th2", "th2d"], rows))
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="pendavg",
        description="Averaged bifurcation functions and periodic-orbit "
        "verification for the weakly forced double pendulum.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("freqs", help="print mode frequencies and periods")
    sub.set_defaults(func=cmd_freqs)

    sub = subs.add_parser("average", help="evaluate the mean bifurcation pair (CSV)")
    _add_experiment_flags(sub)
    sub.add_argument("--point", metavar="A,B", action="append", help="evaluation point (repeatable)")
    sub.add_argument("--grid", metavar="SPEC", help="grid spec min:max:n[,min:max:n]")
    sub.add_argument("--out", metavar="DIR", help="also write average.csv here")
    sub.set_defaults(func=cmd_average)

    sub = subs.add_parser("zeros", help="find simple zeros over the annulus (JSON)")
    _add_experiment_flags(sub)
    sub.add_argument("--out", metavar="DIR", help="also write zeros.json here")
    sub.set_defaults(func=cmd_zeros)

    sub = subs.add_parser("verify", help="shoot periodic orbits at each eps (JSON+CSV)")
    _add_experiment_flags(sub)
    sub.add_argument("--out", metavar="DIR", help="write verify.json and trajectories here")
    sub.set_defaults(func=cmd_verify)

    sub = subs.add_parser("orbit", help="sample a closed-form unperturbed orbit (CSV)")
    sub.add_argument("--mode", choices=["mode1", "mode2"])
    sub.add_argument("--alpha", metavar="A,B", help="mode-plane amplitudes")
    sub.add_argument("--samples", type=int, default=256, help="rows over one period")
    sub.add_argument("--out", metavar="DIR", help="also write orbit.csv here")
    sub.set_defaults(func=cmd_orbit)

    return parser


def main(argv=None):
    level = os.environ.get("PENDAVG_LOG", "warning").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ExprSyntaxError, PeriodicityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, AveragingError, ShootingError, IntegrationError, ExprDomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

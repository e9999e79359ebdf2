"""Command-line entry point: ``spherecar <subcommand> --config scenario.toml``.

Exit status: 0 completed, 1 configuration or I/O error, 2 controller
infeasibility, 3 observer out of its local regime (or output-feedback divergence).
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from . import scenario
from .exceptions import ConfigError, PlacementError, SphereCarError
from .observer import characteristic_polynomial, place_poles


def _poles(text):
    try:
        poles = [complex(p.replace(" ", "")) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse poles {text!r}") from None
    if len(poles) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated poles")
    return poles


def _add_common(p, config_required=True):
    p.add_argument("--config", required=config_required, help="scenario TOML file")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides run.seed)")
    p.add_argument("--step", type=float, help="integrator step (overrides integrator.step)")
    p.add_argument("--quiet", action="store_true", help="do not print the summary")


def build_parser():
    parser = argparse.ArgumentParser(prog="spherecar", description="Kinematic car on the sphere: "
                                     "invariant tracking control and observer scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "open-loop run",
        "track": "closed-loop tracking",
        "observe": "observer on a vehicle following the reference",
        "output-feedback": "controller fed by the observer estimate (experimental)",
        "flatness": "inputs recovered from the reference curve",
    }
    for name, text in helps.items():
        _add_common(sub.add_parser(name, help=text))
    gains = sub.add_parser("gains", help="observer gains for desired poles")
    _add_common(gains, config_required=False)
    gains.add_argument("--poles", type=_poles, metavar="P1,P2,P3",
                       help="three comma-separated poles, e.g. --poles=-1,-1,-1 or --poles=-2,-1+1j,-1-1j")
    gains.add_argument("--rho", type=float, help="sphere radius")
    gains.add_argument("--l32", type=float, default=0.0)
    return parser


def _gains(args):
    if args.poles is None or args.rho is None:
        if args.config is None:
            raise ConfigError("give --poles and --rho, or --config with observer.poles")
        cfg = scenario.load_config(args.config)
        if cfg.observer["poles"] is None:
            raise ConfigError("no poles configured", "observer.poles")
        poles = args.poles or cfg.observer["poles"]
        rho = args.rho or cfg.geometry.rho
        l32 = cfg.observer["l32"]
    else:
        poles, rho, l32 = args.poles, args.rho, args.l32
    if not rho > 0.0:
        raise ConfigError("must be positive", "--rho")
    g = place_poles(poles, rho, l32)
    out = g.as_dict()
    out["characteristic_polynomial"] = list(characteristic_polynomial(g, rho))
    if not args.quiet:
        print(json.dumps(out, indent=2))
    return scenario.EXIT_OK


def _run(args):
    cfg = scenario.load_config(args.config).with_overrides(args.seed, args.step, args.out)
    try:
        result = scenario.run_scenario(args.command, cfg)
    except PlacementError as err:
        raise ConfigError(str(err), "observer.poles") from None
    paths = scenario.emit_outputs(result, cfg.output["dir"], cfg.output["csv"], cfg.output["summary"])
    if not args.quiet:
        print(json.dumps(scenario._json_safe(result.summary), indent=2, sort_keys=True))
        print(f"wrote {paths[0]} and {paths[1]}")
    if result.exit_code != scenario.EXIT_OK:
        print(f"spherecar: {result.summary['status']}: {result.summary['message']}", file=sys.stderr)
    return result.exit_code


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.quiet:
        warnings.simplefilter("ignore", scenario.ConfigWarning)
    try:
        if args.command == "gains":
            return _gains(args)
        return _run(args)
    except (SphereCarError, OSError) as err:
        print(f"spherecar: error: {err}", file=sys.stderr)
        return scenario.EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

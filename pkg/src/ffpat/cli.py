"""Command line entry point: ``ffpat``.

Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
4 verification failure, 1 any other error.
"""
import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigError, DivergenceError
from .pipeline import PROFILES, SOLVERS, ExperimentConfig

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_DIVERGED, EXIT_VERIFY = 0, 1, 2, 3, 4

log = logging.getLogger("ffpat")


def _angles(text):
    if text == "full":
        return (0.0, 180.0)
    if text == "limited":
        return (45.0, 180.0)
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("use 'full', 'limited' or 'LO,HI' in degrees") from None
    return (lo, hi)


def build_parser():
    p = argparse.ArgumentParser(
        prog="ffpat",
        description="Full-field photoacoustic tomography: simulate data and reconstruct.",
    )
    p.add_argument("--config", type=Path, help="INI file with an [experiment] section")
    p.add_argument("--profile", choices=sorted(PROFILES), default="desk",
                   help="base parameter set (default: desk)")
    p.add_argument("--solver", choices=SOLVERS + ("all",),
                   help="solver to run (default: from config)")
    p.add_argument("--angles", type=_angles,
                   help="measured angular range: full, limited (= 45,180) or LO,HI")
    p.add_argument("--noise", type=float, help="noise level as a fraction of mean |data|")
    p.add_argument("--seed", type=int, help="noise seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--snapshots", type=int, metavar="N",
                   help="store every N-th wave step and solver iterate")
    p.add_argument("--verify", metavar="SUITE",
                   help="run a check suite (adjoints, oracles, contraction, all) instead")
    p.add_argument("--no-figures", action="store_true", help="skip matplotlib figures")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args):
    base = PROFILES[args.profile]
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        cfg = ExperimentConfig.from_ini(text, base)
    else:
        cfg = base
    solvers = None
    if args.solver is not None:
        solvers = SOLVERS if args.solver == "all" else (args.solver,)
    return cfg.with_overrides(
        angular_range=args.angles, noise=args.noise, seed=args.seed, out=args.out,
        snapshots=args.snapshots, solvers=solvers,
    )


def _verify(suite, cfg):
    from .verify import SUITES, run_suite

    if suite not in SUITES:
        print(f"ffpat: unknown verify suite {suite!r}; choose from {', '.join(SUITES)}",
              file=sys.stderr)
        return EXIT_CONFIG
    checks = run_suite(suite, cfg)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_OK if not failed else EXIT_VERIFY


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        # grids and medium are validated when the wave model is built
        cfg.object_grid, cfg.sim_grid
        if args.verify:
            return _verify(args.verify, cfg)
        from .experiment import run_experiment

        res = run_experiment(cfg, figures=not args.no_figures)
    except ConfigError as exc:
        print(f"ffpat: configuration error{_where(exc)}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"ffpat: numerical divergence{_where(exc)}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except Exception as exc:  # noqa: BLE001 - report the failing stage and exit nonzero
        print(f"ffpat: {type(exc).__name__}{_where(exc)}: {exc}", file=sys.stderr)
        return EXIT_OTHER
    for name, run in res.runs.items():
        print(f"{name}: best error {run.best_error:.4f} at iteration {run.best_index} "
              f"of {run.iterations}")
    print(f"artifacts written to {res.out}")
    return EXIT_OK


def _where(exc):
    stage = getattr(exc, "stage", None)
    return f" in stage '{stage}'" if stage else ""


if __name__ == "__main__":
    sys.exit(main())

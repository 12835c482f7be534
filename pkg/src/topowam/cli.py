"""Command-line front end: ``topowam {train,eval,ablate,rollout,check}``.

Exit codes: 0 success, 1 configuration error, 2 runtime error,
3 acceptance-check failure.
"""
import argparse
import json
import logging
import sys

from . import __version__
from .config import RunConfig, apply_overrides, load_config, override_keys
from .errors import CheckpointMismatch, ConfigError, TopoWamError

log = logging.getLogger("topowam")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3


def _add_overrides(parser):
    group = parser.add_argument_group("configuration overrides (kebab-case RunConfig fields)")
    for flag in sorted(override_keys()):
        group.add_argument(f"--{flag}", dest=f"ovr_{flag}", metavar="VALUE", default=None)
    group.add_argument("--seed", dest="ovr_seed", metavar="N", default=None, help="sets both env and train seeds")


def _config_from_args(args):
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("ovr_") and v is not None}
    if "seed" in overrides:
        try:
            overrides["seed"] = int(overrides["seed"])
        except ValueError:
            raise ConfigError(f"--seed expects an integer, got {overrides['seed']!r}") from None
    return apply_overrides(config, overrides)


def build_parser():
    p = argparse.ArgumentParser(prog="topowam", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a policy")
    t.add_argument("--config", help="JSON run configuration")
    t.add_argument("--out", help="output directory (default: output_dir/run_id)")
    t.add_argument("--resume", action="store_true", help="continue from checkpoints/latest.npz")
    t.add_argument("--no-figures", action="store_true")
    _add_overrides(t)

    e = sub.add_parser("eval", help="greedy success statistics of a checkpoint")
    e.add_argument("checkpoint")
    e.add_argument("--out", required=True)
    e.add_argument("--preset")
    e.add_argument("--noise", type=float, help="observation noise sigma (m)")
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--batches", type=int, default=1)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--posture", choices=("upright", "horizontal", "tilted"))
    e.add_argument("--tilt", type=float)
    e.add_argument("--scenario", choices=("upright", "horizontal"), help="expected checkpoint scenario")
    e.add_argument("--input-space", choices=("WL", "W", "P"), help="expected checkpoint input space")
    e.add_argument("--no-figures", action="store_true")

    a = sub.add_parser("ablate", help="train WL, W and P variants on matched seeds")
    a.add_argument("--config", help="JSON run configuration")
    a.add_argument("--out", required=True)
    a.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    a.add_argument("--resume", action="store_true", help="continue each run from its latest checkpoint")
    a.add_argument("--no-figures", action="store_true")
    _add_overrides(a)

    r = sub.add_parser("rollout", help="write a greedy-episode transcript")
    r.add_argument("checkpoint")
    r.add_argument("--out", required=True)
    r.add_argument("--preset")
    r.add_argument("--posture", choices=("upright", "horizontal", "tilted"))
    r.add_argument("--tilt", type=float)
    r.add_argument("--noise", type=float)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--no-figures", action="store_true")

    c = sub.add_parser("check", help="run the oracle and invariant checks")
    c.add_argument("--out", help="write check results to this CSV file")
    c.add_argument("--quick", action="store_true", help="smaller sample sizes")
    return p


def _plain(obj):
    """JSON fallback for numpy scalars and arrays in summaries."""
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(summary):
    print(json.dumps(summary, default=_plain))


def _run(args):
    from . import harness

    if args.command == "train":
        config = _config_from_args(args)
        out = harness.train(config, args.out, resume=args.resume, figures=not args.no_figures,
                            progress=_progress if args.verbose else None)
        _emit({"output": out, "config_hash": config.hash})
    elif args.command == "eval":
        if args.episodes < 1 or args.batches < 1:
            raise ConfigError("--episodes and --batches must be >= 1")
        summary = harness.evaluate(args.checkpoint, args.out, preset=args.preset, noise=args.noise,
                                   episodes=args.episodes, batches=args.batches, seed=args.seed,
                                   posture=args.posture, tilt=args.tilt, scenario=args.scenario,
                                   input_space=args.input_space, figures=not args.no_figures)
        _emit(summary)
    elif args.command == "ablate":
        if len(args.seeds) < 2:
            raise ConfigError("ablation needs at least two seeds")
        config = _config_from_args(args)
        summary = harness.ablate(config, args.seeds, args.out, figures=not args.no_figures,
                                 progress=_progress if args.verbose else None, resume=args.resume)
        _emit(summary)
    elif args.command == "rollout":
        summary = harness.rollout(args.checkpoint, args.out, preset=args.preset, posture=args.posture,
                                  tilt=args.tilt, seed=args.seed, noise=args.noise, figures=not args.no_figures)
        _emit(summary)
    elif args.command == "check":
        from .checks import run_checks

        results = run_checks(quick=args.quick, out=args.out)
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail} ({r.seconds:.1f} s)")
        if not all(r.passed for r in results):
            return EXIT_CHECK
    return EXIT_OK


def _progress(row):
    if row["episode"] % 10 == 0:
        log.info("episode %d mean reward %.3f final gamma %.3f", row["episode"], row["mean_reward"], row["final_gamma"])


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; report them as configuration errors
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return _run(args)
    except (ConfigError, CheckpointMismatch) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TopoWamError, OSError, RuntimeError, ValueError, FloatingPointError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

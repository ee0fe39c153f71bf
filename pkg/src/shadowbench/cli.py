"""Command-line front end: ``shadowbench {simulate,shadow,bme,experiment,validate}``.

Every subcommand accepts ``--config FILE``, a JSON object whose keys are
option names (dashes or underscores); explicit flags override it.  When the
environment variable SHADOWBENCH_SEED is set it replaces ``--seed``.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .bayes import (
    THIN_DEFAULTS,
    BornLikelihood,
    ChainConfig,
    FrobeniusShadowLikelihood,
    ObservableLikelihood,
    auto_K,
    bme_expectation,
    overlap_with_shadow,
    run_chain,
)
from .errors import ConfigError, ShadowBenchError
from .experiments import (
    ESTIMATORS,
    ExperimentPlan,
    aggregate,
    canonical_observables,
    desk_plan,
    full_plan,
    random_observable,
    run_experiment,
)
from .hilbert import normalize
from .shadow import Observable, Shadow, shadow_expectation_grid, shadow_matrix
from .simulate import RngStream, load_dataset, save_dataset, simulate_dataset
from .validation import SUITES, run_suite

logger = logging.getLogger("shadowbench")

DENSE_CHECK_MAX_DIM = 64


def _g17(x) -> str:
    return format(float(x), ".17g")


# -- spec parsers ----------------------------------------------------------


def parse_m_grid(spec: str) -> list[int]:
    """``"1:1000"``, ``"0:1000:50"`` or ``"1,50,100"`` (pieces may be mixed)."""
    values = set()
    for piece in spec.split(","):
        piece = piece.strip()
        if not piece:
            continue
        try:
            if ":" in piece:
                parts = [int(p) for p in piece.split(":")]
                if len(parts) == 2:
                    lo, hi, step = parts[0], parts[1], 1
                elif len(parts) == 3:
                    lo, hi, step = parts
                else:
                    raise ValueError
                if step < 1 or lo > hi:
                    raise ValueError
                values.update(range(lo, hi + 1, step))
            else:
                values.add(int(piece))
        except ValueError:
            raise ConfigError(f"bad M grid piece {piece!r}") from None
    if not values:
        raise ConfigError(f"empty M grid {spec!r}")
    return sorted(values)


def parse_observable(spec: str, dim: int) -> Observable:
    kind, _, arg = spec.partition(":")
    if kind == "canonical":
        if arg not in ("0", "1", "2"):
            raise ConfigError(f"canonical observable index must be 0, 1 or 2, got {arg!r}")
        return canonical_observables(dim)[int(arg)]
    if kind == "random":
        try:
            seed = int(arg)
        except ValueError:
            raise ConfigError(f"random observable needs an integer seed, got {arg!r}") from None
        return random_observable(dim, RngStream(seed, 0), tag=spec)
    if kind == "file":
        try:
            pairs = json.loads(Path(arg).read_text())
            vec = np.array([complex(re, im) for re, im in pairs])
        except (OSError, ValueError, TypeError) as exc:
            raise ConfigError(f"cannot read observable vector from {arg}: {exc}") from exc
        if vec.size != dim:
            raise ConfigError(f"observable in {arg} has dim {vec.size}, dataset has dim {dim}")
        return Observable.projector(normalize(vec), tag=spec)
    raise ConfigError(f"unknown observable spec {spec!r}")


def parse_observables(spec: str, dim: int) -> list[Observable]:
    out = []
    for piece in spec.split(","):
        piece = piece.strip()
        if piece == "canonical":
            out.extend(canonical_observables(dim))
        elif piece:
            out.append(parse_observable(piece, dim))
    if not out:
        raise ConfigError("no observables given")
    return out


# -- helpers ---------------------------------------------------------------


def _resolved(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "seed_given")}


def _write_config(out_dir: Path, args) -> None:
    (out_dir / "config.json").write_text(json.dumps(_resolved(args), indent=2, sort_keys=True) + "\n")


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


# -- subcommands -----------------------------------------------------------


def cmd_simulate(args) -> int:
    out = _out_dir(args.out)
    ext = "bin" if args.format == "bin" else "json"
    entries = []
    for trial in range(args.trials):
        d = simulate_dataset(args.dim, args.shots, args.seed, trial)
        path = save_dataset(d, out / f"d{args.dim}_t{trial}.{ext}", fmt=args.format)
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        entries.append({"file": path.name, "sha256": digest, "dim": d.dim, "shots": d.shots,
                        "seed": d.seed, "trial_index": d.trial_index})
        logger.info("wrote %s", path)
    manifest = {"format": args.format, "files": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    _write_config(out, args)
    return 0


def cmd_shadow(args) -> int:
    d = load_dataset(args.dataset)
    if args.m is not None and args.m_grid is not None:
        raise ConfigError("give either --m or --m-grid, not both")
    grid = parse_m_grid(args.m_grid) if args.m_grid is not None else [args.m if args.m is not None else d.shots]
    if grid[0] < 1 or grid[-1] > d.shots:
        raise ConfigError(f"M values must lie in [1, {d.shots}]")
    obs = parse_observable(args.observable, d.dim)
    values = shadow_expectation_grid(d, obs, grid)

    status = 0
    if args.dense_check:
        if d.dim > DENSE_CHECK_MAX_DIM:
            logger.warning("--dense-check skipped: D=%d exceeds %d", d.dim, DENSE_CHECK_MAX_DIM)
        else:
            lam = obs.as_matrix()
            dev = max(abs(float(np.trace(shadow_matrix(d, m) @ lam).real) - v) for m, v in zip(grid, values))
            print(f"dense-check max deviation: {dev:.3e}", file=sys.stderr)
            if dev >= 1e-10:
                print("dense-check FAILED (tolerance 1e-10)", file=sys.stderr)
                status = 1

    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "lambda_s"])
        for m, v in zip(grid, values):
            w.writerow([m, _g17(v)])
    finally:
        if args.out:
            fh.close()
    return status


def _chain_config(args, kind: str, dim: int) -> ChainConfig:
    over = dict(seed=args.seed, stream_id=args.stream)
    if args.samples is not None:
        over["samples"] = args.samples
    if args.thin is not None:
        over["thin"] = args.thin
    if args.burn_in is not None:
        over["burn_in"] = args.burn_in
    if args.beta != "auto":
        try:
            over.update(beta=float(args.beta), adapt_beta=False)
        except ValueError:
            raise ConfigError(f"--beta must be 'auto' or a number, got {args.beta!r}") from None
    return ChainConfig.default_for(kind, dim, **over)


def cmd_bme(args) -> int:
    d = load_dataset(args.dataset)
    m = d.shots if args.m is None else args.m
    if not 0 <= m <= d.shots:
        raise ConfigError(f"--m must lie in [0, {d.shots}]")
    observables = parse_observables(args.observables, d.dim)
    report = parse_observables(args.report, d.dim) if args.report else observables

    if args.K == "auto":
        K = auto_K(m, d.dim)
    else:
        try:
            K = float(args.K)
        except ValueError:
            raise ConfigError(f"--K must be 'auto' or a number, got {args.K!r}") from None

    if args.likelihood == "born":
        model = BornLikelihood.from_dataset(d, m)
    else:
        if m < 1:
            raise ConfigError(f"--likelihood {args.likelihood} needs --m >= 1")
        shadow = Shadow(d, m)
        if args.likelihood == "frobenius":
            model = FrobeniusShadowLikelihood(shadow, K)
        else:
            model = ObservableLikelihood.from_shadow(shadow, observables, K)

    config = _chain_config(args, args.likelihood, d.dim)
    post = run_chain(model, config)

    estimates = []
    for o in report:
        mean, se = bme_expectation(post, o)
        estimates.append({"observable": o.tag, "mean": mean, "stderr": se, "ground_truth": o.ground_truth()})
    summary = {
        "dataset": str(args.dataset),
        "dim": d.dim,
        "m": m,
        "likelihood": args.likelihood,
        "K": None if args.likelihood == "born" else K,
        "acceptance_rate": post.acceptance_rate,
        "beta": post.beta,
        "adapt_beta": config.adapt_beta,
        "samples": config.samples,
        "thin": config.thin,
        "burn_in": config.burn_in_steps,
        "seed": config.seed,
        "stream_id": config.stream_id,
        "overlap_with_shadow": overlap_with_shadow(post, d, m) if m >= 1 else None,
        "estimates": estimates,
        "warnings": list(post.warnings),
    }
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if args.out:
        out = _out_dir(args.out)
        (out / "posterior.json").write_text(text)
        with open(out / "estimates.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["observable", "mean", "stderr", "ground_truth"])
            for e in estimates:
                w.writerow([e["observable"], _g17(e["mean"]), _g17(e["stderr"]), _g17(e["ground_truth"])])
        _write_config(out, args)
    else:
        sys.stdout.write(text)
    return 0


def _plan_from_args(args) -> ExperimentPlan:
    if args.plan:
        plan = ExperimentPlan.load(args.plan)
        if args.seed_given:
            plan.root_seed = args.seed
        return plan
    kw = {}
    if args.dim:
        kw["dims"] = [int(x) for x in args.dim.split(",")]
    if args.trials is not None:
        kw["trials"] = args.trials
    if args.m_grid:
        kw["m_grid"] = parse_m_grid(args.m_grid)
    if args.shadow_m_grid:
        kw["shadow_m_grid"] = parse_m_grid(args.shadow_m_grid)
    if args.chain_overrides:
        try:
            kw["chain_overrides"] = json.loads(args.chain_overrides)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--chain-overrides is not valid JSON: {exc}") from exc
    if args.K not in (None, "auto"):
        kw["K"] = float(args.K)
    kw["root_seed"] = args.seed
    if args.dataset_dir:
        kw["dataset_dir"] = args.dataset_dir
    estimators = args.estimators.split(",") if args.estimators else None
    build = full_plan if args.profile == "full" else desk_plan
    return build(picture=args.picture, estimators=estimators or ["shadow"], **kw)


def cmd_experiment(args) -> int:
    if args.resume and args.overwrite:
        raise ConfigError("--resume and --overwrite are mutually exclusive")
    plan = _plan_from_args(args)
    out = _out_dir(args.out)
    mode = "resume" if args.resume else "overwrite" if args.overwrite else "auto"
    results = run_experiment(plan, out, workers=args.workers, mode=mode)
    _write_config(out, args)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["picture", "dim", "estimator", "observable", "m", "mse", "n_trials"])
    for row in aggregate(results):
        row["mse"] = format(row["mse"], ".6g")
        w.writerow(row.values())
    return 0


def cmd_validate(args) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    failed = 0
    for name in suites:
        for check in run_suite(name, args.seed):
            print(check.line())
            failed += not check.passed
    if failed:
        print(f"{failed} check(s) failed", file=sys.stderr)
        return 1
    return 0


# -- parser ----------------------------------------------------------------


SUBCOMMANDS = ("simulate", "shadow", "bme", "experiment", "validate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shadowbench", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file of option defaults")
        p.add_argument("--log-level", default=argparse.SUPPRESS, help="logging level")
        return p

    p = common(sub.add_parser("simulate", help="simulate measurement datasets"))
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=("json", "bin"), default="json")
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("shadow", help="shadow estimates from a dataset"))
    p.add_argument("--dataset", required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--m-grid")
    p.add_argument("--observable", default="canonical:0", help="canonical:N | random:SEED | file:PATH")
    p.add_argument("--dense-check", action="store_true")
    p.add_argument("--out", help="CSV file (default: standard output)")
    p.set_defaults(func=cmd_shadow)

    p = common(sub.add_parser("bme", help="run one Bayesian chain"))
    p.add_argument("--dataset", required=True)
    p.add_argument("--m", type=int, help="number of leading outcomes (default: all)")
    p.add_argument("--likelihood", choices=tuple(THIN_DEFAULTS), default="born")
    p.add_argument("--observables", default="canonical",
                   help="comma list of observable specs; 'canonical' means all three")
    p.add_argument("--report", help="observables to estimate (default: --observables)")
    p.add_argument("--K", default="auto")
    p.add_argument("--samples", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--beta", default="auto")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bme)

    p = common(sub.add_parser("experiment", help="run an evaluation campaign"))
    p.add_argument("--plan")
    p.add_argument("--profile", choices=("desk", "full"), default="desk")
    p.add_argument("--picture", type=int, choices=(1, 2), default=1)
    p.add_argument("--dim", help="comma list of dimensions")
    p.add_argument("--trials", type=int)
    p.add_argument("--estimators", help=f"comma list from {','.join(ESTIMATORS)}")
    p.add_argument("--m-grid")
    p.add_argument("--shadow-m-grid")
    p.add_argument("--chain-overrides", help="JSON object of ChainConfig fields")
    p.add_argument("--K", default=None)
    p.add_argument("--dataset-dir")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = common(sub.add_parser("validate", help="run statistical self-checks"))
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_validate)
    return parser


def _apply_config_file(parser, argv):
    """Load ``--config`` into subparser defaults and re-parse so flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    found, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in SUBCOMMANDS), None)
    if not found.config or command is None:
        return parser.parse_args(argv)
    try:
        doc = json.loads(Path(found.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {found.config}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {found.config} must hold a JSON object")
    sub = parser._subparsers._group_actions[0].choices[command]
    sub.set_defaults(**{k.replace("-", "_"): v for k, v in doc.items()})
    # required options may now be satisfied by the file
    for action in sub._actions:
        if action.dest in doc or action.dest.replace("_", "-") in doc:
            action.required = False
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = _apply_config_file(parser, argv)
        logging.basicConfig(level=str(args.log_level).upper(), stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        args.seed_given = "--seed" in argv
        env_seed = os.environ.get("SHADOWBENCH_SEED")
        if env_seed is not None and hasattr(args, "seed"):
            try:
                args.seed = int(env_seed)
            except ValueError:
                raise ConfigError(f"SHADOWBENCH_SEED must be an integer, got {env_seed!r}") from None
            args.seed_given = True
        return args.func(args)
    except ShadowBenchError as exc:
        print(f"shadowbench: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"shadowbench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Four modes over three experiments:

  * level-stats   per-level correction statistics CSV
  * mlmc-sweep    adaptive MLMC runs over a tolerance grid, CSV
  * baseline      single-level nested Monte Carlo over the same grid, CSV
  * oracle-check  discrete-problem invariant suite, pass/fail report

Configuration comes from an optional JSON file plus flag overrides (flags
win). Every run logs the fully resolved configuration and seed. Exit codes:
0 success, 1 property failure, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from . import estimators as est
from .discrete import DiscreteNestedProblem, DiscreteNestedSpec, oracle_level_value, oracle_u0
from .driver import MlmcConfig, choose_samples, run_mlmc
from .experiments import (
    bermudan_config,
    euler_like_spec,
    oracle_spec,
    run_epsilon_sweep,
    run_level_stats,
    vanishing_spec,
    zero_perturbation_spec,
)
from .problems import InnerSchedule
from .randomness import derive_stream
from .sde import SCHEME_ANT_MILSTEIN, SCHEME_EULER, bermudan_problem

log = logging.getLogger("nestmlmc")

EXIT_OK = 0
EXIT_PROPERTY = 1
EXIT_CONFIG = 2
EXIT_IO = 3

EXPERIMENTS = ("bermudan-euler", "bermudan-milstein", "discrete-oracle")
MODES = ("level-stats", "mlmc-sweep", "oracle-check", "baseline")

LEVEL_STATS_HEADER = ["level", "sample_cost", "mean", "abs_mean", "var",
                      "kurtosis", "n"]
SWEEP_HEADER = ["tol", "P", "cost", "L", "bias", "converged"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Fully resolved run configuration."""

    experiment: str = "discrete-oracle"
    mode: str = "level-stats"
    seed: int = 0
    samples_per_level: int = 10_000
    level_min: int = 0
    level_max: int = 8
    tolerances: list = field(default_factory=lambda: [0.08, 0.04, 0.02])
    repetitions: int = 1
    output: str = "-"
    m00: int = 16
    zeta: float = 1.0
    kind: str = ""          # estimator family; empty = experiment default
    threads: int = 1
    spec: dict | None = None  # discrete spec override
    # MlmcConfig pass-through fields
    l_max: int = 12
    initial_samples: int = 100
    safety: float = 1.65
    split: float = 0.5
    chunk_size: int = 20_000

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.kind and self.kind not in est.ESTIMATOR_KINDS:
            raise ConfigError(f"unknown estimator kind {self.kind!r}")
        tols = [float(t) for t in self.tolerances]
        if any(t <= 0 for t in tols) or tols != sorted(tols, reverse=True):
            raise ConfigError(
                "tolerances must be positive and strictly decreasing")
        if len(set(tols)) != len(tols):
            raise ConfigError("tolerances must be strictly decreasing")
        if not 0 <= self.level_min <= self.level_max:
            raise ConfigError("need 0 <= level-min <= level-max")
        if self.samples_per_level < 1 or self.repetitions < 1:
            raise ConfigError("sample and repetition counts must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")


def _default_kind(experiment: str) -> str:
    if experiment == "bermudan-euler":
        return est.KIND_ANT_ML_Y
    return est.KIND_DOUBLY_ANT


def build_problem(config: RunConfig):
    if config.experiment == "bermudan-euler":
        return bermudan_problem(bermudan_config(), SCHEME_EULER)
    if config.experiment == "bermudan-milstein":
        return bermudan_problem(bermudan_config(), SCHEME_ANT_MILSTEIN)
    spec = (DiscreteNestedSpec.from_dict(config.spec)
            if config.spec else oracle_spec())
    return DiscreteNestedProblem(spec)


def _open_output(path: str):
    if path == "-":
        return sys.stdout, False
    try:
        return open(path, "w", newline="", encoding="utf-8"), True
    except OSError as exc:
        raise IOError(f"cannot write {path}: {exc}") from exc


def _write_csv(path: str, header: list[str], rows: list[list]):
    fh, close = _open_output(path)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if close:
            fh.close()


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def cmd_level_stats(config: RunConfig) -> int:
    problem = build_problem(config)
    kind = config.kind or _default_kind(config.experiment)
    schedule = InnerSchedule(m00=config.m00, zeta=config.zeta)
    levels = list(range(config.level_min, config.level_max + 1))
    stats = run_level_stats(problem, kind, schedule, levels,
                            config.samples_per_level, config.seed,
                            chunk_size=config.chunk_size,
                            threads=config.threads)
    rows = []
    for s in stats:
        try:
            kurt = s.kurtosis()
        except ValueError:
            kurt = float("nan")
        rows.append([s.level, _fmt(s.cost_per_sample), _fmt(s.mean),
                     _fmt(s.abs_mean), _fmt(s.variance), _fmt(kurt), s.count])
    _write_csv(config.output, LEVEL_STATS_HEADER, rows)
    return EXIT_OK


def cmd_mlmc_sweep(config: RunConfig, baseline: bool = False) -> int:
    problem = build_problem(config)
    kind = config.kind or _default_kind(config.experiment)
    schedule = InnerSchedule(m00=config.m00, zeta=config.zeta)
    base = MlmcConfig(epsilon=float(config.tolerances[0]),
                      l_min=config.level_min, l_max=config.l_max,
                      initial_samples=config.initial_samples,
                      safety=config.safety, split=config.split,
                      chunk_size=config.chunk_size)
    rows = run_epsilon_sweep(problem, kind, config.tolerances, config.seed,
                             repetitions=config.repetitions, base_config=base,
                             schedule=schedule, baseline=baseline,
                             threads=config.threads)
    _write_csv(config.output, SWEEP_HEADER,
               [[_fmt(r[c]) for c in SWEEP_HEADER] for r in rows])
    return EXIT_OK


def _oracle_properties(config: RunConfig):
    """The discrete-problem invariant suite: (name, passed) pairs."""
    schedule = InnerSchedule(m00=config.m00, zeta=config.zeta)
    seed = config.seed
    results = []

    # Telescoping: partial sums of correction means track enumerated level
    # values for every estimator family (3 sigma).
    spec = (DiscreteNestedSpec.from_dict(config.spec)
            if config.spec else oracle_spec())
    problem = DiscreteNestedProblem(spec)
    n, l_hi = 40_000, 3
    for kind in est.ESTIMATOR_KINDS:
        stats = run_level_stats(problem, kind, schedule,
                                range(l_hi + 1), n, seed,
                                chunk_size=config.chunk_size,
                                threads=config.threads)
        total = sum(s.mean for s in stats)
        se = np.sqrt(sum(s.variance / s.count for s in stats))
        if kind in (est.KIND_ANT_MC, est.KIND_ANT_ML):
            # exact outer variable; only the inner bias remains
            target_spec = DiscreteNestedSpec.from_dict(spec.to_dict())
            target_spec.delta_y = 0.0
            target_spec.gamma = 0.0
            target = oracle_level_value(target_spec, l_hi)
            if kind == est.KIND_ANT_MC:
                target = oracle_u0(spec)  # exact inner sampling
        else:
            target = oracle_level_value(spec, l_hi)
        ok = abs(total - target) <= 3.0 * se + 1e-12
        results.append((f"telescoping[{kind}]", ok))

    # Vanishing: the straddle probability of the antithetic MC difference
    # decreases in the level.
    vspec = vanishing_spec()
    vprob = DiscreteNestedProblem(vspec)
    vsched = InnerSchedule(m00=4, zeta=1.0)
    sampler = est.make_level_sampler(vprob, est.KIND_ANT_MC, vsched)
    probs = []
    for level in range(1, 5):
        cs = sampler(level, derive_stream(seed, (90, level)), 50_000)
        probs.append(float(np.mean(cs.values != 0.0)))
    results.append(("antithetic-vanishing",
                    all(a > b for a, b in zip(probs, probs[1:]))))

    # Zero perturbations: corrections above level 0 have mean 0 (3 sigma).
    zprob = DiscreteNestedProblem(zero_perturbation_spec())
    zstats = run_level_stats(zprob, est.KIND_DOUBLY_ANT, schedule,
                             range(1, 4), 20_000, seed + 1,
                             chunk_size=config.chunk_size)
    ok = all(s.abs_mean <= 3.0 * np.sqrt(s.variance / s.count) + 1e-12
             for s in zstats)
    results.append(("zero-perturbation-bias", ok))

    # Allocation optimality: driver's sample rule matches the closed form.
    got = choose_samples([4.0, 1.0], [1.0, 4.0], 1.0, split=0.5, safety=1.0)
    results.append(("allocation-closed-form", got == [16, 4]))

    # Accuracy: one adaptive run lands within 3 epsilon of the enumerated U0.
    u0 = oracle_u0(spec)
    eps = 0.01 * abs(u0)
    res = run_mlmc(problem, est.KIND_DOUBLY_ANT,
                   MlmcConfig(epsilon=eps, chunk_size=config.chunk_size),
                   seed + 2, schedule=schedule)
    results.append(("mlmc-accuracy", abs(res.estimate - u0) <= 3.0 * eps))
    return results


def cmd_oracle_check(config: RunConfig) -> int:
    if config.experiment != "discrete-oracle":
        raise ConfigError("oracle-check requires the discrete-oracle experiment")
    results = _oracle_properties(config)
    fh, close = _open_output(config.output)
    try:
        failed = 0
        for name, ok in results:
            fh.write(f"{'PASS' if ok else 'FAIL'} {name}\n")
            failed += not ok
        fh.write(f"{len(results) - failed}/{len(results)} properties passed\n")
    finally:
        if close:
            fh.close()
    return EXIT_OK if failed == 0 else EXIT_PROPERTY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nestmlmc",
        description="Nested multilevel Monte Carlo experiment runner")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples-per-level", type=int, dest="samples_per_level")
    p.add_argument("--level-min", type=int, dest="level_min")
    p.add_argument("--level-max", type=int, dest="level_max")
    p.add_argument("--tolerances", type=float, nargs="+")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--output", "-o")
    p.add_argument("--m00", type=int)
    p.add_argument("--zeta", type=float)
    p.add_argument("--kind", choices=list(est.ESTIMATOR_KINDS))
    p.add_argument("--threads", type=int)
    p.add_argument("--l-max", type=int, dest="l_max",
                   help="maximum refinement level of the adaptive driver")
    p.add_argument("--initial-samples", type=int, dest="initial_samples")
    p.add_argument("--safety", type=float)
    p.add_argument("--split", type=float)
    p.add_argument("--chunk-size", type=int, dest="chunk_size")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    data = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise IOError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {args.config}: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            data[f.name] = v
    cfg = RunConfig(**data)
    cfg.validate()
    return cfg, args.verbose


def main(argv=None) -> int:
    try:
        cfg, verbose = resolve_config(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IOError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.info("resolved config: %s", json.dumps(cfg.__dict__, default=str,
                                               sort_keys=True))
    try:
        if cfg.mode == "level-stats":
            return cmd_level_stats(cfg)
        if cfg.mode == "mlmc-sweep":
            return cmd_mlmc_sweep(cfg)
        if cfg.mode == "baseline":
            return cmd_mlmc_sweep(cfg, baseline=True)
        return cmd_oracle_check(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IOError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

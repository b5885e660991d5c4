"""The ``migrantcdr`` command.

    migrantcdr synth    --config run.yaml --out data/
    migrantcdr pipeline --config run.yaml --out results/ [experiment]

Configuration is YAML (JSON also parses). Unknown keys are rejected. Exit
codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .cohort import CohortConfig, label_users
from .core import CohortLabel, TimeWindow
from .experiments import (GROUPS, LEAVING_VS_STAYING, MIGRANT_VS_LOCAL, Corpus, ExperimentConfig,
                          LearnerSpec, Report, assemble_features, run_ablation, run_cv,
                          run_disentanglement, run_early_detection, run_trends,
                          write_cv_report, write_features, write_table_report, write_trends)
from .geo import GeoConfig, build_price_index
from .ingest import (ParseStats, filter_high_degree, load_call_table, parse_aliases,
                     parse_estates, parse_profiles)
from .learn.metrics import random_guess
from .synth import GeneratorConfig, generate, validate

log = logging.getLogger("migrantcdr")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
EXPERIMENTS = ("migrant-local", "churn", "ablation", "early", "disentangle", "trends")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage {stage!r} failed: {exc}")
        self.stage = stage


@contextlib.contextmanager
def stage(name: str):
    t0 = time.perf_counter()
    log.info("stage %s: start", name)
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    log.info("stage %s: %.2fs", name, time.perf_counter() - t0)


# -- configuration ------------------------------------------------------------

@dataclass
class DataPaths:
    dir: str | None = None
    calls: str | None = None
    profiles: str | None = None
    estates: str | None = None
    aliases: str | None = None
    epoch: int = GeneratorConfig.epoch
    home_region: str = GeneratorConfig.home_region

    def resolve(self, base: Path) -> dict[str, Path | None]:
        root = base / self.dir if self.dir else base
        out = {}
        for name in ("calls", "profiles", "estates", "aliases"):
            given = getattr(self, name)
            if given is not None:
                out[name] = base / given
            elif self.dir is not None:
                p = root / f"{name}.csv"
                out[name] = p if (name != "aliases" or p.exists()) else None
            else:
                out[name] = None
        return out


@dataclass
class FilterConfig:
    max_unique_contacts: int | None = 500
    percentile: float | None = None


@dataclass
class PipelineSpec:
    learner: dict = field(default_factory=dict)
    folds: int = 5
    k_days: int = 14
    early_k: list = field(default_factory=lambda: list(range(3, 15)))
    disentangle_k: list = field(default_factory=lambda: [3, 5, 8, 11, 14])
    disentangle_t: list = field(default_factory=lambda: [3, 5, 8, 11, 14])
    compare: list = field(default_factory=lambda: ["logreg", "forest"])


@dataclass
class RunConfig:
    seed: int = 0
    workers: int = 1
    strict: bool = False
    data: DataPaths = field(default_factory=DataPaths)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    cohort: CohortConfig = field(default_factory=CohortConfig)
    geo: GeoConfig = field(default_factory=GeoConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    experiment: PipelineSpec = field(default_factory=PipelineSpec)
    base_dir: Path = Path(".")

    def experiment_config(self, task: str, **kw) -> ExperimentConfig:
        e = self.experiment
        learner = LearnerSpec(**{**e.learner, **kw.pop("learner", {})})
        return ExperimentConfig(task=task, k_days=kw.pop("k_days", e.k_days), folds=e.folds,
                                learner=learner, seed=self.seed, workers=self.workers, **kw)


def _strict_fields(cls, d, where: str) -> dict:
    if d is None:
        return {}
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name for f in fields(cls)}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    return dict(d)


def _window(v, where: str) -> TimeWindow:
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"{where}: expected [start_day, end_day]")
    return TimeWindow(int(v[0]), int(v[1]))


def parse_config(raw: dict | None, base_dir: Path = Path("."), require_seed: bool = True) -> RunConfig:
    """Validate a raw mapping into a :class:`RunConfig`; raises ConfigError."""
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping")
    top = _strict_fields(RunConfig, raw, "config")
    if "base_dir" in top:
        raise ConfigError("config: unknown keys ['base_dir']")
    if require_seed and "seed" not in top:
        raise ConfigError("missing required key 'seed'")
    try:
        rc = RunConfig(base_dir=base_dir)
        if "seed" in top:
            rc.seed = int(top["seed"])
        rc.workers = int(top.get("workers", 1))
        if rc.workers < 1:
            raise ConfigError("workers must be >= 1")
        rc.strict = bool(top.get("strict", False))
        rc.data = DataPaths(**_strict_fields(DataPaths, top.get("data"), "data"))
        gen = _strict_fields(GeneratorConfig, top.get("generator"), "generator")
        if "seed" in gen:
            raise ConfigError("generator: set the seed at the top level")
        rc.generator = GeneratorConfig.from_dict({**gen, "seed": rc.seed})
        coh = _strict_fields(CohortConfig, top.get("cohort"), "cohort")
        for w in ("week1", "week2", "week3"):
            if w in coh:
                coh[w] = _window(coh[w], f"cohort.{w}")
        rc.cohort = CohortConfig(**coh)
        geo = _strict_fields(GeoConfig, top.get("geo"), "geo")
        for h in ("work_hours", "home_hours"):
            if h in geo and geo[h] is not None:
                geo[h] = tuple(int(x) for x in geo[h])
        rc.geo = GeoConfig(**geo)
        rc.filter = FilterConfig(**_strict_fields(FilterConfig, top.get("filter"), "filter"))
        rc.experiment = PipelineSpec(**_strict_fields(PipelineSpec, top.get("experiment"), "experiment"))
        LearnerSpec(**rc.experiment.learner)
        bad = set(rc.experiment.compare) - {"logreg", "forest"}
        if bad:
            raise ConfigError(f"experiment.compare: unknown learners {sorted(bad)}")
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return rc


def load_config(path: str | None, seed: int | None = None, workers: int | None = None,
                strict: bool | None = None) -> RunConfig:
    """Read the file (if any) and apply command-line overrides."""
    if path is None:
        raw, base = {}, Path(".")
    else:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            raw = yaml.safe_load(p.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from exc
        base = p.parent
    if seed is not None:
        raw = {**(raw or {}), "seed": seed}
    rc = parse_config(raw, base, require_seed=path is not None)
    if workers is not None:
        if workers < 1:
            raise ConfigError("--workers must be >= 1")
        rc.workers = workers
    if strict is not None and strict:
        rc.strict = True
    return rc


# -- commands -----------------------------------------------------------------

def cmd_synth(rc: RunConfig, out_dir) -> int:
    with stage("generate"):
        bundle = generate(rc.generator)
    with stage("write"):
        paths = bundle.write(out_dir)
    with stage("validate"):
        report = validate(bundle)
    for p in paths:
        print(p)
    print(report)
    if not report.ok:
        log.warning("generator validation failed: %s", "; ".join(report.violations()))
        if rc.strict:
            return EXIT_RUNTIME
    return EXIT_OK


def load_corpus(rc: RunConfig, out: Path | None = None) -> Corpus:
    paths = rc.data.resolve(rc.base_dir)
    for name in ("calls", "profiles", "estates"):
        if paths[name] is None:
            raise ConfigError(f"data.{name} (or data.dir) is required")
    for name, p in paths.items():
        if p is not None and not p.is_file():
            raise ConfigError(f"data.{name}: file not found: {p}")
    stats = ParseStats()
    with stage("ingest"):
        aliases = parse_aliases(paths["aliases"]) if paths["aliases"] else {}
        table = load_call_table(paths["calls"], rc.strict, stats, aliases)
        profiles = parse_profiles(paths["profiles"], rc.data.home_region, rc.strict, stats)
        estates = parse_estates(paths["estates"], rc.strict, stats)
        log.info("ingest: %d calls, %d users, %d profiles, %d estates, %d rows rejected",
                 len(table), table.n_users, len(profiles), len(estates), stats.rejected)
    with stage("filter"):
        f = rc.filter
        table, removed = filter_high_degree(table, f.max_unique_contacts, f.percentile)
        log.info("filter: removed %d high-degree users", len(removed))
    with stage("label"):
        labels = label_users(table, profiles, rc.cohort, rc.data.epoch)
        counts = {c.value: 0 for c in CohortLabel}
        for lab in labels.values():
            counts[lab.value] += 1
        log.info("label: %s", ", ".join(f"{k}={v}" for k, v in counts.items()))
    with stage("price-index"):
        index = build_price_index(estates, rc.geo.cell_deg, rc.geo.price_radius_km)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        with (out / "labels.csv").open("w", encoding="utf-8") as fh:
            fh.write("user,label\n")
            fh.writelines(f"{u},{labels[u].value}\n" for u in sorted(labels))
    return Corpus(table, profiles, labels, index, rc.data.epoch, rc.cohort, rc.geo)


def _builder(corpus: Corpus, task: str, groups=GROUPS):
    cache = {}

    def build(k: int):
        if k not in cache:
            with stage(f"features[{task},k={k}]"):
                cache[k] = assemble_features(corpus, k, task, groups)
        return cache[k]
    return build


def run_experiments(rc: RunConfig, corpus: Corpus, which: list[str], out: Path) -> list[str]:
    """Run the selected experiments; returns summary lines for stdout."""
    reports = out / "reports"
    summary: list[str] = []
    e = rc.experiment
    churn = _builder(corpus, LEAVING_VS_STAYING)

    def line(exp: str, row, rep: Report) -> None:
        m = rep.mean
        summary.append(f"{exp:<14} {str(row):<14} {m.precision:>9.4f} {m.recall:>9.4f} {m.f1:>9.4f}")

    if "migrant-local" in which:
        ml = _builder(corpus, MIGRANT_VS_LOCAL)
        cfg = rc.experiment_config(MIGRANT_VS_LOCAL)
        with stage("migrant-local"):
            ds = ml(cfg.k_days)
            rep = run_cv(cfg, ds)
            write_cv_report(reports / MIGRANT_VS_LOCAL / "cv", rep, "migrant vs local: cross-validation")
            line("migrant-local", "cv", rep)
            ab = run_ablation(cfg, ds)
            write_table_report(reports / MIGRANT_VS_LOCAL / "ablation", ["group"], ab,
                               "migrant vs local: feature-group ablation")
            for g, r in ab.items():
                line("ml-ablation", g, r)

    if "churn" in which:
        cfg = rc.experiment_config(LEAVING_VS_STAYING)
        with stage("churn"):
            ds = churn(cfg.k_days)
            table = {"random_guess": Report([], random_guess(float(ds.y.mean())), cfg.echo())}
            for kind in e.compare:
                c = rc.experiment_config(LEAVING_VS_STAYING, learner={"kind": kind})
                table[kind] = run_cv(c, ds)
                if kind == cfg.learner.kind:
                    write_cv_report(reports / LEAVING_VS_STAYING / "cv", table[kind],
                                    f"leaving vs staying: {kind} cross-validation")
            if cfg.learner.kind not in e.compare:
                write_cv_report(reports / LEAVING_VS_STAYING / "cv", run_cv(cfg, ds),
                                f"leaving vs staying: {cfg.learner.kind} cross-validation")
            write_table_report(reports / LEAVING_VS_STAYING / "classifiers", ["classifier"], table,
                               "leaving vs staying: classifier comparison")
            for k, r in table.items():
                line("churn", k, r)

    if "ablation" in which:
        cfg = rc.experiment_config(LEAVING_VS_STAYING)
        with stage("ablation"):
            ab = run_ablation(cfg, churn(cfg.k_days))
            write_table_report(reports / LEAVING_VS_STAYING / "ablation", ["group"], ab,
                               "leaving vs staying: feature-group ablation")
            for g, r in ab.items():
                line("ablation", g, r)

    if "early" in which:
        cfg = rc.experiment_config(LEAVING_VS_STAYING)
        with stage("early"):
            series = run_early_detection(cfg, e.early_k, churn)
            write_table_report(reports / LEAVING_VS_STAYING / "early", ["k_days"], series,
                               "leaving vs staying: early detection")
            for k, r in series.items():
                line("early", k, r)

    if "disentangle" in which:
        cfg = rc.experiment_config(LEAVING_VS_STAYING)
        with stage("disentangle"):
            mat = run_disentanglement(cfg, e.disentangle_k, e.disentangle_t, churn)
            write_table_report(reports / LEAVING_VS_STAYING / "disentangle", ["k_days", "t_days"], mat,
                               "leaving vs staying: train on k days, test on t days")
            for (k, t), r in mat.items():
                line("disentangle", f"k={k},t={t}", r)

    if "trends" in which:
        with stage("trends"):
            rows = run_trends(corpus)
            write_trends(reports / "cohorts" / "trends", rows)
            summary.append(f"{'trends':<14} {len(rows)} rows")
    return summary


def cmd_pipeline(rc: RunConfig, out_dir, experiment: str = "all") -> int:
    which = list(EXPERIMENTS) if experiment == "all" else [experiment]
    out = Path(out_dir)
    corpus = load_corpus(rc, out)
    with stage("featurize"):
        n = write_features(out / "features.csv", corpus, rc.experiment.k_days)
        log.info("featurize: %d users, first %d days each", n, rc.experiment.k_days)
    lines = run_experiments(rc, corpus, which, out)
    print(f"{'experiment':<14} {'row':<14} {'precision':>9} {'recall':>9} {'f1':>9}")
    print("\n".join(lines))
    return EXIT_OK


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="migrantcdr", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON run configuration")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=int, help="overrides the seed in the config file")
    common.add_argument("--workers", type=int, help="worker threads (results do not depend on it)")
    common.add_argument("--strict", action="store_true", default=None,
                        help="fail on malformed input rows / generator validation failures")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="generate a synthetic data bundle")
    pl = sub.add_parser("pipeline", parents=[common], help="ingest, label, featurize and run experiments")
    pl.add_argument("experiment", nargs="?", default="all", choices=[*EXPERIMENTS, "all"])
    pl.add_argument("--data", help="directory holding calls.csv, profiles.csv, estates.csv "
                                   "(and optionally aliases.csv); overrides data paths in the config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        rc = load_config(args.config, args.seed, args.workers, args.strict)
        if getattr(args, "data", None):
            rc.data.dir = str(Path(args.data).resolve())
            rc.data.calls = rc.data.profiles = rc.data.estates = rc.data.aliases = None
        if args.command == "synth":
            return cmd_synth(rc, args.out)
        return cmd_pipeline(rc, args.out, args.experiment)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        if isinstance(exc.__cause__, ConfigError):
            print(f"configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        log.debug("traceback", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Experiment harness: feature assembly, cross-validation, ablations,
early detection, train/test horizon disentanglement, and cohort trends."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .cohort import CohortConfig, first_activity_day
from .core import CohortLabel, TimeWindow, UserProfile
from .engine import ALL_FEATURES, FEATURE_GROUPS, GROUP_OF, FeatureEngine
from .geo import GeoConfig, PriceIndex
from .ingest import CallTable
from .learn import (Dataset, Metrics, evaluate, gini_importance, impute_and_standardize,
                    mean_metrics, predict_labels, stratified_kfold, train_forest, train_logreg)

log = logging.getLogger(__name__)

MIGRANT_VS_LOCAL = "MigrantVsLocal"
LEAVING_VS_STAYING = "LeavingVsStaying"
TASKS = (MIGRANT_VS_LOCAL, LEAVING_VS_STAYING)
GROUPS = ("ego", "call", "geo", "price")


@dataclass
class LearnerSpec:
    kind: str = "forest"
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 5
    features_per_split: str | int | float = "sqrt"
    class_weighting: str = "balanced"
    l2: float = 0.01

    def __post_init__(self):
        if self.kind not in ("forest", "logreg"):
            raise ValueError(f"unknown learner {self.kind!r}")

    def fit(self, X, y, seed: int, workers: int = 1):
        if self.kind == "logreg":
            return train_logreg(X, y, l2=self.l2, class_weighting=self.class_weighting, seed=seed)
        return train_forest(X, y, n_trees=self.n_trees, max_depth=self.max_depth,
                            min_leaf=self.min_leaf, features_per_split=self.features_per_split,
                            class_weighting=self.class_weighting, seed=seed, workers=workers)


@dataclass
class ExperimentConfig:
    task: str = LEAVING_VS_STAYING
    k_days: int = 14
    t_days: int | None = None
    folds: int = 5
    feature_groups: tuple[str, ...] = GROUPS
    learner: LearnerSpec = field(default_factory=LearnerSpec)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.k_days < 1:
            raise ValueError("k_days must be >= 1")
        if self.t_days is not None and self.t_days < self.k_days:
            raise ValueError("t_days must be >= k_days")
        bad = set(self.feature_groups) - set(GROUPS)
        if bad:
            raise ValueError(f"unknown feature groups {sorted(bad)}")
        if isinstance(self.learner, dict):
            self.learner = LearnerSpec(**self.learner)
        self.feature_groups = tuple(self.feature_groups)

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("workers")
        return d


@dataclass
class Report:
    folds: list[Metrics]
    mean: Metrics
    config: dict
    runtime_s: float = 0.0
    importances: list[tuple[str, float]] | None = None
    skipped: bool = False

    def same_values(self, other: "Report") -> bool:
        return (self.folds == other.folds and self.mean == other.mean
                and self.importances == other.importances)


@dataclass
class Corpus:
    """Cleaned inputs plus the labels, ready for feature extraction."""

    table: CallTable
    profiles: Mapping[str, UserProfile]
    labels: Mapping[str, CohortLabel]
    price_index: PriceIndex | None = None
    epoch: int = 0
    cohort: CohortConfig = field(default_factory=CohortConfig)
    geo: GeoConfig = field(default_factory=GeoConfig)
    _engine: FeatureEngine | None = field(default=None, repr=False)

    @property
    def engine(self) -> FeatureEngine:
        if self._engine is None:
            self._engine = FeatureEngine(self.table, self.profiles, self.price_index,
                                         epoch=self.epoch, geo=self.geo)
        return self._engine


def task_users(labels: Mapping[str, CohortLabel], task: str) -> tuple[list[str], np.ndarray]:
    """In-scope users (sorted) and their binary targets."""
    if task == LEAVING_VS_STAYING:
        pos, neg = {CohortLabel.LEAVING}, {CohortLabel.STAYING}
    elif task == MIGRANT_VS_LOCAL:
        pos, neg = {CohortLabel.LEAVING, CohortLabel.STAYING}, {CohortLabel.LOCAL}
    else:
        raise ValueError(f"unknown task {task!r}")
    users = sorted(u for u, lab in labels.items() if lab in pos or lab in neg)
    y = np.array([labels[u] in pos for u in users], dtype=np.int64)
    return users, y


def task_features(task: str, groups: Sequence[str] = GROUPS) -> list[str]:
    names = [f for f in ALL_FEATURES if GROUP_OF[f] in groups]
    if task == MIGRANT_VS_LOCAL:
        names.remove("townsman_frac")
    return names


def user_windows(corpus: Corpus, users: Sequence[str], horizon_days: int) -> list[TimeWindow]:
    """Observation window of each user: its first ``horizon_days`` from arrival.

    Migrants start on their first active day, locals at the start of week 1;
    windows are clipped at the start of week 3. Users must have calls.
    """
    cc = corpus.cohort
    code = {str(u): i for i, u in enumerate(corpus.table.users)}
    first = first_activity_day(corpus.table, corpus.epoch)
    out = []
    for u in users:
        if corpus.labels[u] == CohortLabel.LOCAL:
            start = cc.week1.start_day
        else:
            start = max(int(first[code[u]]), cc.week1.start_day)
        end = min(start + horizon_days, cc.week3.start_day)
        out.append(TimeWindow(start, max(end, start + 1)))
    return out


def write_features(path, corpus: Corpus, horizon_days: int) -> int:
    """Write ``user,label,window,<features>`` for every labeled, active non-excluded user.

    Returns the number of rows. Missing values are empty cells.
    """
    if not 1 <= horizon_days <= corpus.cohort.observation_days:
        raise ValueError(f"horizon {horizon_days} outside 1..{corpus.cohort.observation_days} labeled days")
    active = set(corpus.table.users.tolist())
    users = sorted(u for u, lab in corpus.labels.items() if lab != CohortLabel.EXCLUDED and u in active)
    windows = user_windows(corpus, users, horizon_days)
    by_window: dict[TimeWindow, list[str]] = {}
    for u, w in zip(users, windows):
        by_window.setdefault(w, []).append(u)
    rows: dict[str, np.ndarray] = {}
    for w in sorted(by_window):
        fm = corpus.engine.extract(w, by_window[w])
        rows.update(zip(fm.users.tolist(), fm.values))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "label", "window", *ALL_FEATURES])
        for u, win in zip(users, windows):
            cells = ["" if math.isnan(x) else repr(float(x)) for x in rows[u]]
            w.writerow([u, corpus.labels[u].value, str(win), *cells])
    return len(users)


def assemble_features(corpus: Corpus, horizon_days: int, task: str,
                      groups: Sequence[str] = GROUPS) -> Dataset:
    """One row per in-scope user with features from its first ``horizon_days``.

    Migrants are observed from their first active day, locals from the
    start of week 1; no window extends into week 3.
    """
    cc = corpus.cohort
    if not 1 <= horizon_days <= cc.observation_days:
        raise ValueError(f"horizon {horizon_days} outside 1..{cc.observation_days} labeled days")
    users, y = task_users(corpus.labels, task)
    active = set(corpus.table.users.tolist())
    known = [u in active for u in users]
    if not all(known):
        log.info("%d in-scope users have no calls and are skipped", len(known) - sum(known))
        users = [u for u, k in zip(users, known) if k]
        y = y[np.array(known, dtype=bool)]
    windows: dict[TimeWindow, list[int]] = {}
    for row, w in enumerate(user_windows(corpus, users, horizon_days)):
        windows.setdefault(w, []).append(row)
    names = task_features(task, groups)
    X = np.full((len(users), len(names)), np.nan)
    cols = [ALL_FEATURES.index(n) for n in names]
    for w in sorted(windows):
        rows = windows[w]
        fm = corpus.engine.extract(w, [users[r] for r in rows])
        X[rows] = fm.values[:, cols]
    return Dataset(X, y, names, [GROUP_OF[n] for n in names], np.array(users, dtype=object))


def _child_seed(seed: int, *path: int) -> int:
    return int(np.random.SeedSequence([seed, *path]).generate_state(1)[0])


def fold_indices(cfg: ExperimentConfig, y: np.ndarray):
    return stratified_kfold(y, cfg.folds, _child_seed(cfg.seed, 0))


def _fold_run(cfg: ExperimentConfig, train: Dataset, test: Dataset, fold: int):
    tr, te, transform = impute_and_standardize(train, test)
    model = cfg.learner.fit(tr.X, tr.y, _child_seed(cfg.seed, 1, fold), cfg.workers)
    m = evaluate(predict_labels(model, te.X), te.y, target=1)
    imp = gini_importance(model, tr.feature_names) if cfg.learner.kind == "forest" else None
    return m, imp


def _collect(cfg: ExperimentConfig, folds: list[Metrics], imps, names: list[str], t0: float) -> Report:
    importances = None
    if imps and imps[0] is not None:
        acc = dict.fromkeys(names, 0.0)
        for imp in imps:
            for n, v in imp:
                acc[n] += v / len(imps)
        importances = sorted(acc.items(), key=lambda kv: (-kv[1], names.index(kv[0])))
    return Report(folds, mean_metrics(folds), cfg.echo(), time.perf_counter() - t0, importances)


def run_cv(cfg: ExperimentConfig, ds: Dataset, test_ds: Dataset | None = None) -> Report:
    """Stratified k-fold evaluation; ``test_ds`` (same users and columns)
    supplies the held-out rows when given."""
    t0 = time.perf_counter()
    test_ds = ds if test_ds is None else test_ds
    if test_ds.ids is not None and ds.ids is not None and not np.array_equal(ds.ids, test_ds.ids):
        raise ValueError("train and test datasets cover different users")
    if test_ds.feature_names != ds.feature_names:
        raise ValueError("train and test datasets have different columns")
    folds, imps = [], []
    for f, (tr, te) in enumerate(fold_indices(cfg, ds.y)):
        m, imp = _fold_run(cfg, ds.rows(tr), test_ds.rows(te), f)
        folds.append(m)
        imps.append(imp)
    return _collect(cfg, folds, imps, ds.feature_names, t0)


def run_ablation(cfg: ExperimentConfig, ds: Dataset) -> dict[str, Report]:
    """Each single feature group, then all groups, on the same folds."""
    out: dict[str, Report] = {}
    for g in [*GROUPS, "all"]:
        names = ds.feature_names if g == "all" else ds.group_columns(g)
        if not names:
            out[g] = Report([], Metrics(0, 0, 0, 0, 0, 0, 0, True), cfg.echo(), skipped=True)
            continue
        out[g] = run_cv(cfg, ds.columns(names))
    return out


Builder = Callable[[int], Dataset]


def run_early_detection(cfg: ExperimentConfig, k_range: Sequence[int], build: Builder) -> dict[int, Report]:
    return {k: run_cv(cfg, build(k)) for k in k_range}


def run_disentanglement(cfg: ExperimentConfig, k_list: Sequence[int], t_list: Sequence[int],
                        build: Builder) -> dict[tuple[int, int], Report]:
    """Train on k-day features, test the held-out fold on t-day features."""
    cache: dict[int, Dataset] = {}

    def get(h: int) -> Dataset:
        if h not in cache:
            cache[h] = build(h)
        return cache[h]

    out = {}
    for k in k_list:
        for t in t_list:
            out[(k, t)] = run_cv(cfg, get(k), get(t))
    return out


@dataclass
class TrendRow:
    cohort: str
    week: int
    feature: str
    mean: float
    stderr: float
    n: int


def run_trends(corpus: Corpus, weeks: Sequence[TimeWindow] | None = None,
               features: Sequence[str] = ALL_FEATURES) -> list[TrendRow]:
    """Per cohort, week and feature: mean and standard error over active users.

    Leaving migrants are not reported for week 3, when they have left.
    """
    weeks = list(weeks) if weeks is not None else [corpus.cohort.week1, corpus.cohort.week2, corpus.cohort.week3]
    cohorts = [CohortLabel.LOCAL, CohortLabel.STAYING, CohortLabel.LEAVING]
    rows: list[TrendRow] = []
    for wi, w in enumerate(weeks, start=1):
        fm = corpus.engine.extract(w)
        lab = [corpus.labels.get(str(u)) for u in fm.users]
        for c in cohorts:
            if c == CohortLabel.LEAVING and wi >= 3:
                continue
            # elementwise: numpy would coerce the str-enum to a truncated string
            sel = np.array([x == c for x in lab], dtype=bool)
            for f in features:
                v = fm.column(f)[sel]
                v = v[~np.isnan(v)]
                n = int(v.size)
                mean = float(v.mean()) if n else math.nan
                se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
                rows.append(TrendRow(c.value, wi, f, mean, se, n))
    return rows


# -- report files -----------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


METRIC_COLS = ["precision", "recall", "f1", "tp", "fp", "fn", "tn"]


def _mrow(m: Metrics) -> list:
    return [m.precision, m.recall, m.f1, m.tp, m.fp, m.fn, m.tn]


def write_cv_report(out_dir, report: Report, title: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [[i, *_mrow(m)] for i, m in enumerate(report.folds)] + [["mean", *_mrow(report.mean)]]
    _write_csv(out / "metrics.csv", ["fold", *METRIC_COLS], rows)
    if report.importances is not None:
        _write_csv(out / "importances.csv", ["feature", "importance"], report.importances)
    lines = [title, "", "config:"]
    lines += [f"  {k}: {v}" for k, v in sorted(report.config.items())]
    lines += ["", f"{'fold':>6} {'precision':>10} {'recall':>10} {'f1':>10}"]
    for i, m in enumerate(report.folds):
        lines.append(f"{i:>6} {m.precision:>10.4f} {m.recall:>10.4f} {m.f1:>10.4f}")
    m = report.mean
    lines.append(f"{'mean':>6} {m.precision:>10.4f} {m.recall:>10.4f} {m.f1:>10.4f}")
    if report.importances:
        lines += ["", "top features (Gini importance):"]
        lines += [f"  {n:<24} {v:.4f}" for n, v in report.importances[:10]]
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_table_report(out_dir, key_cols: list[str], reports: dict, title: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for key, rep in reports.items():
        key = key if isinstance(key, tuple) else (key,)
        rows.append([*key, *_mrow(rep.mean), int(rep.skipped)])
    _write_csv(out / "metrics.csv", [*key_cols, *METRIC_COLS, "skipped"], rows)
    lines = [title, ""]
    lines.append(" ".join(f"{c:>10}" for c in key_cols) + f" {'precision':>10} {'recall':>10} {'f1':>10}")
    for key, rep in reports.items():
        key = key if isinstance(key, tuple) else (key,)
        m = rep.mean
        tail = "  (skipped)" if rep.skipped else ""
        lines.append(" ".join(f"{str(k):>10}" for k in key)
                     + f" {m.precision:>10.4f} {m.recall:>10.4f} {m.f1:>10.4f}{tail}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_trends(out_dir, rows: list[TrendRow]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "trends.csv", ["cohort", "week", "feature", "mean", "stderr", "n"],
               [[r.cohort, r.week, r.feature, r.mean, r.stderr, r.n] for r in rows])
    cells = sorted({(r.cohort, r.week) for r in rows})
    lines = ["cohort trends (mean per week)", ""]
    for c, w in cells:
        deg = next((r for r in rows if r.cohort == c and r.week == w and r.feature == "degree"), None)
        if deg is not None:
            lines.append(f"{c:<16} week {w}: degree {deg.mean:.3f} (n={deg.n})")
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

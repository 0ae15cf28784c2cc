"""
The evaluation protocol.

Measurements are split once into a stratified holdout and cross-validation
folds at the measurement level. For every noise condition the raw IQ data is
corrupted once per measurement, turned into spectrograms and features, and a
classifier is trained on four folds and scored on the fifth. Results are
collected in an ``EvalReport``; every run also fills a ``RunLog`` with its
schema, leakage and trend checks.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from mdrobustness.classifiers.forest import ForestModel, rf_predict, rf_train
from mdrobustness.classifiers.importance import permutation_importance
from mdrobustness.classifiers.metrics import Metrics, compute_metrics
from mdrobustness.classifiers.scaler import (
    CLASS_NAMES,
    ScalerParams,
    apply_scaler,
    encode_labels,
    fit_scaler,
)
from mdrobustness.classifiers.svm import Kernel, SvmModel, svm_predict, svm_train
from mdrobustness.errors import ConfigError, DegenerateFoldError, FeatureError, LeakageError
from mdrobustness.evaluation.cache import FeatureCache, cache_key
from mdrobustness.evaluation.config import (
    ABLATION_SUBSETS,
    ClassifierKind,
    ExperimentConfig,
    resolve_feature_set,
)
from mdrobustness.evaluation.feature_table import (
    FeatureTableValidator,
    build_feature_table,
    feature_row,
)
from mdrobustness.evaluation.run_log import RunLog
from mdrobustness.evaluation.splits import SplitPlan, make_split
from mdrobustness.signal_chain.features import (
    FEATURE_NAMES,
    FeatureConfig,
    FeatureVector,
    extract,
)
from mdrobustness.signal_chain.ingest import IQMeasurement, TargetClass, measurement_digest
from mdrobustness.signal_chain.noise import NoiseMode, NoiseSpec, Severity, apply_noise
from mdrobustness.signal_chain.spectro import DEFAULT_WINDOW, build_spectrogram

REPORT_SCHEMA_VERSION = 1
N_CLASSES = len(CLASS_NAMES)
METRIC_COLUMNS = ("accuracy", "macro_precision", "macro_recall", "macro_f1")
RAW = NoiseSpec(NoiseMode.RAW)

logger = logging.getLogger(__name__)


def _measurement_features(
    m: IQMeasurement, spec: NoiseSpec, window: int, config: FeatureConfig
) -> FeatureVector:
    return extract(build_spectrogram(apply_noise(m, spec), window), config)


def extract_features(
    measurements,
    spec: NoiseSpec,
    window: int = DEFAULT_WINDOW,
    feature_config: FeatureConfig | None = None,
    cache: FeatureCache | None = None,
    n_jobs: int = 1,
    digests: dict | None = None,
) -> pd.DataFrame:
    """
    Feature table of ``measurements`` under one noise condition.

    Noise is applied to the raw IQ samples before the spectrogram is formed.
    Vectors already in ``cache`` are reused; the rest are computed with joblib
    and inserted.

    Parameters
    ----------
    measurements : list of IQMeasurement
    spec : NoiseSpec
    window : int
        Spectrogram window length.
    feature_config : FeatureConfig, optional
    cache : FeatureCache, optional
    n_jobs : int
        joblib workers; results do not depend on it.
    digests : dict, optional
        Memo of measurement id to content hash, filled as hashes are computed.

    Returns
    -------
    pd.DataFrame
        One row per measurement, sorted by id.
    """
    measurements = list(measurements)
    feature_config = feature_config or FeatureConfig()
    digests = {} if digests is None else digests
    keys = [None] * len(measurements)
    vectors = [None] * len(measurements)
    if cache is not None:
        for i, m in enumerate(measurements):
            if m.id not in digests:
                digests[m.id] = measurement_digest(m)
            keys[i] = cache_key(digests[m.id], spec, feature_config, window)
            vectors[i] = cache.get(keys[i])

    todo = [i for i, v in enumerate(vectors) if v is None]
    computed = Parallel(n_jobs=n_jobs)(
        delayed(_measurement_features)(measurements[i], spec, window, feature_config)
        for i in todo
    )
    for i, vector in zip(todo, computed):
        vectors[i] = cache.put(keys[i], vector) if cache is not None else vector
    logger.info(
        "features for %s: %d computed, %d from cache",
        spec,
        len(todo),
        len(measurements) - len(todo),
    )
    return build_feature_table(
        feature_row(m.id, m.label, spec, v) for m, v in zip(measurements, vectors)
    )


@dataclass(frozen=True)
class TrainedClassifier:
    """A fitted model plus the scaler fitted on the same training rows (SVMs only)."""

    kind: ClassifierKind
    model: SvmModel | ForestModel
    scaler: ScalerParams | None = None

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.scaler is not None:
            X = apply_scaler(self.scaler, X)
        if self.kind is ClassifierKind.RANDOM_FOREST:
            return rf_predict(self.model, X)
        return svm_predict(self.model, X)


def train_classifier(
    X, y, config: ExperimentConfig, context: str = "training"
) -> TrainedClassifier:
    """
    Fit the classifier ``config`` names on ``(X, y)``.

    SVMs see z-scored features (scaler fitted on these rows only); the forest
    sees them unscaled.

    Raises
    ------
    DegenerateFoldError
        If ``y`` holds a single class.
    """
    y = np.asarray(y, dtype=np.int64)
    present = np.unique(y)
    if present.size < 2:
        raise DegenerateFoldError(
            f"{context}: training data holds the single class '{CLASS_NAMES[present[0]]}'"
        )
    kind = config.classifier
    if not kind.scaled:
        model = rf_train(
            X,
            y,
            n_estimators=config.rf_estimators,
            max_depth=config.rf_max_depth,
            seed=config.seed,
            n_jobs=config.jobs,
        )
        return TrainedClassifier(kind, model)
    scaler = fit_scaler(X)
    if kind is ClassifierKind.SVM_LINEAR_SINGLE:
        kernel = Kernel.linear()
    else:
        kernel = Kernel.rbf(config.svm_gamma)
    model = svm_train(apply_scaler(scaler, X), y, kernel, config.c, seed=config.seed)
    return TrainedClassifier(kind, model, scaler)


@dataclass(frozen=True)
class FoldResult:
    condition: str
    severity: Severity
    features: tuple[str, ...]
    classifier: ClassifierKind
    fold: int
    metrics: Metrics
    train_ids: tuple[str, ...]
    eval_ids: tuple[str, ...]
    scaler: ScalerParams | None = None

    def as_row(self) -> dict:
        mode, _, param = self.condition.partition(":")
        return {
            "features": ",".join(self.features),
            "classifier": self.classifier.value,
            "condition": self.condition,
            "noise_mode": mode,
            "noise_param": param,
            "severity": self.severity.value,
            "fold": self.fold,
            **self.metrics.as_dict(),
        }


def summarise_folds(metrics) -> dict:
    """Mean and population std of every metric over folds."""
    summary = {"n_folds": len(metrics)}
    for name in METRIC_COLUMNS:
        values = np.array([getattr(m, name) for m in metrics], dtype=np.float64)
        summary[f"{name}_mean"] = float(values.mean())
        summary[f"{name}_std"] = float(values.std())
    return summary


_GROUP_KEYS = ["features", "classifier", "condition", "noise_mode", "noise_param", "severity"]


@dataclass
class EvalReport:
    """
    Results of one or more noise conditions.

    Attributes
    ----------
    config : ExperimentConfig
    folds : list of FoldResult
        In condition order, then fold order.
    importance : dict of str to pd.DataFrame
        Permutation importance (``mean_drop``, ``std_drop`` per feature) by
        condition.
    holdout_confusion : np.ndarray, optional
        Confusion matrix of the holdout set on raw data.
    ablation : pd.DataFrame, optional
    run_log : RunLog
    """

    config: ExperimentConfig
    folds: list[FoldResult] = field(default_factory=list)
    importance: dict[str, pd.DataFrame] = field(default_factory=dict)
    holdout_confusion: np.ndarray | None = None
    ablation: pd.DataFrame | None = None
    run_log: RunLog = field(default_factory=RunLog)

    @property
    def conditions(self) -> list[str]:
        return list(dict.fromkeys(f.condition for f in self.folds))

    def fold_table(self) -> pd.DataFrame:
        columns = _GROUP_KEYS + ["fold"] + list(METRIC_COLUMNS)
        return pd.DataFrame([f.as_row() for f in self.folds], columns=columns)

    def aggregate_table(self) -> pd.DataFrame:
        """One row per (features, classifier, condition) with fold mean and std."""
        rows = []
        groups = {}
        for f in self.folds:
            key = tuple(f.as_row()[k] for k in _GROUP_KEYS)
            groups.setdefault(key, []).append(f.metrics)
        for key, metrics in groups.items():
            rows.append({**dict(zip(_GROUP_KEYS, key)), **summarise_folds(metrics)})
        columns = _GROUP_KEYS + ["n_folds"] + [
            f"{m}_{s}" for m in METRIC_COLUMNS for s in ("mean", "std")
        ]
        return pd.DataFrame(rows, columns=columns)

    def importance_table(self) -> pd.DataFrame:
        frames = [
            frame.reset_index().assign(condition=condition)
            for condition, frame in self.importance.items()
        ]
        if not frames:
            return pd.DataFrame(columns=["condition", "feature", "mean_drop", "std_drop"])
        table = pd.concat(frames, ignore_index=True)
        return table[["condition", "feature", "mean_drop", "std_drop"]]

    def confusion_table(self) -> pd.DataFrame | None:
        if self.holdout_confusion is None:
            return None
        return pd.DataFrame(
            self.holdout_confusion,
            index=pd.Index(CLASS_NAMES, name="true"),
            columns=pd.Index(CLASS_NAMES, name="predicted"),
        )

    def severity_trend(self) -> pd.DataFrame:
        """
        Mean macro-F1 over the mild and the severe conditions of each noise
        family; ``inverted`` marks families where severe noise scored higher.
        """
        table = self.fold_table()
        rows = []
        for (features, mode), group in table.groupby(["features", "noise_mode"], sort=False):
            mild = group.loc[group["severity"] == Severity.MILD.value, "macro_f1"]
            severe = group.loc[group["severity"] == Severity.SEVERE.value, "macro_f1"]
            if mild.empty or severe.empty:
                continue
            rows.append(
                {
                    "features": features,
                    "noise_mode": mode,
                    "mild_macro_f1": float(mild.mean()),
                    "severe_macro_f1": float(severe.mean()),
                    "inverted": bool(mild.mean() < severe.mean()),
                }
            )
        columns = ["features", "noise_mode", "mild_macro_f1", "severe_macro_f1", "inverted"]
        return pd.DataFrame(rows, columns=columns)

    def log_severity_trend(self):
        for row in self.severity_trend().itertuples(index=False):
            self.run_log.add_entry(
                f"Checking mild {row.noise_mode} noise scores at least severe ({row.features})",
                [row.noise_mode] if row.inverted else [],
                not row.inverted,
                "warning",
            )

    def to_dict(self) -> dict:
        config = self.config.to_dict()
        # worker count never changes results
        config.pop("jobs")
        confusion = self.confusion_table()
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "config": config,
            "folds": self.fold_table().to_dict(orient="records"),
            "aggregates": self.aggregate_table().to_dict(orient="records"),
            "importance": {
                condition: frame.to_dict(orient="index")
                for condition, frame in self.importance.items()
            },
            "holdout_confusion": None
            if confusion is None
            else {"classes": list(CLASS_NAMES), "matrix": confusion.to_numpy().tolist()},
            "ablation": None if self.ablation is None else self.ablation.to_dict(orient="records"),
            "severity_trend": self.severity_trend().to_dict(orient="records"),
        }

    def write(self, out_dir) -> dict[str, Path]:
        """
        Write the report to ``out_dir``: CSV tables for plotting, ``report.json``,
        the run log as JSON and an HTML summary.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        tables = {
            "folds": self.fold_table(),
            "aggregates": self.aggregate_table(),
            "severity_trend": self.severity_trend(),
        }
        if self.importance:
            tables["importance"] = self.importance_table()
        if self.ablation is not None:
            tables["ablation"] = self.ablation
        paths = {}
        for name, table in tables.items():
            paths[name] = out / f"{name}.csv"
            table.to_csv(paths[name], index=False, float_format="%.17g")
        confusion = self.confusion_table()
        if confusion is not None:
            paths["holdout_confusion"] = out / "holdout_confusion.csv"
            confusion.to_csv(paths["holdout_confusion"])
            tables["holdout confusion (raw)"] = confusion

        paths["report"] = out / "report.json"
        with open(paths["report"], "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True, default=str)
        paths["run_log"] = out / "run_log.json"
        self.run_log.export(paths["run_log"], "json")
        paths["html"] = out / "report.html"
        self.run_log.export_html(paths["html"], tables)
        return paths

    @classmethod
    def merge(cls, reports) -> "EvalReport":
        reports = list(reports)
        merged = cls(reports[0].config, run_log=reports[0].run_log)
        for report in reports:
            merged.folds.extend(report.folds)
            merged.importance.update(report.importance)
            if report.holdout_confusion is not None:
                merged.holdout_confusion = report.holdout_confusion
            if report.ablation is not None:
                merged.ablation = report.ablation
        return merged


@dataclass
class _CrossValidation:
    results: list[FoldResult]
    models: list[TrainedClassifier]
    table: pd.DataFrame


class Experiment:
    """
    Runs the evaluation protocol over one dataset.

    Parameters
    ----------
    config : ExperimentConfig
    measurements : list of IQMeasurement, optional
        Raw data; features are extracted per noise condition when first needed.
    tables : dict of str to pd.DataFrame, optional
        Precomputed feature tables keyed by condition string (e.g. ``"raw"``,
        ``"awgn:-5"``), used instead of extraction.
    cache : FeatureCache, optional
        Defaults to ``FeatureCache.from_env()``.
    run_log : RunLog, optional
    """

    def __init__(
        self,
        config: ExperimentConfig,
        measurements=None,
        tables: dict | None = None,
        cache: FeatureCache | None = None,
        run_log: RunLog | None = None,
    ):
        if not measurements and not tables:
            raise ValueError("an experiment needs measurements or feature tables")
        self.config = config
        self.measurements = sorted(measurements or [], key=lambda m: m.id)
        self.cache = cache if cache is not None else FeatureCache.from_env()
        self.run_log = run_log if run_log is not None else RunLog(config.hard_check)
        self.feature_config = FeatureConfig(
            alpha=config.alpha, beta=config.beta, entropy_base=config.entropy_base
        )
        self._tables = {}
        self._digests = {}
        for condition, table in (tables or {}).items():
            self._tables[condition] = table
            self._validate_table(condition, table)
        if self.measurements:
            self._labels = {m.id: TargetClass.parse(m.label).value for m in self.measurements}
        else:
            first = next(iter(self._tables.values()))
            self._labels = dict(zip(first["measurement_id"], first["label"]))

    @property
    def labels_by_id(self) -> dict[str, str]:
        return dict(self._labels)

    def plan(self) -> SplitPlan:
        return make_split(
            self._labels, self.config.seed, self.config.n_folds, self.config.holdout_fraction
        )

    def _seeded(self, spec: NoiseSpec) -> NoiseSpec:
        return spec.with_seed(self.config.seed)

    def feature_table(self, spec: NoiseSpec) -> pd.DataFrame:
        """Features of every measurement under ``spec``, extracted once per run."""
        spec = self._seeded(spec)
        condition = str(spec)
        if condition not in self._tables:
            if not self.measurements:
                raise FeatureError(f"no feature table for '{condition}' and no raw data to extract")
            table = extract_features(
                self.measurements,
                spec,
                self.config.window,
                self.feature_config,
                self.cache,
                self.config.jobs,
                self._digests,
            )
            self._tables[condition] = table
            self._validate_table(condition, table)
        return self._tables[condition]

    def _validate_table(self, condition: str, table: pd.DataFrame):
        validator = FeatureTableValidator(table).validate()
        failed = [e["description"] for e in validator.run_log.failed("error")]
        self.run_log.add_entry(
            f"Checking feature table schema under {condition}", failed, not failed, "error"
        )
        if "flags" in table.columns:
            flagged = table.loc[table["flags"] != "", "measurement_id"].tolist()
            self.run_log.add_entry(
                f"Checking for degenerate feature values under {condition}",
                flagged,
                not flagged,
                "warning",
            )

    def _matrix(self, table: pd.DataFrame, ids, features) -> tuple[np.ndarray, np.ndarray]:
        indexed = table.set_index("measurement_id")
        ids = list(ids)
        missing = sorted(set(ids) - set(indexed.index))
        if missing:
            raise FeatureError(f"feature table lacks measurements {missing[:10]}")
        X = indexed.loc[ids, list(features)].to_numpy(dtype=np.float64)
        return X, encode_labels(indexed.loc[ids, "label"].tolist())

    def _check_leakage(self, description: str, shared):
        shared = sorted(shared)
        self.run_log.add_entry(description, shared, not shared, "error")
        if shared:
            raise LeakageError(f"{description}: {len(shared)} measurement id(s) shared")

    def _cross_validate(self, spec, plan: SplitPlan, config: ExperimentConfig) -> _CrossValidation:
        spec = self._seeded(spec)
        condition = str(spec)
        table = self.feature_table(spec)
        splits = [(plan.train_ids(k), plan.folds[k]) for k in range(plan.n_folds)]
        holdout = set(plan.holdout_ids)
        shared = set()
        for train_ids, eval_ids in splits:
            shared |= set(train_ids) & set(eval_ids)
            shared |= (set(train_ids) | set(eval_ids)) & holdout
        self._check_leakage(
            f"Checking training and validation ids are disjoint under {condition}", shared
        )

        results, models = [], []
        for k, (train_ids, eval_ids) in enumerate(splits):
            X_train, y_train = self._matrix(table, train_ids, config.feature_set)
            X_eval, y_eval = self._matrix(table, eval_ids, config.feature_set)
            trained = train_classifier(X_train, y_train, config, context=f"{condition} fold {k}")
            models.append(trained)
            results.append(
                FoldResult(
                    condition=condition,
                    severity=spec.severity,
                    features=tuple(config.feature_set),
                    classifier=config.classifier,
                    fold=k,
                    metrics=compute_metrics(y_eval, trained.predict(X_eval), N_CLASSES),
                    train_ids=tuple(train_ids),
                    eval_ids=tuple(eval_ids),
                    scaler=trained.scaler,
                )
            )
        summary = summarise_folds([r.metrics for r in results])
        logger.info(
            "%s %s [%s]: macro-F1 %.3f +/- %.3f",
            config.classifier.value,
            condition,
            ",".join(config.feature_set),
            summary["macro_f1_mean"],
            summary["macro_f1_std"],
        )
        self.run_log.add_entry(
            f"Cross-validated {config.classifier.value} under {condition}", [], True, "info"
        )
        return _CrossValidation(results, models, table)

    def run_condition(self, spec: NoiseSpec, plan: SplitPlan | None = None) -> list[FoldResult]:
        """
        Cross-validate the configured classifier under one noise condition.

        Returns
        -------
        list of FoldResult
            One per fold, each carrying its metrics and the ids it trained and
            was scored on.
        """
        return self._cross_validate(spec, plan or self.plan(), self.config).results

    def _importance(self, cv: _CrossValidation, plan: SplitPlan, features, seed) -> pd.DataFrame:
        # each validation fold is predicted by the model that never saw it
        X_val, y_val = self._matrix(cv.table, [i for fold in plan.folds for i in fold], features)
        bounds = np.cumsum([0] + [len(fold) for fold in plan.folds])

        def predict(X):
            return np.concatenate(
                [m.predict(X[lo:hi]) for m, lo, hi in zip(cv.models, bounds[:-1], bounds[1:])]
            )

        result = permutation_importance(
            predict, X_val, y_val, n_repeats=self.config.n_repeats, seed=seed, n_classes=N_CLASSES
        )
        return result.to_frame(features)

    def run_noise_sweep(self, plan: SplitPlan | None = None) -> EvalReport:
        """
        Every configured noise condition, plus permutation importance when the
        classifier is the forest and the raw-data holdout confusion matrix.
        """
        plan = plan or self.plan()
        report = EvalReport(self.config, run_log=self.run_log)
        for spec in self.config.noise_specs:
            cv = self._cross_validate(spec, plan, self.config)
            report.folds.extend(cv.results)
            if self.config.classifier is ClassifierKind.RANDOM_FOREST:
                report.importance[str(spec)] = self._importance(
                    cv, plan, self.config.feature_set, self.config.seed
                )
        if self.measurements or str(RAW) in self._tables:
            report.holdout_confusion = self.holdout_confusion(plan)
        report.log_severity_trend()
        return report

    def single_feature_sweep(
        self, feature: str, plan: SplitPlan | None = None, noise_specs=None
    ) -> EvalReport:
        """Linear SVM with C = 1 on one z-scored feature, per noise condition."""
        if feature not in FEATURE_NAMES:
            raise ConfigError([f"unknown feature '{feature}'"])
        plan = plan or self.plan()
        config = replace(
            self.config,
            feature_set=(feature,),
            classifier=ClassifierKind.SVM_LINEAR_SINGLE,
            svm_c=1.0,
        )
        report = EvalReport(config, run_log=self.run_log)
        for spec in noise_specs or self.config.noise_specs:
            report.folds.extend(self._cross_validate(spec, plan, config).results)
        report.log_severity_trend()
        return report

    def importance_map(
        self, plan: SplitPlan | None = None, noise_specs=None, seed: int | None = None
    ) -> pd.DataFrame:
        """
        Permutation importance of the configured features for a forest, one
        ``(mean_drop, std_drop)`` column pair per noise condition.

        Each fold's forest is trained on the other folds and the drops are
        measured on the pooled validation predictions.
        """
        plan = plan or self.plan()
        config = replace(self.config, classifier=ClassifierKind.RANDOM_FOREST)
        seed = self.config.seed if seed is None else seed
        frames = {}
        for spec in noise_specs or self.config.noise_specs:
            cv = self._cross_validate(spec, plan, config)
            frames[str(spec)] = self._importance(cv, plan, config.feature_set, seed)
        return pd.concat(frames, axis=1, names=["condition", "statistic"])

    def ablation(
        self, plan: SplitPlan | None = None, subsets=None, noise_specs=None
    ) -> pd.DataFrame:
        """
        Forest metrics per named feature subset, on raw data unless other
        conditions are given.

        Raises
        ------
        ConfigError
            If a subset is empty or names a feature twice or an unknown one.
        """
        plan = plan or self.plan()
        subsets = dict(ABLATION_SUBSETS if subsets is None else subsets)
        resolved = {}
        problems = []
        for name, features in subsets.items():
            try:
                resolved[name] = resolve_feature_set(features)
            except ConfigError as exc:
                problems.extend(f"subset '{name}': {p}" for p in exc.problems)
        if problems:
            raise ConfigError(problems)

        rows = []
        for name, features in resolved.items():
            config = replace(
                self.config, classifier=ClassifierKind.RANDOM_FOREST, feature_set=features
            )
            for spec in noise_specs or (RAW,):
                cv = self._cross_validate(spec, plan, config)
                rows.append(
                    {
                        "subset": name,
                        "features": ",".join(features),
                        "n_features": len(features),
                        "condition": str(spec),
                        **summarise_folds([r.metrics for r in cv.results]),
                    }
                )
        return pd.DataFrame(rows)

    def final_classifier(self, plan: SplitPlan | None = None) -> TrainedClassifier:
        """The configured classifier trained on every cross-validation id of the raw table."""
        plan = plan or self.plan()
        table = self.feature_table(RAW)
        self._check_leakage(
            "Checking holdout ids are absent from training data",
            set(plan.cv_ids) & set(plan.holdout_ids),
        )
        X_train, y_train = self._matrix(table, plan.cv_ids, self.config.feature_set)
        return train_classifier(X_train, y_train, self.config, context="holdout")

    def holdout_confusion(self, plan: SplitPlan | None = None) -> np.ndarray:
        """
        Train the configured classifier on all cross-validation data and score
        the untouched holdout on raw data. Rows are the true class.
        """
        plan = plan or self.plan()
        if not plan.holdout_ids:
            return np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        trained = self.final_classifier(plan)
        X_holdout, y_holdout = self._matrix(
            self.feature_table(RAW), plan.holdout_ids, self.config.feature_set
        )
        return compute_metrics(y_holdout, trained.predict(X_holdout), N_CLASSES).confusion

"""
Experiment configuration: named feature sets, classifier choices and the
validated ``ExperimentConfig`` built from flags or a config file.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

from mdrobustness.checks_loaders_and_exporters.config_loader import ConfigLoader
from mdrobustness.errors import ConfigError, MdRobustnessError
from mdrobustness.signal_chain.features import FEATURE_NAMES
from mdrobustness.signal_chain.noise import NoiseSpec, noise_schedule, parse_noise_spec

SELECTED_FIVE = (
    "sler",
    "sidelobe_entropy",
    "spectral_entropy",
    "temporal_energy_variance",
    "temporal_entropy",
)
DOPPLER_FEATURES = ("doppler_bw_p80", "doppler_spread", "zero_doppler_ratio")
STATISTICAL_FEATURES = ("skewness", "kurtosis")

FEATURE_SETS = {"selected5": SELECTED_FIVE, "full10": FEATURE_NAMES}

ABLATION_SUBSETS = {
    "selected5": SELECTED_FIVE,
    "full10": FEATURE_NAMES,
    "selected5+doppler": SELECTED_FIVE + DOPPLER_FEATURES,
    "selected5+statistical": SELECTED_FIVE + STATISTICAL_FEATURES,
    "selected5-sler": tuple(f for f in SELECTED_FIVE if f != "sler"),
    "selected5-temporal_energy_variance": tuple(
        f for f in SELECTED_FIVE if f != "temporal_energy_variance"
    ),
}

# "table3" is an alias of "full"
SCHEDULES = {"full": noise_schedule, "table3": noise_schedule}


class ClassifierKind(str, Enum):
    SVM_LINEAR_SINGLE = "svm-linear-single"
    SVM_RBF_MULTI = "svm-rbf-multi"
    RANDOM_FOREST = "random-forest"

    @property
    def scaled(self) -> bool:
        return self is not ClassifierKind.RANDOM_FOREST


_CLASSIFIER_ALIASES = {
    "rf": ClassifierKind.RANDOM_FOREST,
    "random-forest": ClassifierKind.RANDOM_FOREST,
    "svm-rbf": ClassifierKind.SVM_RBF_MULTI,
    "svm-rbf-multi": ClassifierKind.SVM_RBF_MULTI,
    "svm-linear": ClassifierKind.SVM_LINEAR_SINGLE,
    "svm-linear-single": ClassifierKind.SVM_LINEAR_SINGLE,
}

_DEFAULT_C = {ClassifierKind.SVM_LINEAR_SINGLE: 1.0, ClassifierKind.SVM_RBF_MULTI: 100.0}


def resolve_feature_set(value) -> tuple[str, ...]:
    """
    A named set (``selected5``, ``full10``), a comma-separated list or a
    sequence of feature names.

    Raises
    ------
    ConfigError
        On unknown names, duplicates or an empty set.
    """
    if isinstance(value, str):
        if value in FEATURE_SETS:
            return FEATURE_SETS[value]
        value = [v.strip() for v in value.split(",") if v.strip()]
    names = tuple(value)
    problems = []
    if not names:
        problems.append("feature set is empty")
    unknown = [n for n in names if n not in FEATURE_NAMES]
    if unknown:
        problems.append(f"unknown features: {unknown}")
    duplicated = sorted({n for n in names if names.count(n) > 1})
    if duplicated:
        problems.append(f"duplicate features: {duplicated}")
    if problems:
        raise ConfigError(problems)
    return names


def resolve_classifier(value) -> ClassifierKind:
    if isinstance(value, ClassifierKind):
        return value
    try:
        return _CLASSIFIER_ALIASES[str(value).lower()]
    except KeyError:
        raise ConfigError(
            [f"unknown classifier '{value}'; choose from {sorted(_CLASSIFIER_ALIASES)}"]
        ) from None


@dataclass(frozen=True)
class ExperimentConfig:
    feature_set: tuple[str, ...] = SELECTED_FIVE
    classifier: ClassifierKind = ClassifierKind.RANDOM_FOREST
    noise_specs: tuple[NoiseSpec, ...] = field(default_factory=lambda: (parse_noise_spec("raw"),))
    dataset_ref: str | None = None
    seed: int = 42
    window: int = 32
    n_folds: int = 5
    holdout_fraction: float = 0.2
    n_repeats: int = 10
    svm_c: float | None = None
    svm_gamma: float = 0.1
    rf_estimators: int = 300
    rf_max_depth: int = 5
    alpha: float = 0.15
    beta: float = 0.05
    entropy_base: float | None = None
    jobs: int = 1
    hard_check: bool = True

    def __post_init__(self):
        problems = []
        resolvers = (("feature_set", resolve_feature_set), ("classifier", resolve_classifier))
        for name, resolve in resolvers:
            value = _collect(problems, resolve, getattr(self, name))
            if value is not None:
                object.__setattr__(self, name, value)
        problems = problems or config_problems(self)
        if problems:
            raise ConfigError(problems)
        # every condition shares the master seed
        object.__setattr__(
            self, "noise_specs", tuple(s.with_seed(self.seed) for s in self.noise_specs)
        )

    @property
    def c(self) -> float:
        return self.svm_c if self.svm_c is not None else _DEFAULT_C.get(self.classifier, 1.0)

    def with_features(self, feature_set) -> "ExperimentConfig":
        return replace(self, feature_set=resolve_feature_set(feature_set))

    def to_dict(self) -> dict:
        data = asdict(self)
        data["feature_set"] = list(self.feature_set)
        data["classifier"] = self.classifier.value
        data["noise_specs"] = [str(s) for s in self.noise_specs]
        return data

    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.blake2b(text.encode(), digest_size=16).hexdigest()

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        """
        Build a config from file or flag values, collecting every problem
        before raising a single ``ConfigError``.
        """
        mapping = dict(mapping)
        problems = []
        kwargs = {}

        unknown = sorted(set(mapping) - _MAPPING_KEYS)
        if unknown:
            problems.append(f"unknown configuration keys: {unknown}")

        if "feature_set" in mapping:
            kwargs["feature_set"] = _collect(problems, resolve_feature_set, mapping["feature_set"])
        if "classifier" in mapping:
            kwargs["classifier"] = _collect(problems, resolve_classifier, mapping["classifier"])

        specs = []
        schedule = mapping.get("schedule")
        if schedule is not None:
            if schedule in SCHEDULES:
                specs.extend(SCHEDULES[schedule]())
            else:
                problems.append(f"unknown schedule '{schedule}'; choose from {sorted(SCHEDULES)}")
        noise = mapping.get("noise")
        if noise is not None:
            for text in [noise] if isinstance(noise, str) else noise:
                spec = _collect(problems, parse_noise_spec, text)
                if spec is not None and str(spec) not in {str(s) for s in specs}:
                    specs.append(spec)
        if specs:
            kwargs["noise_specs"] = tuple(specs)

        for key, kind in _SCALARS.items():
            if key in mapping and mapping[key] is not None:
                try:
                    kwargs[key] = kind(mapping[key])
                except (TypeError, ValueError):
                    problems.append(f"{key} has an invalid value {mapping[key]!r}")
        if "dataset_ref" in mapping and mapping["dataset_ref"] is not None:
            kwargs["dataset_ref"] = str(mapping["dataset_ref"])

        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        config = _collect(problems, lambda kw: cls(**kw), kwargs)
        if problems:
            raise ConfigError(problems)
        return config

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "ExperimentConfig":
        mapping = ConfigLoader.load(path)
        mapping.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_mapping(mapping)


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if str(value).lower() in ("true", "1", "yes"):
        return True
    if str(value).lower() in ("false", "0", "no"):
        return False
    raise ValueError(value)


_SCALARS = {
    "seed": int,
    "window": int,
    "n_folds": int,
    "holdout_fraction": float,
    "n_repeats": int,
    "svm_c": float,
    "svm_gamma": float,
    "rf_estimators": int,
    "rf_max_depth": int,
    "alpha": float,
    "beta": float,
    "entropy_base": float,
    "jobs": int,
    "hard_check": _as_bool,
}

_MAPPING_KEYS = set(_SCALARS) | {"feature_set", "classifier", "noise", "schedule", "dataset_ref"}


def _collect(problems: list, parse, value):
    try:
        return parse(value)
    except ConfigError as exc:
        problems.extend(exc.problems)
    except MdRobustnessError as exc:
        problems.append(str(exc))
    return None


def config_problems(config: ExperimentConfig) -> list[str]:
    """Every inconsistency of a config, in check order."""
    problems = []
    if config.classifier is ClassifierKind.SVM_LINEAR_SINGLE and len(config.feature_set) != 1:
        problems.append(
            f"svm-linear-single takes exactly one feature, got {len(config.feature_set)}"
        )
    if not config.noise_specs:
        problems.append("at least one noise condition is required")
    if config.seed < 0:
        problems.append("seed must be a non-negative integer")
    if config.window < 2:
        problems.append("window must be at least 2")
    if config.n_folds < 2:
        problems.append("n_folds must be at least 2")
    if not 0 <= config.holdout_fraction < 1:
        problems.append("holdout_fraction must lie in [0, 1)")
    if config.n_repeats < 1:
        problems.append("n_repeats must be at least 1")
    if config.svm_c is not None and config.svm_c <= 0:
        problems.append("svm_c must be positive")
    if config.svm_gamma <= 0:
        problems.append("svm_gamma must be positive")
    if config.rf_estimators < 1:
        problems.append("rf_estimators must be at least 1")
    if config.rf_max_depth < 1:
        problems.append("rf_max_depth must be at least 1")
    for name in ("alpha", "beta"):
        if not 0 < getattr(config, name) < 1:
            problems.append(f"{name} must lie in (0, 1)")
    if config.entropy_base is not None and (config.entropy_base <= 0 or config.entropy_base == 1):
        problems.append("entropy_base must be positive and not 1")
    if config.jobs == 0:
        problems.append("jobs must be non-zero (negative counts back from all cores)")
    return problems

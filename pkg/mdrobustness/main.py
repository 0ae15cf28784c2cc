import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import pandas as pd

from mdrobustness import __version__
from mdrobustness.classifiers.model_io import save_model
from mdrobustness.evaluation.cache import FeatureCache
from mdrobustness.evaluation.config import ExperimentConfig
from mdrobustness.evaluation.experiment import EvalReport, Experiment
from mdrobustness.signal_chain.features import FEATURE_NAMES
from mdrobustness.signal_chain.ingest import measurement_digest

RUN_MANIFEST_NAME = "run_manifest.json"

logger = logging.getLogger(__name__)


def _now() -> str:
    return pd.Timestamp.now(tz="UTC").isoformat()


def dataset_hash(measurements) -> str:
    """Order-independent hash over the content of every measurement."""
    h = hashlib.blake2b(digest_size=16)
    for digest in sorted(measurement_digest(m) for m in measurements):
        h.update(digest.encode())
    return h.hexdigest()


@dataclass
class RunManifest:
    """
    Provenance record written once into every output directory.

    Attributes
    ----------
    command : str
        ``synth``, ``extract`` or ``evaluate``.
    config_hash : str, optional
    seed : int
    dataset_hash : str, optional
    outputs : dict of str to str
        Output name to path relative to the directory.
    """

    command: str
    seed: int
    config_hash: str | None = None
    dataset_hash: str | None = None
    toolkit_version: str = __version__
    started: str = field(default_factory=_now)
    finished: str | None = None
    outputs: dict[str, str] = field(default_factory=dict)

    def write(self, out_dir, outputs: dict | None = None) -> Path:
        out_dir = Path(out_dir)
        self.outputs = {
            name: str(Path(path).relative_to(out_dir)) for name, path in (outputs or {}).items()
        }
        self.finished = _now()
        path = out_dir / RUN_MANIFEST_NAME
        with open(path, "w") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)
        return path


def run_experiment(
    config: ExperimentConfig,
    measurements,
    out_dir,
    ablation: bool = False,
    single_features=(),
    cache: FeatureCache | None = None,
    export_model: bool = False,
) -> EvalReport:
    """
    function to run the configured noise sweep, write every result table and
    the run manifest, then check the run log.

    Parameters
    ----------
    config : ExperimentConfig
        The experiment to run.
    measurements : list of IQMeasurement
        The dataset.
    out_dir : str or PathLike
        Directory receiving the report, tables, run log and manifest.
    ablation : bool, optional
        Also run the feature-subset ablation, by default False
    single_features : iterable of str, optional
        Features to sweep one at a time with a linear SVM; ``"all"`` expands to
        every feature.
    cache : FeatureCache, optional
        Defaults to the cache named by ``MDROBUSTNESS_CACHE_DIR``.
    export_model : bool, optional
        Also write the classifier trained on all cross-validation data as
        ``model.json`` (plus ``scaler.json`` for SVMs), by default False

    Returns
    -------
    EvalReport
        The report after export.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        command="evaluate",
        seed=config.seed,
        config_hash=config.config_hash(),
        dataset_hash=dataset_hash(measurements),
    )
    experiment = Experiment(config, measurements, cache=cache)
    experiment.run_log.add_entry("Checking experiment configuration", [], True, "info")
    plan = experiment.plan()
    outputs = {"split": out_dir / "split.json"}
    with open(outputs["split"], "w") as f:
        json.dump(plan.to_dict(), f, indent=2)

    report = experiment.run_noise_sweep(plan)
    if ablation:
        report.ablation = experiment.ablation(plan)

    features = list(single_features)
    if "all" in features:
        features = list(FEATURE_NAMES)
    if features:
        singles = EvalReport.merge(experiment.single_feature_sweep(f, plan) for f in features)
        for name, table in (
            ("single_feature_folds", singles.fold_table()),
            ("single_feature_aggregates", singles.aggregate_table()),
        ):
            outputs[name] = out_dir / f"{name}.csv"
            table.to_csv(outputs[name], index=False, float_format="%.17g")

    if export_model:
        trained = experiment.final_classifier(plan)
        outputs["model"] = save_model(trained.model, out_dir / "model.json")
        if trained.scaler is not None:
            outputs["scaler"] = out_dir / "scaler.json"
            with open(outputs["scaler"], "w") as f:
                json.dump(trained.scaler.to_dict(), f, indent=2)

    outputs.update(report.write(out_dir))
    manifest.write(out_dir, outputs)
    logger.info("evaluation of %d condition(s) written to %s", len(report.conditions), out_dir)
    report.run_log.check_status()
    return report

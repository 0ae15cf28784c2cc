"""
Command-line entry point.

    mdrobustness synth --per-class 10 --seed 42 --out ds/
    mdrobustness extract ds/ --noise combined:-1:3 --out features/
    mdrobustness evaluate ds/ --classifier rf --schedule full --out results/

Progress goes to stderr; stdout only carries the ``--json`` summary. Toolkit
errors exit with status 2 after one ``error: <ClassName>: <message>`` line.
"""

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

from mdrobustness import __version__
from mdrobustness.errors import MdRobustnessError, OutputExistsError, UsageError
from mdrobustness.evaluation.cache import FeatureCache
from mdrobustness.evaluation.config import SCHEDULES, ExperimentConfig
from mdrobustness.evaluation.experiment import extract_features
from mdrobustness.evaluation.feature_table import (
    FeatureTableValidator,
    write_feature_table,
)
from mdrobustness.evaluation.run_log import RunLog
from mdrobustness.main import RUN_MANIFEST_NAME, RunManifest, dataset_hash, run_experiment
from mdrobustness.signal_chain.features import FeatureConfig
from mdrobustness.signal_chain.ingest import (
    discover_containers,
    duration_summary,
    load_dataset,
    measurement_digest,
    synth_dataset,
    write_dataset,
)
from mdrobustness.signal_chain.noise import apply_noise, parse_noise_spec
from mdrobustness.signal_chain.spectro import DEFAULT_WINDOW, build_spectrogram, write_spectrogram

logger = logging.getLogger("mdrobustness")


class _Parser(argparse.ArgumentParser):
    """Reports usage errors in the same one-line form as every other failure."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"error: {UsageError.__name__}: {message}\n")


def _prepare_output(out: Path, force: bool):
    if out.exists() and any(out.iterdir()):
        if not force:
            raise OutputExistsError(f"{out} is not empty; pass --force to overwrite")
        for container in discover_containers(out):
            shutil.rmtree(container)
    out.mkdir(parents=True, exist_ok=True)


def cmd_synth(args) -> Path:
    out = Path(args.out)
    _prepare_output(out, args.force)
    manifest = RunManifest(command="synth", seed=args.seed)
    if args.reference_ratio:
        measurements = synth_dataset(seed=args.seed, total=args.total)
    else:
        measurements = synth_dataset(args.per_class, seed=args.seed)
    write_dataset(measurements, out)

    outputs = {"listing": out / "dataset.csv", "durations": out / "durations.csv"}
    duration_summary(measurements).to_csv(outputs["durations"])
    with open(outputs["listing"], "w") as f:
        f.write("measurement_id,label,duration_s,digest\n")
        for m in measurements:
            f.write(f"{m.id},{m.label.value},{m.duration_s!r},{measurement_digest(m)}\n")
    manifest.dataset_hash = dataset_hash(measurements)
    manifest.write(out, outputs)
    logger.info("wrote %d measurements to %s", len(measurements), out)
    return out


def cmd_extract(args) -> Path:
    spec = parse_noise_spec(args.noise, seed=args.seed)
    measurements = load_dataset(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        command="extract", seed=args.seed, dataset_hash=dataset_hash(measurements)
    )
    feature_config = FeatureConfig()
    table = extract_features(
        measurements,
        spec,
        args.window,
        feature_config,
        FeatureCache.from_env(),
        args.jobs,
    )
    metadata = {
        "noise": str(spec),
        "noise_mode": spec.mode.value,
        "snr_db": spec.snr_db,
        "phase_deg": spec.phase_deg,
        "severity": spec.severity.value,
        "seed": spec.seed,
        "window": args.window,
        "alpha": feature_config.alpha,
        "beta": feature_config.beta,
        "dataset_hash": manifest.dataset_hash,
    }
    run_log = RunLog(hard_check=True)
    FeatureTableValidator(table, run_log).validate()
    outputs = {"features": write_feature_table(table, out, metadata)}
    outputs["metadata"] = outputs["features"].with_name("features.meta.json")
    if args.spectrograms:
        outputs["spectrograms"] = out / "spectrograms"
        for m in measurements:
            spectrogram = build_spectrogram(apply_noise(m, spec), args.window)
            write_spectrogram(spectrogram, outputs["spectrograms"] / m.id)
    outputs["run_log"] = out / "run_log.json"
    run_log.export(outputs["run_log"], "json")
    manifest.write(out, outputs)
    run_log.check_status()
    logger.info("%s: %d feature rows written to %s", spec, len(table), outputs["features"])
    return out


def _config_from_args(args) -> ExperimentConfig:
    overrides = {
        "classifier": args.classifier,
        "feature_set": args.features,
        "schedule": args.schedule,
        "noise": args.noise,
        "seed": args.seed,
        "window": args.window,
        "jobs": args.jobs,
        "dataset_ref": str(args.dataset),
    }
    if args.config:
        return ExperimentConfig.from_file(args.config, overrides)
    return ExperimentConfig.from_mapping({k: v for k, v in overrides.items() if v is not None})


def cmd_evaluate(args) -> Path:
    config = _config_from_args(args)
    measurements = load_dataset(args.dataset)
    out = Path(args.out)
    report = run_experiment(
        config,
        measurements,
        out,
        ablation=args.ablation,
        single_features=args.single_feature or (),
        export_model=args.export_model,
    )
    if args.json:
        aggregates = report.aggregate_table()
        summary = {
            "out": str(out),
            "manifest": str(out / RUN_MANIFEST_NAME),
            "conditions": len(report.conditions),
            "macro_f1": dict(zip(aggregates["condition"], aggregates["macro_f1_mean"])),
        }
        json.dump(summary, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="mdrobustness",
        description="Noise robustness of micro-Doppler features and classifiers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="write a synthetic dataset")
    counts = synth.add_mutually_exclusive_group(required=True)
    counts.add_argument("--per-class", type=int, help="measurements per class")
    counts.add_argument(
        "--reference-ratio",
        "--paper-ratio",
        action="store_true",
        help="44:56:19 drone:bird:reflector split",
    )
    synth.add_argument("--total", type=int, default=119, help="dataset size with --reference-ratio")
    synth.add_argument("--seed", type=int, default=42)
    synth.add_argument("--out", required=True)
    synth.add_argument("--force", action="store_true", help="overwrite a non-empty --out")
    synth.set_defaults(handler=cmd_synth)

    extract = commands.add_parser("extract", help="write the feature table of one noise condition")
    extract.add_argument("dataset")
    extract.add_argument(
        "--noise", default="raw", help="raw | awgn:DB | phase:DEG | combined:DB:DEG"
    )
    extract.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    extract.add_argument("--seed", type=int, default=42)
    extract.add_argument("--jobs", type=int, default=1)
    extract.add_argument(
        "--spectrograms", action="store_true", help="also dump every spectrogram under --out"
    )
    extract.add_argument("--out", required=True)
    extract.set_defaults(handler=cmd_extract)

    evaluate = commands.add_parser("evaluate", help="cross-validate across noise conditions")
    evaluate.add_argument("dataset")
    evaluate.add_argument("--config", help="JSON, YAML or TOML file mirroring these flags")
    evaluate.add_argument("--classifier", help="rf | svm-rbf | svm-linear")
    evaluate.add_argument("--features", help="selected5 | full10 | comma-separated names")
    evaluate.add_argument("--schedule", choices=sorted(SCHEDULES))
    evaluate.add_argument("--noise", action="append", help="noise condition, repeatable")
    evaluate.add_argument("--seed", type=int)
    evaluate.add_argument("--window", type=int)
    evaluate.add_argument("--jobs", type=int)
    evaluate.add_argument("--ablation", action="store_true", help="add the feature-subset study")
    evaluate.add_argument(
        "--single-feature",
        action="append",
        help="sweep one feature with a linear SVM (repeatable, or 'all')",
    )
    evaluate.add_argument(
        "--export-model",
        action="store_true",
        help="write the classifier trained on all cross-validation data",
    )
    evaluate.add_argument("--json", action="store_true", help="print a summary to stdout")
    evaluate.add_argument("--out", required=True)
    evaluate.set_defaults(handler=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        args.handler(args)
    except (MdRobustnessError, ValueError, OSError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

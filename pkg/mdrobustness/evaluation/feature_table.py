"""
Feature tables: one row per measurement and noise condition, ten feature
columns, written as CSV sorted by measurement id and validated with pandera
on the way out and on the way in.
"""

import json
from pathlib import Path

import pandas as pd

from mdrobustness.checks_loaders_and_exporters.checks import (
    FEATURE_TABLE_COLUMNS,
    FEATURE_TABLE_SCHEMA,
    VALID_SCHEMA_KEYS,
    convert_schema,
    validate_using_pandera,
)
from mdrobustness.evaluation.run_log import RunLog
from mdrobustness.signal_chain.features import FEATURE_NAMES, FeatureVector
from mdrobustness.signal_chain.noise import NoiseSpec

FEATURE_TABLE_NAME = "features.csv"
METADATA_NAME = "features.meta.json"

_STRING_COLUMNS = ("measurement_id", "label", "noise_mode", "noise_param", "flags")


def feature_row(measurement_id: str, label: str, spec: NoiseSpec, vector: FeatureVector) -> dict:
    return {
        "measurement_id": measurement_id,
        "label": str(getattr(label, "value", label)),
        "noise_mode": spec.mode.value,
        "noise_param": spec.param_label,
        **vector.as_dict(),
        "flags": ";".join(vector.flags),
    }


def build_feature_table(rows) -> pd.DataFrame:
    """Rows in canonical column order, sorted by measurement id."""
    table = pd.DataFrame(list(rows), columns=list(FEATURE_TABLE_COLUMNS))
    for column in FEATURE_NAMES:
        table[column] = table[column].astype("float64")
    return table.sort_values("measurement_id", kind="stable").reset_index(drop=True)


class FeatureTableValidator:
    """
    Checks a feature table against ``FEATURE_TABLE_SCHEMA`` and records one
    run-log entry per check.

    Attributes
    ----------
    data : pd.DataFrame
    schema : dict
    run_log : RunLog
    entries : list of dict
        The run-log entries added by this validator.
    """

    def __init__(self, data: pd.DataFrame, run_log: RunLog | None = None, schema=None):
        self.data = data
        self.schema = schema or FEATURE_TABLE_SCHEMA
        self.run_log = run_log if run_log is not None else RunLog()
        self.entries = []
        self._check_unused_schema_arguments()

    def validate(self):
        for check in (self._check_colnames, self._check_column_contents, self._check_degenerate):
            check()
        return self

    @property
    def passed(self) -> bool:
        return not any(e["outcome"] == "fail" and e["status"] == "error" for e in self.entries)

    def _add(self, description, failing_ids, outcome, entry_type):
        self.run_log.add_entry(description, failing_ids, outcome, entry_type)
        self.entries.append(self.run_log.log[-1])

    def _check_unused_schema_arguments(self):
        used = {k for props in self.schema["columns"].values() for k in props}
        unused = sorted(used - VALID_SCHEMA_KEYS)
        self._add("Checking for unused arguments in feature schema", unused, not unused, "warning")

    def _check_colnames(self):
        columns = self.schema["columns"]
        missing = [c for c in columns if c not in self.data.columns]
        self._add("Checking mandatory columns are present", missing, not missing, "error")
        unexpected = [c for c in self.data.columns if c not in columns]
        self._add("Checking for unexpected columns", unexpected, not unexpected, "warning")

    def _check_column_contents(self):
        present = {c: p for c, p in self.schema["columns"].items() if c in self.data.columns}
        schema = {**self.schema, "columns": present}
        if not set(schema.get("unique", [])) <= set(present):
            schema.pop("unique")
        results = validate_using_pandera(convert_schema(schema), self.data)
        for i in results.index:
            rows = [j for j in results.at[i, "invalid_ids"] if pd.notna(j)]
            if rows:
                failing = [self.data.at[int(j), "measurement_id"] for j in rows]
            else:
                # column-level failures (e.g. dtype) carry no row index
                failing = results.at[i, "failure_case"]
                failing = list(failing) if isinstance(failing, list) else []
            self._add(
                f"Checking {results.at[i, 'column']} {results.at[i, 'check']}",
                failing,
                not failing,
                "error",
            )

    def _check_degenerate(self):
        if "flags" not in self.data.columns or "measurement_id" not in self.data.columns:
            return
        flagged = self.data.loc[self.data["flags"].astype(str) != "", "measurement_id"].tolist()
        self._add("Checking for degenerate feature values", flagged, not flagged, "warning")


def validate_feature_table(table: pd.DataFrame, run_log: RunLog | None = None) -> RunLog:
    return FeatureTableValidator(table, run_log).validate().run_log


def write_feature_table(table: pd.DataFrame, path, metadata: dict | None = None) -> Path:
    """
    Write ``table`` as CSV (plus a JSON metadata sidecar when given).

    ``path`` may be a directory, in which case ``features.csv`` is written
    inside it.
    """
    path = Path(path)
    if path.suffix != ".csv":
        path.mkdir(parents=True, exist_ok=True)
        path = path / FEATURE_TABLE_NAME
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
    table = table.sort_values("measurement_id", kind="stable").reset_index(drop=True)
    table.to_csv(path, index=False, float_format="%.17g")
    if metadata is not None:
        with open(path.with_name(METADATA_NAME), "w") as f:
            json.dump(metadata, f, indent=2, sort_keys=True)
    return path


def read_feature_table(path) -> pd.DataFrame:
    path = Path(path)
    if path.is_dir():
        path = path / FEATURE_TABLE_NAME
    return pd.read_csv(
        path, dtype={c: str for c in _STRING_COLUMNS}, keep_default_na=False, na_values=[]
    )


def read_metadata(path) -> dict:
    path = Path(path)
    meta = (path if path.is_dir() else path.parent) / METADATA_NAME
    with open(meta, "r") as f:
        return json.load(f)

import pandas as pd
import pandera.pandas as pa

from mdrobustness.signal_chain.ingest import TargetClass
from mdrobustness.signal_chain.noise import NoiseMode

_NON_NEGATIVE = {"type": "float", "allow_na": False, "min_val": 0.0}
_UNIT_INTERVAL = {"type": "float", "allow_na": False, "min_val": 0.0, "max_val": 1.0}
_ANY_REAL = {"type": "float", "allow_na": False}

# Column schema of an exported feature table, in the same dict form as every
# other schema handled by convert_schema.
FEATURE_TABLE_SCHEMA = {
    "columns": {
        "measurement_id": {"type": "str", "allow_na": False},
        "label": {
            "type": "str",
            "allow_na": False,
            "allowed_values": [c.value for c in TargetClass],
        },
        "noise_mode": {
            "type": "str",
            "allow_na": False,
            "allowed_values": [m.value for m in NoiseMode],
        },
        "noise_param": {"type": "str", "allow_na": False},
        "sler": _UNIT_INTERVAL,
        "sidelobe_entropy": _NON_NEGATIVE,
        "spectral_entropy": _NON_NEGATIVE,
        "temporal_entropy": _NON_NEGATIVE,
        "temporal_energy_variance": _NON_NEGATIVE,
        "doppler_bw_p80": _NON_NEGATIVE,
        "doppler_spread": _NON_NEGATIVE,
        "zero_doppler_ratio": _UNIT_INTERVAL,
        "skewness": _ANY_REAL,
        "kurtosis": _ANY_REAL,
        "flags": {"type": "str", "allow_na": False},
    },
    "unique": ["measurement_id"],
}

FEATURE_TABLE_COLUMNS = tuple(FEATURE_TABLE_SCHEMA["columns"])

VALID_SCHEMA_KEYS = {"type", "allow_na", "min_val", "max_val", "allowed_values"}

_TYPES = {"int": int, "float": float, "str": str, "bool": bool}


def min_val(value: int | float):
    """
    Create a pandera check for minimum value.

    Parameters
    ----------
    value : int | float
        The minimum value to check against.

    Returns
    -------
    pa.Check
        A pandera check for the minimum value.
    """
    return pa.Check.ge(value)


def max_val(value: int | float):
    return pa.Check.le(value)


def allowed_values(value: list):
    if not isinstance(value, list):
        raise TypeError("allowed_values value must be a list")
    return pa.Check.isin(value)


def convert_schema(schema: dict) -> pa.DataFrameSchema:
    """
    Convert a column schema dict to a pandera DataFrameSchema.

    Each column maps ``type`` to a dtype, ``allow_na`` to ``nullable`` and
    ``min_val`` / ``max_val`` / ``allowed_values`` to checks. A top-level
    ``unique`` list becomes the schema's uniqueness constraint.

    Parameters
    ----------
    schema : dict
        The schema to convert.

    Returns
    -------
    pa.DataFrameSchema
        The converted pandera DataFrameSchema.
    """
    columns = {}
    for column_name, constraints in schema["columns"].items():
        checks = []
        if "min_val" in constraints:
            checks.append(min_val(constraints["min_val"]))
        if "max_val" in constraints:
            checks.append(max_val(constraints["max_val"]))
        if "allowed_values" in constraints:
            checks.append(allowed_values(constraints["allowed_values"]))
        pa_type = constraints["type"]
        if isinstance(pa_type, str):
            pa_type = _TYPES.get(pa_type)
        columns[column_name] = pa.Column(
            dtype=pa_type, checks=checks, nullable=constraints.get("allow_na", False)
        )
    return pa.DataFrameSchema(columns, unique=schema.get("unique"))


def validate_using_pandera(
    converted_schema: pa.DataFrameSchema, data: pd.DataFrame
) -> pd.DataFrame:
    """
    Validate data with a pandera schema, lazily so every failure is collected.

    Returns one row per (column, check) with ``invalid_ids`` holding the
    offending index labels (empty when the check passed). Every declared check
    appears, passing or not, in schema column order.

    Parameters
    ----------
    converted_schema : pa.DataFrameSchema
    data : pd.DataFrame

    Returns
    -------
    pd.DataFrame
        Columns ``column``, ``check``, ``failure_case``, ``invalid_ids``.
    """
    failed = None
    try:
        converted_schema.validate(data, lazy=True)
    except pa.errors.SchemaErrors as e:
        failures = e.failure_cases[["column", "check", "failure_case", "index"]].copy()
        failures["column"] = failures["column"].fillna("table").astype(str)
        failed = (
            failures.groupby(["column", "check"])
            .agg({"failure_case": list, "index": list})
            .reset_index()
            .rename(columns={"index": "invalid_ids"})
        )
        failed["invalid_ids"] = failed["invalid_ids"].apply(
            lambda ids: [i for i in ids if pd.notna(i)]
        )
    passing = schema_checks_as_entries(converted_schema)
    combined = pd.concat([failed, passing], ignore_index=True)
    combined = combined.drop_duplicates(["column", "check"], keep="first")
    order = list(converted_schema.columns) + ["table"]
    extra = [c for c in combined["column"].unique() if c not in order]
    combined["column"] = pd.Categorical(combined["column"], categories=order + extra, ordered=True)
    return combined.sort_values("column", kind="stable").reset_index(drop=True)


def schema_checks_as_entries(converted_schema: pa.DataFrameSchema) -> pd.DataFrame:
    """Every check a schema declares, as not-failing rows for the run log."""
    columns, checks = [], []
    for name, column in converted_schema.columns.items():
        for check in column.checks:
            columns.append(name)
            checks.append(check.error)
        columns.append(name)
        checks.append(f"dtype('{column.dtype}')")
    return pd.DataFrame(
        {
            "column": columns,
            "check": checks,
            "failure_case": [[] for _ in checks],
            "invalid_ids": [[] for _ in checks],
        }
    )

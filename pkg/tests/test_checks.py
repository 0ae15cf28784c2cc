import pandas as pd
import pandera.pandas as pa
import pytest

from mdrobustness.checks_loaders_and_exporters.checks import (
    FEATURE_TABLE_COLUMNS,
    FEATURE_TABLE_SCHEMA,
    allowed_values,
    convert_schema,
    validate_using_pandera,
)


def test_convert_schema():
    schema_dict = {
        "columns": {
            "id": {"type": "int", "min_val": 1, "max_val": 100},
            "ratio": {"type": "float", "min_val": 0.0, "max_val": 1.0},
            "label": {"type": "str", "allowed_values": ["bird", "drone"]},
        }
    }
    df = pd.DataFrame(
        {"id": [-10, 50, 101], "ratio": [0.5, 1.0, -1.0], "label": ["bird", "drone", "kite"]}
    )
    schema_obj = convert_schema(schema_dict)
    with pytest.raises(pa.errors.SchemaErrors) as excinfo:
        schema_obj.validate(df, lazy=True)
    assert len(excinfo.value.failure_cases) == 4


def test_allow_na():
    schema_dict = {
        "columns": {
            "id": {"type": "float", "min_val": 1, "allow_na": False},
            "score": {"type": "float", "min_val": 0.0, "allow_na": True},
        }
    }
    df = pd.DataFrame({"id": [2.0, None, 3.0], "score": [25.0, None, 1.0]})
    result = validate_using_pandera(convert_schema(schema_dict), df)
    # the id column is reported as not nullable, the score column is not
    assert any(
        row["column"] == "id" and "not_nullable" in str(row["check"]) and row["invalid_ids"]
        for _, row in result.iterrows()
    )
    assert not any(
        row["column"] == "score" and "not_nullable" in str(row["check"])
        for _, row in result.iterrows()
    )


def test_passing_checks_are_listed():
    schema_dict = {
        "columns": {
            "id": {"type": "int", "min_val": 1, "max_val": 100},
            "ratio": {"type": "float", "min_val": 0.0},
        }
    }
    df = pd.DataFrame({"id": [1, 50, 101], "ratio": [0.5, 0.2, 0.1]})
    result = validate_using_pandera(convert_schema(schema_dict), df)
    by_check = {(r["column"], r["check"]): r["invalid_ids"] for _, r in result.iterrows()}
    assert by_check[("id", "less_than_or_equal_to(100)")] == [2]
    assert by_check[("id", "greater_than_or_equal_to(1)")] == []
    assert by_check[("ratio", "greater_than_or_equal_to(0.0)")] == []
    # schema column order is kept
    assert list(result["column"].astype(str).unique()) == ["id", "ratio"]


def test_allowed_values_must_be_a_list():
    with pytest.raises(TypeError, match="must be a list"):
        allowed_values("bird")


def test_feature_table_schema_layout():
    assert FEATURE_TABLE_COLUMNS[:4] == ("measurement_id", "label", "noise_mode", "noise_param")
    assert FEATURE_TABLE_COLUMNS[-1] == "flags"
    assert len(FEATURE_TABLE_COLUMNS) == 15
    assert FEATURE_TABLE_SCHEMA["unique"] == ["measurement_id"]


def test_clean_table_lists_every_check_as_passing():
    schema_dict = {"columns": {"id": {"type": "int", "min_val": 1}, "ratio": {"type": "float"}}}
    df = pd.DataFrame({"id": [1, 2], "ratio": [0.5, 0.2]})
    result = validate_using_pandera(convert_schema(schema_dict), df)
    assert list(result.columns) == ["column", "check", "failure_case", "invalid_ids"]
    assert len(result) == 3
    assert all(ids == [] for ids in result["invalid_ids"])
    assert all(cases == [] for cases in result["failure_case"])

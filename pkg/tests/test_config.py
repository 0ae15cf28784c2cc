import pytest

from mdrobustness.checks_loaders_and_exporters.config_loader import ConfigLoader
from mdrobustness.errors import ConfigError
from mdrobustness.evaluation.config import (
    ABLATION_SUBSETS,
    SELECTED_FIVE,
    ClassifierKind,
    ExperimentConfig,
    resolve_feature_set,
)
from mdrobustness.signal_chain.features import FEATURE_NAMES


class TestConfigLoader:
    @pytest.mark.parametrize("suffix", ["json", "yaml", "toml"])
    def test_loading(self, suffix):
        loaded = ConfigLoader.load(f"tests/data/experiment.{suffix}")
        assert isinstance(loaded, dict)
        assert "classifier" in loaded

    def test_toml_experiment_table_is_unwrapped(self):
        assert ConfigLoader.load("tests/data/experiment.toml")["window"] == 16

    def test_invalid_format(self):
        # csv is not a registered config format
        with pytest.raises(ConfigError, match="Format 'csv' is not supported."):
            ConfigLoader.load("experiment.csv")

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="cannot read"):
            ConfigLoader.load("tests/data/missing.json")

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError, match="mapping"):
            ConfigLoader.load(path)


class TestExperimentConfigFromFile:
    def test_json(self):
        config = ExperimentConfig.from_file("tests/data/experiment.json")
        assert config.classifier is ClassifierKind.SVM_RBF_MULTI
        assert config.feature_set == SELECTED_FIVE
        assert [str(s) for s in config.noise_specs] == ["raw", "awgn:-5", "combined:-1:3"]
        assert {s.seed for s in config.noise_specs} == {7}
        assert config.c == 100.0

    def test_yaml_schedule(self):
        config = ExperimentConfig.from_file("tests/data/experiment.yaml")
        assert len(config.noise_specs) == 33
        assert config.feature_set == ("sler", "spectral_entropy", "doppler_spread")
        assert config.rf_estimators == 50
        assert config.hard_check is False

    def test_toml(self):
        config = ExperimentConfig.from_file("tests/data/experiment.toml")
        assert config.classifier is ClassifierKind.SVM_LINEAR_SINGLE
        assert config.c == 1.0
        assert (config.window, config.jobs) == (16, 2)

    def test_flags_override_file(self):
        config = ExperimentConfig.from_file(
            "tests/data/experiment.json", {"seed": 3, "classifier": None}
        )
        assert config.seed == 3
        assert config.classifier is ClassifierKind.SVM_RBF_MULTI
        assert {s.seed for s in config.noise_specs} == {3}


class TestValidation:
    def test_every_problem_is_reported(self):
        with pytest.raises(ConfigError) as excinfo:
            ExperimentConfig.from_mapping(
                {
                    "classifier": "knn",
                    "feature_set": "sler,bogus",
                    "noise": "awgn:x",
                    "colour": "blue",
                }
            )
        problems = excinfo.value.problems
        assert len(problems) == 4
        assert any("colour" in p for p in problems)
        assert any("knn" in p for p in problems)
        assert any("bogus" in p for p in problems)
        assert any("awgn:x" in p for p in problems)

    def test_linear_single_needs_one_feature(self):
        with pytest.raises(ConfigError, match="exactly one feature"):
            ExperimentConfig(classifier="svm-linear")

    def test_unknown_schedule(self):
        with pytest.raises(ConfigError, match="unknown schedule"):
            ExperimentConfig.from_mapping({"schedule": "table9"})

    def test_bad_scalars(self):
        with pytest.raises(ConfigError) as excinfo:
            ExperimentConfig.from_mapping({"seed": "abc", "n_folds": 1, "jobs": 0})
        problems = excinfo.value.problems
        assert "seed" in problems[0]
        assert len(problems) == 3
        assert problems[1] == "n_folds must be at least 2"
        assert problems[2].startswith("jobs must be non-zero")

    def test_range_checks(self):
        with pytest.raises(ConfigError) as excinfo:
            ExperimentConfig(n_folds=1, jobs=0, alpha=1.5)
        assert len(excinfo.value.problems) == 3

    def test_duplicate_features(self):
        with pytest.raises(ConfigError, match="duplicate"):
            resolve_feature_set(["sler", "sler"])


def test_named_feature_sets():
    assert resolve_feature_set("full10") == FEATURE_NAMES
    assert resolve_feature_set("sler, kurtosis") == ("sler", "kurtosis")
    assert len(ABLATION_SUBSETS) == 6
    assert len(ABLATION_SUBSETS["selected5-sler"]) == 4


def test_config_hash():
    a = ExperimentConfig()
    assert a.config_hash() == ExperimentConfig().config_hash()
    assert a.config_hash() != ExperimentConfig(seed=1).config_hash()
    assert a.to_dict()["noise_specs"] == ["raw"]
    assert a.to_dict()["classifier"] == "random-forest"


def test_with_features():
    config = ExperimentConfig(seed=5).with_features("full10")
    assert config.feature_set == FEATURE_NAMES
    assert config.seed == 5


def test_table3_is_the_full_schedule():
    full = ExperimentConfig.from_mapping({"schedule": "full"})
    assert ExperimentConfig.from_mapping({"schedule": "table3"}).noise_specs == full.noise_specs
    assert len(full.noise_specs) == 33


@pytest.mark.parametrize(
    "kind, scaled",
    [
        (ClassifierKind.RANDOM_FOREST, False),
        (ClassifierKind.SVM_RBF_MULTI, True),
        (ClassifierKind.SVM_LINEAR_SINGLE, True),
    ],
)
def test_only_svms_are_scaled(kind, scaled):
    assert kind.scaled is scaled

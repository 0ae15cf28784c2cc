import numpy as np
import pytest

from mdrobustness.evaluation.cache import CACHE_DIR_ENV, FeatureCache, cache_key
from mdrobustness.evaluation.experiment import extract_features
from mdrobustness.signal_chain.features import FeatureConfig, FeatureVector
from mdrobustness.signal_chain.noise import parse_noise_spec

DIGEST = "0f" * 20


@pytest.fixture
def vector():
    return FeatureVector(*np.linspace(0.05, 0.95, 10), flags=("sidelobe_degenerate",))


class TestCacheKey:
    def test_stable(self):
        spec = parse_noise_spec("awgn:-5", seed=42)
        assert cache_key(DIGEST, spec, FeatureConfig(), 32) == cache_key(
            DIGEST, parse_noise_spec("awgn:-5", seed=42), FeatureConfig(), 32
        )

    @pytest.mark.parametrize(
        "changed",
        [
            {"digest": "1f" * 20},
            {"spec": parse_noise_spec("awgn:-5", seed=43)},
            {"spec": parse_noise_spec("awgn:-4", seed=42)},
            {"config": FeatureConfig(alpha=0.2)},
            {"window": 16},
        ],
    )
    def test_every_input_counts(self, changed):
        base = {
            "digest": DIGEST,
            "spec": parse_noise_spec("awgn:-5", seed=42),
            "config": FeatureConfig(),
            "window": 32,
        }
        assert cache_key(**base) != cache_key(**{**base, **changed})


class TestFeatureCache:
    def test_miss_then_hit(self, vector):
        cache = FeatureCache()
        assert cache.get("k") is None
        cache.put("k", vector)
        assert cache.get("k") == vector
        assert (cache.hits, cache.misses) == (1, 1)
        assert len(cache) == 1

    def test_first_insert_wins(self, vector):
        cache = FeatureCache()
        cache.put("k", vector)
        other = FeatureVector(*np.zeros(10))
        assert cache.put("k", other) is vector
        assert cache.get("k") == vector

    def test_entries_persist_on_disk(self, tmp_path, vector):
        FeatureCache(tmp_path / "cache").put("k", vector)
        assert (tmp_path / "cache" / "k.json").exists()
        reloaded = FeatureCache(tmp_path / "cache")
        assert "k" in reloaded
        assert reloaded.get("k") == vector
        assert list((tmp_path / "cache").glob("*.tmp")) == []

    def test_from_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(CACHE_DIR_ENV, str(tmp_path / "env"))
        assert FeatureCache.from_env().directory == tmp_path / "env"
        monkeypatch.delenv(CACHE_DIR_ENV)
        assert FeatureCache.from_env().directory is None


def test_extraction_reuses_cached_vectors(small_dataset):
    cache = FeatureCache()
    spec = parse_noise_spec("awgn:0", seed=42)
    first = extract_features(small_dataset, spec, cache=cache)
    assert cache.hits == 0
    second = extract_features(small_dataset, spec, cache=cache)
    assert cache.hits == len(small_dataset)
    assert first.equals(second)
    # a new noise seed is a new computation
    extract_features(small_dataset, spec.with_seed(7), cache=cache)
    assert len(cache) == 2 * len(small_dataset)

"""
Feature cache keyed by content hash.

A key covers the measurement bytes, the noise condition (including its seed),
the feature parameters and the spectrogram window, so a cached vector is only
reused for the exact same computation. Entries live in memory and, when a
directory is given (or ``MDROBUSTNESS_CACHE_DIR`` is set), as one JSON file
per key on disk.
"""

import hashlib
import json
import logging
import os
import tempfile
import threading
from dataclasses import asdict
from pathlib import Path

from mdrobustness.signal_chain.features import FEATURE_NAMES, FeatureConfig, FeatureVector
from mdrobustness.signal_chain.noise import NoiseSpec

CACHE_DIR_ENV = "MDROBUSTNESS_CACHE_DIR"

logger = logging.getLogger(__name__)


def cache_key(digest: str, spec: NoiseSpec, config: FeatureConfig, window: int) -> str:
    payload = {
        "measurement": digest,
        "noise": {
            "mode": spec.mode.value,
            "snr_db": spec.snr_db,
            "phase_deg": spec.phase_deg,
            "seed": spec.seed,
        },
        "features": asdict(config),
        "window": int(window),
    }
    text = json.dumps(payload, sort_keys=True)
    return hashlib.blake2b(text.encode(), digest_size=20).hexdigest()


def _to_json(vector: FeatureVector) -> dict:
    return {**vector.as_dict(), "flags": list(vector.flags)}


def _from_json(data: dict) -> FeatureVector:
    return FeatureVector(
        **{name: float(data[name]) for name in FEATURE_NAMES}, flags=tuple(data["flags"])
    )


class FeatureCache:
    """
    Insert-if-absent store of feature vectors, safe to share between threads.

    Parameters
    ----------
    directory : str or PathLike, optional
        Where entries are persisted; memory only when None.
    """

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._entries: dict[str, FeatureVector] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @classmethod
    def from_env(cls) -> "FeatureCache":
        return cls(os.environ.get(CACHE_DIR_ENV) or None)

    def __len__(self):
        return len(self._entries)

    def __contains__(self, key):
        return self.get(key) is not None

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> FeatureVector | None:
        with self._lock:
            vector = self._entries.get(key)
            if vector is None and self.directory is not None and self._path(key).exists():
                with open(self._path(key), "r") as f:
                    vector = _from_json(json.load(f))
                self._entries[key] = vector
            if vector is None:
                self.misses += 1
            else:
                self.hits += 1
            return vector

    def put(self, key: str, vector: FeatureVector) -> FeatureVector:
        """Store ``vector`` unless ``key`` is present; returns the stored vector."""
        with self._lock:
            existing = self._entries.setdefault(key, vector)
            if existing is vector and self.directory is not None:
                self._write(key, vector)
            return existing

    def _write(self, key: str, vector: FeatureVector):
        target = self._path(key)
        if target.exists():
            return
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        with os.fdopen(fd, "w") as f:
            json.dump(_to_json(vector), f)
        # readers only ever see a complete file
        os.replace(tmp, target)
        logger.debug("cached features under %s", key)

# scenfuzz/helpers.py

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np


class HashGenerator:
    """
    Hashes that identify scenario files, campaigns and rollouts
    """

    @staticmethod
    def file_hash(path: Union[str, Path]) -> str:
        """
        SHA-256 of a file's bytes

        Args:
            path: File to hash

        Returns:
            Hex digest prefixed with ``sha256:``
        """
        digest = hashlib.sha256()
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(65536), b""):
                digest.update(chunk)
        return f"sha256:{digest.hexdigest()}"

    @staticmethod
    def generate_record_hash(fields: Dict[str, Any], length: int = 16) -> str:
        """
        Hash a record based on its fields

        Fields are sorted so the hash does not depend on insertion order.
        """
        field_str = "|".join(
            f"{k}:{v}" for k, v in sorted(fields.items()) if v is not None
        )
        return hashlib.sha256(field_str.encode("utf-8")).hexdigest()[:length]

    @staticmethod
    def rollout_seed(campaign_seed: int, row_index: int) -> int:
        """Per-row rollout seed, independent of worker scheduling"""
        seq = np.random.SeedSequence([int(campaign_seed) & 0xFFFFFFFFFFFFFFFF, int(row_index)])
        return int(seq.generate_state(1, dtype=np.uint64)[0])


def dumps_line(obj: Any) -> str:
    """Canonical single-line JSON used for every persisted record"""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)

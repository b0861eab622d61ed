"""Benchmark orchestration: config, manifest, and pipeline stages."""

from .config import BenchConfig, hash_config, load_config
from .manifest import Manifest, file_sha256
from .pipeline import (
    build_attributor,
    run_all,
    stage_attribute,
    stage_gen_data,
    stage_report,
    stage_train,
)

__all__ = [
    "BenchConfig",
    "Manifest",
    "build_attributor",
    "file_sha256",
    "hash_config",
    "load_config",
    "run_all",
    "stage_attribute",
    "stage_gen_data",
    "stage_report",
    "stage_train",
]

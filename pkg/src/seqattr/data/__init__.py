from .generator import (
    TASK_NAMES,
    DataConfig,
    TaskSpec,
    generate,
    multiclass_rule_value,
    rule_satisfied,
    task_spec,
)
from .jsonl import export_jsonl, import_jsonl
from .records import CODE, LAB, PAD_CODE, FeaturePosition, PatientRecord, encode_batch

__all__ = [
    "TASK_NAMES",
    "DataConfig",
    "TaskSpec",
    "generate",
    "multiclass_rule_value",
    "rule_satisfied",
    "task_spec",
    "export_jsonl",
    "import_jsonl",
    "CODE",
    "LAB",
    "PAD_CODE",
    "FeaturePosition",
    "PatientRecord",
    "encode_batch",
]

"""Exception types shared across the package."""


class SeqAttrError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatchError(SeqAttrError):
    """An op received operands with incompatible shapes."""

    def __init__(self, op: str, detail: str):
        self.op = op
        super().__init__(f"{op}: {detail}")


class NumericOverflowError(SeqAttrError):
    """A forward op produced a non-finite value."""

    def __init__(self, op: str, node_id: int):
        self.op = op
        self.node_id = node_id
        super().__init__(f"{op} (node {node_id}) produced a non-finite value")


class MissingReferenceError(SeqAttrError):
    """A backward mode needed reference activations that were not supplied."""


class UnknownOpError(SeqAttrError):
    """Op kind not in the supported set."""


class TrainingDivergedError(SeqAttrError):
    """Loss became non-finite during training."""


class MethodNotApplicableError(SeqAttrError):
    """Attribution method cannot run on the given architecture."""


class DegenerateSampleError(SeqAttrError):
    """Perturbation sampling produced no usable variation."""


class ConfigError(SeqAttrError):
    """Benchmark configuration failed validation."""


class CheckpointError(SeqAttrError):
    """Model checkpoint is missing, corrupt, or incompatible."""

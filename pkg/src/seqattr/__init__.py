"""Attribution methods and faithfulness benchmarking for clinical sequence models."""

__version__ = "0.1.0"

"""Multi-fidelity Gaussian-process response surfaces whose low-fidelity level
is a reduced-input surrogate (active subspaces or nonlinear level sets)."""
from .core import Box, Dataset, HierarchyError, validate_hierarchy
from .gp import GpModel
from .nargp import MfModel
from .pipeline import PipelineConfig, run_nargp_as, run_reversed

__all__ = [
    "Box",
    "Dataset",
    "GpModel",
    "HierarchyError",
    "MfModel",
    "PipelineConfig",
    "run_nargp_as",
    "run_reversed",
    "validate_hierarchy",
]
__version__ = "0.1.0"

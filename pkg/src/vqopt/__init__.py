"""Noise-robust derivative-free optimizers benchmarked on simulated
variational quantum circuits."""

from .core import (
    Box,
    Budget,
    ContractViolation,
    EvalRecord,
    FunctionObjective,
    OptimizeOutcome,
    Termination,
    substream,
    uniform_design,
)
from .qsim import Circuit, Gate, NoiseSpec, PauliSum, estimate_energy
from .problems import (
    SyntheticObjective,
    SyntheticProblem,
    VqeObjective,
    VqeProblem,
    make_hubbard,
    make_synthetic,
    make_toy_molecule,
)
from .registry import make_optimizer, optimizer_ids
from .harness import RunConfig, run_single, run_sweep, scan_surface, emit_plot
from .compose import CompositionPlan, run_composition

__version__ = "0.1.0"

__all__ = [
    "Box", "Budget", "ContractViolation", "EvalRecord", "FunctionObjective",
    "OptimizeOutcome", "Termination", "substream", "uniform_design",
    "Circuit", "Gate", "NoiseSpec", "PauliSum", "estimate_energy",
    "SyntheticObjective", "SyntheticProblem", "VqeObjective", "VqeProblem",
    "make_hubbard", "make_synthetic", "make_toy_molecule",
    "make_optimizer", "optimizer_ids",
    "RunConfig", "run_single", "run_sweep", "scan_surface", "emit_plot",
    "CompositionPlan", "run_composition",
    "__version__",
]

"""Benders decomposition for binary MILPs with the master problem solved as a QUBO."""

from importlib import resources

from .driver import SolveConfig, SolveReport, bounds_gap, run
from .encoding import TEncoding
from .model import Cut, CutKind, MasterState, MilpInstance, Status, brute_force_milp, load_instance, parse_instance
from .qubo import PenaltyConfig, QuboMatrix, build_master_qubo
from .samplers import SampleResult, SamplerParams, solve_exhaustive, solve_sa

__version__ = "0.1.0"


def example_instance() -> MilpInstance:
    """The bundled two-binary, four-continuous demonstration instance."""
    return parse_instance(resources.files(__package__).joinpath("data/paper_instance.json").read_text())


__all__ = [
    "Cut",
    "CutKind",
    "MasterState",
    "MilpInstance",
    "PenaltyConfig",
    "QuboMatrix",
    "SampleResult",
    "SamplerParams",
    "SolveConfig",
    "SolveReport",
    "Status",
    "TEncoding",
    "bounds_gap",
    "brute_force_milp",
    "build_master_qubo",
    "example_instance",
    "load_instance",
    "parse_instance",
    "run",
    "solve_exhaustive",
    "solve_sa",
]

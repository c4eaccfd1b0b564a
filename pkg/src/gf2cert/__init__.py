"""GF(2) staged construction of homomorphisms with machine-checked certificates."""

from .gf2 import (
    EMPTY,
    Dependent,
    EchelonState,
    FinVec,
    Functional,
    Independent,
    complete_basis,
    interval,
    is_independent,
    rank,
    solve_functional,
    sym_diff,
)
from .homomorphism import HTable, ScheduleItem, build_psi, find_claim_n, pick_pigeonhole
from .reduction import BasisMap, build_psi_reduced, make_basis_map
from .driver import Config, GeneratorMatrix, TMatrix, run_recursion
from .certificate import gen_config, load_config, run_build, run_verify

__all__ = [
    "EMPTY", "Dependent", "EchelonState", "FinVec", "Functional", "Independent",
    "complete_basis", "interval", "is_independent", "rank", "solve_functional", "sym_diff",
    "HTable", "ScheduleItem", "build_psi", "find_claim_n", "pick_pigeonhole",
    "BasisMap", "build_psi_reduced", "make_basis_map",
    "Config", "GeneratorMatrix", "TMatrix", "run_recursion",
    "gen_config", "load_config", "run_build", "run_verify",
]

"""Reduce an arbitrary independent sequence ``H`` to the singleton case.

``H`` is completed to a basis of the subsets of ``[0, ground)`` and the
isomorphism ``Phi`` sending ``H_j`` to ``{j}`` transports targets and tables
into coordinates where the blocks are singletons.  The functional built
there is pulled back through ``Phi``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import CodimensionTooSmall
from .gf2 import EchelonState, FinVec, Functional, complete_basis, is_independent
from .errors import DependentFamily
from .homomorphism import BuildTrace, HTable, ScheduleItem, build_psi


class BasisMap:
    """``Phi``: coordinates of a vector in the basis ``H ++ completion``."""

    def __init__(self, ground: int, ordered_basis: Sequence[FinVec]):
        self.ground = ground
        self.ordered_basis = tuple(ordered_basis)
        if len(self.ordered_basis) != ground:
            raise ValueError("basis length must equal ground")
        ech = EchelonState()
        for v in self.ordered_basis:
            combo = ech.add(v.mask)
            if combo is not None:
                raise DependentFamily(FinVec.from_mask(combo).support)
        # forward({xi}) for every singleton; forward is linear.
        self._images = []
        for xi in range(ground):
            residual, combo = ech.reduce(1 << xi)
            assert residual == 0
            self._images.append(combo)

    def forward(self, v: FinVec) -> FinVec:
        if not v.within(self.ground):
            raise ValueError(f"{v} outside [0,{self.ground})")
        mask = 0
        for xi in v.support:
            mask ^= self._images[xi]
        return FinVec.from_mask(mask)

    __call__ = forward

    def backward(self, coords: FinVec) -> FinVec:
        mask = 0
        for j in coords.support:
            mask ^= self.ordered_basis[j].mask
        return FinVec.from_mask(mask)

    def pull_back(self, psi_tilde: Functional) -> Functional:
        """``psi_tilde o Phi`` as a functional on ``[0, ground)``."""
        bits = 0
        for xi in range(self.ground):
            if psi_tilde.eval(FinVec.from_mask(self._images[xi])):
                bits |= 1 << xi
        return Functional(self.ground, bits)


def make_basis_map(H: Sequence[FinVec], ground: int, min_codim: int = 0) -> BasisMap:
    verdict = is_independent(H)
    if not verdict:
        raise DependentFamily(verdict.witness)
    if ground - len(H) < min_codim:
        raise CodimensionTooSmall(
            f"codimension {ground - len(H)} of H inside [0,{ground}) is below the required {min_codim}"
        )
    return BasisMap(ground, list(H) + complete_basis(H, ground))


def transport_table(table: HTable, bm: BasisMap) -> HTable:
    return table.map_entries(bm.forward)


@dataclass(frozen=True)
class ReducedTrace:
    H: tuple[FinVec, ...]
    ground: int
    inner: BuildTrace

    def to_dict(self) -> dict:
        return {"H": [str(v) for v in self.H], "ground": self.ground, "inner": self.inner.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ReducedTrace":
        return cls(tuple(FinVec.parse(v) for v in d["H"]), int(d["ground"]), BuildTrace.from_dict(d["inner"]))


def build_psi_reduced(
    k: int,
    F: Sequence[FinVec],
    H: Sequence[FinVec],
    schedule: Sequence[ScheduleItem],
    ground: int,
    min_codim: int = 0,
    claim_budget: int | None = None,
) -> tuple[Functional, ReducedTrace]:
    """``psi = psi_tilde o Phi`` where ``psi_tilde`` is built on transported data.

    Blocks ``H_{n(k+1)+i}`` play the role of the singletons, so the block
    region of the inner construction is ``[0, len(H))``.
    """
    bm = make_basis_map(H, ground, min_codim)
    moved: dict[int, HTable] = {}
    inner_schedule = []
    for item in schedule:
        key = id(item.table)
        if key not in moved:
            moved[key] = transport_table(item.table, bm)
        inner_schedule.append(ScheduleItem(moved[key], item.sigma))
    F_moved = [bm.forward(v) for v in F]
    psi_tilde, trace = build_psi(k, F_moved, inner_schedule, ground, omega=len(H), claim_budget=claim_budget)
    return bm.pull_back(psi_tilde), ReducedTrace(tuple(H), ground, trace)

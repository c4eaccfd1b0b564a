"""Staged construction of a single homomorphism psi.

Given targets ``F^0..F^k`` and a schedule of ``(table, sigma)`` pairs, build
psi so that

* ``psi(F^0) = 1`` when ``F^0`` is nonempty,
* for every block ``n >= N_0`` some ``i <= k`` has
  ``psi(F^i) != psi({n(k+1)+i})``,
* every scheduled pair is realized: ``psi(table(i, n)) = sigma(i)`` for the
  ``n`` chosen at its step.

Block indices ``n(k+1)+i`` live in ``[0, omega)``; ``omega`` defaults to the
whole ground.  Each step picks the smallest admissible ``n``, ``N`` and
``i_n`` so the output is a pure function of the inputs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .errors import ClaimSearchExhausted, DependentFamily
from .gf2 import EMPTY, EchelonState, FinVec, Functional, interval, is_independent, solve_functional


class HTable:
    """Independent table ``(i, n) -> FinVec`` for ``i < m`` and ``n`` in ``C``."""

    __slots__ = ("m", "C", "rows", "label")

    def __init__(
        self,
        m: int,
        rows: Mapping[int, Sequence[FinVec]],
        label: str = "",
        bound: int | None = None,
        check: bool = True,
    ):
        if m < 1:
            raise ValueError("table needs m >= 1")
        C = tuple(sorted(rows))
        if not C:
            raise ValueError("table needs a nonempty index set C")
        frozen = {}
        for n in C:
            if n < 0:
                raise ValueError(f"negative table index n={n}")
            row = tuple(rows[n])
            if len(row) != m:
                raise ValueError(f"row n={n} has {len(row)} entries, expected {m}")
            frozen[n] = row
        self.m = m
        self.C = C
        self.rows = frozen
        self.label = label
        if check:
            if bound is not None:
                for n, row in frozen.items():
                    for i, v in enumerate(row):
                        if not v.within(bound):
                            raise ValueError(f"entry ({i},{n})={v} outside [0,{bound})")
            verdict = is_independent(self.vectors())
            if not verdict:
                raise DependentFamily(verdict.witness)

    def entry(self, i: int, n: int) -> FinVec:
        return self.rows[n][i]

    def row(self, n: int) -> tuple[FinVec, ...]:
        return self.rows[n]

    def vectors(self) -> list[FinVec]:
        return [v for n in self.C for v in self.rows[n]]

    def support(self) -> FinVec:
        mask = 0
        for v in self.vectors():
            mask |= v.mask
        return FinVec.from_mask(mask)

    def restrict(self, ns: Iterable[int], label: str | None = None) -> "HTable":
        ns = list(ns)
        return HTable(self.m, {n: self.rows[n] for n in ns}, label if label is not None else self.label, check=False)

    def map_entries(self, fn, label: str | None = None) -> "HTable":
        return HTable(
            self.m,
            {n: tuple(fn(v) for v in row) for n, row in self.rows.items()},
            label if label is not None else self.label,
        )

    def __repr__(self) -> str:
        return f"HTable({self.label or '?'}, m={self.m}, |C|={len(self.C)})"


@dataclass(frozen=True)
class ScheduleItem:
    table: HTable
    sigma: tuple[int, ...]

    def __post_init__(self):
        if len(self.sigma) != self.table.m:
            raise ValueError(f"sigma length {len(self.sigma)} != m={self.table.m}")


def sigmas(m: int) -> list[tuple[int, ...]]:
    """All patterns in {0,1}^m, lexicographic."""
    return list(itertools.product((0, 1), repeat=m))


def round_robin_schedule(tables: Sequence[HTable], repetitions: int) -> list[ScheduleItem]:
    """Each ``(table, sigma)`` pair listed ``repetitions`` times, interleaved."""
    return [
        ScheduleItem(t, s)
        for _ in range(repetitions)
        for t in tables
        for s in sigmas(t.m)
    ]


def claim_candidate_bound(m: int, E_size: int) -> int:
    """Candidates that always suffice for :func:`find_claim_n`."""
    return (2**m - 1) * 2**E_size + 1


def find_claim_n(E: FinVec, table: HTable, search: Iterable[int] | None = None) -> int:
    """Smallest ``n`` in search order making ``{{b}: b in E}`` plus row ``n`` independent."""
    keep = ~E.mask
    tried = 0
    for n in table.C if search is None else search:
        tried += 1
        reduced = [v.mask & keep for v in table.row(n)]
        ech = EchelonState()
        if all(ech.add(r) is None for r in reduced):
            return n
    raise ClaimSearchExhausted(
        f"no n among {tried} candidates of table {table.label or '?'} is independent of E (|E|={len(E)})"
    )


def pick_pigeonhole(
    E: FinVec,
    chosen: Sequence[FinVec],
    k: int,
    N_lo: int,
    N_hi: int,
    limit: int | None = None,
) -> dict[int, int]:
    """For each block ``n`` in ``[N_lo, N_hi)`` the smallest ``i_n <= k`` whose
    singleton ``{n(k+1)+i_n}`` keeps the running family independent.

    Blocks reaching ``limit`` or beyond are skipped.
    """
    ech = EchelonState()
    for j in E.support:
        ech.add(1 << j)
    for v in chosen:
        combo = ech.add(v.mask)
        if combo is not None:
            raise DependentFamily(FinVec.from_mask(combo).support, "singletons of E together with chosen are dependent")
    out: dict[int, int] = {}
    for n in range(N_lo, N_hi):
        if limit is not None and n * (k + 1) + k >= limit:
            continue
        for i in range(k + 1):
            if ech.add(1 << (n * (k + 1) + i)) is None:
                out[n] = i
                break
        else:
            raise AssertionError(f"pigeonhole failed at block n={n}")
    return out


@dataclass(frozen=True)
class BuildStep:
    l: int
    label: str | None
    sigma: tuple[int, ...] | None
    n: int | None
    N_next: int
    i_map: dict[int, int]
    constraints: tuple[tuple[FinVec, int], ...]
    E: FinVec

    def to_dict(self) -> dict:
        return {
            "l": self.l,
            "table": self.label,
            "sigma": None if self.sigma is None else "".join(map(str, self.sigma)),
            "n": self.n,
            "N_next": self.N_next,
            "i_map": {str(n): i for n, i in sorted(self.i_map.items())},
            "constraints": [[str(v), b] for v, b in self.constraints],
            "E": str(self.E),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BuildStep":
        return cls(
            l=int(d["l"]),
            label=d["table"],
            sigma=None if d["sigma"] is None else tuple(int(c) for c in d["sigma"]),
            n=d["n"],
            N_next=int(d["N_next"]),
            i_map={int(n): int(i) for n, i in d["i_map"].items()},
            constraints=tuple((FinVec.parse(v), int(b)) for v, b in d["constraints"]),
            E=FinVec.parse(d["E"]),
        )


@dataclass(frozen=True)
class StageState:
    """Data after ``s`` steps: ``N_0..N_s``, ``n_0..n_{s-1}``, ``E_s``, ``phi_s``.

    The full history is kept so every step condition can be re-checked.
    A closing step (no schedule item) has ``None`` in ``ns`` and ``items``.
    """

    k: int
    F: tuple[FinVec, ...]
    bound: int
    omega: int
    Ns: tuple[int, ...]
    ns: tuple[int | None, ...]
    Es: tuple[FinVec, ...]
    phis: tuple[Functional, ...]
    items: tuple[ScheduleItem | None, ...]
    steps: tuple[BuildStep, ...] = field(default=())

    @property
    def s(self) -> int:
        return len(self.ns)

    @property
    def N(self) -> int:
        return self.Ns[-1]

    @property
    def E(self) -> FinVec:
        return self.Es[-1]

    @property
    def phi(self) -> Functional:
        return self.phis[-1]

    def chosen_vectors(self) -> list[FinVec]:
        return [v for item, n in zip(self.items, self.ns) if item is not None for v in item.table.row(n)]


def _block_top(N: int, k: int, omega: int) -> int:
    return min(N * (k + 1), omega)


def _covering_N(mask: int, k: int, omega: int) -> int:
    low = mask & ((1 << omega) - 1)
    if not low:
        return 0
    return -(-low.bit_length() // (k + 1))


def initial_state(k: int, F: Sequence[FinVec], bound: int, omega: int | None = None) -> StageState:
    omega = bound if omega is None else omega
    F = tuple(F)
    if len(F) != k + 1:
        raise ValueError(f"need k+1={k + 1} targets, got {len(F)}")
    union = 0
    for v in F:
        if not v.within(bound):
            raise ValueError(f"target {v} outside [0,{bound})")
        union |= v.mask
    N0 = max(1, _covering_N(union, k, omega))
    E0 = FinVec.from_mask(union) | interval(0, _block_top(N0, k, omega))
    constraints = [(F[0], 1)] if F[0] else []
    phi0 = solve_functional(constraints, bound)
    step0 = BuildStep(0, None, None, None, N0, {}, tuple(constraints), E0)
    return StageState(k, F, bound, omega, (N0,), (), (E0,), (phi0,), (), (step0,))


def stage_advance(state: StageState, item: ScheduleItem | None, claim_budget: int | None = None) -> StageState:
    """One step of the construction; ``item=None`` closes the remaining blocks.

    ``claim_budget`` caps how many candidates the Claim search may try.
    """
    k, omega = state.k, state.omega
    E, phi, N = state.E, state.phi, state.N
    if item is not None:
        prior = [n for n in state.ns if n is not None]
        after = prior[-1] if prior else None
        candidates = [n for n in item.table.C if after is None or n > after]
        if claim_budget is not None:
            candidates = candidates[:claim_budget]
        n_l = find_claim_n(E, item.table, candidates)
        fs = item.table.row(n_l)
        fmask = 0
        for v in fs:
            if not v.within(state.bound):
                raise ValueError(f"table entry {v} outside bound {state.bound}")
            fmask |= v.mask
        N_next = max(N + 1, _covering_N(fmask, k, omega))
    else:
        n_l, fs, fmask = None, (), 0
        N_next = max(N + 1, omega // (k + 1))
    i_map = pick_pigeonhole(E, fs, k, N, N_next, limit=omega)
    new_constraints: list[tuple[FinVec, int]] = []
    for n, i in sorted(i_map.items()):
        new_constraints.append((FinVec.from_mask(1 << (n * (k + 1) + i)), 1 - phi.eval(state.F[i])))
    if item is not None:
        for i, v in enumerate(fs):
            new_constraints.append((v, item.sigma[i]))
    pins = [(FinVec.from_mask(1 << b), phi.bit(b)) for b in E.support]
    phi_next = solve_functional(pins + new_constraints, state.bound)
    E_next = E | interval(0, _block_top(N_next, k, omega)) | FinVec.from_mask(fmask)
    step = BuildStep(
        state.s + 1,
        None if item is None else item.table.label,
        None if item is None else tuple(item.sigma),
        n_l,
        N_next,
        i_map,
        tuple(new_constraints),
        E_next,
    )
    return replace(
        state,
        Ns=state.Ns + (N_next,),
        ns=state.ns + (n_l,),
        Es=state.Es + (E_next,),
        phis=state.phis + (phi_next,),
        items=state.items + (item,),
        steps=state.steps + (step,),
    )


def needs_closing(state: StageState) -> bool:
    return state.N < state.omega // (state.k + 1)


def check_stage_conditions(state: StageState) -> dict[str, bool]:
    """Evaluate step conditions a) through g) on the recorded history."""
    k, F, omega = state.k, state.F, state.omega
    Ns, ns, Es, phis, items = state.Ns, state.ns, state.Es, state.phis, state.items
    l = state.s
    real_ns = [n for n in ns if n is not None]
    out = {}
    out["a"] = Ns[0] >= 1 and all(b > a for a, b in zip(Ns, Ns[1:]))
    out["b"] = all(b > a for a, b in zip(real_ns, real_ns[1:])) and all(n >= 0 for n in real_ns)

    union_F = FinVec.from_mask(0)
    for v in F:
        union_F = union_F | v
    ok_c = True
    ok_f = True
    chosen = 0
    for s in range(l + 1):
        expect = union_F | interval(0, _block_top(Ns[s], k, omega)) | FinVec.from_mask(chosen)
        ok_c &= Es[s] == expect
        low = chosen & ((1 << omega) - 1)
        ok_f &= low.bit_length() <= Ns[s] * (k + 1)
        if s < l and items[s] is not None:
            for v in items[s].table.row(ns[s]):
                chosen |= v.mask
    out["c"] = ok_c
    out["f"] = ok_f

    ok_d = True
    for s in range(l + 1):
        if phis[s].bits & ~Es[s].mask:
            ok_d = False
        for r in range(s):
            if (phis[s].bits ^ phis[r].bits) & Es[r].mask:
                ok_d = False
    out["d"] = ok_d

    ok_e = True
    for s in range(l):
        phi = phis[s + 1]
        for n in range(Ns[s], Ns[s + 1]):
            if n * (k + 1) + k >= omega:
                continue
            if all(phi.eval(F[i]) == phi.bit(n * (k + 1) + i) for i in range(k + 1)):
                ok_e = False
    out["e"] = ok_e

    ok_g = True
    for s in range(l):
        if items[s] is None:
            continue
        row = items[s].table.row(ns[s])
        ok_g &= all(phis[s + 1].eval(v) == items[s].sigma[i] for i, v in enumerate(row))
    out["g"] = ok_g
    out["i"] = (not F[0]) or phis[0].eval(F[0]) == 1
    return out


@dataclass(frozen=True)
class Realization:
    label: str
    sigma: tuple[int, ...]
    n: int


@dataclass(frozen=True)
class BuildTrace:
    k: int
    F: tuple[FinVec, ...]
    bound: int
    omega: int
    steps: tuple[BuildStep, ...]

    @property
    def N0(self) -> int:
        return self.steps[0].N_next

    @property
    def realizations(self) -> list[Realization]:
        return [Realization(s.label, s.sigma, s.n) for s in self.steps if s.n is not None]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "F": [str(v) for v in self.F],
            "bound": self.bound,
            "omega": self.omega,
            "N0": self.N0,
            "steps": [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BuildTrace":
        return cls(
            k=int(d["k"]),
            F=tuple(FinVec.parse(v) for v in d["F"]),
            bound=int(d["bound"]),
            omega=int(d["omega"]),
            steps=tuple(BuildStep.from_dict(s) for s in d["steps"]),
        )


def build_psi(
    k: int,
    F: Sequence[FinVec],
    schedule: Sequence[ScheduleItem],
    bound: int,
    omega: int | None = None,
    claim_budget: int | None = None,
) -> tuple[Functional, BuildTrace]:
    """Run every schedule item, close the remaining blocks, return psi.

    Free singletons outside the final ``E`` are zero.
    """
    if k < 1:
        raise ValueError("k must be positive")
    omega = bound if omega is None else omega
    if not 0 <= omega <= bound:
        raise ValueError("omega must lie in [0, bound]")
    for pos, item in enumerate(schedule):
        if item.table.m > k:
            raise ValueError(f"schedule item {pos}: m={item.table.m} exceeds k={k}")
        if not item.table.support().within(bound):
            raise ValueError(f"schedule item {pos}: table support outside [0,{bound})")
    state = initial_state(k, F, bound, omega)
    for pos, item in enumerate(schedule):
        try:
            state = stage_advance(state, item, claim_budget)
        except ClaimSearchExhausted as exc:
            raise ClaimSearchExhausted(f"schedule position {pos}: {exc}", position=pos) from exc
    if needs_closing(state):
        state = stage_advance(state, None)
    psi = state.phi
    if F[0] and psi.eval(F[0]) != 1:
        raise AssertionError("psi(F^0) != 1")
    return psi, BuildTrace(k, tuple(F), bound, omega, state.steps)


def agreement_set(psi: Functional, F: Sequence[FinVec], k: int, blocks: Sequence[FinVec]) -> list[int]:
    """Block numbers ``n`` with ``psi(F^i) == psi(blocks[n(k+1)+i])`` for all ``i``."""
    targets = [psi.eval(v) for v in F]
    out = []
    n = 0
    while n * (k + 1) + k < len(blocks):
        if all(psi.eval(blocks[n * (k + 1) + i]) == targets[i] for i in range(k + 1)):
            out.append(n)
        n += 1
    return out


def singleton_blocks(omega: int) -> list[FinVec]:
    return [FinVec.from_mask(1 << j) for j in range(omega)]


__all__ = [
    "HTable",
    "ScheduleItem",
    "StageState",
    "BuildStep",
    "BuildTrace",
    "Realization",
    "EMPTY",
    "sigmas",
    "round_robin_schedule",
    "claim_candidate_bound",
    "find_claim_n",
    "pick_pigeonhole",
    "initial_state",
    "stage_advance",
    "check_stage_conditions",
    "build_psi",
    "agreement_set",
    "singleton_blocks",
]

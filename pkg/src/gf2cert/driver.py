"""Finite-horizon recursion producing the stage functionals and generators.

Stages ``alpha < base`` are fixed by the T matrix.  Each later stage
``gamma`` builds its functional on ``[0, gamma)`` through the reduction,
puts 0 on the diagonal singleton and copies ``t_xi(gamma)`` above it.
Column ``alpha`` of the generator matrix is the singleton table of
``psi_alpha``: ``x[xi][alpha] = psi_alpha({xi})``.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import Gf2CertError, ScheduleSupportViolation, ValidationError
from .gf2 import EMPTY, FinVec, Functional, decode_bits, encode_bits, is_independent
from .homomorphism import HTable, ScheduleItem, sigmas
from .reduction import ReducedTrace, build_psi_reduced


@dataclass(frozen=True)
class Config:
    k: int
    ground: int
    base: int
    stages: int
    repetition: int = 3
    window_width: int = 4
    density_budget: int = 8
    combo_limit: int = 2
    family_samples: int = 50
    claim_budget: int | None = None
    min_codim: int | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.k < 1:
            raise ValidationError("k", "must be a positive integer")
        if self.base < 2:
            raise ValidationError("base", "must be at least 2")
        if not self.base <= self.stages <= self.ground:
            raise ValidationError("stages", "need base <= stages <= ground")
        if self.stages * (self.k + 1) > self.ground:
            raise ValidationError("ground", "stages*(k+1) must fit in ground")
        if self.repetition < 1:
            raise ValidationError("repetition", "must be at least 1")
        if self.claim_budget is not None and self.claim_budget < 1:
            raise ValidationError("claim_budget", "must be at least 1")
        if self.window_width < 0 or self.density_budget < 0:
            raise ValidationError("verify", "budgets must be non-negative")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "ground": self.ground,
            "base": self.base,
            "stages": self.stages,
            "repetition": self.repetition,
            "window_width": self.window_width,
            "density_budget": self.density_budget,
            "combo_limit": self.combo_limit,
            "family_samples": self.family_samples,
            "claim_budget": self.claim_budget,
            "min_codim": self.min_codim,
            "seed": self.seed,
        }


class TMatrix:
    """Rows ``t_xi`` in {0,1}^xi for ``base <= xi < ground``, as int bitsets."""

    def __init__(self, base: int, ground: int, rows: Mapping[int, int]):
        self.base = base
        self.ground = ground
        self.rows = {}
        for xi in range(base, ground):
            if xi not in rows:
                raise ValueError(f"missing t row {xi}")
            r = int(rows[xi])
            if r >> xi:
                raise ValueError(f"t row {xi} longer than {xi} bits")
            self.rows[xi] = r

    def bit(self, xi: int, alpha: int) -> int:
        return (self.rows[xi] >> alpha) & 1

    def to_dict(self) -> dict:
        return {str(xi): encode_bits(r, xi) for xi, r in sorted(self.rows.items())}

    @classmethod
    def from_dict(cls, base: int, ground: int, d: Mapping[str, str]) -> "TMatrix":
        return cls(base, ground, {int(xi): decode_bits(h, int(xi)) for xi, h in d.items()})

    def digest(self) -> str:
        text = ";".join(f"{xi}:{h}" for xi, h in self.to_dict().items())
        return hashlib.sha256(text.encode()).hexdigest()


def prefix_complete_t_matrix(base: int, ground: int, width: int, seed: int) -> TMatrix:
    """T rows whose first ``width`` bits run through every pattern.

    Row ``xi`` carries pattern ``(xi - base) mod 2^width`` on ``[0, width)``;
    the remaining bits come from a seeded RNG.  Every prefix of length at
    most ``width`` is covered when ``ground - base >= 2^width``.
    """
    rng = random.Random(seed)
    rows = {}
    for xi in range(base, ground):
        w = min(width, xi)
        low = (xi - base) % (1 << w) if w else 0
        high = rng.getrandbits(xi - w) if xi > w else 0
        rows[xi] = low | (high << w)
    return TMatrix(base, ground, rows)


@dataclass(frozen=True)
class FTask:
    f: tuple[FinVec, ...]
    targets: tuple[FinVec, ...]


@dataclass(frozen=True)
class StageTask:
    stage: int
    h: HTable | None = None
    f: FTask | None = None


def stage_budget(tasks: Mapping[int, StageTask], gamma: int) -> int:
    """Upper bound on schedule items at ``gamma``: one per table index."""
    return sum(len(t.h.C) for b, t in tasks.items() if b <= gamma and t.h is not None)


def required_codim(config: Config, tasks: Mapping[int, StageTask], gamma: int) -> int:
    task = tasks.get(gamma)
    if task is None or task.f is None or not task.f.f:
        return 0
    if config.min_codim is not None:
        return config.min_codim
    union = EMPTY
    for v in task.f.targets:
        union = union | v
    return stage_budget(tasks, gamma) * (config.k + 1) + len(union) + 4


def validate_tasks(config: Config, tasks: Mapping[int, StageTask]) -> None:
    """Support bounds, independence and codimension of every assignment."""
    k = config.k
    for gamma, task in sorted(tasks.items()):
        path = f"assignments[stage={gamma}]"
        if not config.base <= gamma < config.stages:
            raise ValidationError(path, f"stage must lie in [{config.base},{config.stages})")
        if task.h is not None:
            h = task.h
            if not 1 <= h.m <= k:
                raise ValidationError(path + ".h.m", f"m={h.m} outside [1,{k}]")
            if not h.support().within(gamma):
                raise ValidationError(path + ".h", "⋃ h_ξ(i,n) ⊆ ξ violated")
            verdict = is_independent(h.vectors())
            if not verdict:
                raise ValidationError(path + ".h", f"DependentFamily {list(verdict.witness)}")
        if task.f is not None:
            ft = task.f
            if len(ft.targets) != k + 1:
                raise ValidationError(path + ".f.targets", f"need k+1={k + 1} targets")
            for v in list(ft.f) + list(ft.targets):
                if not v.within(gamma):
                    raise ValidationError(path + ".f", "⋃ f(n) ∪ ⋃ F^i ⊆ ξ violated")
            verdict = is_independent(ft.f)
            if not verdict:
                raise ValidationError(path + ".f.f", f"DependentFamily {list(verdict.witness)}")
            need = required_codim(config, tasks, gamma)
            if gamma - len(ft.f) < need:
                raise ValidationError(
                    path + ".f.f", f"CodimensionTooSmall: {gamma - len(ft.f)} < {need}"
                )


class GeneratorMatrix:
    """``ground`` rows by ``stages`` columns; row ``xi`` is the generator ``x_xi``."""

    def __init__(self, rows: Sequence[int], columns: int):
        self.rows = tuple(int(r) for r in rows)
        self.columns = columns
        for r in self.rows:
            if r >> columns:
                raise ValueError("row wider than the number of columns")

    @property
    def ground(self) -> int:
        return len(self.rows)

    def x(self, xi: int, alpha: int) -> int:
        return (self.rows[xi] >> alpha) & 1

    def column(self, alpha: int) -> Functional:
        bits = 0
        for xi, r in enumerate(self.rows):
            if (r >> alpha) & 1:
                bits |= 1 << xi
        return Functional(self.ground, bits)

    def element(self, combo: FinVec) -> int:
        """Bits of ``sum_{xi in combo} x_xi``."""
        out = 0
        for xi in combo.support:
            out ^= self.rows[xi]
        return out

    def flip(self, xi: int, alpha: int) -> "GeneratorMatrix":
        rows = list(self.rows)
        rows[xi] ^= 1 << alpha
        return GeneratorMatrix(rows, self.columns)

    def to_hex(self) -> list[str]:
        return [encode_bits(r, self.columns) for r in self.rows]

    @classmethod
    def from_hex(cls, rows: Sequence[str], columns: int) -> "GeneratorMatrix":
        return cls([decode_bits(h, columns) for h in rows], columns)

    def __eq__(self, other) -> bool:
        return isinstance(other, GeneratorMatrix) and self.rows == other.rows and self.columns == other.columns


def init_base(config: Config, T: TMatrix) -> list[Functional]:
    out = []
    for alpha in range(config.base):
        bits = 0
        for xi in range(config.base, config.ground):
            if T.bit(xi, alpha):
                bits |= 1 << xi
        out.append(Functional(config.ground, bits))
    return out


@dataclass(frozen=True)
class PlannedItem:
    beta: int
    pattern: str
    sigma: tuple[int, ...]
    n: int

    def to_dict(self) -> dict:
        return {"beta": self.beta, "pattern": self.pattern, "sigma": "".join(map(str, self.sigma)), "n": self.n}


def window_pattern(psis: Sequence[Functional], table: HTable, n: int, lo: int, hi: int) -> str:
    """Bits ``psi_alpha(h(i, n))`` for ``alpha`` in ``[lo, hi)``, alpha-major."""
    return "".join(str(psis[a].eval(v)) for a in range(lo, hi) for v in table.row(n))


def table_label(beta: int, pattern: str) -> str:
    return f"h{beta}[{pattern}]"


def parse_table_label(label: str) -> tuple[int, str]:
    head, _, rest = label.partition("[")
    return int(head[1:]), rest.rstrip("]")


def plan_stage(
    gamma: int,
    psis: Sequence[Functional],
    tasks: Mapping[int, StageTask],
    repetition: int,
) -> tuple[list[ScheduleItem], list[PlannedItem]]:
    """Split every active table's index set into classes by its pattern on
    ``[beta, gamma)`` and hand out the sigmas round-robin inside each class.

    At most ``repetition`` members per ``(class, sigma)`` are scheduled.
    Items are ordered by their planned ``n`` so the chosen indices increase.
    """
    planned: list[tuple[int, int, ScheduleItem, PlannedItem]] = []
    for beta in sorted(b for b, t in tasks.items() if b <= gamma and t.h is not None):
        h = tasks[beta].h
        classes: dict[str, list[int]] = {}
        for n in h.C:
            classes.setdefault(window_pattern(psis, h, n, beta, gamma), []).append(n)
        pats = sigmas(h.m)
        for pattern, members in sorted(classes.items()):
            sub = h.restrict(members, label=table_label(beta, pattern))
            for j, n in enumerate(members[: repetition * len(pats)]):
                sigma = pats[j % len(pats)]
                planned.append((n, beta, ScheduleItem(sub, sigma), PlannedItem(beta, pattern, sigma, n)))
    planned.sort(key=lambda t: (t[0], t[1]))
    return [p[2] for p in planned], [p[3] for p in planned]


@dataclass
class StageRecord:
    stage: int
    plan: list[PlannedItem]
    trace: ReducedTrace

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "plan": [p.to_dict() for p in self.plan],
            "trace": self.trace.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StageRecord":
        plan = [
            PlannedItem(int(p["beta"]), p["pattern"], tuple(int(c) for c in p["sigma"]), int(p["n"]))
            for p in d["plan"]
        ]
        return cls(int(d["stage"]), plan, ReducedTrace.from_dict(d["trace"]))


def run_stage(
    gamma: int,
    psis: Sequence[Functional],
    tasks: Mapping[int, StageTask],
    T: TMatrix,
    config: Config,
) -> tuple[Functional, StageRecord]:
    k = config.k
    for beta, task in tasks.items():
        if beta <= gamma and task.h is not None and not task.h.support().within(beta):
            raise ScheduleSupportViolation(f"table at stage {beta} reaches beyond {beta}")
    schedule, plan = plan_stage(gamma, psis, tasks, config.repetition)
    task = tasks.get(gamma)
    if task is not None and task.f is not None:
        H, F = list(task.f.f), list(task.f.targets)
    else:
        H, F = [], [EMPTY] * (k + 1)
    psi, trace = build_psi_reduced(
        k, F, H, schedule, gamma, required_codim(config, tasks, gamma), config.claim_budget
    )
    bits = psi.bits
    for xi in range(gamma + 1, config.ground):
        if T.bit(xi, gamma):
            bits |= 1 << xi
    return Functional(config.ground, bits), StageRecord(gamma, plan, trace)


def extract_generators(psis: Sequence[Functional], ground: int) -> GeneratorMatrix:
    rows = [0] * ground
    for alpha, psi in enumerate(psis):
        for xi in range(ground):
            if psi.bit(xi):
                rows[xi] |= 1 << alpha
    return GeneratorMatrix(rows, len(psis))


@dataclass
class Construction:
    config: Config
    T: TMatrix
    tasks: dict[int, StageTask]
    psis: list[Functional] = field(default_factory=list)
    records: dict[int, StageRecord] = field(default_factory=dict)
    matrix: GeneratorMatrix | None = None


def run_recursion(config: Config, T: TMatrix, tasks: Mapping[int, StageTask]) -> Construction:
    config.validate()
    validate_tasks(config, tasks)
    out = Construction(config, T, dict(tasks))
    out.psis = init_base(config, T)
    for gamma in range(config.base, config.stages):
        try:
            psi, record = run_stage(gamma, out.psis, out.tasks, T, config)
        except Gf2CertError as exc:
            exc.args = (f"stage {gamma}: {exc}",)
            raise
        out.psis.append(psi)
        out.records[gamma] = record
    out.matrix = extract_generators(out.psis, config.ground)
    return out

"""Checks that recompute every promised property from the generator matrix.

The stage functionals are read off the matrix columns; the construction
code is never called.  Each check returns a :class:`Verdict`.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .driver import Config, GeneratorMatrix, StageRecord, StageTask, TMatrix, parse_table_label, window_pattern
from .errors import BoxViolation, Gf2CertError, NoMatchingStage, PatternMissing, TransferMismatch, WindowTooLarge
from .gf2 import EchelonState, FinVec, Functional, is_independent, solve_functional
from .homomorphism import HTable, agreement_set
from .reduction import make_basis_map

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class Verdict:
    check: str
    verdict: str
    witnesses: list = field(default_factory=list)
    detail: str = ""
    inputs_digest: str = ""

    @property
    def ok(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "inputs_digest": self.inputs_digest,
            "verdict": self.verdict,
            "witnesses": self.witnesses,
            "detail": self.detail,
        }


def digest(*parts) -> str:
    text = json.dumps(parts, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _verdict(check: str, failures: list, detail: str, inputs: str, witnesses: list | None = None) -> Verdict:
    if failures:
        return Verdict(check, FAIL, failures[:20], f"{len(failures)} violation(s); {detail}", inputs)
    return Verdict(check, PASS, witnesses or [], detail, inputs)


# -- conditions on the stage functionals ---------------------------------


def check_base(config: Config, T: TMatrix, matrix: GeneratorMatrix) -> Verdict:
    bad = []
    for alpha in range(min(config.base, matrix.columns)):
        for xi in range(config.ground):
            want = 0 if xi < config.base else T.bit(xi, alpha)
            if matrix.x(xi, alpha) != want:
                bad.append({"xi": xi, "alpha": alpha})
    return _verdict("base_stages", bad, f"columns < {config.base}", digest(matrix.to_hex(), T.digest()))


def check_condition_B(config: Config, T: TMatrix, matrix: GeneratorMatrix) -> Verdict:
    bad = []
    for beta in range(config.base, matrix.columns):
        for xi in range(beta + 1, config.ground):
            if matrix.x(xi, beta) != T.bit(xi, beta):
                bad.append({"xi": xi, "beta": beta})
    return _verdict("condition_B", bad, "x[xi][beta] == t_xi(beta) above the diagonal", digest(matrix.to_hex(), T.digest()))


def check_diagonal(config: Config, matrix: GeneratorMatrix) -> Verdict:
    bad = [
        {"gamma": g}
        for g in range(config.base, min(matrix.columns, config.ground))
        if matrix.x(g, g) != 0
    ]
    return _verdict("diagonal", bad, "psi_gamma({gamma}) == 0", digest(matrix.to_hex()))


def check_condition_A(config: Config, tasks: Mapping[int, StageTask], matrix: GeneratorMatrix) -> Verdict:
    bad, seen = [], []
    for gamma, task in sorted(tasks.items()):
        if task.f is None or not task.f.targets[0]:
            continue
        F0 = task.f.targets[0]
        seen.append(gamma)
        if matrix.column(gamma).eval(F0) != 1:
            bad.append({"stage": gamma, "F0": str(F0)})
    return _verdict("condition_A", bad, f"stages {seen}", digest(matrix.to_hex(), sorted(tasks)))


def check_condition_C(
    config: Config,
    tasks: Mapping[int, StageTask],
    matrix: GeneratorMatrix,
    records: Mapping[int, StageRecord],
) -> Verdict:
    bad, info = [], []
    k = config.k
    for gamma, task in sorted(tasks.items()):
        if task.f is None:
            continue
        if gamma not in records:
            bad.append({"stage": gamma, "reason": "no trace"})
            continue
        N0 = records[gamma].trace.inner.N0
        psi = matrix.column(gamma)
        agree = agreement_set(psi, task.f.targets, k, task.f.f)
        late = [n for n in agree if n >= N0]
        blocks = len(task.f.f) // (k + 1)
        info.append({"stage": gamma, "N0": N0, "blocks": blocks, "agreement": agree})
        if late:
            bad.append({"stage": gamma, "N0": N0, "agreeing_n": late})
    return _verdict("condition_C", bad, "agreement set inside [0, N0)", digest(matrix.to_hex(), sorted(tasks)), info)


def density_witnesses(
    columns: Sequence[Functional],
    table: HTable,
    beta: int,
    gamma: int,
    budget: int,
) -> dict[str, int]:
    """Smallest realizing ``n`` for every target tuple on the window ``[beta, gamma)``.

    Raises :class:`WindowTooLarge` when ``(gamma - beta) * m`` exceeds the budget.
    """
    width = gamma - beta
    if width * table.m > budget:
        raise WindowTooLarge(f"window [{beta},{gamma}) with m={table.m} exceeds budget {budget}")
    found: dict[str, int] = {}
    for n in table.C:
        pat = window_pattern(columns, table, n, beta, gamma)
        found.setdefault(pat, n)
    return found


def window_density_check(
    columns: Sequence[Functional],
    table: HTable,
    beta: int,
    gamma: int,
    budget: int,
) -> tuple[bool, dict[str, int], list[str]]:
    """Returns ``(dense, realizing n per target, missing targets)``."""
    found = density_witnesses(columns, table, beta, gamma, budget)
    total = (gamma - beta) * table.m
    missing = []
    for bits in itertools.product("01", repeat=total):
        target = "".join(bits)
        if target not in found:
            missing.append(target)
    return not missing, {t: found[t] for t in sorted(found)}, missing


def check_condition_D(config: Config, tasks: Mapping[int, StageTask], matrix: GeneratorMatrix, budget: int) -> Verdict:
    columns = [matrix.column(a) for a in range(matrix.columns)]
    bad, checked, skipped = [], [], []
    for beta, task in sorted(tasks.items()):
        if task.h is None:
            continue
        for gamma in range(beta + 1, matrix.columns + 1):
            if (gamma - beta) * task.h.m > budget:
                skipped.append([beta, gamma])
                continue
            dense, _, missing = window_density_check(columns, task.h, beta, gamma, budget)
            checked.append([beta, gamma])
            if not dense:
                bad.append({"beta": beta, "gamma": gamma, "missing": missing[:8], "n_missing": len(missing)})
    detail = f"{len(checked)} windows checked, {len(skipped)} beyond budget {budget}"
    return _verdict("condition_D", bad, detail, digest(matrix.to_hex(), budget), [{"windows": checked}])


def check_realizations(
    config: Config,
    tasks: Mapping[int, StageTask],
    matrix: GeneratorMatrix,
    records: Mapping[int, StageRecord],
) -> Verdict:
    """Every recorded step realizes its sigma on the class it claims."""
    columns = [matrix.column(a) for a in range(matrix.columns)]
    bad, count = [], 0
    for gamma, rec in sorted(records.items()):
        for step in rec.trace.inner.steps:
            if step.n is None:
                continue
            count += 1
            beta, pattern = parse_table_label(step.label)
            task = tasks.get(beta)
            if task is None or task.h is None or step.n not in task.h.rows:
                bad.append({"stage": gamma, "step": step.l, "reason": "unknown table index"})
                continue
            h = task.h
            if window_pattern(columns, h, step.n, beta, gamma) != pattern:
                bad.append({"stage": gamma, "step": step.l, "reason": "n outside its class"})
            got = tuple(columns[gamma].eval(v) for v in h.row(step.n))
            if got != step.sigma:
                bad.append({"stage": gamma, "step": step.l, "want": list(step.sigma), "got": list(got)})
    return _verdict("realizations", bad, f"{count} realizations", digest(matrix.to_hex()))


def replay_stage(
    gamma: int, H: Sequence[FinVec], F: Sequence[FinVec], record: StageRecord
) -> tuple[Functional, list[str]]:
    """Re-solve the recorded step constraints in order and pull back.

    Returns the functional on ``[0, gamma)`` and a list of trace defects.
    """
    inner = record.trace.inner
    defects = []
    if list(record.trace.H) != list(H):
        defects.append("trace H differs from the assignment")
    bm = make_basis_map(H, gamma)
    if inner.bound != gamma or inner.omega != len(H):
        defects.append("trace bound/omega mismatch")
    F_moved = [bm.forward(v) for v in F]
    if list(F_moved) != list(inner.F):
        defects.append("transported targets differ from trace")
    k = inner.k
    steps = inner.steps
    phi = solve_functional(list(steps[0].constraints), gamma)
    prev_E = steps[0].E
    prev_N = steps[0].N_next
    for step in steps[1:]:
        if step.N_next <= prev_N:
            defects.append(f"step {step.l}: N not increasing")
        for n, i in step.i_map.items():
            want = (FinVec.from_mask(1 << (n * (k + 1) + i)), 1 - phi.eval(F_moved[i]))
            if want not in step.constraints:
                defects.append(f"step {step.l}: block constraint for n={n} missing")
        pins = [(FinVec.from_mask(1 << b), phi.bit(b)) for b in prev_E.support]
        phi = solve_functional(pins + list(step.constraints), gamma)
        prev_E, prev_N = step.E, step.N_next
    return bm.pull_back(phi), defects


def check_trace_replay(
    config: Config,
    tasks: Mapping[int, StageTask],
    matrix: GeneratorMatrix,
    records: Mapping[int, StageRecord],
) -> Verdict:
    bad = []
    for gamma in range(config.base, matrix.columns):
        rec = records.get(gamma)
        if rec is None:
            bad.append({"stage": gamma, "reason": "missing trace"})
            continue
        task = tasks.get(gamma)
        H = list(task.f.f) if task is not None and task.f is not None else []
        F = list(task.f.targets) if task is not None and task.f is not None else [FinVec()] * (config.k + 1)
        try:
            psi, defects = replay_stage(gamma, H, F, rec)
        except Gf2CertError as exc:
            bad.append({"stage": gamma, "reason": f"replay failed: {exc}"})
            continue
        col = matrix.column(gamma).bits & ((1 << gamma) - 1)
        if psi.bits != col:
            diff = FinVec.from_mask(psi.bits ^ col)
            bad.append({"stage": gamma, "reason": "column differs from replay", "singletons": list(diff.support)})
        for d in defects:
            bad.append({"stage": gamma, "reason": d})
    return _verdict("trace_replay", bad, "stage columns below the diagonal", digest(matrix.to_hex()))


# -- group-level checks --------------------------------------------------


def independent_generators(matrix: GeneratorMatrix) -> list[int]:
    """Greedy maximal independent set of generator rows, ascending index."""
    ech = EchelonState()
    keep = []
    for xi, r in enumerate(matrix.rows):
        if r and ech.add(r) is None:
            keep.append(xi)
    return keep


def independence_transfer_check(matrix: GeneratorMatrix, families: Sequence[Sequence[FinVec]]) -> list[dict]:
    """Both sides of the transfer statement for each family.

    Raises :class:`TransferMismatch` if a family's combos and realized group
    elements disagree about independence.
    """
    out = []
    for idx, fam in enumerate(families):
        combos = is_independent(list(fam)).independent and all(fam)
        elements = is_independent([FinVec.from_mask(matrix.element(F)) for F in fam]).independent
        if combos != elements:
            raise TransferMismatch(f"family {idx}: combos independent={combos}, elements independent={elements}")
        out.append({"family": idx, "independent": combos})
    return out


def random_families(pool: Sequence[int], count: int, rng: random.Random, max_size: int = 6) -> list[list[FinVec]]:
    fams = []
    if not pool:
        return fams
    for _ in range(count):
        size = rng.randint(1, max_size)
        fam = []
        for _ in range(size):
            width = rng.randint(1, min(3, len(pool)))
            fam.append(FinVec(rng.sample(list(pool), width)))
        if rng.random() < 0.3 and len(fam) >= 2:
            fam.append(fam[0] ^ fam[1])
        fams.append(fam)
    return fams


@dataclass(frozen=True)
class OpenBox:
    """Basic clopen box: a finite partial assignment of coordinates."""

    constraints: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.constraints:
            raise ValueError("box needs a nonempty domain")

    def contains(self, bits: int) -> bool:
        return all(((bits >> c) & 1) == b for c, b in self.constraints)

    def to_dict(self) -> dict:
        return {str(c): b for c, b in self.constraints}


def build_open_family(k: int, coords: Sequence[int], count: int) -> list[tuple[OpenBox, ...]]:
    """Boxes ``W_j`` (1 at ``coords[j]``, 0 at every earlier coordinate) grouped
    into ``(k+1)``-tuples ``U_n = (W_{n(k+1)}, ..., W_{n(k+1)+k})``."""
    need = count * (k + 1)
    if len(coords) < need or any(b <= a for a, b in zip(coords, coords[1:])):
        raise ValueError(f"need {need} strictly increasing coordinates")
    W = [
        OpenBox(tuple([(coords[jj], 0) for jj in range(j)] + [(coords[j], 1)]))
        for j in range(need)
    ]
    return [tuple(W[n * (k + 1) + i] for i in range(k + 1)) for n in range(count)]


def nonzero_sum_exhaustive(boxes: Sequence[OpenBox], coords: Sequence[int]) -> bool:
    """True iff no selection from a nonempty subfamily of boxes sums to zero.

    Vectors live on ``coords`` only; free coordinates range over both bits.
    Reachable sums are propagated box by box, so every subfamily and every
    box-consistent choice is covered.
    """
    pos = {c: j for j, c in enumerate(coords)}
    width = len(coords)
    options = []
    for box in boxes:
        fixed = {pos[c]: b for c, b in box.constraints}
        opts = [v for v in range(1 << width) if all(((v >> j) & 1) == b for j, b in fixed.items())]
        options.append(opts)
    unused = {0}
    used: set[int] = set()
    for opts in options:
        new_used = set(used)
        for s in used | unused:
            for v in opts:
                new_used.add(s ^ v)
        used = new_used
    return 0 not in used


@dataclass(frozen=True)
class GroupElement:
    combo: FinVec
    bits: int


def find_selection(
    matrix: GeneratorMatrix,
    family: Sequence[tuple[OpenBox, ...]],
    pool: Sequence[int],
    combo_limit: int,
) -> list[tuple[GroupElement, ...]] | None:
    """Bounded search: for each box the first combo (by size, then
    lexicographic) of pool generators landing inside it, all distinct."""
    used: set[FinVec] = set()
    out = []
    flat_boxes = [box for U in family for box in U]
    picks = []
    for box in flat_boxes:
        hit = None
        for size in range(1, combo_limit + 1):
            for combo in itertools.combinations(pool, size):
                v = FinVec(combo)
                if v in used:
                    continue
                bits = matrix.element(v)
                if box.contains(bits):
                    hit = GroupElement(v, bits)
                    break
            if hit:
                break
        if hit is None:
            return None
        used.add(hit.combo)
        picks.append(hit)
    width = len(family[0]) if family else 0
    for n in range(len(family)):
        out.append(tuple(picks[n * width:(n + 1) * width]))
    return out


def selection_independence_check(
    matrix: GeneratorMatrix,
    family: Sequence[tuple[OpenBox, ...]],
    selections: Sequence[Sequence[GroupElement]],
) -> bool:
    """Box membership of every selected element, then independence of the
    flattened selection as bit vectors and as combos."""
    flat = []
    for n, (U, sel) in enumerate(zip(family, selections)):
        if len(U) != len(sel):
            raise BoxViolation(f"U_{n}: {len(sel)} elements for {len(U)} boxes")
        for i, (box, g) in enumerate(zip(U, sel)):
            if g.bits != matrix.element(g.combo):
                raise BoxViolation(f"U_{n}[{i}]: bits do not match combo {g.combo}")
            if not box.contains(g.bits):
                raise BoxViolation(f"U_{n}[{i}]: element {g.combo} outside its box")
            flat.append(g)
    if not flat:
        return True
    by_bits = is_independent([FinVec.from_mask(g.bits) for g in flat]).independent
    by_combo = is_independent([g.combo for g in flat]).independent
    return by_bits and by_combo


def non_accumulation_witness(
    matrix: GeneratorMatrix,
    tasks: Mapping[int, StageTask],
    records: Mapping[int, StageRecord],
    k: int,
    target: Sequence[FinVec],
    f: Sequence[FinVec],
) -> dict:
    """Locate the stage scheduled for ``(f, target)`` and confirm the finite
    agreement bound there by evaluating every block in range."""
    target, f = tuple(target), tuple(f)
    for beta, task in sorted(tasks.items()):
        if task.f is None or task.f.targets != target or task.f.f != f:
            continue
        N0 = records[beta].trace.inner.N0
        psi = matrix.column(beta)
        targets = [psi.eval(v) for v in target]
        blocks = len(f) // (k + 1)
        separating = {}
        ok = True
        for n in range(N0, blocks):
            diff = [i for i in range(k + 1) if psi.eval(f[n * (k + 1) + i]) != targets[i]]
            if not diff:
                ok = False
            else:
                separating[n] = diff[0]
        return {"stage": beta, "N0": N0, "blocks": blocks, "ok": ok, "separating_i": separating}
    raise NoMatchingStage(f"no stage scheduled for target {[str(v) for v in target]}")


def property_P_window_check(matrix: GeneratorMatrix, window: Sequence[int]) -> dict[str, int]:
    """Realizing generator for every pattern on ``window``; raises
    :class:`PatternMissing` on the first gap."""
    found: dict[str, int] = {}
    for xi, r in enumerate(matrix.rows):
        found.setdefault("".join(str((r >> a) & 1) for a in window), xi)
    for bits in itertools.product("01", repeat=len(window)):
        p = "".join(bits)
        if p not in found:
            raise PatternMissing([int(c) for c in p], window)
    return {p: found[p] for p in sorted(found)}


# -- suite ---------------------------------------------------------------


def run_checks(
    config: Config,
    T: TMatrix,
    tasks: Mapping[int, StageTask],
    matrix: GeneratorMatrix,
    records: Mapping[int, StageRecord],
    window_width: int | None = None,
) -> list[Verdict]:
    w = config.window_width if window_width is None else window_width
    out = [
        check_base(config, T, matrix),
        check_condition_B(config, T, matrix),
        check_diagonal(config, matrix),
        check_condition_A(config, tasks, matrix),
        check_condition_C(config, tasks, matrix, records),
        check_condition_D(config, tasks, matrix, config.density_budget),
        check_realizations(config, tasks, matrix, records),
        check_trace_replay(config, tasks, matrix, records),
    ]
    pool = independent_generators(matrix)
    rng = random.Random(config.seed)
    fams = random_families(pool, config.family_samples, rng)
    try:
        res = independence_transfer_check(matrix, fams)
        out.append(Verdict(
            "independence_transfer", PASS, [{"families": len(res), "pool_size": len(pool)}],
            f"rank {len(pool)} of {matrix.ground} generators", digest(matrix.to_hex(), config.seed),
        ))
    except TransferMismatch as exc:
        out.append(Verdict("independence_transfer", FAIL, [], str(exc), digest(matrix.to_hex())))

    out.append(_open_family_verdict(config, matrix, pool, w))
    out.append(_non_accumulation_verdict(config, tasks, matrix, records))
    out.append(_property_P_verdict(matrix, w))
    return out


def _open_family_verdict(config: Config, matrix: GeneratorMatrix, pool: Sequence[int], w: int) -> Verdict:
    k = config.k
    count = max(1, w // (k + 1))
    coords = list(range(count * (k + 1)))
    inputs = digest(matrix.to_hex(), k, coords)
    if len(coords) > matrix.columns:
        return Verdict("open_family", INCONCLUSIVE, [], "not enough columns for one box tuple", inputs)
    family = build_open_family(k, coords, count)
    boxes = [b for U in family for b in U]
    if len(boxes) <= 8 and not nonzero_sum_exhaustive(boxes, coords):
        return Verdict("open_family", FAIL, [], "a selection sums to zero", inputs)
    sel = find_selection(matrix, family, pool, config.combo_limit)
    if sel is None:
        return Verdict("open_family", INCONCLUSIVE, [], f"no selection within combo size {config.combo_limit}", inputs)
    try:
        ok = selection_independence_check(matrix, family, sel)
    except BoxViolation as exc:
        return Verdict("open_family", FAIL, [], str(exc), inputs)
    wit = [[str(g.combo) for g in U] for U in sel]
    return Verdict("open_family", PASS if ok else FAIL, wit, f"{len(boxes)} boxes on columns {coords}", inputs)


def _non_accumulation_verdict(config, tasks, matrix, records) -> Verdict:
    reports, bad = [], []
    for beta, task in sorted(tasks.items()):
        if task.f is None:
            continue
        rep = non_accumulation_witness(matrix, tasks, records, config.k, task.f.targets, task.f.f)
        reports.append({k: v for k, v in rep.items() if k != "separating_i"})
        if not rep["ok"]:
            bad.append(rep)
    return _verdict("non_accumulation", bad, f"{len(reports)} scheduled targets", digest(matrix.to_hex()), reports)


def _property_P_verdict(matrix: GeneratorMatrix, w: int) -> Verdict:
    wit = []
    for a in range(1, min(w, matrix.columns) + 1):
        window = list(range(a))
        try:
            found = property_P_window_check(matrix, window)
        except PatternMissing as exc:
            return Verdict("property_P", INCONCLUSIVE, [{"window": window, "missing": "".join(map(str, exc.pattern))}],
                           "T rows not pattern-complete on this prefix", digest(matrix.to_hex(), w))
        wit.append({"window": window, "rows": len(set(found.values()))})
    return Verdict("property_P", PASS, wit, f"prefixes up to width {w}", digest(matrix.to_hex(), w))

import itertools
from pathlib import Path

import pytest

from gf2cert.certificate import load_config
from gf2cert.driver import run_recursion
from gf2cert.errors import BoxViolation, NoMatchingStage, PatternMissing, TransferMismatch, WindowTooLarge
from gf2cert.gf2 import EchelonState, FinVec
from gf2cert.verify import (
    GroupElement,
    OpenBox,
    build_open_family,
    find_selection,
    independence_transfer_check,
    independent_generators,
    non_accumulation_witness,
    nonzero_sum_exhaustive,
    property_P_window_check,
    replay_stage,
    run_checks,
    selection_independence_check,
    window_density_check,
)

from oracles import box_zero_reachable_closed_form, box_zero_reachable_enumerate

FIXTURE = Path(__file__).resolve().parents[1] / "fixtures" / "fixture_k1.json"
V = FinVec


@pytest.fixture(scope="module")
def built():
    rc = load_config(FIXTURE)
    c = run_recursion(rc.config, rc.T, rc.tasks)
    return rc, c


def test_all_checks_pass_on_fixture(built):
    rc, c = built
    verdicts = run_checks(rc.config, rc.T, rc.tasks, c.matrix, c.records)
    assert [v.check for v in verdicts if v.verdict != "pass"] == []


def test_transfer_examples(built):
    _, c = built
    pool = independent_generators(c.matrix)
    a, b = pool[:2]
    res = independence_transfer_check(c.matrix, [[V([a]), V([b])], [V([a]), V([b]), V([a, b])]])
    assert [r["independent"] for r in res] == [True, False]


def test_transfer_mismatch_on_dependent_rows(built):
    _, c = built
    pool = independent_generators(c.matrix)
    ech = EchelonState()
    for xi in pool:
        ech.add(c.matrix.rows[xi])
    extra = next(xi for xi in range(c.matrix.ground) if xi not in pool)
    _, combo = ech.reduce(c.matrix.rows[extra])
    zero_sum = V([pool[j] for j in FinVec.from_mask(combo).support] + [extra])
    assert c.matrix.element(zero_sum) == 0
    with pytest.raises(TransferMismatch):
        independence_transfer_check(c.matrix, [[zero_sum]])


def test_open_family_example():
    fam = build_open_family(0, [0, 1], 2)
    assert fam[0][0].to_dict() == {"0": 1}
    assert fam[1][0].to_dict() == {"0": 0, "1": 1}
    with pytest.raises(ValueError):
        build_open_family(1, [0, 1, 2], 2)


def test_open_family_sums_never_vanish():
    for k in range(0, 4):
        for count in range(1, 8 // (k + 1) + 1):
            coords = list(range(0, 2 * count * (k + 1), 2))
            boxes = [b for U in build_open_family(k, coords, count) for b in U]
            assert nonzero_sum_exhaustive(boxes, coords)
            assert not box_zero_reachable_closed_form(boxes, coords)


def test_dp_matches_enumeration_on_small_box_sets():
    coords = [0, 1, 2]
    pool = [OpenBox(((c, b),)) for c in coords for b in (0, 1)]
    pool += [OpenBox(((0, 1), (2, 0))), OpenBox(((1, 1), (2, 1)))]
    for r in (1, 2, 3):
        for boxes in itertools.combinations(pool, r):
            got = not nonzero_sum_exhaustive(list(boxes), coords)
            assert got == box_zero_reachable_enumerate(list(boxes), coords)
            assert got == box_zero_reachable_closed_form(list(boxes), coords)


def test_selection_found_and_independent(built):
    _, c = built
    fam = build_open_family(1, [0, 1, 2, 3], 2)
    sel = find_selection(c.matrix, fam, independent_generators(c.matrix), 3)
    assert sel is not None
    assert selection_independence_check(c.matrix, fam, sel)
    assert selection_independence_check(c.matrix, [], [])


def test_selection_outside_box_rejected(built):
    _, c = built
    fam = build_open_family(1, [0, 1, 2, 3], 1)
    pool = independent_generators(c.matrix)
    sel = find_selection(c.matrix, fam, pool, 2)
    g = sel[0][0]
    swapped = GroupElement(sel[0][1].combo, sel[0][1].bits)
    with pytest.raises(BoxViolation):
        selection_independence_check(c.matrix, fam, [(swapped, g)])


def test_non_accumulation(built):
    rc, c = built
    task = rc.tasks[8].f
    rep = non_accumulation_witness(c.matrix, rc.tasks, c.records, 1, task.targets, task.f)
    assert rep["stage"] == 8 and rep["ok"]
    with pytest.raises(NoMatchingStage):
        non_accumulation_witness(c.matrix, rc.tasks, c.records, 1, (V([9]), V([10])), task.f)


def test_window_density(built):
    rc, c = built
    cols = [c.matrix.column(a) for a in range(c.matrix.columns)]
    h = rc.tasks[9].h
    dense, found, missing = window_density_check(cols, h, 9, 9, 8)
    assert dense and list(found) == [""]
    dense, found, missing = window_density_check(cols, h, 9, 12, 8)
    assert dense and len(found) == 8
    with pytest.raises(WindowTooLarge):
        window_density_check(cols, h, 9, 12, 2)
    assert window_density_check(cols, h, 9, 12, 8) == (dense, found, missing)


def test_property_P(built):
    _, c = built
    assert set(property_P_window_check(c.matrix, [0])) == {"0", "1"}
    found = property_P_window_check(c.matrix, [0, 1, 2, 3])
    assert len(found) == 16
    assert found["0000"] == 0
    with pytest.raises(PatternMissing):
        property_P_window_check(c.matrix, [0, 1, 2, 3, 4, 5])


def test_replay_reproduces_columns(built):
    rc, c = built
    for gamma, rec in c.records.items():
        task = rc.tasks.get(gamma)
        H = list(task.f.f) if task and task.f else []
        F = list(task.f.targets) if task and task.f else [V()] * 2
        psi, defects = replay_stage(gamma, H, F, rec)
        assert defects == []
        assert psi.bits == c.psis[gamma].bits & ((1 << gamma) - 1)


@pytest.mark.parametrize("xi,alpha", [(10, 2), (15, 6), (3, 9), (7, 7), (2, 10)])
def test_single_flip_detected(built, xi, alpha):
    rc, c = built
    bad = c.matrix.flip(xi, alpha)
    verdicts = run_checks(rc.config, rc.T, rc.tasks, bad, c.records)
    assert any(v.verdict == "fail" for v in verdicts)

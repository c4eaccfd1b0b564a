import random

import pytest

from gf2cert.errors import ClaimSearchExhausted, DependentFamily
from gf2cert.gf2 import EMPTY, FinVec
from gf2cert.homomorphism import (
    BuildTrace,
    HTable,
    ScheduleItem,
    agreement_set,
    build_psi,
    check_stage_conditions,
    claim_candidate_bound,
    find_claim_n,
    initial_state,
    needs_closing,
    pick_pigeonhole,
    round_robin_schedule,
    sigmas,
    singleton_blocks,
    stage_advance,
)

from instances import lemma_instance, staircase_table
from oracles import brute_independent

V = FinVec


def singleton_table(ns, m=1, offset=0):
    return HTable(m, {n: tuple(V([m * n + i + offset]) for i in range(m)) for n in ns})


def test_table_rejects_dependent_rows():
    with pytest.raises(DependentFamily):
        HTable(1, {0: (V([1]),), 1: (V([1]),)})
    with pytest.raises(DependentFamily):
        HTable(1, {0: (EMPTY,)})
    with pytest.raises(ValueError):
        HTable(2, {0: (V([1]),)})


def test_claim_examples():
    t = singleton_table([0, 1, 2])
    assert find_claim_n(V([0]), t) == 1
    assert find_claim_n(EMPTY, t) == 0
    t2 = HTable(2, {n: (V([2 * n + 4]), V([2 * n + 5])) for n in (0, 1)})
    assert find_claim_n(V([0, 1]), t2) == 0


def test_claim_respects_search_order():
    t = singleton_table([0, 1, 2, 3])
    assert find_claim_n(EMPTY, t, [2, 3]) == 2
    with pytest.raises(ClaimSearchExhausted):
        find_claim_n(V([0, 1]), t, [0, 1])


def test_claim_matches_oracle():
    rng = random.Random(11)
    for _ in range(200):
        E = V(rng.sample(range(8), rng.randint(0, 4)))
        t = staircase_table(rng, 1, rng.randint(1, 2), 5, 0)
        n = find_claim_n(E, t)
        singles = [1 << b for b in E.support]
        for cand in t.C:
            ok = brute_independent(singles + [v.mask for v in t.row(cand)])
            if cand < n:
                assert not ok
            elif cand == n:
                assert ok


def test_claim_bound_formula():
    assert claim_candidate_bound(1, 0) == 2
    assert claim_candidate_bound(3, 2) == 29


def test_pigeonhole_examples():
    assert pick_pigeonhole(EMPTY, [], 1, 0, 1) == {0: 0}
    assert pick_pigeonhole(V([0]), [], 1, 0, 2) == {0: 1, 1: 0}
    assert pick_pigeonhole(EMPTY, [V([3]), V([4])], 2, 1, 2) == {1: 2}


def test_pigeonhole_limit_skips_blocks():
    assert pick_pigeonhole(EMPTY, [], 1, 0, 3, limit=5) == {0: 0, 1: 0}


def test_pigeonhole_rejects_dependent_chosen():
    with pytest.raises(DependentFamily):
        pick_pigeonhole(V([2]), [V([2])], 1, 0, 1)


def test_step_conditions_hold_after_every_step():
    for seed in range(30):
        k, F, schedule, bound, _ = lemma_instance(seed)
        state = initial_state(k, F, bound)
        assert all(check_stage_conditions(state).values())
        for item in schedule:
            state = stage_advance(state, item)
            conds = check_stage_conditions(state)
            assert all(conds.values()), (seed, conds)
        if needs_closing(state):
            state = stage_advance(state, None)
            assert all(check_stage_conditions(state).values())


def test_fresh_table_first_step_separates_blocks():
    state = initial_state(1, [EMPTY, EMPTY], 12)
    t = HTable(1, {n: (V([6 + n]),) for n in range(4)})
    state = stage_advance(state, ScheduleItem(t, (1,)))
    phi = state.phi
    for n in range(state.Ns[0], state.Ns[1]):
        if 2 * n + 1 < 12:
            assert any(phi.eval(state.F[i]) != phi.bit(2 * n + i) for i in range(2))


def test_zero_sigma_realized():
    t = HTable(2, {n: (V([10 + 2 * n]), V([11 + 2 * n])) for n in range(3)})
    state = stage_advance(initial_state(2, [V([0]), EMPTY, EMPTY], 24), ScheduleItem(t, (0, 0)))
    assert all(state.phi.eval(v) == 0 for v in t.row(state.ns[0]))


def test_repeated_item_gets_new_n():
    t = singleton_table(range(4), offset=8)
    item = ScheduleItem(t, (1,))
    state = stage_advance(stage_advance(initial_state(1, [EMPTY, EMPTY], 16), item), item)
    assert state.ns[0] < state.ns[1]


def test_target_forced_on():
    psi, _ = build_psi(1, [V([5]), EMPTY], [], 10)
    assert psi(V([5])) == 1
    psi, trace = build_psi(1, [EMPTY, EMPTY], [], 10)
    assert trace.steps[0].constraints == ()


def test_small_lemma_run():
    k, F = 1, [V([0]), V([1])]
    t = HTable(1, {n: (V([2 * n + 6]),) for n in range(6)}, label="t")
    schedule = round_robin_schedule([t], 2)
    psi, trace = build_psi(k, F, schedule, 20)
    for sigma in sigmas(1):
        hits = [s.n for s in trace.steps if s.sigma == sigma]
        assert len(hits) == 2
        for n in hits:
            assert psi(t.entry(0, n)) == sigma[0]
    agree = agreement_set(psi, F, k, singleton_blocks(20))
    assert all(n < trace.N0 for n in agree)


def test_build_rejects_wide_table():
    t = HTable(2, {0: (V([3]), V([4]))})
    with pytest.raises(ValueError):
        build_psi(1, [EMPTY, EMPTY], [ScheduleItem(t, (0, 1))], 10)


def test_trace_roundtrip():
    k, F, schedule, bound, _ = lemma_instance(3)
    _, trace = build_psi(k, F, schedule, bound)
    assert BuildTrace.from_dict(trace.to_dict()) == trace


def test_deterministic():
    k, F, schedule, bound, _ = lemma_instance(8)
    assert build_psi(k, F, schedule, bound) == build_psi(k, F, schedule, bound)


def test_every_block_checked_by_closing_step():
    psi, trace = build_psi(2, [V([0]), V([1]), EMPTY], [], 30)
    assert trace.steps[-1].N_next == 10
    agree = agreement_set(psi, [V([0]), V([1]), EMPTY], 2, singleton_blocks(30))
    assert all(n < trace.N0 for n in agree)


def test_claim_budget_limits_search():
    t = singleton_table(range(4))
    item = ScheduleItem(t, (1,))
    with pytest.raises(ClaimSearchExhausted) as err:
        build_psi(1, [V([0, 1]), EMPTY], [item], 12, claim_budget=2)
    assert err.value.position == 0
    psi, trace = build_psi(1, [V([0, 1]), EMPTY], [item], 12, claim_budget=3)
    assert trace.steps[1].n == 2

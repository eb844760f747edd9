import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from naive import members_at, script_limit
from omegaforge.stagewise import (
    CANONICAL,
    CE_MONOTONE,
    KNOWN_LIMIT,
    SIGMA1,
    AllocationSet,
    CeOperator,
    EmptyOracle,
    HaltingOracle,
    ScriptedOracle,
    ScriptedSet,
    StagewiseError,
    check_monotone,
    hat_trick,
    halts_within,
    restrict,
    stable_set,
    true_stages,
    upward_closure_at,
)

# -- oracles


def test_scripted_oracle_kinds():
    assert ScriptedOracle([(1, 2)]).kind == CE_MONOTONE
    assert ScriptedOracle([(1, 2)], limit=[1]).kind == KNOWN_LIMIT
    removal = ScriptedOracle([(1, 2, 5), (3, 1)])
    assert removal.kind == KNOWN_LIMIT
    assert removal.known_limit == {3}
    assert removal.enumerate(4) == {1, 3}
    assert removal.enumerate(5) == {3}


def test_scripted_oracle_rejects_wrong_limit():
    with pytest.raises(StagewiseError):
        ScriptedOracle([(1, 2)], limit=[2])


def test_scripted_oracle_rejects_bad_events():
    with pytest.raises(StagewiseError):
        ScriptedOracle([(1, 5, 5)])
    with pytest.raises(StagewiseError):
        ScriptedOracle([(1,)])


def test_entered_is_the_stage_difference():
    e = ScriptedOracle([(5, 2), (1, 3)], limit=[1, 5])
    assert e.entered(2) == {5}
    assert e.entered(3) == {1}
    assert e.entered(4) == set()


def test_halting_stand_in_is_monotone_and_bounded():
    h = HaltingOracle()
    prev = frozenset()
    for s in range(40):
        cur = h.enumerate(s)
        assert prev <= cur
        assert all(e < s for e in cur)
        prev = cur
    assert h.known_limit is None
    assert halts_within(0, 1)  # the halt instruction
    assert not halts_within(4, 50)  # jump-to-start while B is zero loops forever


def test_halting_stand_in_is_safe_under_threads():
    h = HaltingOracle()
    results = []

    def work():
        results.append(h.enumerate(60))

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(set(results)) == 1


# -- true stages


def test_true_stage_single_event():
    assert true_stages(ScriptedOracle([(2, 4)], limit=[2]), 10) == [4]


def test_true_stages_two_events():
    # at stage 2 the oracle below 5 is empty while the limit below 5 is {1},
    # so only stage 3 satisfies the definition
    e = ScriptedOracle([(5, 2), (1, 3)], limit=[1, 5])
    assert true_stages(e, 10) == [3]


def test_true_stages_empty_oracle():
    assert true_stages(EmptyOracle(), 10) == []


def test_true_stages_need_known_limit():
    with pytest.raises(StagewiseError):
        true_stages(ScriptedOracle([(1, 2)]), 5)
    with pytest.raises(StagewiseError):
        true_stages(HaltingOracle(), 5)


# -- hat-trick


def test_hat_trick_oracle_free_operator_is_plain_enumeration():
    w = CeOperator([("0", 2, 0), ("11", 5, 0)])
    e = ScriptedOracle([(0, 1), (3, 4)], limit=[0, 3])
    v = hat_trick(w, e)
    assert v.semantics == CANONICAL
    for s in range(10):
        assert v.at(s) == frozenset(w.enumerate(e.enumerate(s), s))


def test_hat_trick_readmits_after_segment_change():
    # 01 enumerated at stage 3 with use 5 on the empty segment; 4 enters at 6
    # and a new axiom re-enumerates 01 on the new segment from stage 8
    w = CeOperator([("01", 3, 5, []), ("01", 8, 5, [4])])
    e = ScriptedOracle([(4, 6)], limit=[4])
    v = hat_trick(w, e)
    presence = [s for s in range(12) if "01" in v.at(s)]
    assert presence == [3, 4, 5, 8, 9, 10, 11]


def test_hat_trick_suppresses_on_the_change_stage():
    # the new-segment axiom already exists when 4 enters, so only the change
    # stage itself is suppressed
    w = CeOperator([("01", 3, 5, []), ("01", 2, 5, [4])])
    e = ScriptedOracle([(4, 6)], limit=[4])
    v = hat_trick(w, e)
    assert [s for s in range(10) if "01" not in v.at(s)] == [0, 1, 2, 6]


def test_hat_trick_low_change_does_not_suppress():
    # an element entering above the use leaves the segment alone
    w = CeOperator([("01", 3, 5, [])])
    e = ScriptedOracle([(7, 6)], limit=[7])
    v = hat_trick(w, e)
    assert all("01" in v.at(s) for s in range(3, 12))


def test_hat_trick_empty_oracle_never_suppresses():
    w = CeOperator([("0", 1, 3), ("1", 4, 9)])
    v = hat_trick(w, EmptyOracle())
    for s in range(10):
        assert v.at(s) == frozenset(w.enumerate((), s))
    assert v.limit == {"0", "1"}


def test_axiom_segment_must_fit_below_use():
    with pytest.raises(StagewiseError):
        CeOperator([("0", 1, 3, [3])])


@st.composite
def toy_pairs(draw):
    oracle_events = []
    for elem in draw(st.sets(st.integers(0, 6), max_size=4)):
        start = draw(st.integers(0, 12))
        end = draw(st.one_of(st.none(), st.integers(start + 1, 16)))
        oracle_events.append((elem, start) if end is None else (elem, start, end))
    axioms = []
    for _ in range(draw(st.integers(0, 6))):
        string = draw(st.text(alphabet="01", min_size=1, max_size=3))
        use = draw(st.integers(0, 7))
        segment = draw(st.sets(st.integers(0, max(use - 1, 0)), max_size=3)) if use else set()
        axioms.append((string, draw(st.integers(0, 14)), use, sorted(m for m in segment if m < use)))
    e = ScriptedOracle(oracle_events, limit=script_limit(oracle_events))
    return CeOperator(axioms), e


@given(toy_pairs())
def test_hat_trick_true_stages_are_correct(pair):
    w, e = pair
    v = hat_trick(w, e)
    limit = w.limit(e.known_limit)
    assert v.limit == limit
    for s in true_stages(e, 30):
        assert v.at(s) <= limit


@given(toy_pairs())
def test_hat_trick_limit_members_stay_after_settling(pair):
    w, e = pair
    v = hat_trick(w, e)
    for s in range(v.settled_from, v.settled_from + 10):
        assert v.at(s) == v.limit


@given(toy_pairs())
def test_hat_trick_is_subset_of_plain_enumeration(pair):
    w, e = pair
    v = hat_trick(w, e)
    for s in range(25):
        assert v.at(s) <= frozenset(w.enumerate(e.enumerate(s), s))


def test_restrict():
    assert restrict({1, 4, 7}, 5) == {1, 4}
    assert restrict({1}, 0) == set()


# -- sets


def test_scripted_set_matches_raw_semantics():
    events = [("0", 1, 4), ("10", 2), ("11", 0, 3), ("11", 5)]
    v = ScriptedSet(events)
    for s in range(10):
        assert v.at(s) == members_at(events, s)
    assert v.limit == {"10", "11"}
    assert v.settled_from == 5


def test_sigma1_sets_cannot_remove():
    with pytest.raises(StagewiseError):
        ScriptedSet([("0", 1, 3)], semantics=SIGMA1)


def test_upward_closure_examples():
    assert upward_closure_at(stable_set(["1"]), 0, 2) == {"1", "10", "11"}
    assert upward_closure_at(stable_set([]), 0, 5) == set()
    assert upward_closure_at(stable_set(["0", "01"]), 0, 2) == {"0", "00", "01"}


def test_upward_closure_rejects_short_max_len():
    with pytest.raises(StagewiseError):
        upward_closure_at(stable_set(["0101"]), 0, 2)


def test_allocation_set_grows_and_reserves():
    a = AllocationSet([(2, 1), (3, 4)], reserved=["1"])
    assert a.at(0) == {"1"}
    assert a.at(1) == {"1", "00"}
    assert a.at(4) == {"1", "00", "010"}
    assert check_monotone(a, 10) is None
    with pytest.raises(StagewiseError):
        AllocationSet([(2, 3), (2, 1)])


@given(st.lists(st.tuples(st.text(alphabet="01", max_size=4), st.integers(0, 20)), max_size=8))
def test_sigma1_sets_are_monotone(events):
    v = ScriptedSet(events, semantics=SIGMA1)
    assert check_monotone(v, 25) is None


def test_check_monotone_finds_removal():
    assert check_monotone(ScriptedSet([("0", 1, 3)]), 10) == 2

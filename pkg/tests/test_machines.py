from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from omegaforge.bits import check_prefix_free, measure_of, strings_of_length
from omegaforge.constructions import infsd_from_sigma2, tot_machine_from_sigma2
from omegaforge.machines import (
    Alive,
    ConstantInfSD,
    ConstantOnRegion,
    EmptyOracleMachine,
    ExplicitCoding,
    FunctionOracleMachine,
    Horizons,
    InvariantViolation,
    MachineError,
    MonotonicityError,
    Refuted,
    SpliceConflict,
    TableMonotoneMachine,
    TableOracleMachine,
    UnaryCoding,
    check_infsd_machine,
    check_monotone_machine,
    check_oracle_machine,
    infty_eval,
    monotone_output,
    mstar_front,
    run_oracle,
    splice,
    universal_from_family,
)
from omegaforge.measure import class_bounds
from omegaforge.stagewise import ScriptedSet, stable_set

# -- oracle machines


def test_run_oracle_on_empty_machine_is_pending():
    m = EmptyOracleMachine()
    assert all(run_oracle(m, x, n, 50) is None for x in ["", "0", "101"] for n in range(4))


def test_run_oracle_with_length_gated_machine():
    m = FunctionOracleMachine(lambda s, n, t: 0 if len(s) >= n and t >= n else None)
    assert run_oracle(m, "000", 2, 5) == 0
    assert run_oracle(m, "0", 2, 5) is None


def test_run_oracle_on_totality_construction():
    m = tot_machine_from_sigma2(stable_set(["1"]))
    assert run_oracle(m, "000", 3, 4) == 0
    assert run_oracle(m, "100", 3, 40) is None


def test_pending_never_contradicts_later_definedness():
    m = tot_machine_from_sigma2(ScriptedSet([("0", 0, 4), ("11", 2)]))
    for x in strings_of_length(4):
        for n in range(5):
            seen = None
            for s in range(12):
                v = run_oracle(m, x, n, s)
                if seen is not None:
                    assert v == seen
                seen = v if v is not None else seen


def test_table_machine_rejects_conflicts():
    with pytest.raises(MachineError):
        TableOracleMachine([("0", 1, 0, 1), ("0", 1, 1, 2)])
    with pytest.raises(MachineError):
        TableOracleMachine([("0", 1, 0, 1), ("01", 1, 1, 2)])


def test_table_machine_inherits_along_prefixes():
    m = TableOracleMachine([("0", 2, 7, 3)])
    assert m.eval("011", 2, 3) == 7
    assert m.eval("011", 2, 2) is None
    assert check_oracle_machine(m, 4, 3, 6) == []


def test_grid_checker_finds_stage_regression():
    flaky = FunctionOracleMachine(lambda s, n, t: 0 if t == 2 else None)
    assert any("stage monotonicity" in p for p in check_oracle_machine(flaky, 1, 0, 4))


def test_grid_checker_finds_prefix_inconsistency():
    bad = FunctionOracleMachine(lambda s, n, t: len(s))
    assert any("prefix consistency" in p for p in check_oracle_machine(bad, 2, 0, 1))


@given(st.lists(st.tuples(st.text(alphabet="01", max_size=3), st.integers(0, 8), st.sampled_from([None, 6])),
                max_size=5))
def test_totality_construction_respects_machine_invariants(events):
    events = [(s, a) if b is None else (s, a, max(b, a + 1)) for s, a, b in events]
    m = tot_machine_from_sigma2(ScriptedSet(events))
    assert check_oracle_machine(m, 4, 4, 10) == []


# -- monotone machines


def test_monotone_output_examples():
    assert monotone_output(TableMonotoneMachine({}), "0101", 9) == ""
    assert monotone_output(TableMonotoneMachine({"0": "0", "00": "00"}), "001", 3) == "00"
    with pytest.raises(MonotonicityError) as exc:
        monotone_output(TableMonotoneMachine({"0": "1", "00": "0"}), "00", 3)
    assert exc.value.witness == ("0", "00")


def test_monotone_grid_checker():
    assert check_monotone_machine(TableMonotoneMachine({"0": "0", "00": "00"}), 3, 3) == []
    assert check_monotone_machine(TableMonotoneMachine({"0": "1", "00": "0"}), 3, 3)


# -- infinitary machines


def test_infty_eval_examples():
    assert infty_eval(ConstantInfSD(None), "01", 5) == Refuted(0)
    assert infty_eval(ConstantInfSD(""), "01", 40) == Alive("")


def test_infty_eval_on_construction():
    m = infsd_from_sigma2(stable_set(["1"]))
    assert infty_eval(m, "1", 20) == Alive("")
    assert infty_eval(m, "0", 20) == Refuted(1)
    assert infty_eval(m, "00", 20) == Refuted(2)


def test_infty_eval_detects_condition_a():
    class Gappy(ConstantInfSD):
        def eval(self, sigma, n):
            return None if n == 2 else ""

    with pytest.raises(InvariantViolation):
        infty_eval(Gappy(), "", 5)
    assert check_infsd_machine(Gappy(), 1, 4)


def test_infty_eval_detects_condition_b():
    class Split(ConstantInfSD):
        def eval(self, sigma, n):
            return "1" * min(n, 1) if sigma.startswith("1") else ""

    with pytest.raises(InvariantViolation):
        infty_eval(Split(), "1", 3)


def test_mstar_front_examples():
    assert mstar_front(ConstantInfSD(""), 5, 10) == {""}
    assert mstar_front(ConstantInfSD(None), 5, 10) == set()
    m = infsd_from_sigma2(stable_set(["01", "1"]))
    assert mstar_front(m, 6, 10) == {"01", "1"}


@given(st.lists(st.tuples(st.text(alphabet="01", max_size=4), st.integers(0, 10), st.integers(1, 12)),
                max_size=5))
def test_mstar_front_is_prefix_free_and_shrinks(events):
    events = [(s, a, a + d) if d < 12 else (s, a) for s, a, d in events]
    m = infsd_from_sigma2(ScriptedSet(events))
    prev = None
    for n_max in range(0, 24, 3):
        front = mstar_front(m, 5, n_max)
        assert check_prefix_free(front) is None
        mu = measure_of(front)
        if prev is not None:
            assert mu <= prev
        prev = mu


# -- universality


def test_universal_singleton_with_empty_code():
    m0 = ConstantOnRegion(["1"], value=3)
    u = universal_from_family([m0], ExplicitCoding([""]))
    for x in ["", "0", "10", "111"]:
        for n in range(3):
            assert u.eval(x, n, 5) == m0.eval(x, n, 5)


def test_universal_empty_family():
    u = universal_from_family([])
    assert all(u.eval(x, n, 9) is None for x in ["", "1", "01"] for n in range(3))


def test_universal_two_machines_unary_coding():
    m0 = ConstantOnRegion(["0"], value=5)
    m1 = TableOracleMachine([("1", 2, 9, 0)])
    u = universal_from_family([m0, m1])
    for x in ["", "0", "1", "01", "10"]:
        for n in range(4):
            assert u.eval("1" + x, n, 3) == m0.eval(x, n, 3)
            assert u.eval("01" + x, n, 3) == m1.eval(x, n, 3)
    assert u.eval("00", 2, 3) is None


def test_unary_coding_is_prefix_free():
    c = UnaryCoding()
    assert check_prefix_free([c.code(e) for e in range(10)]) is None
    assert c.decode("0011", 5) == (2, "1")
    assert c.decode("0011", 2) is None


def test_explicit_coding_must_be_prefix_free():
    with pytest.raises(MachineError):
        ExplicitCoding(["0", "01"])


# -- splicing


def test_splice_with_empty_n_and_empty_rho_is_v():
    v = ConstantOnRegion(["01"], value=1)
    m = splice(v, EmptyOracleMachine(), "")
    for x in strings_of_length(3):
        for n in range(3):
            assert m.eval(x, n, 4) == v.eval(x, n, 4)


def test_splice_of_empty_machines_is_empty():
    m = splice(EmptyOracleMachine(), EmptyOracleMachine(), "10")
    assert all(m.eval(x, n, 9) is None for x in strings_of_length(3) for n in range(3))


def test_splice_measure_on_two_halves():
    v = ConstantOnRegion([""])
    n = ConstantOnRegion(["0"])
    m = splice(v, n, "1")
    b = class_bounds(m, "TOT", 3, 5, 3)
    assert (b.lower, b.upper) == (1, 1)


def test_splice_conflict_has_witness():
    n = ConstantOnRegion(["1"])
    with pytest.raises(SpliceConflict) as exc:
        splice(EmptyOracleMachine(), n, "1", Horizons(depth=3, n_max=2, stage=3))
    assert exc.value.witness[0].startswith("1")


def test_splice_routes_both_sides():
    v = ConstantOnRegion(["0"], value=4)
    n = ConstantOnRegion(["0"], value=8)
    m = splice(v, n, "11")
    assert m.eval("110", 0, 1) == 4
    assert m.eval("0", 0, 1) == 8
    assert m.eval("1", 0, 1) is None
    assert m.eval("10", 0, 1) is None


def test_empty_machine_certificates_wait_for_freeze():
    m = EmptyOracleMachine(frozen_from=5)
    early = class_bounds(m, "TOT", 2, 3, 2)
    late = class_bounds(m, "TOT", 2, 6, 2)
    assert (early.lower, early.upper) == (0, 1)
    assert (late.lower, late.upper) == (0, 0)
    assert late.upper == Fraction(0)

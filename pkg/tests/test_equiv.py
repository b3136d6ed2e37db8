import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from toolverify.equiv import (
    AnswerKind,
    EquivConfig,
    ParseError,
    RubricOutcome,
    evaluate_expression,
    is_equivalent,
    parse_answer,
    verify_by_rubric,
)
from toolverify.verifier import VerificationTask

from expr_oracle import sample_cases
from rubric_fixtures import RUBRIC_CASES

CFG = EquivConfig()


class TestParseAnswer:
    def test_latex_fraction(self):
        v = parse_answer(r"\frac{32}{11}")
        assert v.kind is AnswerKind.number
        assert v.numeric_value == pytest.approx(32 / 11, rel=1e-12)

    def test_comma_tuple_of_fractions(self):
        v = parse_answer("27/7, -8/7")
        assert v.kind is AnswerKind.tuple
        assert [p.numeric_value for p in v.parts] == [pytest.approx(27 / 7), pytest.approx(-8 / 7)]

    def test_perfect_square_root(self):
        assert parse_answer(r"\sqrt{4}").numeric_value == pytest.approx(2.0)

    def test_nested_radical_matches_reference_stdout(self):
        v = parse_answer(r"8\sqrt{5 + 2.5\sqrt{3}}/5")
        assert v.numeric_value == pytest.approx(4.887241058965765, rel=1e-12)

    def test_scientific_notation(self):
        assert parse_answer("5.48e22").numeric_value == pytest.approx(5.48e22)

    def test_number_with_unit_suffix(self):
        v = parse_answer("16km")
        assert v.kind is AnswerKind.number
        assert v.numeric_value == 16.0
        assert v.unit == "km"

    def test_choice_letter(self):
        assert parse_answer("C").kind is AnswerKind.choice
        assert parse_answer("(b)").normalized == "B"

    def test_unparseable_becomes_text(self):
        v = parse_answer("the mitochondria")
        assert v.kind is AnswerKind.text
        assert v.normalized == "the mitochondria"

    def test_never_raises(self):
        for junk in ["", "   ", "}{", "\\boxed{", "((((", "1/0"]:
            parse_answer(junk)  # must not throw


class TestExpressionOracle:
    def test_parser_agrees_with_direct_tree_evaluation(self):
        cases = sample_cases(1000, seed=17, depth=4)
        for text, expected in cases:
            got = evaluate_expression(text)
            assert got == pytest.approx(expected, rel=1e-12, abs=1e-12), text


class TestIsEquivalent:
    @pytest.mark.parametrize(
        "a,b,expected",
        [
            ("2.909", r"\frac{32}{11}", True),
            (r"\frac{32}{11}", r"\frac{96}{33}", True),
            ("16km", "16", True),
            ("4.887241058965765", "3.4429464400122507", False),
            ("27/7, -8/7", "-8/7, 27/7", True),
            ("1,2", "1,3", False),
            ("A", "a", True),
            ("A", "B", False),
        ],
    )
    def test_fixtures(self, a, b, expected):
        assert is_equivalent(parse_answer(a), parse_answer(b), CFG) is expected

    def test_rational_vs_decimal_oracle(self):
        rng = random.Random(5)
        for _ in range(300):
            p = rng.randint(-50, 50)
            q = rng.choice([n for n in range(-50, 51) if n != 0])
            frac = Fraction(p, q)
            decimal = f"{float(frac):.8f}"
            assert is_equivalent(parse_answer(f"{p}/{q}"), parse_answer(decimal), CFG)
            shifted = f"{float(frac) + 1.0:.8f}"
            assert not is_equivalent(parse_answer(f"{p}/{q}"), parse_answer(shifted), CFG)

    @given(st.one_of(st.integers(-1000, 1000).map(str), st.floats(-1e6, 1e6, allow_nan=False).map(repr), st.text(st.characters(categories=["L", "N"]), max_size=12)))
    def test_reflexive(self, text):
        v = parse_answer(text)
        assert is_equivalent(v, v, CFG)

    @given(
        st.floats(-1e4, 1e4, allow_nan=False),
        st.floats(-1e4, 1e4, allow_nan=False),
    )
    def test_symmetric_on_numbers(self, a, b):
        va, vb = parse_answer(repr(a)), parse_answer(repr(b))
        assert is_equivalent(va, vb, CFG) == is_equivalent(vb, va, CFG)

    def test_rounding_rule_is_transitive_but_rel_tol_is_not(self):
        # with rel_tol effectively disabled, the two-decimal rounding rule
        # partitions values, hence transitivity
        strict = EquivConfig(rel_tol=1e-300)
        a, b, c = parse_answer("2.9050001"), parse_answer("2.905"), parse_answer("2.9049999")
        ab = is_equivalent(a, b, strict)
        bc = is_equivalent(b, c, strict)
        ac = is_equivalent(a, c, strict)
        if ab and bc:
            assert ac

    def test_tuple_shuffle_invariance(self):
        rng = random.Random(11)
        for _ in range(50):
            vals = [str(rng.randint(-20, 20)) for _ in range(rng.randint(2, 5))]
            cand = parse_answer(", ".join(vals))
            shuffled = vals[:]
            rng.shuffle(shuffled)
            ref = parse_answer(", ".join(shuffled))
            assert is_equivalent(cand, ref, CFG)

    def test_order_sensitive_tuples(self):
        cfg = EquivConfig(order_sensitive=True)
        assert not is_equivalent(parse_answer("1, 2"), parse_answer("2, 1"), cfg)
        assert is_equivalent(parse_answer("1, 2"), parse_answer("1, 2"), cfg)

    def test_interval_openness_compares_exactly(self):
        assert is_equivalent(parse_answer("[0, 1)"), parse_answer("[0,1)"), CFG)
        assert not is_equivalent(parse_answer("[0, 1]"), parse_answer("[0,1)"), CFG)


class TestVerifyByRubric:
    @pytest.mark.parametrize("candidate,references,expected", RUBRIC_CASES)
    def test_fixture_file(self, candidate, references, expected):
        task = VerificationTask.make("", candidate, references, mode="rubric")
        outcome = verify_by_rubric(task)
        if expected == "needs_tools":
            assert outcome is RubricOutcome.needs_tools
        else:
            assert outcome.value == expected

    def test_identity(self):
        task = VerificationTask.make("", r"\boxed{4}", ["4"], mode="rubric")
        assert verify_by_rubric(task) is RubricOutcome.correct

    def test_truncated_candidate_is_incorrect(self):
        task = VerificationTask.make("", "so the val", ["4"], mode="rubric")
        assert verify_by_rubric(task) is RubricOutcome.incorrect

    def test_cross_unit_escalates(self):
        task = VerificationTask.make(
            "", r"-7.00~\text{kJ/mol}", [r"5.48e22 eV\mole"], mode="rubric"
        )
        assert verify_by_rubric(task) is RubricOutcome.needs_tools

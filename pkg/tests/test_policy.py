"""Policy parsing, static validation, and the stratification table."""

import pytest

from polcheck.errors import ParseError, PolicyError
from polcheck.ontology import Ontology, PropertyDef
from polcheck.policy import (
    Policy,
    check_stratification,
    head_stratum,
    parse_policy,
    predicate_kind,
    to_text,
    validate_high_level,
)
from polcheck.terms import Atom, Const, Formula, Signed, Var, render

from policy_fixtures import FIXTURE, FIXTURE_ROWS, mutations


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def test_round_trip_through_text():
    p = parse_policy(FIXTURE)
    assert parse_policy(to_text(p)) == p


def test_scope_env_and_ids():
    p = parse_policy(
        """
        scope acme, branch_two.
        env horizon 30.
        env owner "security team".
        hasDispensation(emp1, Protect((target, pc1))).
        % a comment line
        hasObligation(emp1, Protect((target, pc1)), true).
        """
    )
    assert p.scope == ("acme", "branch_two")
    assert p.environment == (("horizon", "30"), ("owner", "security team"))
    assert [r.rule_id for r in p.rules] == ["r1", "r2"]
    assert p.rules[0].is_fact()
    assert p.rule("r2").head.pred == "hasObligation"
    with pytest.raises(PolicyError):
        p.rule("r9")


def test_argument_kinds_parse_into_the_right_ast():
    p = parse_policy(
        'cando(pc1, emp1, +Protect((target, pc1), (level, "high"))).\n'
        "mustdo(emp1, $a, hasInstalled(pc1, $y) & ~broken($y)) :- hasObligation(emp1, $a, $q).\n"
    )
    signed = p.rules[0].head.args[2]
    assert isinstance(signed, Signed) and signed.sign == "+"
    assert signed.term.binding("level") == Const("high", quoted=True)
    formula = p.rules[1].head.args[2]
    assert isinstance(formula, Formula)
    assert [c.negated for c in formula.conjuncts] == [False, True]
    assert render(formula) == "hasInstalled(pc1, $y) & ~broken($y)"
    assert p.rules[1].body[0].atom.args[2] == Var("q")


def test_true_and_false_are_formulas():
    p = parse_policy("hasObligation(emp1, act1, true).\nmustdo(emp1, act1, false).\n")
    assert p.rules[0].head.args[2].is_true
    assert p.rules[1].head.args[2].is_false


@pytest.mark.parametrize(
    "bad",
    [
        "hasObligation(emp1, act1).",  # arity
        "cando(pc1, emp1, Protect((target, pc1))).",  # missing sign
        "mustdo(emp1, +act1, true).",  # sign outside its slot
        "hasDispensation(emp1, hasInstalled(pc1, fw1) & true).",  # stray formula
        "hasObligation(emp1, act1, +fw1).",  # formula slot holds a signed term
        "assigned(emp1, pc1, extra).",  # property predicates are binary
        "over_AS.",  # override needs arguments
        "env horizon &.",  # env value must be a plain token
        "hasObligation(emp1, act1, true)",  # missing terminator
    ],
)
def test_malformed_statements_raise(bad):
    with pytest.raises(ParseError):
        parse_policy(bad)


def test_unknown_predicates_need_an_ontology_to_be_rejected():
    onto = Ontology(properties={"assigned": PropertyDef("assigned")})
    text = "hasObligation($e, act1, true) :- helper($e, pc1).\n"
    parse_policy(text)  # lenient without an ontology
    with pytest.raises(ParseError):
        parse_policy(text, onto)


# ---------------------------------------------------------------------------
# Safety
# ---------------------------------------------------------------------------


def test_unsafe_head_variable_is_rejected():
    with pytest.raises(PolicyError, match=r"unsafe head variable\(s\) \$m"):
        parse_policy("hasDispensation(emp1, $m) :- exempt(emp1, pc1).")


def test_formula_variables_are_existential_not_unsafe():
    parse_policy("hasObligation($e, act1, hasInstalled($m, $y)) :- assigned($e, pc1).")


def test_negated_literal_needs_bound_variables():
    with pytest.raises(PolicyError, match=r"negated literal uses unbound"):
        parse_policy("hasDispensation($e, act1) :- assigned($e, pc1) & ~exempt($e, $m).")


def test_negative_do_rule_is_exempt_from_safety():
    parse_policy("do($o, $s, -$a) :- ~do($o, $s, +$a).")


# ---------------------------------------------------------------------------
# Classification helpers
# ---------------------------------------------------------------------------


def test_head_stratum_covers_the_do_split():
    def head(text):
        return parse_policy(text).rules[0].head

    assert head_stratum(head("do(o1, s1, +a1).")) == 7
    assert head_stratum(head("do(o1, s1, -a1).")) == 8
    assert head_stratum(head("mustdo(s1, a1, true).")) == 4
    assert head_stratum(head("assigned(o1, s1).")) == 0


def test_predicate_kind_uses_declared_families():
    onto = Ontology(
        properties={
            "partOf": PropertyDef("partOf", family="hie"),
            "assigned": PropertyDef("assigned", family="rel"),
        }
    )
    assert predicate_kind("partOf", onto) == "hie"
    assert predicate_kind("assigned", onto) == "rel"
    assert predicate_kind("done_act") == "done"
    assert predicate_kind("over_AO") == "over"
    assert predicate_kind("mystery") == "rel"  # lenient without an ontology
    with pytest.raises(ParseError):
        predicate_kind("mystery", onto)


def test_partition_groups_the_three_families():
    p = parse_policy(FIXTURE)
    h, a, m = p.partition()
    assert {r.head.pred for r in h} <= {
        "hasObligation",
        "hasDispensation",
        "derhasObligation",
        "derhasDispensation",
    }
    assert {r.head.pred for r in a} == {"cando", "dercando", "do"}
    assert {r.head.pred for r in m} == {"mustdo", "error"}
    assert len(h) + len(a) + len(m) == len(p.rules)


# ---------------------------------------------------------------------------
# Stratification
# ---------------------------------------------------------------------------


def test_reference_policy_is_stratified():
    result = check_stratification(parse_policy(FIXTURE))
    assert result.ok
    assert not result.violations
    for rid, row in FIXTURE_ROWS.items():
        assert result.stratum_of(rid) == row


@pytest.mark.parametrize(
    "label,text,rule_id,row", list(mutations()), ids=[m[0] for m in mutations()]
)
def test_each_single_edit_is_rejected_with_its_row(label, text, rule_id, row):
    result = check_stratification(parse_policy(text))
    assert not result.ok
    hits = [v for v in result.violations if v.rule_id == rule_id]
    assert hits, f"{label}: no violation reported for {rule_id}"
    assert {v.row for v in hits} == {row}, label


def test_violation_messages_name_the_offender():
    text = FIXTURE.replace(
        "cando($o, $s, +$a) :- mustdo($s, $a, $q) & acts_on($a, $o).",
        "cando($o, $s, +$a) :- mustdo($s, $a, $q) & acts_on($a, $o) & do($o, $s2, +$a2).",
    )
    (v,) = check_stratification(parse_policy(text)).violations
    assert v.row == 5 and "found do" in v.message
    assert v.literal == "do($o, $s2, +$a2)"

    text2 = FIXTURE.replace(
        "do($o, $s, -$a) :- ~do($o, $s, +$a).",
        "do($o, $s, -$a) :- ~do($o, $s, -$a).",
    )
    (v2,) = check_stratification(parse_policy(text2)).violations
    assert "just the one literal" in v2.message


# ---------------------------------------------------------------------------
# The high-level restriction
# ---------------------------------------------------------------------------


def test_high_level_policies_cannot_author_positive_grants():
    p = parse_policy(
        "hasObligation(emp1, Protect((target, pc1)), true).\n"
        "do($o, $s, -$a) :- ~do($o, $s, +$a).\n"
        "cando(pc1, emp1, +act1).\n"
        "dercando($o, $s, +$a) :- dercando($o2, $s, +$a) & part_of($o, $o2).\n"
    )
    violations = validate_high_level(p)
    assert [v.rule_id for v in violations] == ["r3", "r4"]
    assert "positive grants are derived" in violations[0].message
    assert validate_high_level(Policy()) == ()

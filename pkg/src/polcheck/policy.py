"""Policy language: concrete syntax, rule AST, and static validation.

A policy file holds `.`-terminated statements: `scope` and `env` directives
and rules `head :- lit & lit.` (facts drop the body). Variables are
`$`-prefixed, action terms carry parenthesized property bindings, and the
third argument of the obligation family and mustdo is a postcondition
formula (a conjunction of atoms, or a variable ranging over such formulas).

Static validation covers predicate shapes, the stratification table, the
sign discipline for recursive predicates, safety, and the high-level-policy
restriction on authored positive authorizations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import ParseError, PolicyError
from .ontology import Ontology
from .terms import (
    Atom,
    Formula,
    Literal,
    Signed,
    TokenStream,
    Var,
    free_vars,
    parse_argument,
    render,
)

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Predicate shapes and strata
# ---------------------------------------------------------------------------

# name -> (arity, formula position or None, signed-action position or None)
BUILTIN_SHAPES = {
    "hasObligation": (3, 2, None),
    "hasDispensation": (2, None, None),
    "derhasObligation": (3, 2, None),
    "derhasDispensation": (2, None, None),
    "mustdo": (3, 2, None),
    "cando": (3, None, 2),
    "dercando": (3, None, 2),
    "do": (3, None, 2),
    "done": (4, None, None),
    "done_act": (2, None, None),
    "error": (0, None, None),
}

OVER_PREDICATES = ("over", "over_AS", "over_AO")

# Table rows: head predicate -> (stratum, allowed body kinds, positive-only kinds)
_BASE = frozenset({"done", "hie", "rel", "over"})
_ROWS = {
    "hasObligation": (1, frozenset({"done", "hie", "rel"}), frozenset()),
    "hasDispensation": (1, frozenset({"done", "hie", "rel"}), frozenset()),
    "derhasDispensation": (
        2,
        frozenset({"hasObligation", "hasDispensation", "derhasDispensation"}) | _BASE,
        frozenset({"derhasDispensation"}),
    ),
    "derhasObligation": (
        3,
        frozenset(
            {"hasObligation", "hasDispensation", "derhasObligation", "derhasDispensation"}
        )
        | _BASE,
        frozenset({"derhasObligation"}),
    ),
    "mustdo": (
        4,
        frozenset(
            {
                "hasObligation",
                "derhasObligation",
                "hasDispensation",
                "derhasDispensation",
                "done",
                "hie",
                "rel",
            }
        ),
        frozenset(),
    ),
    "cando": (5, frozenset({"mustdo", "done", "hie", "rel"}), frozenset()),
    "dercando": (
        6,
        frozenset({"mustdo", "cando", "dercando", "done", "hie", "rel"}),
        frozenset({"dercando"}),
    ),
    "do+": (7, frozenset({"cando", "dercando", "done", "hie", "rel"}), frozenset()),
    "do-": (8, None, None),  # exactly one literal, checked specially
    "error": (
        9,
        frozenset(
            {
                "mustdo",
                "hasObligation",
                "derhasObligation",
                "hasDispensation",
                "derhasDispensation",
                "do",
                "cando",
                "dercando",
                "done",
                "hie",
                "rel",
            }
        ),
        frozenset(),
    ),
}

_ROW_SUMMARY = {
    1: "row 1 bodies admit done, hie- and rel- literals",
    2: "row 2 bodies admit hasObligation, hasDispensation, derhasDispensation, over, done, hie- and rel- literals",
    3: "row 3 bodies admit hasObligation, hasDispensation, derhasObligation, derhasDispensation, over, done, hie- and rel- literals",
    4: "row 4 bodies admit hasObligation, derhasObligation, hasDispensation, derhasDispensation, done, hie- and rel- literals",
    5: "row 5 bodies admit mustdo, done, hie- and rel- literals",
    6: "row 6 bodies admit mustdo, cando, dercando, done, hie- and rel- literals",
    7: "row 7 bodies admit cando, dercando, done, hie- and rel- literals",
    8: "row 8 bodies contain just the literal ~do(o, s, +a)",
    9: "row 9 bodies admit mustdo, the obligation family, do, cando, dercando, done, hie- and rel- literals",
}


def predicate_kind(name: str, onto: Ontology = None) -> str:
    """Classify a body predicate for stratification: its own name for the
    policy predicates, 'done' for both done forms, 'over' for the override
    relations, else the ontology-declared hie/rel family."""
    if name in ("done", "done_act"):
        return "done"
    if name in OVER_PREDICATES:
        return "over"
    if name in BUILTIN_SHAPES:
        return name
    if onto is not None:
        pdef = onto.properties.get(name)
        if pdef is None:
            raise ParseError(f"unknown predicate {name!r}")
        return pdef.family
    return "rel"


def head_stratum(head: Atom) -> int:
    name = head.pred
    if name == "do":
        sign = head.args[2]
        return 7 if isinstance(sign, Signed) and sign.sign == "+" else 8
    if name in _ROWS:
        return _ROWS[name][0]
    return 0


# ---------------------------------------------------------------------------
# Rules and policies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rule:
    rule_id: str
    head: Atom
    body: tuple = ()  # tuple[Literal, ...]

    def is_fact(self) -> bool:
        return not self.body


@dataclass(frozen=True)
class Policy:
    rules: tuple = ()
    scope: tuple = ()
    environment: tuple = ()  # ((key, value), ...)

    def partition(self):
        """H (obligation/dispensation family), A (authorization family),
        M (decision and integrity rules)."""
        h, a, m = [], [], []
        for r in self.rules:
            if r.head.pred in (
                "hasObligation",
                "hasDispensation",
                "derhasObligation",
                "derhasDispensation",
            ):
                h.append(r)
            elif r.head.pred in ("cando", "dercando", "do"):
                a.append(r)
            else:
                m.append(r)
        return tuple(h), tuple(a), tuple(m)

    def with_rules(self, rules) -> "Policy":
        return Policy(tuple(rules), self.scope, self.environment)

    def rule(self, rule_id: str) -> Rule:
        for r in self.rules:
            if r.rule_id == rule_id:
                return r
        raise PolicyError(f"no rule {rule_id!r}")


def render_literal(lit: Literal) -> str:
    return ("~" if lit.negated else "") + render(lit.atom)


def render_rule(r: Rule) -> str:
    head = render(r.head)
    if not r.body:
        return f"{head}."
    return f"{head} :- " + " & ".join(render_literal(l) for l in r.body) + "."


def to_text(p: Policy) -> str:
    lines = []
    if p.scope:
        lines.append("scope " + ", ".join(p.scope) + ".")
    for k, v in p.environment:
        lines.append(f"env {k} {v}.")
    lines.extend(render_rule(r) for r in p.rules)
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def parse_policy(text: str, onto: Ontology = None) -> Policy:
    ts = TokenStream(text)
    rules: list[Rule] = []
    scope: list[str] = []
    env: list = []
    n = 0
    while not ts.at_end():
        if ts.accept("scope"):
            scope.append(ts.expect_kind("ident").value)
            while ts.accept(","):
                scope.append(ts.expect_kind("ident").value)
            ts.expect(".")
            continue
        if ts.accept("env"):
            key = ts.expect_kind("ident").value
            val = ts.next()
            if val.kind not in ("ident", "number", "string"):
                ts.fail(f"env value must be a plain token, got {val.value!r}")
            env.append((key, val.value))
            ts.expect(".")
            continue
        n += 1
        rules.append(_parse_rule(ts, f"r{n}", onto))
    policy = Policy(tuple(rules), tuple(scope), tuple(env))
    for r in policy.rules:
        _check_shape(r, onto)
        _check_safety(r)
    return policy


def _parse_rule(ts: TokenStream, rule_id: str, onto: Ontology) -> Rule:
    head = _parse_atom(ts, onto)
    body: list[Literal] = []
    if ts.accept(":-"):
        body.append(_parse_literal(ts, onto))
        while ts.accept("&"):
            body.append(_parse_literal(ts, onto))
    ts.expect(".")
    return Rule(rule_id, head, tuple(body))


def _parse_literal(ts: TokenStream, onto: Ontology) -> Literal:
    negated = bool(ts.accept("~"))
    return Literal(negated, _parse_atom(ts, onto))


def _parse_atom(ts: TokenStream, onto: Ontology) -> Atom:
    name_tok = ts.expect_kind("ident")
    name = name_tok.value
    if name == "error" and not ts.at("("):
        return Atom("error", ())
    shape = BUILTIN_SHAPES.get(name)
    formula_pos = shape[1] if shape else None
    ts.expect("(")
    args = []
    if not ts.at(")"):
        while True:
            allow_formula = formula_pos is not None and len(args) == formula_pos
            args.append(parse_argument(ts, allow_formula=allow_formula))
            if not ts.accept(","):
                break
    ts.expect(")")
    return Atom(name, tuple(args))


# ---------------------------------------------------------------------------
# Shape and safety validation
# ---------------------------------------------------------------------------


def _check_shape(rule: Rule, onto: Ontology) -> None:
    for spot, atom in [("head", rule.head)] + [("body", l.atom) for l in rule.body]:
        _check_atom_shape(atom, rule.rule_id, spot, onto)


def _check_atom_shape(atom: Atom, rule_id: str, spot: str, onto: Ontology) -> None:
    name = atom.pred
    shape = BUILTIN_SHAPES.get(name)
    if shape is None:
        if name in OVER_PREDICATES:
            if not atom.args:
                raise ParseError(f"{rule_id}: {name} takes at least one argument")
        else:
            predicate_kind(name, onto)  # raises on unknown when onto is given
            if len(atom.args) != 2:
                raise ParseError(f"{rule_id}: property predicate {name!r} is binary")
    else:
        arity, formula_pos, signed_pos = shape
        if len(atom.args) != arity:
            raise ParseError(
                f"{rule_id}: {name} takes {arity} argument(s), got {len(atom.args)}"
            )
        for i, arg in enumerate(atom.args):
            if isinstance(arg, Signed) and i != signed_pos:
                raise ParseError(
                    f"{rule_id}: signed actions belong only in cando/dercando/do"
                )
            if isinstance(arg, Formula) and i != formula_pos:
                raise ParseError(
                    f"{rule_id}: a postcondition formula is only the third argument "
                    "of the obligation family and mustdo"
                )
        if signed_pos is not None and not isinstance(atom.args[signed_pos], Signed):
            raise ParseError(f"{rule_id}: {name} requires a signed (+/-) action argument")
        if formula_pos is not None:
            q = atom.args[formula_pos]
            if isinstance(q, Formula):
                if any(c.negated for c in q.conjuncts):
                    log.warning(
                        "%s: negation inside a postcondition formula is experimental", rule_id
                    )
            elif not isinstance(q, Var):
                raise ParseError(
                    f"{rule_id}: third argument of {name} must be a formula or variable"
                )
    # nested formulas never carry signed actions
    for arg in atom.args:
        if isinstance(arg, Formula):
            for c in arg.conjuncts:
                for a2 in c.atom.args:
                    if isinstance(a2, (Signed, Formula)):
                        raise ParseError(
                            f"{rule_id}: postcondition atoms take plain terms"
                        )


def _is_row8(rule: Rule) -> bool:
    head = rule.head
    return (
        head.pred == "do"
        and len(head.args) == 3
        and isinstance(head.args[2], Signed)
        and head.args[2].sign == "-"
    )


def _check_safety(rule: Rule) -> None:
    """Every head variable (postcondition-internal ones aside) must occur in
    a positive body literal. The one-literal do(o,s,-a) form is exempt: its
    grounding domain is the finite authorization triple set."""
    if _is_row8(rule):
        return
    bound = set()
    for lit in rule.body:
        if not lit.negated:
            bound |= free_vars(lit.atom, include_formulas=True)
    unbound = free_vars(rule.head, include_formulas=False) - bound
    if unbound:
        names = ", ".join(sorted("$" + v for v in unbound))
        raise PolicyError(f"{rule.rule_id}: unsafe head variable(s) {names}")
    for lit in rule.body:
        if lit.negated:
            loose = free_vars(lit.atom, include_formulas=False) - bound
            if loose:
                names = ", ".join(sorted("$" + v for v in loose))
                raise PolicyError(
                    f"{rule.rule_id}: negated literal uses unbound variable(s) {names}"
                )


# ---------------------------------------------------------------------------
# Stratification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StratificationViolation:
    rule_id: str
    literal: str  # rendered offending literal (or head)
    row: int  # the Table row of the head predicate
    message: str


@dataclass(frozen=True)
class StratificationResult:
    ok: bool
    strata: tuple = ()  # ((rule_id, stratum), ...)
    violations: tuple = ()

    def stratum_of(self, rule_id: str) -> int:
        return dict(self.strata)[rule_id]


def check_stratification(p: Policy, onto: Ontology = None) -> StratificationResult:
    strata = []
    violations: list[StratificationViolation] = []
    for rule in p.rules:
        row = head_stratum(rule.head)
        strata.append((rule.rule_id, row))
        if row == 0:
            violations.append(
                StratificationViolation(
                    rule.rule_id,
                    render(rule.head),
                    0,
                    f"row 0: {rule.head.pred} is a base relation, defined by facts not rules",
                )
            )
            continue
        if row == 8:
            violations.extend(_check_row8(rule))
            continue
        key = "do+" if row == 7 else rule.head.pred
        _, allowed, positive_only = _ROWS[key]
        for lit in rule.body:
            kind = predicate_kind(lit.atom.pred, onto)
            if kind == "do":
                # distinguish signs inside row-9 bodies; both are simply "do"
                kind = "do"
            if kind not in allowed:
                violations.append(
                    StratificationViolation(
                        rule.rule_id,
                        render_literal(lit),
                        row,
                        f"{_ROW_SUMMARY[row]}; found {lit.atom.pred}",
                    )
                )
            elif lit.negated and kind in positive_only:
                violations.append(
                    StratificationViolation(
                        rule.rule_id,
                        render_literal(lit),
                        row,
                        f"row {row}: {lit.atom.pred} literals in {rule.head.pred} bodies must be positive",
                    )
                )
    return StratificationResult(not violations, tuple(strata), tuple(violations))


def _check_row8(rule: Rule):
    head = rule.head
    form = "row 8: do(o, s, -a) rules contain just the one literal ~do(o, s, +a)"
    if len(rule.body) != 1:
        return [StratificationViolation(rule.rule_id, render(head), 8, form)]
    lit = rule.body[0]
    ok = (
        lit.negated
        and lit.atom.pred == "do"
        and len(lit.atom.args) == 3
        and lit.atom.args[0] == head.args[0]
        and lit.atom.args[1] == head.args[1]
        and isinstance(lit.atom.args[2], Signed)
        and lit.atom.args[2].sign == "+"
        and lit.atom.args[2].term == head.args[2].term
    )
    if ok:
        return []
    return [StratificationViolation(rule.rule_id, render_literal(lit), 8, form)]


# ---------------------------------------------------------------------------
# High-level policy restriction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HighLevelViolation:
    rule_id: str
    message: str


def validate_high_level(p: Policy):
    """A high-level policy must not author positive authorizations: no
    cando/dercando/do rule whose head action is positively signed. Negative
    (prohibition) heads are permitted."""
    violations = []
    for rule in p.rules:
        if rule.head.pred in ("cando", "dercando", "do"):
            sign = rule.head.args[2]
            if isinstance(sign, Signed) and sign.sign == "+":
                violations.append(
                    HighLevelViolation(
                        rule.rule_id,
                        f"authored positive authorization {render(rule.head)}; "
                        "positive grants are derived from obligations, not authored",
                    )
                )
    return tuple(violations)

"""Policy refinement: hierarchy propagation, action-refinement distribution
over sequence, choice, and conjunction, obligation-derived authorizations,
and conflict-resolution installation.

Refinement by choice or conjunction forks the policy, so the engine works on
branches. Each branch carries a choice log of (rule id, pattern id, branch
tag) entries; replaying a log against the original inputs reproduces the
branch policy byte for byte.

Sequence refinement of an authored obligation rule keeps the source rule and
adds a pair of derived rules: the first sub-obligation inherits the source
body, the second fires once the first sub-action is done and the source
obligation still holds. When the source is itself a derived rule there is no
base predicate to reference, so the second rule inlines the source body
instead. Dispensation rules are never action-refined.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .actions import ActionNode, ActionLeaf, CHOICE, CONJ, SEQ, RefinementPattern, taxonomy_of
from .errors import BranchLimitError, CycleError, PatternError, PolicyError
from .ontology import Ontology, StateSpace, expand_space, universe
from .policy import Policy, Rule, _check_safety, check_stratification
from .terms import (
    Atom,
    ActionTerm,
    Const,
    FLit,
    Formula,
    FALSE,
    Literal,
    Signed,
    TRUE,
    Var,
    match,
    substitute,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RefinementBranch:
    policy: Policy
    choice_log: tuple = ()  # ((rule_id, pattern_id, tag), ...)


@dataclass(frozen=True)
class RefinementResult:
    branches: tuple  # tuple[RefinementBranch, ...]
    warnings: tuple = ()


# ---------------------------------------------------------------------------
# Template installation
# ---------------------------------------------------------------------------


def _mk(rule_id: str, head: Atom, body=()) -> Rule:
    rule = Rule(rule_id, head, tuple(body))
    _check_safety(rule)
    return rule


def _append_unique(p: Policy, rules) -> Policy:
    existing = {(r.head, r.body) for r in p.rules}
    added = [r for r in rules if (r.head, r.body) not in existing]
    return p.with_rules(p.rules + tuple(added))


def propagate_hierarchy(p: Policy, onto: Ontology) -> Policy:
    """Install the four subject-hierarchy propagation templates for every
    declared hie predicate: obligations and dispensations on an upper
    subject derive for the subjects below it."""
    s1, s2, a, q = Var("s1"), Var("s2"), Var("a"), Var("q")
    rules = []
    for h in onto.hie_predicates():
        below = Atom(h, (s2, s1))
        rules.extend(
            [
                _mk(
                    f"hier.{h}.obl",
                    Atom("derhasObligation", (s2, a, q)),
                    (Literal(False, Atom("hasObligation", (s1, a, q))), Literal(False, below)),
                ),
                _mk(
                    f"hier.{h}.obl.der",
                    Atom("derhasObligation", (s2, a, q)),
                    (Literal(False, Atom("derhasObligation", (s1, a, q))), Literal(False, below)),
                ),
                _mk(
                    f"hier.{h}.disp",
                    Atom("derhasDispensation", (s2, a)),
                    (Literal(False, Atom("hasDispensation", (s1, a))), Literal(False, below)),
                ),
                _mk(
                    f"hier.{h}.disp.der",
                    Atom("derhasDispensation", (s2, a)),
                    (Literal(False, Atom("derhasDispensation", (s1, a))), Literal(False, below)),
                ),
            ]
        )
    return _append_unique(p, rules)


def derive_authorizations(p: Policy, onto: Ontology = None) -> Policy:
    """Install the obligation-to-authorization templates: +execute on the
    obligation action, +modify on its resources, +read on its instruments.
    The resource/instrument forms are specialized per action class from the
    ontology declarations; the generic forms fire only against explicitly
    asserted resource/instrument atoms."""
    s, a, q, r, i = Var("s"), Var("a"), Var("q"), Var("r"), Var("i")
    mustdo = Literal(False, Atom("mustdo", (s, a, q)))
    rules = [
        _mk("auth.execute", Atom("cando", (a, s, _signed("+", Const("execute")))), (mustdo,))
    ]
    declared = onto.properties if onto is not None else {}
    if "resource" in declared:
        rules.append(
            _mk(
                "auth.modify",
                Atom("cando", (r, s, _signed("+", Const("modify")))),
                (mustdo, Literal(False, Atom("resource", (a, r)))),
            )
        )
    if "instrument" in declared:
        rules.append(
            _mk(
                "auth.read",
                Atom("cando", (i, s, _signed("+", Const("read")))),
                (mustdo, Literal(False, Atom("instrument", (a, i)))),
            )
        )
    if onto is not None:
        for name in sorted(onto.action_classes):
            acd = onto.action_classes[name]
            shape = _class_term(acd)
            must = Literal(False, Atom("mustdo", (s, shape, q)))
            for obj in acd.resources:
                rules.append(
                    _mk(
                        f"auth.modify.{name}.{obj}",
                        Atom("cando", (Const(obj), s, _signed("+", Const("modify")))),
                        (must,),
                    )
                )
            for obj in acd.instruments:
                rules.append(
                    _mk(
                        f"auth.read.{name}.{obj}",
                        Atom("cando", (Const(obj), s, _signed("+", Const("read")))),
                        (must,),
                    )
                )
    return _append_unique(p, rules)


def _signed(sign, term):
    return Signed(sign, term)


def _class_term(acd) -> ActionTerm:
    return ActionTerm(acd.name, tuple((prop, Var(f"v_{prop}")) for prop in acd.params))


def install_conflict_resolution(p: Policy, mode: str = "dispensation-precedence") -> Policy:
    """dispensation-precedence installs the dispensation lift and the default
    decision rule (mustdo unless dispensed); custom keeps only authored
    decision rules."""
    if mode == "custom":
        return p
    if mode != "dispensation-precedence":
        raise PolicyError(f"unknown conflict resolution mode {mode!r}")
    s, a, q = Var("s"), Var("a"), Var("q")
    lift = _mk(
        "cr.lift",
        Atom("derhasDispensation", (s, a)),
        (Literal(False, Atom("hasDispensation", (s, a))),),
    )
    decide = _mk(
        "cr.mustdo",
        Atom("mustdo", (s, a, q)),
        (
            Literal(False, Atom("derhasObligation", (s, a, q))),
            Literal(True, Atom("derhasDispensation", (s, a))),
        ),
    )
    return _append_unique(p, (lift, decide))


# ---------------------------------------------------------------------------
# q1 compilation
# ---------------------------------------------------------------------------


def compile_meet_formula(gamma1: StateSpace, delta2: StateSpace, onto: Ontology):
    """The postcondition Γ1 ⊓ Δ2 as a formula over the variable table's rel
    atoms. The whole space is true, the empty meet is false (warned), and a
    per-variable rectangle with single values becomes an atom conjunction."""
    meet = expand_space(gamma1, onto) & expand_space(delta2, onto)
    univ = set(universe(onto))
    if meet == univ:
        return TRUE, None
    if not meet:
        return FALSE, "sequence postcondition is unsatisfiable (empty meet)"
    names = onto.variable_names()
    values = {v: sorted({st.value(v) for st in meet}) for v in names}
    size = 1
    for v in names:
        size *= len(values[v])
    if size != len(meet):
        return TRUE, "postcondition meet is not expressible as an atom conjunction; weakened to true"
    conjuncts = []
    for v in names:
        vdef = onto.variables[v]
        if len(values[v]) == 1 and tuple(values[v]) != vdef.values:
            conjuncts.append(
                FLit(False, Atom(vdef.prop, (Const(vdef.object_id), Const(values[v][0]))))
            )
        elif len(values[v]) not in (1, len(vdef.values)):
            return TRUE, "postcondition meet is not expressible as an atom conjunction; weakened to true"
    return Formula(tuple(conjuncts)), None


# ---------------------------------------------------------------------------
# Pattern application
# ---------------------------------------------------------------------------


def _flatten_patterns(patterns) -> tuple:
    """Complex pattern bodies become one simple pattern per labeled node, the
    label standing in as the operand action."""
    out = []
    for pat in patterns:

        def visit(node, pid, root_name):
            left = _operand_leaf(node.left, pat)
            right = _operand_leaf(node.right, pat)
            simple = ActionNode(
                node.op, left, right, strict=node.strict, guard=node.guard, guard_side=node.guard_side
            )
            out.append(
                RefinementPattern(pid, root_name, pat.root_bindings, simple, taxonomy_of(simple))
            )
            for child in (node.left, node.right):
                if isinstance(child, ActionNode):
                    visit(child, f"{pid}.{child.label}", child.label)

        visit(pat.body, pat.pattern_id, pat.root)
    return tuple(out)


def _operand_leaf(child, pat) -> ActionLeaf:
    if isinstance(child, ActionLeaf):
        return child
    if isinstance(child, ActionNode):
        if not child.label:
            raise PatternError(
                f"pattern {pat.pattern_id}: inner compositions must be labeled to refine through"
            )
        return ActionLeaf(child.label, pat.root_bindings)
    raise PatternError(f"pattern {pat.pattern_id}: empty action cannot be an operand")


def _check_acyclic(patterns) -> None:
    edges: dict = {}
    for pat in patterns:
        kids = edges.setdefault(pat.root, set())
        kids.add(pat.body.left.name)
        kids.add(pat.body.right.name)
    state: dict = {}

    def visit(n, trail):
        if state.get(n) == 2:
            return
        if state.get(n) == 1:
            cycle = trail[trail.index(n):] + [n]
            raise CycleError("refinement patterns are cyclic: " + " -> ".join(cycle))
        state[n] = 1
        for k in sorted(edges.get(n, ())):
            visit(k, trail + [n])
        state[n] = 2

    for n in sorted(edges):
        visit(n, [])


def _unify(pat: RefinementPattern, rule: Rule) -> dict:
    root_term = ActionTerm(pat.root, pat.root_bindings)
    theta = match(root_term, rule.head.args[1], {})
    if theta is None:
        raise PatternError(
            f"pattern {pat.pattern_id} does not unify with the action of rule {rule.rule_id}"
        )
    return theta


def _leaf_term(leaf: ActionLeaf, theta: dict) -> ActionTerm:
    return substitute(ActionTerm(leaf.name, leaf.bindings), theta)


def _done(subject, term) -> Literal:
    return Literal(False, Atom("done_act", (subject, term)))


def _not_done(subject, term) -> Literal:
    return Literal(True, Atom("done_act", (subject, term)))


def _obl(subject, term, q) -> Atom:
    return Atom("derhasObligation", (subject, term, q))


def _sequence_rules(rule, term1, term2, a1_name, a2_name, onto, rid_prefix, warnings):
    """The B.1 pair for ``rule`` refined through term1 ; term2."""
    subject, q = rule.head.args[0], rule.head.args[2]
    c1 = onto.action_classes.get(a1_name)
    c2 = onto.action_classes.get(a2_name)
    if c1 is None or c2 is None:
        missing = a1_name if c1 is None else a2_name
        raise PatternError(f"undeclared action {missing!r} in a sequence refinement")
    q1, warn = compile_meet_formula(c1.final_space, c2.init_space, onto)
    if warn:
        warnings.append(f"{rid_prefix}: {warn}")
    first = _mk(f"{rid_prefix}.s1", _obl(subject, term1, q1), rule.body)
    if rule.head.pred == "hasObligation":
        second = _mk(
            f"{rid_prefix}.s2",
            _obl(subject, term2, q),
            (
                _done(subject, term1),
                Literal(False, Atom("hasObligation", (subject, rule.head.args[1], q))),
            ),
        )
        keep_source = True
    else:
        second = _mk(
            f"{rid_prefix}.s2",
            _obl(subject, term2, q),
            rule.body + (_done(subject, term1),),
        )
        keep_source = False
    return first, second, keep_source


def _replace(policy: Policy, rule_id: str, new_rules, keep: bool) -> Policy:
    out = []
    for r in policy.rules:
        if r.rule_id == rule_id:
            if keep:
                out.append(r)
            out.extend(new_rules)
        else:
            out.append(r)
    return policy.with_rules(out)


def _apply_pattern(policy: Policy, rule: Rule, pat: RefinementPattern, onto: Ontology, warnings):
    """All outcomes of one pattern application: [(policy, (log entry,))]."""
    theta = _unify(pat, rule)
    body = pat.body
    left = _leaf_term(body.left, theta)
    right = _leaf_term(body.right, theta)
    rid, pid = rule.rule_id, pat.pattern_id
    if body.guard is not None:
        warnings.append(
            f"{pid}: guarded composition refined as its basic counterpart (guards do not reach rules)"
        )

    if body.op == SEQ:
        first, second, keep = _sequence_rules(
            rule, left, right, body.left.name, body.right.name, onto, rid, warnings
        )
        return [(_replace(policy, rid, (first, second), keep), ((rid, pid, "seq"),))]

    if body.op == CHOICE:
        subject, q = rule.head.args[0], rule.head.args[2]
        outcomes = []
        for k, (mine, other) in enumerate(((left, right), (right, left)), 1):
            refined = _mk(
                f"{rid}.c{k}",
                _obl(subject, mine, q),
                rule.body + (_not_done(subject, other),),
            )
            outcomes.append(
                (_replace(policy, rid, (refined,), False), ((rid, pid, f"choice.{k}"),))
            )
        return outcomes

    # conjunction: choice over both orders, then sequence inside each branch
    subject, q = rule.head.args[0], rule.head.args[2]
    root_term = rule.head.args[1]
    ord_terms = (
        ActionTerm(f"{pat.root}__ord1", root_term.bindings),
        ActionTerm(f"{pat.root}__ord2", root_term.bindings),
    )
    orders = ((left, right, body.left.name, body.right.name), (right, left, body.right.name, body.left.name))
    outcomes = []
    for k, (t1, t2, n1, n2) in enumerate(orders, 1):
        other = ord_terms[2 - k]
        mid = _mk(
            f"{rid}.o{k}",
            _obl(subject, ord_terms[k - 1], q),
            rule.body + (_not_done(subject, other),),
        )
        first, second, _ = _sequence_rules(mid, t1, t2, n1, n2, onto, mid.rule_id, warnings)
        outcomes.append(
            (_replace(policy, rid, (first, second), False), ((rid, pid, f"conj.{k}"),))
        )
    return outcomes


# ---------------------------------------------------------------------------
# Public single-step operations
# ---------------------------------------------------------------------------


def refine_sequence(rule: Rule, pat: RefinementPattern, onto: Ontology):
    """The two B.1 derivation rules for one obligation rule. The caller keeps
    the source rule when it is authored (hasObligation) and drops it when it
    is derived."""
    if pat.body.op != SEQ:
        raise PatternError(f"pattern {pat.pattern_id} is not a sequence")
    theta = _unify(pat, rule)
    warnings: list[str] = []
    first, second, _ = _sequence_rules(
        rule,
        _leaf_term(pat.body.left, theta),
        _leaf_term(pat.body.right, theta),
        pat.body.left.name,
        pat.body.right.name,
        onto,
        rule.rule_id,
        warnings,
    )
    for w in warnings:
        log.warning("%s", w)
    return first, second


def refine_choice(branch: RefinementBranch, rule: Rule, pat: RefinementPattern, onto: Ontology):
    if pat.body.op != CHOICE:
        raise PatternError(f"pattern {pat.pattern_id} is not a choice")
    outcomes = _apply_pattern(branch.policy, rule, pat, onto, [])
    return tuple(
        RefinementBranch(pol, branch.choice_log + entries) for pol, entries in outcomes
    )


def refine_conjunction(branch: RefinementBranch, rule: Rule, pat: RefinementPattern, onto: Ontology):
    if pat.body.op != CONJ:
        raise PatternError(f"pattern {pat.pattern_id} is not a conjunction")
    outcomes = _apply_pattern(branch.policy, rule, pat, onto, [])
    return tuple(
        RefinementBranch(pol, branch.choice_log + entries) for pol, entries in outcomes
    )


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------

_REFINABLE = ("hasObligation", "derhasObligation")


def _next_application(policy: Policy, by_root: dict, done: frozenset):
    for rule in policy.rules:
        if rule.head.pred not in _REFINABLE or rule.rule_id in done:
            continue
        action = rule.head.args[1]
        if isinstance(action, ActionTerm) and action.name in by_root:
            return rule, by_root[action.name]
    return None, ()


def _lift_atomic_obligations(policy: Policy, by_root: dict) -> Policy:
    """Obligations on pattern-less (atomic) actions never pass through the
    B rules, so they get a per-class lift to derhasObligation."""
    classes = {}
    for rule in policy.rules:
        if rule.head.pred != "hasObligation":
            continue
        action = rule.head.args[1]
        if isinstance(action, ActionTerm) and action.name not in by_root:
            classes.setdefault(action.name, tuple(p for p, _ in action.bindings))
    s, q = Var("s"), Var("q")
    lifts = []
    for name in sorted(classes):
        shape = ActionTerm(name, tuple((p, Var(f"v_{p}")) for p in classes[name]))
        lifts.append(
            _mk(
                f"lift.{name}",
                Atom("derhasObligation", (s, shape, q)),
                (Literal(False, Atom("hasObligation", (s, shape, q))),),
            )
        )
    return _append_unique(policy, lifts)


def enumerate_refinements(
    p: Policy,
    patterns,
    onto: Ontology,
    ds=None,
    max_branches: int = 1024,
) -> RefinementResult:
    """Exhaustively apply the B rules in deterministic rule/pattern order
    until every obligation action is atomic. Choice and conjunction fork;
    multiple patterns on one action fork across patterns."""
    pats = _flatten_patterns(patterns)
    _check_acyclic(pats)
    by_root: dict = {}
    for pat in sorted(pats, key=lambda x: x.pattern_id):
        by_root.setdefault(pat.root, []).append(pat)

    warnings: list[str] = []
    multiplying: set = set()
    finished = []
    stack = [(p, (), frozenset())]
    while stack:
        policy, clog, done = stack.pop()
        rule, applicable = _next_application(policy, by_root, done)
        if rule is None:
            finished.append(RefinementBranch(_lift_atomic_obligations(policy, by_root), clog))
            continue
        if len(applicable) > 1:
            multiplying.update(x.pattern_id for x in applicable)
        nxt = []
        for pat in applicable:
            outcomes = _apply_pattern(policy, rule, pat, onto, warnings)
            if len(outcomes) > 1:
                multiplying.add(pat.pattern_id)
            keep_done = done | {rule.rule_id}
            for pol, entries in outcomes:
                nxt.append((pol, clog + entries, keep_done))
        if len(finished) + len(stack) + len(nxt) > max_branches:
            raise BranchLimitError(max_branches, tuple(sorted(multiplying)))
        stack.extend(reversed(nxt))

    for br in finished:
        result = check_stratification(br.policy, onto)
        if not result.ok:
            first = result.violations[0]
            raise PolicyError(
                f"refinement produced an unstratified rule: {first.rule_id}: {first.message}"
            )
    finished.sort(key=lambda b: b.choice_log)
    return RefinementResult(tuple(finished), tuple(warnings))


def replay(p: Policy, patterns, choice_log, onto: Ontology, ds=None) -> Policy:
    """Re-run enumeration following a recorded choice log; returns the branch
    policy it reproduces."""
    pats = _flatten_patterns(patterns)
    by_root: dict = {}
    for pat in sorted(pats, key=lambda x: x.pattern_id):
        by_root.setdefault(pat.root, []).append(pat)
    policy, done = p, frozenset()
    remaining = list(choice_log)
    while True:
        rule, applicable = _next_application(policy, by_root, done)
        if rule is None:
            break
        if not remaining:
            raise PolicyError("choice log exhausted before refinement finished")
        rid, pid, tag = remaining.pop(0)
        if rid != rule.rule_id:
            raise PolicyError(f"choice log expects rule {rid!r} but {rule.rule_id!r} is next")
        chosen = [x for x in applicable if x.pattern_id == pid]
        if not chosen:
            raise PolicyError(f"choice log names pattern {pid!r}, not applicable to {rid!r}")
        outcomes = _apply_pattern(policy, rule, chosen[0], onto, [])
        selected = [pol for pol, entries in outcomes if entries[0][2] == tag]
        if not selected:
            raise PolicyError(f"choice log tag {tag!r} matches no outcome of {pid!r}")
        policy = selected[0]
        done = done | {rule.rule_id}
    if remaining:
        raise PolicyError("choice log has unused entries")
    return _lift_atomic_obligations(policy, by_root)


def refine_policy(
    p: Policy,
    patterns,
    onto: Ontology,
    ds=None,
    mode: str = "dispensation-precedence",
    max_branches: int = 1024,
) -> RefinementResult:
    """The full high-level refinement pipeline: hierarchy templates,
    authorization templates, conflict resolution, then pattern enumeration."""
    staged = install_conflict_resolution(
        derive_authorizations(propagate_hierarchy(p, onto), onto), mode
    )
    return enumerate_refinements(staged, patterns, onto, ds=ds, max_branches=max_branches)

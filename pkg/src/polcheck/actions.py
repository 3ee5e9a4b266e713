"""Action classes and the composition algebra.

An action class is a state transformer between an initial and a final state
space. Compositions combine actions with sequence, choice, and conjunction;
choice and conjunction come in strict and flexible variants, and sequence and
conjunction additionally in advanced (guarded) variants where one operand
carries a state-space guard: when the guard space abstracts the state at the
point the guarded action would run, that action is mandatory, otherwise it
may be skipped.

Well-formedness of a refinement pattern is decided two ways. check_well_formed
evaluates the symbolic constraint row for the pattern's composition type, and
oracle_well_formed replays every required trace from every initial state and
checks the end states directly. The checker's constraints are sufficient, not
necessary, so the supported direction is: checker-accepted implies
oracle-accepted.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import (
    NameResolutionError,
    OracleScaleError,
    SchemaError,
    StructuralError,
    TaxonomyError,
)
from .ontology import (
    Ontology,
    State,
    StateSpace,
    expand_space,
    feasible_in,
    render_state,
    singleton,
    space_refines,
    space_refines_witness,
    state_refines,
    universe,
)
from .terms import Formula, TRUE

SEQ = "seq"
CHOICE = "choice"
CONJ = "conj"

DECLARED_TYPES = (
    "basic-seq",
    "basic-strict-choice",
    "basic-strict-conj",
    "basic-flex-choice",
    "basic-flex-conj",
    "adv-seq",
    "adv-strict-conj",
    "adv-flex-conj",
)


# ---------------------------------------------------------------------------
# Action classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransformRule:
    """One guarded assignment: when the guard space abstracts the current
    state, the listed variables are overwritten."""

    guard: StateSpace
    effects: tuple  # tuple[(variable, value), ...]


@dataclass(frozen=True)
class ActionClassDef:
    name: str
    init_space: StateSpace
    final_space: StateSpace
    params: tuple = ()
    transform: tuple = ()  # tuple[TransformRule, ...], tried in order
    effect: Formula = TRUE
    resources: tuple = ()
    instruments: tuple = ()

    def apply(self, state: State, onto: Ontology) -> State:
        """Total transformer: first matching guarded assignment fires; the
        fallback applies the final space's fixed constraints."""
        for rule in self.transform:
            if feasible_in(rule.guard, state, onto):
                return state.override(dict(rule.effects))
        if self.final_space.is_concise:
            return state.override(dict(self.final_space.fixed))
        target = min(sorted(self.final_space.states))
        return target


def validate_action_class(
    acd: ActionClassDef, onto: Ontology, state_bound: int = 4096
) -> list:
    """Enumerative load check: the transformer must send every state in the
    initial cone into the final space's cone, monotonically. Returns warning
    strings; raises SchemaError on a contract violation."""
    warnings: list[str] = []
    expand_space(acd.init_space, onto)
    expand_space(acd.final_space, onto)
    univ = universe(onto)
    if len(univ) > state_bound:
        warnings.append(
            f"action {acd.name}: universe has {len(univ)} states, past the bound; transformer contract unchecked"
        )
        return warnings
    cone = [s for s in univ if feasible_in(acd.init_space, s, onto)]
    outputs = {}
    for delta in cone:
        gamma = acd.apply(delta, onto)
        outputs[delta] = gamma
        if not feasible_in(acd.final_space, gamma, onto):
            raise SchemaError(
                f"action {acd.name}: transformer output {render_state(gamma)} falls outside the final space"
            )
    if len(cone) ** 2 <= 250_000:
        for d1, d2 in itertools.product(cone, cone):
            if d1 != d2 and state_refines(d1, d2, onto):
                if not state_refines(outputs[d1], outputs[d2], onto):
                    raise SchemaError(
                        f"action {acd.name}: transformer is not monotone between "
                        f"{render_state(d1)} and {render_state(d2)}"
                    )
    else:
        warnings.append(f"action {acd.name}: monotonicity check skipped (cone too large)")
    return warnings


# ---------------------------------------------------------------------------
# Compositions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActionLeaf:
    name: str
    bindings: tuple = ()  # ((property, Term), ...) as written in the pattern


@dataclass(frozen=True)
class EmptyAction:
    """The identity action {}."""


EMPTY = EmptyAction()


@dataclass(frozen=True)
class ActionNode:
    op: str
    left: object
    right: object
    strict: bool = False
    guard: StateSpace = None
    guard_side: str = None
    label: str = None  # action class named by an inner node of a complex body

    def __post_init__(self):
        if self.op not in (SEQ, CHOICE, CONJ):
            raise StructuralError(f"unknown operator {self.op!r}")
        if self.strict and self.op == SEQ:
            raise StructuralError("sequence has no strict variant")
        if self.guard is not None:
            if self.op == CHOICE:
                raise StructuralError("choice takes no guard")
            if self.guard_side not in ("left", "right"):
                raise StructuralError("guard requires a side")
            if self.op == SEQ and self.guard_side != "right":
                raise StructuralError("a guarded sequence guards its second operand")
        elif self.guard_side is not None:
            raise StructuralError("guard side without a guard")


def taxonomy_of(node: ActionNode) -> str:
    if node.op == SEQ:
        return "adv-seq" if node.guard is not None else "basic-seq"
    if node.op == CHOICE:
        return "basic-strict-choice" if node.strict else "basic-flex-choice"
    if node.guard is not None:
        return "adv-strict-conj" if node.strict else "adv-flex-conj"
    return "basic-strict-conj" if node.strict else "basic-flex-conj"


@dataclass(frozen=True, order=True)
class ActionTrace:
    steps: tuple  # tuple[str, ...] of action class names


@dataclass(frozen=True)
class Infeasible:
    """Returned by apply_trace when a step's initial space does not abstract
    the current state. Not an error."""

    step: int  # 1-based failing step
    action: str
    state: State


@dataclass(frozen=True)
class RefinementPattern:
    pattern_id: str
    root: str
    root_bindings: tuple  # ((property, Term), ...) from the pattern header
    body: object  # Composition
    declared_type: str


def render_composition(comp, _prec: int = 0) -> str:
    from .ontology import render_space
    from .terms import render as render_term

    if isinstance(comp, EmptyAction):
        return "{}"
    if isinstance(comp, ActionLeaf):
        if not comp.bindings:
            return comp.name
        inner = ",".join(f"{p}:{render_term(v)}" for p, v in comp.bindings)
        return f"{comp.name}({inner})"
    prec = {CHOICE: 1, SEQ: 2, CONJ: 3}[comp.op]
    sym = {CHOICE: "\\/", SEQ: ";", CONJ: "/\\"}[comp.op]
    if comp.strict:
        sym += "_s"
    left = render_composition(comp.left, prec)
    right = render_composition(comp.right, prec + 1)
    if comp.guard is not None:
        gtxt = "[" + ", ".join(f"{v}={val}" for v, val in comp.guard.fixed) + "]" if comp.guard.is_concise else "[" + render_space(comp.guard) + "]"
        if comp.guard_side == "left":
            left = gtxt + left
        else:
            right = gtxt + right
    text = f"{left} {sym} {right}"
    if prec < _prec:
        text = f"({text})"
    if comp.label:
        text = f"({text}):{comp.label}"
    return text


# ---------------------------------------------------------------------------
# Traces and normal form
# ---------------------------------------------------------------------------


def _shuffle(left: tuple, right: tuple) -> set:
    """All interleavings of two traces that keep each one's internal order
    (the shuffle product). Associative and commutative on trace sets, which
    is what makes conjunction associative and commutative."""
    if not left:
        return {right}
    if not right:
        return {left}
    return {(left[0],) + t for t in _shuffle(left[1:], right)} | {
        (right[0],) + t for t in _shuffle(left, right[1:])
    }


def traces(comp) -> tuple:
    """Every linearization of the composition, in sorted order. Conjunction
    admits every interleaving of its operands' traces. A guarded operand
    contributes both the trace that includes it and the one that omits it;
    which of the two is required at run time depends on the state, which
    trace enumeration does not see."""

    def walk(c) -> set:
        if isinstance(c, EmptyAction):
            return {()}
        if isinstance(c, ActionLeaf):
            return {(c.name,)}
        left = walk(c.left)
        right = walk(c.right)
        if c.guard is not None:
            if c.guard_side == "left":
                left = left | {()}
            else:
                right = right | {()}
        if c.op == SEQ:
            return {l + r for l in left for r in right}
        if c.op == CHOICE:
            return left | right
        return {t for l in left for r in right for t in _shuffle(l, r)}

    return tuple(sorted(ActionTrace(t) for t in walk(comp)))


def normalize(comp):
    """Choice-of-sequences normal form: conjunctions expand into their
    interleavings, sequence distributes over choice, guards expand into
    optional operands. Preserves the trace set."""
    leaves: dict = {}

    def collect(c):
        if isinstance(c, ActionLeaf):
            leaves.setdefault(c.name, c)
        elif isinstance(c, ActionNode):
            collect(c.left)
            collect(c.right)

    collect(comp)

    def nf(c) -> list:
        if isinstance(c, EmptyAction):
            return [()]
        if isinstance(c, ActionLeaf):
            return [(c.name,)]
        left = nf(c.left)
        right = nf(c.right)
        if c.guard is not None:
            if c.guard_side == "left":
                left = left + [()]
            else:
                right = right + [()]
        if c.op == SEQ:
            return [l + r for l in left for r in right]
        if c.op == CHOICE:
            return left + right
        return [t for l in left for r in right for t in _shuffle(l, r)]

    sequences = sorted(set(nf(comp)))

    def seq_tree(names):
        if not names:
            return EMPTY
        tree = leaves[names[-1]]
        for name in reversed(names[:-1]):
            tree = ActionNode(SEQ, leaves[name], tree)
        return tree

    alternatives = [seq_tree(s) for s in sequences]
    tree = alternatives[-1]
    for alt in reversed(alternatives[:-1]):
        tree = ActionNode(CHOICE, alt, tree)
    return tree


def apply_trace(trace: ActionTrace, state: State, onto: Ontology):
    """Run the trace's transformers in order. Returns the end State, or an
    Infeasible marker naming the first step whose initial space does not
    abstract the intermediate state."""
    current = state
    for i, name in enumerate(trace.steps, 1):
        acd = onto.action_classes.get(name)
        if acd is None:
            raise NameResolutionError(f"unknown action class {name!r}")
        if not feasible_in(acd.init_space, current, onto):
            return Infeasible(i, name, current)
        current = acd.apply(current, onto)
    return current


# ---------------------------------------------------------------------------
# Well-formedness: symbolic checker
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintViolation:
    node_path: str
    constraint_id: str
    witness: State = None

    def sort_key(self):
        w = render_state(self.witness) if self.witness is not None else ""
        return (self.node_path, self.constraint_id, w)


@dataclass(frozen=True)
class WellFormedVerdict:
    ok: bool
    violations: tuple = ()
    warnings: tuple = ()


def validate_pattern(pattern: RefinementPattern, onto: Ontology) -> None:
    """Structural checks done before any well-formedness reasoning."""
    if pattern.declared_type not in DECLARED_TYPES:
        raise TaxonomyError(f"unknown composition type {pattern.declared_type!r}")
    if not isinstance(pattern.body, ActionNode):
        raise StructuralError(f"pattern {pattern.pattern_id}: body must be a composition")
    actual = taxonomy_of(pattern.body)
    if actual != pattern.declared_type:
        raise TaxonomyError(
            f"pattern {pattern.pattern_id}: declared {pattern.declared_type} but body is {actual}"
        )
    if pattern.root not in onto.action_classes:
        raise NameResolutionError(f"pattern root {pattern.root!r} is not a declared action")

    def walk(c, is_root: bool):
        if isinstance(c, EmptyAction):
            raise StructuralError(f"pattern {pattern.pattern_id}: the empty action cannot appear in a pattern")
        if isinstance(c, ActionLeaf):
            if c.name not in onto.action_classes:
                raise NameResolutionError(
                    f"pattern {pattern.pattern_id}: undeclared action {c.name!r}"
                )
            return
        if not is_root and c.label is None:
            raise StructuralError(
                f"pattern {pattern.pattern_id}: inner compositions must be labeled with an action"
            )
        if c.label is not None and c.label not in onto.action_classes:
            raise NameResolutionError(
                f"pattern {pattern.pattern_id}: undeclared action label {c.label!r}"
            )
        walk(c.left, False)
        walk(c.right, False)

    walk(pattern.body, True)


def _operand_name(comp) -> str:
    if isinstance(comp, ActionLeaf):
        return comp.name
    if isinstance(comp, ActionNode) and comp.label:
        return comp.label
    raise StructuralError("operand is an unlabeled composition")


def _node_actions(node: ActionNode, onto: Ontology):
    a1 = onto.action_classes[_operand_name(node.left)]
    a2 = onto.action_classes[_operand_name(node.right)]
    if node.guard is not None and node.guard_side == "left":
        a1, a2 = a2, a1
    return a1, a2


def _check_node(parent: ActionClassDef, node: ActionNode, onto: Ontology, state_bound: int, path: str):
    """Evaluate the constraint row for one composition node. The guarded
    operand always plays the a2 role."""
    violations: list[ConstraintViolation] = []
    warnings: list[str] = []
    a1, a2 = _node_actions(node, onto)
    D, G = parent.init_space, parent.final_space
    D1, G1 = a1.init_space, a1.final_space
    D2, G2 = a2.init_space, a2.final_space
    Dg = node.guard
    row = taxonomy_of(node)

    delta_states = sorted(expand_space(D, onto))
    if len(delta_states) > state_bound:
        raise OracleScaleError(
            f"{path}: initial space has {len(delta_states)} states, past the bound of {state_bound}"
        )
    if not delta_states:
        warnings.append(f"{path}: empty initial space; vacuously well-formed")
        return violations, warnings

    def need(constraint_id: str, abstract, concrete, witness_default=None):
        w = space_refines_witness(abstract, concrete, onto)
        if w is not None:
            violations.append(ConstraintViolation(path, constraint_id, witness_default or w))

    def need_at(constraint_id: str, abstract, state, delta):
        if not space_refines(abstract, singleton(state), onto):
            violations.append(ConstraintViolation(path, constraint_id, delta))

    def app(acd: ActionClassDef, state: State):
        if not feasible_in(acd.init_space, state, onto):
            return None
        return acd.apply(state, onto)

    def meet(x, y):
        return StateSpace.explicit(expand_space(x, onto) & expand_space(y, onto))

    def join(x, y):
        return StateSpace.explicit(expand_space(x, onto) | expand_space(y, onto))

    def holds(abstract, state) -> bool:
        return space_refines(abstract, singleton(state), onto)

    if row == "basic-seq":
        need("Δ1⊑Δ", D1, D)
        need("Δ2⊑Γ1", D2, G1)
        need("Γ⊑Γ2", G, G2)

    elif row == "basic-strict-choice":
        need("Δ1⊓Δ2⊑Δ", meet(D1, D2), D)
        need("Γ⊑Γ1", G, G1)
        need("Γ⊑Γ2", G, G2)

    elif row == "basic-flex-choice":
        need("Δ1⊔Δ2⊑Δ", join(D1, D2), D)
        if not expand_space(meet(D1, D), onto):
            violations.append(ConstraintViolation(path, "Δ1⊓Δ≠{}"))
        if not expand_space(meet(D2, D), onto):
            violations.append(ConstraintViolation(path, "Δ2⊓Δ≠{}"))
        need("Γ⊑Γ1", G, G1)
        need("Γ⊑Γ2", G, G2)

    elif row == "basic-strict-conj":
        need("Δ1⊑Δ", D1, D)
        need("Δ2⊑Δ", D2, D)
        for delta in delta_states:
            end21 = None if (m := app(a2, delta)) is None else app(a1, m)
            if end21 is None:
                violations.append(ConstraintViolation(path, "Γ⊑a1(a2(δ))", delta))
            else:
                need_at("Γ⊑a1(a2(δ))", G, end21, delta)
            end12 = None if (m := app(a1, delta)) is None else app(a2, m)
            if end12 is None:
                violations.append(ConstraintViolation(path, "Γ⊑a2(a1(δ))", delta))
            else:
                need_at("Γ⊑a2(a1(δ))", G, end12, delta)

    elif row == "basic-flex-conj":
        need("Δ1⊔Δ2⊑Δ", join(D1, D2), D)
        for delta in delta_states:
            if holds(D1, delta):
                m = a1.apply(delta, onto)
                if not holds(D2, m):
                    violations.append(ConstraintViolation(path, "Δ1⊑δ⇒Δ2⊑a1(δ)", delta))
                else:
                    need_at("Δ1⊑δ⇒Γ⊑a2(a1(δ))", G, a2.apply(m, onto), delta)
            if holds(D2, delta):
                n = a2.apply(delta, onto)
                if not holds(D1, n):
                    violations.append(ConstraintViolation(path, "Δ2⊑δ⇒Δ1⊑a2(δ)", delta))
                else:
                    need_at("Δ2⊑δ⇒Γ⊑a1(a2(δ))", G, a1.apply(n, onto), delta)

    elif row == "adv-seq":
        need("Δ2⊑Δ'", D2, Dg)
        need("Δ1⊑Δ", D1, D)
        for delta in delta_states:
            m = app(a1, delta)
            if m is None:
                violations.append(ConstraintViolation(path, "Δ1⊑Δ", delta))
                continue
            if holds(Dg, m):
                end = app(a2, m)
                if end is None:
                    violations.append(ConstraintViolation(path, "Δ'⊑a1(δ)⇒Γ⊑a2(a1(δ))", delta))
                else:
                    need_at("Δ'⊑a1(δ)⇒Γ⊑a2(a1(δ))", G, end, delta)
            else:
                need_at("Δ'⊄a1(δ)⇒Γ⊑a1(δ)", G, m, delta)

    elif row == "adv-strict-conj":
        need("Δ2⊑Δ'", D2, Dg)
        need("Δ1⊑Δ", D1, D)
        core = meet(D, Dg)
        if not expand_space(core, onto):
            violations.append(ConstraintViolation(path, "Δ⊓Δ'≠{}"))
        for delta in delta_states:
            if holds(core, delta):
                need_at("Δ⊓Δ'⊑δ⇒Δ1⊑δ", D1, delta, delta)
                m = app(a1, delta)
                if m is None or not holds(Dg, m):
                    violations.append(ConstraintViolation(path, "Δ⊓Δ'⊑δ⇒Δ'⊑a1(δ)", delta))
                else:
                    end = app(a2, m)
                    if end is None:
                        violations.append(ConstraintViolation(path, "Δ⊓Δ'⊑δ⇒Γ⊑a2(a1(δ))", delta))
                    else:
                        need_at("Δ⊓Δ'⊑δ⇒Γ⊑a2(a1(δ))", G, end, delta)
                n = app(a2, delta)
                if n is None or not holds(D1, n):
                    violations.append(ConstraintViolation(path, "Δ⊓Δ'⊑δ⇒Δ1⊑a2(δ)", delta))
                else:
                    end = app(a1, n)
                    if end is None:
                        violations.append(ConstraintViolation(path, "Δ⊓Δ'⊑δ⇒Γ⊑a1(a2(δ))", delta))
                    else:
                        need_at("Δ⊓Δ'⊑δ⇒Γ⊑a1(a2(δ))", G, end, delta)
            else:
                m = app(a1, delta)
                if m is None:
                    violations.append(ConstraintViolation(path, "Δ⊓Δ'⊄δ⇒Γ⊑a1(δ)", delta))
                else:
                    need_at("Δ⊓Δ'⊄δ⇒Γ⊑a1(δ)", G, m, delta)

    elif row == "adv-flex-conj":
        need("Δ2⊑Δ'", D2, Dg)
        need("Δ1⊔Δ'⊑Δ", join(D1, Dg), D)
        for delta in delta_states:
            g_now = holds(Dg, delta)
            if holds(D1, delta):
                m = a1.apply(delta, onto)
                if holds(Dg, m):
                    end = app(a2, m)
                    if end is None:
                        violations.append(
                            ConstraintViolation(path, "Δ1⊑δ∧Δ'⊑a1(δ)⇒Γ⊑a2(a1(δ))", delta)
                        )
                    else:
                        need_at("Δ1⊑δ∧Δ'⊑a1(δ)⇒Γ⊑a2(a1(δ))", G, end, delta)
                elif not g_now:
                    need_at("Δ1⊑δ∧Δ'⊄δ∧Δ'⊄a1(δ)⇒Γ⊑a1(δ)", G, m, delta)
            if g_now:
                n = app(a2, delta)
                if n is not None and holds(D1, n):
                    end = app(a1, n)
                    if end is None:
                        violations.append(
                            ConstraintViolation(path, "Δ'⊑δ∧Δ1⊑a2(δ)⇒Γ⊑a1(a2(δ))", delta)
                        )
                    else:
                        need_at("Δ'⊑δ∧Δ1⊑a2(δ)⇒Γ⊑a1(a2(δ))", G, end, delta)

    else:  # pragma: no cover - taxonomy_of is total over valid nodes
        raise TaxonomyError(f"unknown composition type {row!r}")

    return violations, warnings


def _walk_nodes(pattern: RefinementPattern, onto: Ontology):
    """Yield (parent action, node, path) for the root and every labeled
    inner composition."""

    def walk(comp, parent_name: str, path: str):
        if not isinstance(comp, ActionNode):
            return
        yield onto.action_classes[parent_name], comp, path
        for side in ("left", "right"):
            child = getattr(comp, side)
            if isinstance(child, ActionNode):
                yield from walk(child, _operand_name(child), f"{path}.{side}")

    yield from walk(pattern.body, pattern.root, "root")


def check_well_formed(
    pattern: RefinementPattern, onto: Ontology, state_bound: int = 4096
) -> WellFormedVerdict:
    """Symbolic constraint check of the pattern's root composition."""
    validate_pattern(pattern, onto)
    parent = onto.action_classes[pattern.root]
    violations, warnings = _check_node(parent, pattern.body, onto, state_bound, "root")
    violations.sort(key=ConstraintViolation.sort_key)
    return WellFormedVerdict(not violations, tuple(violations), tuple(warnings))


def check_well_formed_complex(
    pattern: RefinementPattern, onto: Ontology, state_bound: int = 4096
) -> WellFormedVerdict:
    """Recursive variant: every labeled inner composition is checked as its
    own pattern node, with node paths in the report."""
    validate_pattern(pattern, onto)
    violations: list[ConstraintViolation] = []
    warnings: list[str] = []
    for parent, node, path in _walk_nodes(pattern, onto):
        v, w = _check_node(parent, node, onto, state_bound, path)
        violations.extend(v)
        warnings.extend(w)
    violations.sort(key=ConstraintViolation.sort_key)
    return WellFormedVerdict(not violations, tuple(violations), tuple(warnings))


# ---------------------------------------------------------------------------
# Well-formedness: trace-simulation oracle
# ---------------------------------------------------------------------------


def oracle_well_formed(
    pattern: RefinementPattern, onto: Ontology, state_bound: int = 4096
) -> WellFormedVerdict:
    """Brute-force reference: from every state of the initial space, run the
    trace set the composition semantics requires there and demand every run
    is feasible and ends inside the final space's cone."""
    validate_pattern(pattern, onto)
    violations: list[ConstraintViolation] = []
    warnings: list[str] = []
    for parent, node, path in _walk_nodes(pattern, onto):
        v, w = _oracle_node(parent, node, onto, state_bound, path)
        violations.extend(v)
        warnings.extend(w)
    violations.sort(key=ConstraintViolation.sort_key)
    return WellFormedVerdict(not violations, tuple(violations), tuple(warnings))


def _oracle_node(parent: ActionClassDef, node: ActionNode, onto: Ontology, state_bound: int, path: str):
    violations: list[ConstraintViolation] = []
    warnings: list[str] = []
    a1, a2 = _node_actions(node, onto)
    D, G = parent.init_space, parent.final_space
    Dg = node.guard
    row = taxonomy_of(node)

    delta_states = sorted(expand_space(D, onto))
    if len(delta_states) > state_bound:
        raise OracleScaleError(
            f"{path}: initial space has {len(delta_states)} states, past the bound of {state_bound}"
        )
    if not delta_states:
        warnings.append(f"{path}: empty initial space; vacuously well-formed")
        return violations, warnings

    def holds(abstract, state) -> bool:
        return space_refines(abstract, singleton(state), onto)

    def run(steps, delta) -> None:
        """Simulate one required trace; record a violation on infeasibility
        or a bad end state."""
        tid = "trace[" + ";".join(s.name for s in steps) + "]"
        current = delta
        for acd in steps:
            if not feasible_in(acd.init_space, current, onto):
                violations.append(ConstraintViolation(path, tid + " infeasible", delta))
                return
            current = acd.apply(current, onto)
        if not holds(G, current):
            violations.append(ConstraintViolation(path, tid + " misses Γ", delta))

    feasible_somewhere = {a1.name: False, a2.name: False}
    for delta in delta_states:
        f1 = feasible_in(a1.init_space, delta, onto)
        f2 = feasible_in(a2.init_space, delta, onto)
        feasible_somewhere[a1.name] |= f1
        feasible_somewhere[a2.name] |= f2

        if row == "basic-seq":
            run((a1, a2), delta)

        elif row == "basic-strict-choice":
            run((a1,), delta)
            run((a2,), delta)

        elif row == "basic-flex-choice":
            if not f1 and not f2:
                violations.append(ConstraintViolation(path, "no alternative feasible", delta))
            if f1:
                run((a1,), delta)
            if f2:
                run((a2,), delta)

        elif row == "basic-strict-conj":
            run((a1, a2), delta)
            run((a2, a1), delta)

        elif row == "basic-flex-conj":
            if not f1 and not f2:
                violations.append(ConstraintViolation(path, "no sub-action feasible", delta))
            if f1:
                run((a1, a2), delta)
            if f2:
                run((a2, a1), delta)

        elif row == "adv-seq":
            if not f1:
                violations.append(ConstraintViolation(path, "trace[" + a1.name + "] infeasible", delta))
                continue
            mid = a1.apply(delta, onto)
            if holds(Dg, mid):
                run((a1, a2), delta)
            else:
                run((a1,), delta)

        elif row == "adv-strict-conj":
            mandatory = holds(StateSpace.explicit(expand_space(D, onto) & expand_space(Dg, onto)), delta)
            if mandatory:
                run((a1, a2), delta)
                run((a2, a1), delta)
            else:
                run((a1,), delta)

        elif row == "adv-flex-conj":
            g_now = holds(Dg, delta)
            if f1:
                mid = a1.apply(delta, onto)
                if holds(Dg, mid):
                    run((a1, a2), delta)
                elif not g_now:
                    run((a1,), delta)
            if g_now and f2:
                n = a2.apply(delta, onto)
                if feasible_in(a1.init_space, n, onto):
                    run((a2, a1), delta)
            if not f1 and not g_now:
                violations.append(ConstraintViolation(path, "no sub-action performable", delta))

    if row in ("basic-flex-choice",):
        for name, seen in sorted(feasible_somewhere.items()):
            if not seen:
                violations.append(ConstraintViolation(path, f"{name} is never a feasible alternative"))
    if row == "adv-strict-conj":
        if not (expand_space(D, onto) & expand_space(Dg, onto)):
            violations.append(ConstraintViolation(path, "guard never applies inside Δ"))
    return violations, warnings

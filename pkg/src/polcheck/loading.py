r"""File formats: ontology (.onto), facts (.facts), refinement patterns (.rp),
and current state (.state). Policies (.pol) parse in the policy module; the
path wrappers here add the file name to any error.

All four formats share one tokenizer (`%` comments, `$`-prefixed variables).
Declarations are keyword-led, so line breaks are insignificant, but the
variable table must be declared before any action class: a multi-valued
state-space constraint expands against the full table.

Ontology grammar:

    class Name [subclassOf Parent]
    prop name dom C,... range C,... [family hie|rel] [subpropOf other]
    var x maps objectId.prop range {v, ...}
    action Name[(param,...)] init {constraints} final {constraints}
        [effect formula] [resource id,...] [instrument id,...]
    transform Name when {constraints} set {x=v, ...}

A constraint block is `{x=v, y=v1|v2, ...}`: single-valued blocks stay
concise, multi-valued ones expand to an explicit space, `{}` is the entire
space.

Facts grammar: `obj id : Class {prop=value, ...}` emits a type atom and one
atom per property pair; other lines are ground atoms. Every done atom also
emits its done_act(subject, action) projection.

Pattern grammar: `refine Root(prop:$x,...) := expr type=<taxonomy-id>`,
where expr uses `;`, `\/`, `/\` (strict with an `_s` suffix), `[guard]`
before an operand, and `(expr):Label` to name an inner composition.
Operators are binary; inner compositions must be labeled.

State grammar: one optional `state {x=v, ...}` total assignment plus ground
atoms.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path

from .actions import (
    CHOICE,
    CONJ,
    EMPTY,
    SEQ,
    ActionClassDef,
    ActionLeaf,
    ActionNode,
    RefinementPattern,
    TransformRule,
    validate_action_class,
    validate_pattern,
)
from .compliance import CurrentState
from .errors import PolcheckError, SchemaError, StructuralError
from .ontology import (
    ENTIRE,
    ClassDef,
    DataSystem,
    ObjectInstance,
    Ontology,
    PropertyDef,
    State,
    StateSpace,
    VariableDef,
)
from .policy import BUILTIN_SHAPES, OVER_PREDICATES, Policy, parse_policy
from .terms import Atom, Const, TokenStream, is_ground, parse_formula, parse_term

log = logging.getLogger(__name__)

_RESERVED = frozenset(BUILTIN_SHAPES) | frozenset(OVER_PREDICATES)


# ---------------------------------------------------------------------------
# Shared pieces
# ---------------------------------------------------------------------------


def _parse_value(ts: TokenStream) -> str:
    tok = ts.peek()
    if tok.kind in ("ident", "number"):
        ts.next()
        return tok.value
    if tok.kind == "string":
        ts.next()
        return tok.value
    ts.fail(f"expected a value, found {tok.value!r}")


def _parse_constraints(ts: TokenStream, close: str) -> list:
    """`x=v` or `x=v1|v2` pairs up to the closing bracket; returns
    [(variable, (value, ...)), ...]."""
    pairs = []
    if not ts.at(close):
        while True:
            var = ts.expect_kind("ident").value
            ts.expect("=")
            values = [_parse_value(ts)]
            while ts.accept("|"):
                values.append(_parse_value(ts))
            pairs.append((var, tuple(values)))
            if not ts.accept(","):
                break
    ts.expect(close)
    return pairs


def _space_from_pairs(pairs: list, variables: dict, where: str) -> StateSpace:
    for var, values in pairs:
        vdef = variables.get(var)
        if vdef is None:
            raise SchemaError(f"{where}: constraint on undeclared variable {var!r}")
        for v in values:
            if v not in vdef.values:
                raise SchemaError(
                    f"{where}: value {v!r} is outside the declared range of {var!r}"
                )
    if not pairs:
        return ENTIRE
    if all(len(values) == 1 for _, values in pairs):
        return StateSpace.concise({var: values[0] for var, values in pairs})
    chosen = dict(pairs)
    states = [State(())]
    for name, vdef in variables.items():
        options = chosen.get(name, vdef.values)
        states = [State(s.assignments + ((name, v),)) for s in states for v in options]
    return StateSpace.explicit(states)


def _parse_space(ts: TokenStream, variables: dict, where: str) -> StateSpace:
    ts.expect("{")
    return _space_from_pairs(_parse_constraints(ts, "}"), variables, where)


def _parse_ground_atom(ts: TokenStream) -> Atom:
    name = ts.expect_kind("ident").value
    ts.expect("(")
    args = []
    if not ts.at(")"):
        while True:
            args.append(parse_term(ts))
            if not ts.accept(","):
                break
    ts.expect(")")
    ts.accept(".")
    atom = Atom(name, tuple(args))
    if not is_ground(atom):
        ts.fail(f"fact {name} must be ground")
    return atom


# ---------------------------------------------------------------------------
# Ontology files
# ---------------------------------------------------------------------------


def parse_ontology(text: str, state_bound: int = 4096) -> Ontology:
    ts = TokenStream(text)
    classes: dict = {}
    properties: dict = {}
    subclass_edges: list = []
    subprop_edges: list = []
    variables: dict = {}
    actions: dict = {}
    transforms: dict = {}

    while not ts.at_end():
        if ts.accept("class"):
            name = ts.expect_kind("ident").value
            if name in classes:
                raise SchemaError(f"duplicate class {name!r}")
            classes[name] = ClassDef(name)
            if ts.accept("subclassOf"):
                subclass_edges.append((name, ts.expect_kind("ident").value))
        elif ts.accept("prop"):
            name = ts.expect_kind("ident").value
            if name in properties:
                raise SchemaError(f"duplicate property {name!r}")
            if name in _RESERVED:
                raise SchemaError(f"property name {name!r} is reserved by the policy language")
            ts.expect("dom")
            dom = [ts.expect_kind("ident").value]
            while ts.accept(","):
                dom.append(ts.expect_kind("ident").value)
            ts.expect("range")
            rng = [ts.expect_kind("ident").value]
            while ts.accept(","):
                rng.append(ts.expect_kind("ident").value)
            family = "rel"
            if ts.accept("family"):
                family = ts.expect_kind("ident").value
                if family not in ("hie", "rel"):
                    ts.fail(f"family must be hie or rel, not {family!r}")
            if ts.accept("subpropOf"):
                subprop_edges.append((name, ts.expect_kind("ident").value))
            properties[name] = PropertyDef(name, tuple(dom), tuple(rng), family)
        elif ts.accept("var"):
            if actions:
                ts.fail("the variable table must be declared before any action class")
            name = ts.expect_kind("ident").value
            if name in variables:
                raise SchemaError(f"duplicate variable {name!r}")
            ts.expect("maps")
            object_id = ts.expect_kind("ident").value
            ts.expect(".")
            prop = ts.expect_kind("ident").value
            ts.expect("range")
            ts.expect("{")
            values = [_parse_value(ts)]
            while ts.accept(","):
                values.append(_parse_value(ts))
            ts.expect("}")
            variables[name] = VariableDef(name, object_id, prop, tuple(values))
        elif ts.accept("action"):
            name = ts.expect_kind("ident").value
            if name in actions:
                raise SchemaError(f"duplicate action class {name!r}")
            params: list = []
            if ts.accept("("):
                if not ts.at(")"):
                    params.append(ts.expect_kind("ident").value)
                    while ts.accept(","):
                        params.append(ts.expect_kind("ident").value)
                ts.expect(")")
            ts.expect("init")
            init_space = _parse_space(ts, variables, f"action {name} init")
            ts.expect("final")
            final_space = _parse_space(ts, variables, f"action {name} final")
            effect = None
            resources: list = []
            instruments: list = []
            while True:
                if ts.accept("effect"):
                    effect = parse_formula(ts)
                elif ts.accept("resource"):
                    resources.append(ts.expect_kind("ident").value)
                    while ts.accept(","):
                        resources.append(ts.expect_kind("ident").value)
                elif ts.accept("instrument"):
                    instruments.append(ts.expect_kind("ident").value)
                    while ts.accept(","):
                        instruments.append(ts.expect_kind("ident").value)
                else:
                    break
            kwargs = {"effect": effect} if effect is not None else {}
            actions[name] = ActionClassDef(
                name,
                init_space,
                final_space,
                params=tuple(params),
                resources=tuple(resources),
                instruments=tuple(instruments),
                **kwargs,
            )
        elif ts.accept("transform"):
            name = ts.expect_kind("ident").value
            if name not in actions:
                raise SchemaError(f"transform for undeclared action {name!r}")
            ts.expect("when")
            guard = _parse_space(ts, variables, f"transform {name} guard")
            ts.expect("set")
            ts.expect("{")
            pairs = _parse_constraints(ts, "}")
            effects = []
            for var, values in pairs:
                if len(values) != 1:
                    raise SchemaError(f"transform {name}: an assignment takes one value")
                if var not in variables:
                    raise SchemaError(f"transform {name}: assignment to undeclared {var!r}")
                if values[0] not in variables[var].values:
                    raise SchemaError(
                        f"transform {name}: value {values[0]!r} is outside the range of {var!r}"
                    )
                effects.append((var, values[0]))
            transforms.setdefault(name, []).append(TransformRule(guard, tuple(effects)))
        else:
            ts.fail(f"expected a declaration keyword, found {ts.peek().value!r}")

    merged = {
        name: replace(acd, transform=tuple(transforms.get(name, ())))
        for name, acd in actions.items()
    }
    onto = Ontology(
        classes,
        properties,
        tuple(subclass_edges),
        tuple(subprop_edges),
        variables,
        merged,
    )
    for acd in merged.values():
        for warning in validate_action_class(acd, onto, state_bound=state_bound):
            log.warning("%s", warning)
    return onto


# ---------------------------------------------------------------------------
# Facts files
# ---------------------------------------------------------------------------


def parse_facts(text: str, onto: Ontology = None) -> DataSystem:
    ts = TokenStream(text)
    objects: dict = {}
    atoms: set = set()
    while not ts.at_end():
        if ts.accept("obj"):
            object_id = ts.expect_kind("ident").value
            if object_id in objects:
                raise SchemaError(f"duplicate object {object_id!r}")
            ts.expect(":")
            type_name = ts.expect_kind("ident").value
            if onto is not None and type_name not in onto.classes:
                raise SchemaError(f"object {object_id} has undeclared class {type_name!r}")
            props: list = []
            if ts.accept("{"):
                if not ts.at("}"):
                    while True:
                        prop = ts.expect_kind("ident").value
                        if onto is not None and prop not in onto.properties:
                            raise SchemaError(
                                f"object {object_id} uses undeclared property {prop!r}"
                            )
                        ts.expect("=")
                        props.append((prop, _parse_value(ts)))
                        if not ts.accept(","):
                            break
                ts.expect("}")
            ts.accept(".")
            objects[object_id] = ObjectInstance(object_id, type_name, tuple(props))
            atoms.add(Atom("type", (Const(object_id), Const(type_name))))
            for prop, value in props:
                atoms.add(Atom(prop, (Const(object_id), Const(value))))
        else:
            atom = _parse_ground_atom(ts)
            atoms.add(atom)
            if atom.pred == "done" and len(atom.args) == 4:
                atoms.add(Atom("done_act", (atom.args[0], atom.args[2])))
    return DataSystem(objects, frozenset(atoms))


# ---------------------------------------------------------------------------
# Pattern files
# ---------------------------------------------------------------------------


class _Guarded:
    def __init__(self, comp, space):
        self.comp = comp
        self.space = space


def _parse_bindings(ts: TokenStream) -> tuple:
    """Optional `(prop:term, ...)` after an action name."""
    if not ts.at("("):
        return ()
    ts.expect("(")
    bindings = []
    if not ts.at(")"):
        while True:
            prop = ts.expect_kind("ident").value
            ts.expect(":")
            bindings.append((prop, parse_term(ts)))
            if not ts.accept(","):
                break
    ts.expect(")")
    return tuple(bindings)


def _combine(ts: TokenStream, op: str, left, right, strict: bool):
    guard = side = None
    if isinstance(left, _Guarded):
        guard, side, left = left.space, "left", left.comp
    if isinstance(right, _Guarded):
        if guard is not None:
            ts.fail("at most one operand of a composition may carry a guard")
        guard, side, right = right.space, "right", right.comp
    try:
        return ActionNode(op, left, right, strict=strict, guard=guard, guard_side=side)
    except StructuralError as e:
        ts.fail(str(e))


def _parse_choice(ts: TokenStream, onto: Ontology):
    left = _parse_seq(ts, onto)
    while ts.at("\\/"):
        ts.next()
        strict = ts.accept("_s")
        left = _combine(ts, CHOICE, left, _parse_seq(ts, onto), strict)
    return left


def _parse_seq(ts: TokenStream, onto: Ontology):
    left = _parse_conj(ts, onto)
    while ts.at(";"):
        ts.next()
        left = _combine(ts, SEQ, left, _parse_conj(ts, onto), False)
    return left


def _parse_conj(ts: TokenStream, onto: Ontology):
    left = _parse_unary(ts, onto)
    while ts.at("/\\"):
        ts.next()
        strict = ts.accept("_s")
        left = _combine(ts, CONJ, left, _parse_unary(ts, onto), strict)
    return left


def _parse_unary(ts: TokenStream, onto: Ontology):
    if ts.at("["):
        ts.expect("[")
        pairs = _parse_constraints(ts, "]")
        space = _space_from_pairs(pairs, onto.variables, "guard")
        return _Guarded(_parse_primary(ts, onto), space)
    return _parse_primary(ts, onto)


def _parse_primary(ts: TokenStream, onto: Ontology):
    if ts.accept("("):
        inner = _parse_choice(ts, onto)
        ts.expect(")")
        if ts.at(":"):
            ts.next()
            label = ts.expect_kind("ident").value
            if isinstance(inner, _Guarded) or not isinstance(inner, ActionNode):
                ts.fail("only a composite operand can carry a label")
            inner = replace(inner, label=label)
        return inner
    if ts.accept("{"):
        ts.expect("}")
        return EMPTY
    name = ts.expect_kind("ident").value
    return ActionLeaf(name, _parse_bindings(ts))


def parse_patterns(text: str, onto: Ontology) -> tuple:
    ts = TokenStream(text)
    patterns: list = []
    n = 0
    while not ts.at_end():
        ts.expect("refine")
        n += 1
        root = ts.expect_kind("ident").value
        root_bindings = _parse_bindings(ts)
        ts.expect(":")
        ts.expect("=")
        body = _parse_choice(ts, onto)
        if isinstance(body, _Guarded):
            ts.fail("a guard must attach to an operand of a composition")
        ts.expect("type")
        ts.expect("=")
        parts = [ts.expect_kind("ident").value]
        while ts.accept("-"):
            parts.append(ts.expect_kind("ident").value)
        patterns.append(RefinementPattern(f"p{n}", root, root_bindings, body, "-".join(parts)))
    for pat in patterns:
        validate_pattern(pat, onto)
    return tuple(patterns)


# ---------------------------------------------------------------------------
# Current-state files
# ---------------------------------------------------------------------------


def parse_state(text: str, onto: Ontology) -> CurrentState:
    ts = TokenStream(text)
    atoms: set = set()
    state = None
    while not ts.at_end():
        if ts.accept("state"):
            if state is not None:
                ts.fail("a state file holds at most one state block")
            ts.expect("{")
            pairs = _parse_constraints(ts, "}")
            ts.accept(".")
            assignment = {}
            for var, values in pairs:
                if len(values) != 1:
                    raise SchemaError("a state assignment takes one value per variable")
                if var not in onto.variables:
                    raise SchemaError(f"state assigns undeclared variable {var!r}")
                if values[0] not in onto.variables[var].values:
                    raise SchemaError(
                        f"state value {values[0]!r} is outside the range of {var!r}"
                    )
                assignment[var] = values[0]
            missing = [v for v in onto.variable_names() if v not in assignment]
            if missing:
                raise SchemaError(
                    "state block must assign every declared variable; missing: "
                    + ", ".join(missing)
                )
            state = State.make(assignment)
        else:
            atoms.add(_parse_ground_atom(ts))
    return CurrentState(frozenset(atoms), state)


# ---------------------------------------------------------------------------
# Path wrappers
# ---------------------------------------------------------------------------


def _load(path, parser, *args, **kwargs):
    text = Path(path).read_text(encoding="utf-8")
    try:
        return parser(text, *args, **kwargs)
    except PolcheckError as e:
        raise type(e)(f"{path}: {e}") from e


def load_ontology(path, state_bound: int = 4096) -> Ontology:
    return _load(path, parse_ontology, state_bound=state_bound)


def load_facts(path, onto: Ontology = None) -> DataSystem:
    return _load(path, parse_facts, onto)


def load_policy(path, onto: Ontology = None) -> Policy:
    return _load(path, parse_policy, onto)


def load_patterns(path, onto: Ontology) -> tuple:
    return _load(path, parse_patterns, onto)


def load_state(path, onto: Ontology) -> CurrentState:
    return _load(path, parse_state, onto)

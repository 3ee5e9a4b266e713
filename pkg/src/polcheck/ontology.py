"""Ontology, data system, and the state refinement order.

The ontology declares class and property hierarchies, a variable table that
maps state variables to object properties with finite value ranges, and the
action classes loaded from the same file. A data system holds the concrete
object instances and ground base atoms that policies are evaluated against.

States are total assignments over the declared variable tuple. A state space
is either an explicit set of states or a concise partial assignment that
expands over the free variables' declared ranges. Refinement runs from
abstract to concrete: ``state_refines(g, g2)`` says every variable of g2
names a value at or below the corresponding value of g in the hierarchy,
and ``space_refines(G, G2)`` says every state of G2 refines some state of G.
Meet and join are plain intersection and union of the expansions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import CycleError, ExpansionError, NameResolutionError, SchemaError, StructuralError

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassDef:
    name: str


@dataclass(frozen=True)
class PropertyDef:
    name: str
    dom: tuple = ()
    range: tuple = ()
    family: str = "rel"  # 'rel' or 'hie'


@dataclass(frozen=True)
class VariableDef:
    """One row of the variable table: variable name, the object property it
    mirrors, and its finite value range."""

    name: str
    object_id: str
    prop: str
    values: tuple


@dataclass(frozen=True)
class ObjectInstance:
    id: str
    type_name: str
    props: tuple = ()  # tuple[(prop, value), ...]

    def prop_values(self, prop: str) -> tuple:
        return tuple(v for p, v in self.props if p == prop)


@dataclass
class DataSystem:
    """Object instances plus the ground base atoms they induce or assert."""

    objects: dict = field(default_factory=dict)  # id -> ObjectInstance
    base_atoms: frozenset = frozenset()  # ground Atom values, stratum 0

    def has_object(self, object_id: str) -> bool:
        return object_id in self.objects


@dataclass
class Ontology:
    classes: dict = field(default_factory=dict)  # name -> ClassDef
    properties: dict = field(default_factory=dict)  # name -> PropertyDef
    subclass_edges: tuple = ()  # (child, parent) pairs
    subproperty_edges: tuple = ()
    variables: dict = field(default_factory=dict)  # name -> VariableDef, declaration order
    action_classes: dict = field(default_factory=dict)  # name -> actions.ActionClassDef
    _ancestors: dict = field(default_factory=dict, repr=False, compare=False)
    _expand_cache: dict = field(default_factory=dict, repr=False, compare=False)
    _universe: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self._ancestors = _closure(self.classes, self.subclass_edges, "subclass")
        _closure({p: None for p in self.properties}, self.subproperty_edges, "subproperty")

    # -- hierarchy ---------------------------------------------------------

    def ancestors(self, class_name: str) -> frozenset:
        try:
            return self._ancestors[class_name]
        except KeyError:
            raise NameResolutionError(f"unknown class {class_name!r}") from None

    def hie_predicates(self) -> tuple:
        return tuple(sorted(p.name for p in self.properties.values() if p.family == "hie"))

    def rel_predicates(self) -> tuple:
        return tuple(sorted(p.name for p in self.properties.values() if p.family == "rel"))

    def variable_names(self) -> tuple:
        return tuple(self.variables)


def _closure(nodes: dict, edges: tuple, what: str) -> dict:
    """Reflexive-transitive closure of the edge set; rejects cycles."""
    parents: dict = {n: set() for n in nodes}
    for child, parent in edges:
        if child not in parents or parent not in parents:
            missing = child if child not in parents else parent
            raise NameResolutionError(f"{what} edge names undeclared {missing!r}")
        parents[child].add(parent)
    closed: dict = {}
    visiting: set = set()

    def visit(n: str) -> frozenset:
        if n in closed:
            return closed[n]
        if n in visiting:
            raise CycleError(f"{what} hierarchy contains a cycle through {n!r}")
        visiting.add(n)
        acc = {n}
        for p in parents[n]:
            acc |= visit(p)
        visiting.discard(n)
        closed[n] = frozenset(acc)
        return closed[n]

    for n in parents:
        visit(n)
    return closed


# ---------------------------------------------------------------------------
# States and state spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class State:
    assignments: tuple = ()  # tuple[(variable, value), ...] sorted by variable

    def __post_init__(self):
        object.__setattr__(self, "assignments", tuple(sorted(self.assignments)))

    @staticmethod
    def make(mapping) -> "State":
        return State(tuple(mapping.items()) if hasattr(mapping, "items") else tuple(mapping))

    def value(self, var: str) -> str:
        for v, val in self.assignments:
            if v == var:
                return val
        raise ExpansionError(f"state has no variable {var!r}")

    def variables(self) -> tuple:
        return tuple(v for v, _ in self.assignments)

    def as_dict(self) -> dict:
        return dict(self.assignments)

    def override(self, effects) -> "State":
        d = self.as_dict()
        d.update(effects)
        return State.make(d)


@dataclass(frozen=True)
class StateSpace:
    """Either explicit (``states``) or concise (``fixed`` partial assignment)."""

    states: frozenset = None
    fixed: tuple = None

    def __post_init__(self):
        if (self.states is None) == (self.fixed is None):
            raise StructuralError("state space must be exactly one of explicit or concise")
        if self.fixed is not None:
            object.__setattr__(self, "fixed", tuple(sorted(self.fixed)))

    @staticmethod
    def explicit(states) -> "StateSpace":
        return StateSpace(states=frozenset(states))

    @staticmethod
    def concise(constraints) -> "StateSpace":
        pairs = tuple(constraints.items()) if hasattr(constraints, "items") else tuple(constraints)
        return StateSpace(fixed=pairs)

    @property
    def is_concise(self) -> bool:
        return self.fixed is not None


ENTIRE = StateSpace.concise({})


def render_state(state: State) -> str:
    return "{" + ", ".join(f"{v}={val}" for v, val in state.assignments) + "}"


def render_space(space: StateSpace) -> str:
    if space.is_concise:
        return "(" + ", ".join(f"{v}={val}" for v, val in space.fixed) + ")"
    return "{" + "; ".join(render_state(s) for s in sorted(space.states)) + "}"


# ---------------------------------------------------------------------------
# The refinement order
# ---------------------------------------------------------------------------


def is_subclass(child: str, parent: str, onto: Ontology, ds: DataSystem = None) -> bool:
    """Reflexive-transitive subclass test. ``child`` may be an instance id,
    which first steps to its declared type; ``parent`` must be a class."""
    if parent not in onto.classes:
        raise NameResolutionError(f"unknown class {parent!r}")
    if child in onto.classes:
        return parent in onto.ancestors(child)
    if ds is not None and ds.has_object(child):
        return parent in onto.ancestors(ds.objects[child].type_name)
    raise NameResolutionError(f"unknown class or instance {child!r}")


def value_refines(concrete: str, abstract: str, onto: Ontology, ds: DataSystem = None) -> bool:
    """The per-variable order: equal values always refine; class values use
    the subclass closure; instances step to their type; bare literals only
    compare by equality."""
    if concrete == abstract:
        return True
    if abstract in onto.classes:
        if concrete in onto.classes:
            return abstract in onto.ancestors(concrete)
        if ds is not None and ds.has_object(concrete):
            return abstract in onto.ancestors(ds.objects[concrete].type_name)
    return False


def state_refines(abstract: State, concrete: State, onto: Ontology, ds: DataSystem = None) -> bool:
    if abstract.variables() != concrete.variables():
        raise StructuralError(
            f"states range over different variables: {abstract.variables()} vs {concrete.variables()}"
        )
    return all(
        value_refines(cv, av, onto, ds)
        for (_, av), (_, cv) in zip(abstract.assignments, concrete.assignments)
    )


def universe(onto: Ontology) -> tuple:
    """All total states over the declared variable table, in lexicographic
    order. Empty table yields the single empty state."""
    if onto._universe is None:
        states = [State(())]
        for var in onto.variables.values():
            states = [
                State(s.assignments + ((var.name, val),)) for s in states for val in var.values
            ]
        onto._universe = tuple(sorted(states))
    return onto._universe


def expand_space(space: StateSpace, onto: Ontology) -> frozenset:
    """Expansion of a concise space is the cross product over the free
    variables' declared ranges; explicit spaces are checked for totality."""
    cached = onto._expand_cache.get(space)
    if cached is not None:
        return cached
    declared = onto.variable_names()
    if space.is_concise:
        fixed = dict(space.fixed)
        for var in fixed:
            if var not in onto.variables:
                raise ExpansionError(f"constraint on undeclared variable {var!r}")
        states = [State(())]
        for name in declared:
            if name in fixed:
                choices = (fixed[name],)
            else:
                choices = onto.variables[name].values
            states = [State(s.assignments + ((name, v),)) for s in states for v in choices]
        result = frozenset(states)
    else:
        for s in space.states:
            if s.variables() != tuple(sorted(declared)):
                raise ExpansionError(
                    f"state {render_state(s)} is not total over the declared variables"
                )
        result = frozenset(space.states)
    onto._expand_cache[space] = result
    return result


def space_refines(abstract: StateSpace, concrete: StateSpace, onto: Ontology) -> bool:
    """True when every state of the concrete space refines some state of the
    abstract space."""
    return space_refines_witness(abstract, concrete, onto) is None


def space_refines_witness(abstract: StateSpace, concrete: StateSpace, onto: Ontology):
    """None when the refinement holds, otherwise a concrete state that no
    abstract state covers. The empty concrete space refines vacuously."""
    abs_states = expand_space(abstract, onto)
    for gamma2 in sorted(expand_space(concrete, onto)):
        if not any(state_refines(gamma, gamma2, onto) for gamma in abs_states):
            return gamma2
    return None


def space_meet(a: StateSpace, b: StateSpace, onto: Ontology) -> StateSpace:
    return StateSpace.explicit(expand_space(a, onto) & expand_space(b, onto))


def space_join(a: StateSpace, b: StateSpace, onto: Ontology) -> StateSpace:
    return StateSpace.explicit(expand_space(a, onto) | expand_space(b, onto))


def space_equals(a: StateSpace, b: StateSpace, onto: Ontology) -> bool:
    return expand_space(a, onto) == expand_space(b, onto)


def singleton(state: State) -> StateSpace:
    return StateSpace.explicit((state,))


def feasible_in(space: StateSpace, state: State, onto: Ontology) -> bool:
    """An action with initial space ``space`` can start from ``state``."""
    return space_refines(space, singleton(state), onto)


# ---------------------------------------------------------------------------
# Restricted subclasses
# ---------------------------------------------------------------------------


def restricted_subclass_members(
    base: str, restrictions, ds: DataSystem, onto: Ontology
) -> frozenset:
    """Object ids whose type sits at or below ``base`` and whose property
    values refine every restriction value.

    Restrictions on undeclared properties are schema errors; a restriction
    value falling outside the property's declared range cannot be met by any
    object, so the result is empty (logged as a warning).
    """
    if base not in onto.classes:
        raise NameResolutionError(f"unknown class {base!r}")
    items = tuple(restrictions.items()) if hasattr(restrictions, "items") else tuple(restrictions)
    for prop, value in items:
        pdef = onto.properties.get(prop)
        if pdef is None:
            raise SchemaError(f"restriction on undeclared property {prop!r}")
        if pdef.range and not any(
            _in_range(value, rc, onto, ds) for rc in pdef.range
        ):
            log.warning(
                "restriction %s=%s falls outside the declared range of %r; no member can satisfy it",
                prop,
                value,
                prop,
            )
            return frozenset()
    members = []
    for obj in ds.objects.values():
        if not is_subclass(obj.type_name, base, onto):
            continue
        ok = True
        for prop, value in items:
            vals = obj.prop_values(prop)
            if not vals or not all(value_refines(v, value, onto, ds) for v in vals):
                ok = False
                break
        if ok:
            members.append(obj.id)
    return frozenset(members)


def _in_range(value: str, range_class: str, onto: Ontology, ds: DataSystem) -> bool:
    if range_class not in onto.classes:
        return value == range_class
    try:
        return is_subclass(value, range_class, onto, ds)
    except NameResolutionError:
        return False

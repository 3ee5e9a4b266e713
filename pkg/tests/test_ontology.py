"""State, state-space, and refinement-order behavior."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polcheck.errors import (
    CycleError,
    ExpansionError,
    NameResolutionError,
    SchemaError,
    StructuralError,
)
from polcheck.ontology import (
    ENTIRE,
    ClassDef,
    DataSystem,
    ObjectInstance,
    Ontology,
    PropertyDef,
    State,
    StateSpace,
    VariableDef,
    expand_space,
    feasible_in,
    is_subclass,
    render_space,
    render_state,
    restricted_subclass_members,
    singleton,
    space_equals,
    space_join,
    space_meet,
    space_refines,
    space_refines_witness,
    state_refines,
    universe,
    value_refines,
)


def machine_onto() -> Ontology:
    """Two variables: hardware kind (Notebook below Computer) and an OS name
    with no hierarchy between its values."""
    classes = {c: ClassDef(c) for c in ("Computer", "Notebook", "Linux", "Windows")}
    return Ontology(
        classes=classes,
        subclass_edges=(("Notebook", "Computer"),),
        variables={
            "x1": VariableDef("x1", "pc", "hw", ("Computer", "Notebook")),
            "x2": VariableDef("x2", "pc", "os", ("Linux", "Windows")),
        },
    )


def mk(x1, x2) -> State:
    return State.make({"x1": x1, "x2": x2})


# ---------------------------------------------------------------------------
# Value and state refinement
# ---------------------------------------------------------------------------


def test_value_refinement_uses_subclass_closure():
    onto = machine_onto()
    assert value_refines("Notebook", "Computer", onto)
    assert not value_refines("Computer", "Notebook", onto)
    assert value_refines("Linux", "Linux", onto)
    assert not value_refines("Linux", "Windows", onto)


def test_instance_values_step_to_their_type():
    onto = machine_onto()
    ds = DataSystem(objects={"nb1": ObjectInstance("nb1", "Notebook")})
    assert value_refines("nb1", "Computer", onto, ds)
    assert not value_refines("nb1", "Linux", onto, ds)
    assert is_subclass("nb1", "Computer", onto, ds)
    with pytest.raises(NameResolutionError):
        is_subclass("ghost", "Computer", onto, ds)


def test_state_refinement_is_per_variable():
    onto = machine_onto()
    assert state_refines(mk("Computer", "Linux"), mk("Notebook", "Linux"), onto)
    assert not state_refines(mk("Notebook", "Linux"), mk("Computer", "Linux"), onto)
    with pytest.raises(StructuralError):
        state_refines(mk("Computer", "Linux"), State.make({"x1": "Computer"}), onto)


def test_state_assignments_are_kept_sorted():
    s = State((("x2", "Linux"), ("x1", "Computer")))
    assert s.variables() == ("x1", "x2")
    assert s.value("x2") == "Linux"
    with pytest.raises(ExpansionError):
        s.value("x9")


# ---------------------------------------------------------------------------
# Space refinement: the worked three-space example
# ---------------------------------------------------------------------------


def test_space_refinement_worked_example():
    onto = machine_onto()
    g1 = mk("Computer", "Linux")
    g2 = mk("Computer", "Windows")
    g3 = mk("Notebook", "Linux")
    G1 = StateSpace.explicit({g1})
    G2 = StateSpace.explicit({g1, g2})
    G3 = StateSpace.explicit({g3})

    assert space_refines(G2, G1, onto)
    assert space_refines(G1, G3, onto)
    assert not space_refines(G1, G2, onto)
    # the uncovered state is the Windows one
    assert space_refines_witness(G1, G2, onto) == g2


def test_entire_and_concise_expansion():
    onto = machine_onto()
    assert len(expand_space(ENTIRE, onto)) == 4
    only_nb = StateSpace.concise({"x1": "Notebook"})
    assert expand_space(only_nb, onto) == frozenset(
        {mk("Notebook", "Linux"), mk("Notebook", "Windows")}
    )
    with pytest.raises(ExpansionError):
        expand_space(StateSpace.concise({"bogus": "Linux"}), onto)
    with pytest.raises(ExpansionError):
        expand_space(StateSpace.explicit({State.make({"x1": "Computer"})}), onto)


def test_space_must_be_exactly_one_representation():
    with pytest.raises(StructuralError):
        StateSpace(states=frozenset(), fixed=())
    with pytest.raises(StructuralError):
        StateSpace()


def test_universe_order_and_size():
    onto = machine_onto()
    u = universe(onto)
    assert len(u) == 4
    assert u == tuple(sorted(u))


def test_feasibility_is_cone_membership():
    onto = machine_onto()
    nb = StateSpace.concise({"x1": "Notebook"})
    assert feasible_in(nb, mk("Notebook", "Linux"), onto)
    assert not feasible_in(nb, mk("Computer", "Linux"), onto)
    assert feasible_in(ENTIRE, mk("Computer", "Windows"), onto)


def test_meet_join_are_expansion_set_ops():
    onto = machine_onto()
    a = StateSpace.concise({"x1": "Computer"})
    b = StateSpace.concise({"x2": "Linux"})
    met = space_meet(a, b, onto)
    assert expand_space(met, onto) == frozenset({mk("Computer", "Linux")})
    joined = space_join(a, b, onto)
    assert len(expand_space(joined, onto)) == 3
    assert space_equals(a, StateSpace.explicit(expand_space(a, onto)), onto)


def test_render_helpers():
    onto = machine_onto()
    assert render_state(mk("Computer", "Linux")) == "{x1=Computer, x2=Linux}"
    assert render_space(StateSpace.concise({"x1": "Computer"})) == "(x1=Computer)"
    explicit = StateSpace.explicit({mk("Computer", "Linux")})
    assert render_space(explicit) == "{{x1=Computer, x2=Linux}}"
    assert expand_space(singleton(mk("Computer", "Linux")), onto)


# ---------------------------------------------------------------------------
# Order laws, property-tested over random explicit spaces
# ---------------------------------------------------------------------------


_ONTO = machine_onto()
_UNIVERSE = sorted(universe(_ONTO))

spaces = st.sets(st.sampled_from(_UNIVERSE), min_size=0, max_size=4).map(
    lambda s: StateSpace.explicit(s)
)


@settings(max_examples=150, deadline=None)
@given(spaces)
def test_refinement_is_reflexive(a):
    assert space_refines(a, a, _ONTO)


@settings(max_examples=150, deadline=None)
@given(spaces, spaces, spaces)
def test_refinement_is_transitive(a, b, c):
    if space_refines(a, b, _ONTO) and space_refines(b, c, _ONTO):
        assert space_refines(a, c, _ONTO)


@settings(max_examples=150, deadline=None)
@given(spaces, spaces)
def test_join_abstracts_both_operands(a, b):
    j = space_join(a, b, _ONTO)
    assert space_refines(j, a, _ONTO)
    assert space_refines(j, b, _ONTO)


@settings(max_examples=150, deadline=None)
@given(spaces, spaces, spaces)
def test_join_is_the_tightest_common_abstraction(a, b, d):
    if space_refines(d, a, _ONTO) and space_refines(d, b, _ONTO):
        assert space_refines(d, space_join(a, b, _ONTO), _ONTO)


@settings(max_examples=150, deadline=None)
@given(spaces, spaces)
def test_meet_is_refined_by_both_operands(a, b):
    m = space_meet(a, b, _ONTO)
    assert space_refines(a, m, _ONTO)
    assert space_refines(b, m, _ONTO)


@settings(max_examples=150, deadline=None)
@given(spaces)
def test_empty_space_refines_everything(a):
    empty = StateSpace.explicit(frozenset())
    assert space_refines(a, empty, _ONTO)


# ---------------------------------------------------------------------------
# Hierarchy plumbing
# ---------------------------------------------------------------------------


def test_subclass_cycles_are_rejected():
    classes = {c: ClassDef(c) for c in ("A", "B")}
    with pytest.raises(CycleError):
        Ontology(classes=classes, subclass_edges=(("A", "B"), ("B", "A")))


def test_edges_must_name_declared_classes():
    with pytest.raises(NameResolutionError):
        Ontology(classes={"A": ClassDef("A")}, subclass_edges=(("A", "Zed"),))


def test_ancestors_are_reflexive_transitive():
    classes = {c: ClassDef(c) for c in ("A", "B", "C")}
    onto = Ontology(classes=classes, subclass_edges=(("C", "B"), ("B", "A")))
    assert onto.ancestors("C") == frozenset({"A", "B", "C"})
    with pytest.raises(NameResolutionError):
        onto.ancestors("Zed")


def test_predicate_families():
    onto = Ontology(
        properties={
            "type": PropertyDef("type", family="hie"),
            "owns": PropertyDef("owns"),
        }
    )
    assert onto.hie_predicates() == ("type",)
    assert onto.rel_predicates() == ("owns",)


def test_restricted_subclass_members():
    classes = {c: ClassDef(c) for c in ("Device", "Computer", "Speed")}
    onto = Ontology(
        classes=classes,
        subclass_edges=(("Computer", "Device"),),
        properties={"cpu": PropertyDef("cpu", range=("Speed",))},
    )
    ds = DataSystem(
        objects={
            "pc1": ObjectInstance("pc1", "Computer", (("cpu", "Speed"),)),
            "pc2": ObjectInstance("pc2", "Computer"),
            "d1": ObjectInstance("d1", "Device", (("cpu", "Speed"),)),
        }
    )
    assert restricted_subclass_members("Computer", {"cpu": "Speed"}, ds, onto) == {"pc1"}
    assert restricted_subclass_members("Device", {}, ds, onto) == {"pc1", "pc2", "d1"}
    with pytest.raises(SchemaError):
        restricted_subclass_members("Device", {"ghost": "Speed"}, ds, onto)
    # out-of-range restriction can never be met
    assert restricted_subclass_members("Device", {"cpu": "Device"}, ds, onto) == frozenset()

"""
Refining an abstract protection obligation
==========================================

A high-level policy obliges Alice to protect her notebook. The refinement
pattern says protecting a machine means installing a firewall and an
anti-virus tool, in either order. Refinement enumerates both orders, and
evaluating each branch against the recorded facts (the firewall is already
installed, and Alice holds a dispensation for it) leaves exactly one
concrete obligation standing.
"""

from pathlib import Path

from polcheck.datalog import evaluate
from polcheck.loading import load_facts, load_ontology, load_patterns, load_policy
from polcheck.policy import to_text
from polcheck.refinement import refine_policy
from polcheck.terms import render

samples = Path(__file__).resolve().parents[1] / "samples"

onto = load_ontology(samples / "protect.onto")
ds = load_facts(samples / "protect.facts", onto)
high = load_policy(samples / "protect_high.pol", onto)
patterns = load_patterns(samples / "protect.rp", onto)

print("high-level policy")
print("-----------------")
print(to_text(high))

result = refine_policy(high, patterns, onto, ds)
for i, branch in enumerate(result.branches, start=1):
    print(f"branch {i}")
    print("-" * len(f"branch {i}"))
    for rule_id, pattern_id, tag in branch.choice_log:
        print(f"  chose {tag} of {pattern_id} while refining {rule_id}")
    model = evaluate(branch.policy, ds, onto)
    mustdos = sorted(render(a) for a in model.atoms if a.pred == "mustdo")
    if mustdos:
        for atom in mustdos:
            print(f"  {atom}")
    else:
        # the firewall-first branch: its anti-virus rule waits on a done
        # record for the firewall step, and the firewall itself is dispensed
        print("  (no concrete obligation in this branch)")
    print()

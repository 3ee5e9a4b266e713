"""
Auditing a concrete policy against the one it refines
=====================================================

The audit scenario: the abstract policy forbids Eve from reading a report,
obliges Bob to back it up and to encrypt it, and Bob's current state shows
the encryption already done. The concrete policy is checked against all of
that; then we delete its denial for Eve and check again.
"""

from pathlib import Path

from polcheck.compliance import check_compliance
from polcheck.loading import (
    load_facts,
    load_ontology,
    load_patterns,
    load_policy,
    load_state,
    parse_policy,
)

samples = Path(__file__).resolve().parents[1] / "samples"

onto = load_ontology(samples / "audit.onto")
ds = load_facts(samples / "audit.facts", onto)
high = load_policy(samples / "audit_high.pol", onto)
low = load_policy(samples / "audit_low.pol", onto)
patterns = load_patterns(samples / "audit.rp", onto)
sigma = load_state(samples / "audit.state", onto)

report = check_compliance(high, low, ds, patterns, sigma, onto)
print(report.to_text())

# now forget the denial: the concrete policy stops enforcing
# do(report1, eve, -read), which the abstract policy requires
low_text = (samples / "audit_low.pol").read_text()
weakened = parse_policy(
    "\n".join(l for l in low_text.splitlines() if "eve" not in l), onto
)

print()
print(check_compliance(high, weakened, ds, patterns, sigma, onto).to_text())

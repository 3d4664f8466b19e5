"""
Two-phase taxonomy with a scripted provider
===========================================

Runs explanation generation and batched labeling against the built-in
simulated analyst, so nothing leaves the machine.
"""

import tempfile

from satdtax import Gateway, MockProvider, build_taxonomy, generate_explanations, load_dataset
from satdtax.naive import generate_naive_taxonomy
from satdtax.simulate import SimulatedAnalyst, make_synthetic_dataset

dataset = load_dataset(make_synthetic_dataset(tempfile.mkdtemp(), n=88))
gateway = Gateway(MockProvider(responder=SimulatedAnalyst()))

# phase 1: one explanation per comment
explanations = generate_explanations(dataset, gateway)
print(explanations[0].comment_id, "->", explanations[0].text)

# phase 2: batches of 20, labels merged into a running list
taxonomy = build_taxonomy(explanations, gateway)
for main, subs in taxonomy.main:
    print(main.name, [s.name for s in subs])

# every provider call is in the ledger, tagged by purpose
print(gateway.ledger.call_counts())
print(gateway.ledger.totals)

# the baseline asks for the whole taxonomy in one go
naive_gw = Gateway(MockProvider(responder=SimulatedAnalyst()))
naive = generate_naive_taxonomy(dataset, naive_gw)
print("naive:", [m.name for m, _ in naive.main], naive_gw.ledger.call_counts())

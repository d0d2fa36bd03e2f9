"""A passive run of the butterfly protocol, step by step.

Sixteen parties, four merging onions per message, four rounds per epoch,
four passes through the butterfly. Nobody drops anything, so every
recipient should end up with exactly one copy of its message.
"""

import random

import numpy as np

from onionsim import make_protocol, random_simple_input, run
from onionsim.adversaries import passive_strategy
from onionsim.analytics import onion_cost, survival_fractions

proto = make_protocol("pibfly", n_parties=16, chi=4, d=4, iterations=4, kappa=0.25, lam=16)
params = proto.params
print("mixing epochs L =", params.mixing_epochs, " tree height h =", params.tree.h,
      " total epochs =", proto.n_epochs, " rounds =", proto.total_rounds)
print("abort threshold W/3 =", params.abort_threshold)

sigma = random_simple_input(16, random.Random(1))
tr = run(proto, sigma, passive_strategy(), seed=1)

# Deliveries: one per party
print("deliveries:", len(tr.message_deliveries()), " aborts:", len(tr.aborts))
print("received counts:", tr.received_counts())

# Merges only start in the merging phase; each sender's four onions collapse 4 -> 2 -> 1
merge_rounds = np.array([m.round for m in tr.merges])
print("merge rounds:", sorted(set(merge_rounds.tolist())), " merges:", merge_rounds.size)

surv = survival_fractions(tr, proto.d, proto.n_epochs)
table = np.array([[surv[e][p] for p in tr.honest] for e in range(1, proto.n_epochs + 1)])
print("live merging onions per honest sender, by epoch (min/max):")
for e, row in enumerate(table, start=1):
    if e in (1, params.mixing_epochs, params.mixing_epochs + 1, proto.n_epochs):
        print(f"  epoch {e:>2}: {row.min()}..{row.max()}")

cost = onion_cost(tr)
print("onion cost (mean transmissions per honest party):", float(cost.onion_cost))
print("max onions formed by an honest party X =", cost.max_formed, " 3*chi =", 3 * 4)
print("busiest round:", int(np.argmax(cost.per_round)) + 1, "with", max(cost.per_round), "transmissions")

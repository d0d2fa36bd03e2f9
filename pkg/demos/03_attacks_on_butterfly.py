"""Active attacks on the butterfly protocol and how the diagnostics react.

1. Sender targeting: drop the target's first-round onions at corrupted
   parties, then whatever its first-round receivers pass on to corrupted
   parties. Either somebody notices missing checkpoints, or the target
   still has merging onions when mixing ends.
2. Singleton dropping with an oracle: drop half of the indistinguishable
   singletons in the first epoch. The expected dropped fraction follows
   the zeta recursion, and the checkpoints give the attack away.
"""

import math
import random
from collections import Counter

from onionsim import make_protocol, random_simple_input, run
from onionsim.adversaries import sender_targeting_strategy, singleton_dropping_strategy
from onionsim.analytics import zeta_recursion

proto = make_protocol("pibfly", n_parties=16, chi=4, d=4, iterations=4, kappa=0.25)
L, d = proto.params.mixing_epochs, proto.d

outcomes = Counter()
for s in range(60):
    target = s % 16 + 1
    tr = run(proto, random_simple_input(16, random.Random(s)), sender_targeting_strategy(target), s)
    noticed = any(a.round <= (L + 1) * d and a.party not in tr.corrupted for a in tr.aborts)
    kept = sum(1 for lin in tr.lineages if lin.kind == "merging" and lin.plan.origin == target
               and (tr.terminal.get(lin.index, ("", 10**9))[1] > L * d))
    outcomes["abort" if noticed else f"kept {kept}"] += 1
print("sender targeting over 60 runs:", dict(outcomes))

schedule = [0.5] + [0.0] * (proto.n_epochs - 1)
print("E[zeta] for the first epochs:", zeta_recursion(schedule)[:4])
partway = L + math.ceil(proto.params.tree.h / 1.5)
first_abort = []
for s in range(20):
    tr = run(proto, random_simple_input(16, random.Random(s)), singleton_dropping_strategy(schedule), s)
    first_abort.append(min(a.round for a in tr.aborts))
    if s < 3:
        print(f"  seed {s}: realized first-epoch fraction {tr.flags['realized_fractions'][0]:.2f}, "
              f"{len(tr.aborted_parties())} parties aborted")
print("first abort round over 20 runs:", sorted(first_abort), " partway round:", partway * d)

"""Dropping mergeable pairs versus dropping singletons.

The pair-dropping adversary removes both members of a pair when they meet
at a corrupted party. Spending the same number of drops on singletons
instead never narrows the gap between the best and worst off senders.
"""

import random

import numpy as np

from onionsim import make_protocol, random_simple_input, run
from onionsim.adversaries import budgeted_singleton_strategy, pair_dropping_strategy
from onionsim.analytics import surviving_spread

proto = make_protocol("pibfly", n_parties=16, chi=4, d=4, iterations=4, kappa=0.25)
rows = []
for s in range(40):
    sigma = random_simple_input(16, random.Random(s))
    pairs = run(proto, sigma, pair_dropping_strategy(), s)
    budget = 2 * pairs.flags["pairs_dropped"]
    singles = run(proto, sigma, budgeted_singleton_strategy(budget), s)
    rows.append((budget, singles.flags["spent"], surviving_spread(pairs), surviving_spread(singles)))

rows = np.array(rows)
print("mean drop budget:", rows[:, 0].mean(), " mean spent on singletons:", rows[:, 1].mean())
print("runs where pair dropping left the larger spread:", int((rows[:, 2] > rows[:, 3]).sum()), "of", len(rows))

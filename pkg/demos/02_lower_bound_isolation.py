"""Why a cheap protocol leaks: the isolation attack on the strawman.

The strawman sends each message through one random relay. The adversary
picks a target i and drops everything i transmits to a corrupted party.
When that wipes out all of i's transmissions ("isolated"), the recipient
r of j's message tells the two inputs apart: under the swapped input r
was waiting for i's message and gets nothing.
"""

import random

from onionsim import make_strawman_protocol, random_simple_input
from onionsim.adversaries import isolating_strategy
from onionsim.analytics import cannot_affect_check, equalizing_experiment, isolation_probability

# How likely is a random k-subset of 100 parties to be all corrupted, with 20 corrupted?
rep = isolation_probability(100, 0.2, 3, trials=100_000, seed=0)
print(f"exact p = {rep.exact} = {float(rep.exact):.6f}, sampled {rep.empirical:.6f}, "
      f"kappa^k = {rep.kappa_power:.6f}")

proto = make_strawman_protocol(1, n_parties=16, kappa=0.25)
sigma0 = random_simple_input(16, random.Random(5))
i, j = 1, 2
mean, ok = cannot_affect_check(proto, isolating_strategy(i), sigma0, i, j, trials=200, base_seed=5)
print(f"E[#onions j -> i -> r(j)] = {mean:.3f}; i cannot affect j's recipient: {ok}")

eq = equalizing_experiment(proto, isolating_strategy(i), sigma0, i, j, trials=400, base_seed=5, bootstrap=100)
print("recipient r =", eq.r)
print("isolated runs (sigma0, sigma1):", eq.isolated)
print("P[v_r = 0 | isolated] under sigma1:", eq.zero_given_isolated[1])
print("P[v_r > 0 | isolated] under sigma0:", eq.positive_given_isolated[0])
print(f"TV distance of full count vectors: {eq.tv:.3f} [{eq.tv_low:.3f}, {eq.tv_high:.3f}]")
print()
print(eq.to_csv())

"""Monte-Carlo checks of two counting facts used in the analysis.

Paired balls: of 2u balls in u pairs draw 2v; the expected number of
balls whose partner was also drawn is 2v(2v-1)/(2u-1).

Balls into bins: X balls in N' bins leave N'(1 - (1 - 1/N')^X) bins
nonempty on average, and far more than X/log(lambda) with high probability.
"""

import numpy as np

from onionsim.analytics import balls_bins_oracle, pairs_expectation_oracle

for u, v in [(4, 2), (5, 3), (6, 6)]:
    rep = pairs_expectation_oracle(u, v, trials=20_000, seed=1)
    print(f"u={u} v={v}: formula {rep.formula}, exhaustive {rep.exhaustive}, sampled {rep.empirical:.4f}")

rep = pairs_expectation_oracle(50, 20, trials=100_000, seed=2)
print(f"u=50 v=20: formula {float(rep.formula):.4f}, sampled {rep.empirical:.4f}")

sizes = np.array([4, 16, 32, 64])
for x in sizes:
    rep = balls_bins_oracle(int(x), 64, 4, trials=20_000, seed=3)
    print(f"X={x:>2} N'=64: mean nonempty {rep.mean_nonempty:7.3f} vs {rep.expected_nonempty:7.3f}, "
          f"success {rep.success_fraction:.4f}, in regime {rep.in_regime}")

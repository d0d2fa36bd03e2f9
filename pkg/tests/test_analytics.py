import math
import random
from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from conftest import BFLY, perm
from onionsim.adversaries import isolating_strategy, passive_strategy
from onionsim.analytics import (
    balls_bins_oracle,
    cannot_affect_check,
    equalizing_experiment,
    hops_count,
    isolation_probability,
    onion_cost,
    pairs_expectation_oracle,
    survival_fractions,
    swap,
    zeta_recursion,
)
from onionsim.engine import run
from onionsim.errors import ConfigError
from onionsim.inputs import SimpleInput
from onionsim.protocols import Strawman, make_protocol, make_strawman_protocol
from onionsim.transcript import RunTranscript


# swap

def test_swap_example_and_involution():
    sigma = SimpleInput.from_permutation([3, 4, 1, 2])
    s1 = swap(sigma, 1, 2)
    assert s1.recipient(1) == 4 and s1.recipient(2) == 3 and s1.message(1) == "m2"
    assert swap(s1, 1, 2) == sigma
    with pytest.raises(ConfigError):
        swap(sigma, 2, 2)


def test_swap_keeps_permutation():
    rng = random.Random(0)
    for _ in range(100):
        n = rng.randint(2, 20)
        sigma = perm(rng.random(), n)
        i, j = rng.sample(range(1, n + 1), 2)
        assert sorted(swap(sigma, i, j).recipients) == list(range(1, n + 1))


# routes

class ThroughParty(Strawman):
    def __init__(self, relay, **kw):
        super().__init__(**kw)
        self.relay = relay

    def route(self, party, recipient, rng):
        return (self.relay, recipient)


def test_cannot_affect_check_cases():
    sigma = perm(7)
    direct = make_strawman_protocol(0, n_parties=16)
    assert cannot_affect_check(direct, passive_strategy(), sigma, 1, 2, 5) == (0.0, True)
    forced = ThroughParty(1, n_parties=16, alpha_hops=1)
    mean, ok = cannot_affect_check(forced, passive_strategy(), sigma, 1, 2, 5)
    assert mean >= 1 and not ok
    with pytest.raises(ConfigError):
        cannot_affect_check(direct, passive_strategy(), sigma, 1, 2, 0)


def test_cannot_affect_three_relays():
    proto = make_strawman_protocol(3, n_parties=100)
    sigma = perm(1, 100)
    mean, ok = cannot_affect_check(proto, passive_strategy(), sigma, 5, 9, 400)
    # each relay slot hits party 5 with probability 1/100
    assert ok and abs(mean - (1 - 0.99**3)) < 0.03


def test_hops_count_on_fixture():
    tr = run(ThroughParty(3, n_parties=4, alpha_hops=1), SimpleInput.from_permutation([2, 1, 4, 3]),
             passive_strategy(), 0)
    assert hops_count(tr, 1, 3, 2) == 1
    assert hops_count(tr, 1, 4, 2) == 0
    assert hops_count(tr, 3, 3, 4) == 1


# isolation

def test_isolation_exact_values():
    rep = isolation_probability(100, 0.2, 3, 0)
    assert rep.exact == Fraction(1140, 161700)
    assert float(rep.exact) == pytest.approx(stats.hypergeom(100, 20, 3).pmf(3))
    assert isolation_probability(100, 0.2, 0, 0).exact == 1
    assert isolation_probability(100, 0.2, 21, 0).exact == 0
    with pytest.raises(ConfigError):
        isolation_probability(10, 0.2, 11, 0)


def test_isolation_empirical_within_binomial_error():
    rep = isolation_probability(20, 0.25, 2, 40000, seed=3)
    assert abs(rep.empirical - float(rep.exact)) < 4 * rep.stderr
    assert rep.kappa_power == pytest.approx(0.0625)


# zeta

def test_zeta_examples():
    assert zeta_recursion([0, 0, 0]) == [0, 0, 0, 0]
    assert zeta_recursion([0.5, 0, 0])[:3] == [0, 0.5, 0.5]
    assert zeta_recursion([0.3, 0.3]) == [0, 0.3, 0.51]
    assert zeta_recursion([1, 1]) == [0, 1, 1]
    with pytest.raises(ConfigError):
        zeta_recursion([-0.1])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.fractions(0, 1), min_size=1, max_size=8), st.integers(0, 7), st.fractions(0, 1))
def test_zeta_monotone(alphas, k, bump):
    z = zeta_recursion(alphas)
    assert all(a <= b for a, b in zip(z, z[1:]))
    k %= len(alphas)
    raised = list(alphas)
    raised[k] = max(raised[k], bump)
    assert all(a <= b + 1e-12 for a, b in zip(z, zeta_recursion(raised)))


# paired balls

def _pairs_closed_form(u, v):
    # each of the u pairs is fully selected with probability C(2u-2, 2v-2) / C(2u, 2v)
    return 2 * u * Fraction(math.comb(2 * u - 2, 2 * v - 2), math.comb(2 * u, 2 * v))


@pytest.mark.parametrize("u", range(1, 6))
def test_pairs_exhaustive_exact(u):
    for v in range(1, u + 1):
        rep = pairs_expectation_oracle(u, v)
        assert rep.exhaustive == rep.formula == _pairs_closed_form(u, v)


def test_pairs_frozen_value_and_full_sample():
    assert pairs_expectation_oracle(4, 2).exhaustive == Fraction(12, 7)
    assert pairs_expectation_oracle(3, 3, trials=100).empirical == 6
    with pytest.raises(ConfigError):
        pairs_expectation_oracle(2, 3)


# balls into bins

def test_balls_bins_single_ball():
    rep = balls_bins_oracle(1, 10, 1, 100)
    assert rep.mean_nonempty == 1 and rep.success_fraction == 1


def test_balls_bins_closed_form():
    rep = balls_bins_oracle(16, 64, 4, 20000, seed=1)
    assert rep.expected_nonempty == pytest.approx(14.2550, abs=1e-3)
    assert rep.relative_error < 0.01 and rep.in_regime
    assert not balls_bins_oracle(100, 64, 4, 10).in_regime


# transcript statistics

def test_survival_fractions_passive(bfly):
    tr = run(bfly, perm(0), passive_strategy(), 0)
    L = bfly.params.mixing_epochs
    surv = survival_fractions(tr, bfly.d, bfly.n_epochs)
    assert set(surv[1].values()) == {4}
    assert set(surv[L].values()) == {4}
    assert set(surv[L + 1].values()) == {2}
    assert set(surv[bfly.n_epochs].values()) == {1}


def test_survival_fractions_all_dropped(bfly):
    tr = run(bfly, perm(0), passive_strategy(), 0)
    tr.terminal = {k: ("dropped", 1) for k in tr.terminal}
    assert set(survival_fractions(tr, bfly.d, 1)[1].values()) == {0}


def test_onion_cost_cases():
    tr = run(make_strawman_protocol(0, n_parties=8), perm(0, 8), passive_strategy(), 0)
    assert onion_cost(tr).onion_cost == 1
    empty = RunTranscript({"n_parties": 4, "rounds": 0}, frozenset())
    assert onion_cost(empty).onion_cost == 0
    tr = run(make_strawman_protocol(3, n_parties=16), perm(1), passive_strategy(), 1)
    cost = onion_cost(tr)
    assert sum(cost.out.values()) / 16 == 4 and cost.total == len(tr.transmissions)
    assert sum(cost.per_round) == cost.total and cost.bound_ok is None


# equalizing

def test_equalizing_passive_is_flat(bfly):
    rep = equalizing_experiment(bfly, passive_strategy(), perm(0), 1, 2, 100, base_seed=0, bootstrap=20)
    assert rep.tv == 0 and rep.tv_high == 0
    assert rep.v_r[0] == rep.v_r[1] == {1: 100}
    with pytest.raises(ConfigError):
        equalizing_experiment(bfly, passive_strategy(), perm(0), 1, 2, 99)


def test_equalizing_symmetric_in_inputs():
    proto = make_strawman_protocol(1, n_parties=8, kappa=0.25)
    sigma0 = perm(3, 8)
    a = equalizing_experiment(proto, isolating_strategy(1), sigma0, 1, 2, 100, bootstrap=20)
    b = equalizing_experiment(proto, isolating_strategy(1), swap(sigma0, 1, 2), 1, 2, 100, bootstrap=20)
    assert a.tv == b.tv
    assert a.vectors[0] == b.vectors[1] and a.vectors[1] == b.vectors[0]
    assert a.to_csv().splitlines()[0].startswith("input,trials")

"""Run statistics, the equalizing experiment and Monte-Carlo oracles.

Report types carry a ``columns`` tuple and ``rows()`` so that every report
can be written as CSV with a fixed column order.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .adversaries import Strategy
from .engine import run
from .errors import ConfigError
from .inputs import SimpleInput
from .protocols import Protocol
from .seeding import numpy_rng, split_seed
from .transcript import RunTranscript

__all__ = [
    "swap",
    "hops_count",
    "cannot_affect_check",
    "isolated_audit",
    "EqualizingReport",
    "equalizing_experiment",
    "IsolationReport",
    "isolation_probability",
    "zeta_recursion",
    "PairsReport",
    "pairs_expectation_oracle",
    "BallsBinsReport",
    "balls_bins_oracle",
    "survival_fractions",
    "CostReport",
    "onion_cost",
    "surviving_spread",
    "write_csv",
]


def write_csv(columns: Sequence[str], rows: Iterable[Sequence[Any]], comment: Optional[str] = None) -> str:
    buf = io.StringIO()
    if comment is not None:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


# inputs and routes

def swap(inputs: SimpleInput, i: int, j: int) -> SimpleInput:
    """Exchange the (message, recipient) pairs of parties ``i`` and ``j``."""
    if i == j:
        raise ConfigError("swap needs two distinct parties")
    rec, msg = list(inputs.recipients), list(inputs.messages)
    rec[i - 1], rec[j - 1] = rec[j - 1], rec[i - 1]
    msg[i - 1], msg[j - 1] = msg[j - 1], msg[i - 1]
    return SimpleInput(tuple(rec), tuple(msg))


def _reached(transcript: RunTranscript, index: int, length: int) -> int:
    """How many path positions of a protocol onion actually received it."""
    kind, rnd = transcript.terminal.get(index, ("live", length))
    return rnd - 1 if kind == "dropped" else rnd


def hops_count(transcript: RunTranscript, creator: int, relay: int, destination: int) -> int:
    """Onions created by ``creator``, received by ``relay`` as an intermediary,
    that carry a message addressed to ``destination``."""
    count = 0
    for lin in transcript.lineages:
        plan = lin.plan
        if plan.origin != creator or lin.kind == "abort" or plan.message is None:
            continue
        if plan.recipient != destination:
            continue
        seen = plan.path[: min(_reached(transcript, lin.index, len(plan.path)), len(plan.path) - 1)]
        if relay in seen:
            count += 1
    return count


def cannot_affect_check(protocol: Protocol, adversary: Strategy, inputs: SimpleInput, i: int, j: int,
                        trials: int, base_seed: int = 0) -> Tuple[float, bool]:
    """Mean of ``hops_count(j, i, r(j))`` over seeded runs and whether it is at most 1/2."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    r = inputs.recipient(j)
    total = 0
    for t in range(trials):
        tr = run(protocol, inputs, adversary, split_seed(base_seed, t))
        total += hops_count(tr, j, i, r)
    mean = total / trials
    return mean, mean <= 0.5


def isolated_audit(transcript: RunTranscript, target: int) -> bool:
    """True iff every transmission sent by ``target`` was dropped."""
    dropped = {d.handle for d in transcript.drops}
    return all(t.handle in dropped for t in transcript.transmissions if t.sender == target)


# equalizing experiment

def _tv(a: Sequence[tuple], b: Sequence[tuple]) -> float:
    ca, cb = Counter(a), Counter(b)
    na, nb = len(a), len(b)
    return 0.5 * sum(abs(ca[k] / na - cb[k] / nb) for k in set(ca) | set(cb))


@dataclass
class EqualizingReport:
    trials: int
    i: int
    j: int
    r: int
    v_r: Tuple[Counter, Counter]
    tv: float
    tv_low: float
    tv_high: float
    tv_r: float
    isolated: Tuple[int, int]
    zero_given_isolated: Tuple[Optional[float], Optional[float]]
    positive_given_isolated: Tuple[Optional[float], Optional[float]]
    vectors: Tuple[List[tuple], List[tuple]] = field(repr=False, default=([], []))

    columns = ("input", "trials", "i", "j", "r", "mean_v_r", "p_v_r_zero", "tv", "tv_low", "tv_high",
               "tv_r", "confidence_radius", "isolated_runs", "p_v_r_zero_given_isolated",
               "p_v_r_positive_given_isolated")

    @property
    def confidence_radius(self) -> float:
        return max(self.tv - self.tv_low, self.tv_high - self.tv)

    def rows(self) -> List[list]:
        out = []
        for b in (0, 1):
            dist = self.v_r[b]
            n = sum(dist.values())
            mean = sum(k * c for k, c in dist.items()) / n
            out.append([f"sigma{b}", self.trials, self.i, self.j, self.r, f"{mean:.6g}",
                        f"{dist[0] / n:.6g}", f"{self.tv:.6g}", f"{self.tv_low:.6g}", f"{self.tv_high:.6g}",
                        f"{self.tv_r:.6g}", f"{self.confidence_radius:.6g}", self.isolated[b],
                        _fmt(self.zero_given_isolated[b]), _fmt(self.positive_given_isolated[b])])
        return out

    def to_csv(self, comment: Optional[str] = None) -> str:
        return write_csv(self.columns, self.rows(), comment)


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.6g}"


def equalizing_experiment(protocol: Protocol, adversary: Strategy, sigma0: SimpleInput, i: int, j: int,
                          trials: int, base_seed: int = 0, bootstrap: int = 200,
                          level: float = 0.95) -> EqualizingReport:
    """Compare received-count vectors under ``sigma0`` and ``swap(sigma0, i, j)``.

    Trial ``t`` runs both inputs with the same seed. ``r`` is the recipient
    of ``j`` under ``sigma0``. The confidence band on the total-variation
    estimate is a paired bootstrap percentile interval.
    """
    if trials < 100:
        raise ConfigError(f"the equalizing experiment needs at least 100 trials, got {trials}")
    sigma1 = swap(sigma0, i, j)
    r = sigma0.recipient(j)
    vectors: Tuple[List[tuple], List[tuple]] = ([], [])
    isolated: Tuple[List[bool], List[bool]] = ([], [])
    for t in range(trials):
        seed = split_seed(base_seed, t)
        for b, sigma in enumerate((sigma0, sigma1)):
            tr = run(protocol, sigma, adversary, seed)
            vectors[b].append(tuple(tr.received_counts()))
            target = tr.flags.get("target")
            flag = bool(tr.flags.get("isolated", False))
            isolated[b].append(flag and target is not None and isolated_audit(tr, target))

    tv = _tv(vectors[0], vectors[1])
    rng = numpy_rng(base_seed, "bootstrap")
    boots = []
    for _ in range(bootstrap):
        idx = rng.integers(0, trials, trials)
        boots.append(_tv([vectors[0][k] for k in idx], [vectors[1][k] for k in idx]))
    lo, hi = np.quantile(boots, [(1 - level) / 2, (1 + level) / 2]) if boots else (tv, tv)
    v_r = tuple(Counter(v[r - 1] for v in vectors[b]) for b in (0, 1))
    tv_r = _tv([(v[r - 1],) for v in vectors[0]], [(v[r - 1],) for v in vectors[1]])

    zero, positive = [], []
    for b in (0, 1):
        cond = [v[r - 1] for v, iso in zip(vectors[b], isolated[b]) if iso]
        zero.append(sum(x == 0 for x in cond) / len(cond) if cond else None)
        positive.append(sum(x > 0 for x in cond) / len(cond) if cond else None)
    return EqualizingReport(trials, i, j, r, v_r, tv, float(min(lo, tv)), float(max(hi, tv)), tv_r,
                            (sum(isolated[0]), sum(isolated[1])), tuple(zero), tuple(positive), vectors)


# isolation probability

@dataclass
class IsolationReport:
    n_parties: int
    kappa: float
    sample_size: int
    trials: int
    exact: Fraction
    empirical: float
    kappa_power: float

    columns = ("n_parties", "kappa", "sample_size", "trials", "exact", "exact_float", "empirical",
               "relative_error", "stderr", "kappa_power")

    @property
    def relative_error(self) -> Optional[float]:
        return None if self.exact == 0 else abs(self.empirical - float(self.exact)) / float(self.exact)

    @property
    def stderr(self) -> float:
        p = float(self.exact)
        return math.sqrt(p * (1 - p) / self.trials) if self.trials else float("nan")

    def rows(self) -> List[list]:
        return [[self.n_parties, self.kappa, self.sample_size, self.trials, str(self.exact),
                 f"{float(self.exact):.8g}", f"{self.empirical:.8g}", _fmt(self.relative_error),
                 f"{self.stderr:.4g}", f"{self.kappa_power:.8g}"]]


def isolation_probability(n_parties: int, kappa: float, sample_size: int, trials: int,
                          seed: int = 0) -> IsolationReport:
    """Chance that a uniform ``sample_size``-subset of the parties is entirely corrupted.

    The exact value ``C(kN, k) / C(N, k)`` uses integer binomials; the
    empirical value counts corrupted parties in hypergeometric draws.
    """
    if not 0 <= sample_size <= n_parties:
        raise ConfigError(f"sample size must lie in [0, {n_parties}], got {sample_size}")
    green = math.floor(Fraction(str(kappa)) * n_parties)
    exact = Fraction(math.comb(green, sample_size), math.comb(n_parties, sample_size))
    if trials > 0:
        rng = numpy_rng(seed, "isolation")
        hits = rng.hypergeometric(green, n_parties - green, sample_size, size=trials) == sample_size
        empirical = float(hits.mean())
    else:
        empirical = float("nan")
    return IsolationReport(n_parties, kappa, sample_size, trials, exact, empirical, kappa ** sample_size)


# zeta recursion

def zeta_recursion(alpha_schedule: Sequence[float]) -> List[float]:
    """Expected cumulative dropped fraction before each epoch.

    Entry ``l-1`` is ``E[zeta_l]``; the list has one more entry than the
    schedule, the last being the value after the final epoch.
    """
    alphas = []
    for a in alpha_schedule:
        a = Fraction(str(a)) if isinstance(a, float) else Fraction(a)
        if not 0 <= a <= 1:
            raise ConfigError(f"drop fractions must lie in [0, 1], got {a}")
        alphas.append(a)
    zeta = [Fraction(0)]
    total = Fraction(0)
    for a in alphas:
        total += (1 - zeta[-1]) * a
        zeta.append(min(total, Fraction(1)))
    return [float(z) for z in zeta]


# paired balls

@dataclass
class PairsReport:
    u: int
    v: int
    trials: int
    formula: Fraction
    exhaustive: Optional[Fraction]
    empirical: Optional[float]

    columns = ("u", "v", "trials", "formula", "formula_float", "exhaustive", "exhaustive_match",
               "empirical", "relative_error")

    @property
    def exhaustive_match(self) -> Optional[bool]:
        return None if self.exhaustive is None else self.exhaustive == self.formula

    @property
    def relative_error(self) -> Optional[float]:
        if self.empirical is None:
            return None
        return abs(self.empirical - float(self.formula)) / float(self.formula)

    def rows(self) -> List[list]:
        return [[self.u, self.v, self.trials, str(self.formula), f"{float(self.formula):.8g}",
                 "" if self.exhaustive is None else str(self.exhaustive),
                 "" if self.exhaustive_match is None else str(self.exhaustive_match).lower(),
                 _fmt(self.empirical), _fmt(self.relative_error)]]


def _paired_count(selected: Iterable[int]) -> int:
    chosen = set(selected)
    return sum(1 for b in chosen if b ^ 1 in chosen)


def pairs_expectation_oracle(u: int, v: int, trials: int = 0, seed: int = 0,
                             exhaustive: Optional[bool] = None) -> PairsReport:
    """Expected number of paired balls when ``2v`` of ``u`` pairs' ``2u`` balls are drawn.

    Balls ``2k`` and ``2k+1`` form a pair. ``exhaustive`` defaults to on for
    ``u <= 6``.
    """
    if not 1 <= v <= u:
        raise ConfigError(f"need 1 <= v <= u, got u={u}, v={v}")
    formula = Fraction(2 * v * (2 * v - 1), 2 * u - 1)
    if exhaustive is None:
        exhaustive = u <= 6
    exact = None
    if exhaustive:
        total = count = 0
        for subset in combinations(range(2 * u), 2 * v):
            total += _paired_count(subset)
            count += 1
        exact = Fraction(total, count)
    empirical = None
    if trials > 0:
        rng = numpy_rng(seed, "pairs")
        picks = np.argsort(rng.random((trials, 2 * u)), axis=1)[:, : 2 * v]
        mask = np.zeros((trials, 2 * u), dtype=bool)
        np.put_along_axis(mask, picks, True, axis=1)
        both = mask.reshape(trials, u, 2).all(axis=2)
        empirical = float(2 * both.sum(axis=1).mean())
    return PairsReport(u, v, trials, formula, exact, empirical)


# balls into bins

@dataclass
class BallsBinsReport:
    balls: int
    bins: int
    log_lambda: float
    trials: int
    mean_nonempty: float
    expected_nonempty: float
    success_fraction: float
    in_regime: bool

    columns = ("balls", "bins", "log_lambda", "trials", "mean_nonempty", "expected_nonempty",
               "relative_error", "success_fraction", "in_regime")

    @property
    def relative_error(self) -> float:
        return abs(self.mean_nonempty - self.expected_nonempty) / self.expected_nonempty

    def rows(self) -> List[list]:
        return [[self.balls, self.bins, self.log_lambda, self.trials, f"{self.mean_nonempty:.8g}",
                 f"{self.expected_nonempty:.8g}", f"{self.relative_error:.4g}",
                 f"{self.success_fraction:.6g}", str(self.in_regime).lower()]]


def balls_bins_oracle(balls: int, bins: int, log_lambda: float, trials: int, seed: int = 0) -> BallsBinsReport:
    """Throw ``balls`` into ``bins`` uniformly; count nonempty bins.

    Success means at least ``balls / log_lambda`` nonempty bins. The
    closed form is ``bins * (1 - (1 - 1/bins)**balls)``.
    """
    if balls < 1 or bins < 1 or trials < 1:
        raise ConfigError("balls, bins and trials must be positive")
    if log_lambda < 1:
        raise ConfigError(f"log_lambda must be >= 1, got {log_lambda}")
    rng = numpy_rng(seed, "balls")
    throws = np.sort(rng.integers(0, bins, size=(trials, balls)), axis=1)
    nonempty = (np.diff(throws, axis=1) != 0).sum(axis=1) + 1
    expected = bins * (1 - (1 - 1 / bins) ** balls)
    success = float((nonempty >= balls / log_lambda).mean())
    return BallsBinsReport(balls, bins, log_lambda, trials, float(nonempty.mean()), expected, success,
                           balls <= (bins + 2) / 2)


# transcript statistics

def survival_fractions(transcript: RunTranscript, d: int, n_epochs: int) -> Dict[int, Dict[int, int]]:
    """``{epoch: {party: V}}``: live merging onions per honest origin after each diagnostic round."""
    honest = transcript.honest
    result = {}
    for epoch in range(1, n_epochs + 1):
        rnd = epoch * d
        counts = {p: 0 for p in honest}
        for lin in transcript.lineages:
            if lin.kind != "merging" or lin.plan.origin not in counts:
                continue
            end = transcript.terminal.get(lin.index)
            if end is None or end[1] > rnd:
                counts[lin.plan.origin] += 1
        result[epoch] = counts
    return result


def surviving_spread(transcript: RunTranscript) -> int:
    """Max minus min over honest senders of their delivered merging onions."""
    delivered = Counter()
    for lin in transcript.lineages:
        if lin.kind == "merging" and transcript.terminal.get(lin.index, ("",))[0] == "delivered":
            delivered[lin.plan.origin] += 1
    values = [delivered[p] for p in transcript.honest]
    return max(values) - min(values) if values else 0


@dataclass
class CostReport:
    out: Dict[int, int]
    honest: List[int]
    per_round: List[int]
    formed: Dict[int, int]
    chi: Optional[int]

    columns = ("transmissions", "honest_parties", "onion_cost", "transmissions_per_honest",
               "max_formed", "bound", "bound_ok")

    @property
    def total(self) -> int:
        return sum(self.out.values())

    @property
    def onion_cost(self) -> Fraction:
        if not self.honest:
            return Fraction(0)
        return Fraction(sum(self.out[p] for p in self.honest), len(self.honest))

    @property
    def transmissions_per_honest(self) -> Fraction:
        return Fraction(self.total, len(self.honest)) if self.honest else Fraction(0)

    @property
    def max_formed(self) -> int:
        return max((self.formed[p] for p in self.honest), default=0)

    @property
    def bound(self) -> Optional[int]:
        return None if self.chi is None else 3 * self.chi

    @property
    def bound_ok(self) -> Optional[bool]:
        return None if self.chi is None else self.max_formed <= 3 * self.chi

    def rows(self) -> List[list]:
        return [[self.total, len(self.honest), f"{float(self.onion_cost):.6g}",
                 f"{float(self.transmissions_per_honest):.6g}", self.max_formed,
                 "" if self.bound is None else self.bound,
                 "" if self.bound_ok is None else str(self.bound_ok).lower()]]


def onion_cost(transcript: RunTranscript) -> CostReport:
    """Per-party transmission counts and the onion cost of one run.

    ``formed`` counts protocol onions only; abort messages are excluded.
    """
    n = transcript.n_parties
    out = {p: 0 for p in range(1, n + 1)}
    per_round = [0] * transcript.rounds
    for t in transcript.transmissions:
        out[t.sender] += 1
        per_round[t.round - 1] += 1
    formed = {p: 0 for p in range(1, n + 1)}
    for lin in transcript.lineages:
        if lin.kind != "abort":
            formed[lin.plan.origin] += 1
    return CostReport(out, transcript.honest, per_round, formed, transcript.header.get("chi"))

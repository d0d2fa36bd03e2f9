"""Adversary views and attack strategies.

A realistic strategy sees only :class:`AdversaryView`: the corrupted set,
every link (sender, receiver, handle) of every round, and what corrupted
parties learn by peeling. Oracle strategies additionally receive an
:class:`OracleView` built from ground truth, which classifies each onion
on the wire as a singleton or a member of a mergeable pair.

All strategies drop only onions sent by or addressed to a corrupted party;
the engine rejects anything else.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

from .errors import ConfigError

__all__ = [
    "LinkObservation",
    "PeelObservation",
    "AdversaryView",
    "OnionClass",
    "OracleView",
    "Strategy",
    "passive_strategy",
    "isolating_strategy",
    "uniform_isolating_strategy",
    "sender_targeting_strategy",
    "singleton_dropping_strategy",
    "pair_dropping_strategy",
    "budgeted_singleton_strategy",
    "corruption_count",
    "make_strategy",
]


class LinkObservation(NamedTuple):
    sender: int
    receiver: int
    handle: int


class PeelObservation(NamedTuple):
    round: int
    party: int
    handle_in: int
    next_party: Optional[int]
    nonce: Optional[int]
    handle_out: Optional[int]
    message: Optional[str]


@dataclass
class AdversaryView:
    n_parties: int
    corrupted: FrozenSet[int]
    links: List[List[LinkObservation]] = field(default_factory=list)
    peels: List[PeelObservation] = field(default_factory=list)
    received_counts: Optional[List[int]] = None

    def droppable(self, link: LinkObservation) -> bool:
        return link.sender in self.corrupted or link.receiver in self.corrupted


class OnionClass(NamedTuple):
    category: str  # "singleton" or "pair"
    partner: Optional[int]
    token: int  # stable across layers of the same onion
    kind: str  # "merging" or "checkpoint"
    merge_round: Optional[int]


class OracleView:
    """Ground-truth classification of indistinguishable onions on the wire this round."""

    def __init__(self, rnd: int, classes: Dict[int, OnionClass]) -> None:
        self.round = rnd
        self._classes = classes

    def classify(self, handle: int) -> Optional[OnionClass]:
        return self._classes.get(handle)

    def singletons(self) -> List[int]:
        return [h for h, c in self._classes.items() if c.category == "singleton"]

    def pairs(self) -> List[Tuple[int, int]]:
        return [(h, c.partner) for h, c in self._classes.items()
                if c.category == "pair" and c.partner is not None and h < c.partner]

    def __len__(self) -> int:
        return len(self._classes)


def corruption_count(n_parties: int, kappa: float) -> int:
    return math.floor(Fraction(str(kappa)) * n_parties)


class Strategy:
    """Base class: corrupts ``floor(kappa*N)`` parties, drops nothing."""

    name = "passive"
    mode = "realistic"

    def protected(self) -> Set[int]:
        """Parties that must stay honest (attack targets)."""
        return set()

    def setup(self, n_parties: int, kappa: float, corrupt_rng: random.Random, rng: random.Random,
              protocol: Any = None) -> FrozenSet[int]:
        candidates = [p for p in range(1, n_parties + 1) if p not in self.protected()]
        count = min(corruption_count(n_parties, kappa), len(candidates))
        self.corrupted = frozenset(corrupt_rng.sample(candidates, count))
        self.rng = rng
        self.protocol = protocol
        return self.corrupted

    def decide(self, view: AdversaryView, rnd: int, oracle: Optional[OracleView] = None) -> Iterable[int]:
        return ()

    def flags(self, view: AdversaryView) -> Dict[str, Any]:
        return {}

    def describe(self) -> Dict[str, Any]:
        return {"name": self.name, "mode": self.mode}


def passive_strategy() -> Strategy:
    return Strategy()


class IsolatingStrategy(Strategy):
    name = "isolating"

    def __init__(self, target: int) -> None:
        self.target = target

    def protected(self):
        return {self.target}

    def setup(self, *args, **kw):
        self.sent = 0
        self.dropped = 0
        return super().setup(*args, **kw)

    def decide(self, view, rnd, oracle=None):
        drops = []
        for link in view.links[-1]:
            if link.sender == self.target:
                self.sent += 1
                if link.receiver in view.corrupted:
                    drops.append(link.handle)
        self.dropped += len(drops)
        return drops

    def flags(self, view):
        return {"target": self.target, "isolated": self.dropped == self.sent,
                "target_transmissions": self.sent, "target_drops": self.dropped}

    def describe(self):
        return {"name": self.name, "mode": self.mode, "target": self.target}


def isolating_strategy(target: int) -> Strategy:
    return IsolatingStrategy(target)


class UniformIsolatingStrategy(Strategy):
    """Samples its target uniformly, then behaves exactly like :class:`IsolatingStrategy`."""

    name = "uniform_isolating"

    def setup(self, n_parties, kappa, corrupt_rng, rng, protocol=None):
        self.inner = IsolatingStrategy(sample_target(n_parties, rng))
        return self.inner.setup(n_parties, kappa, corrupt_rng, rng, protocol)

    def decide(self, view, rnd, oracle=None):
        return self.inner.decide(view, rnd, oracle)

    def flags(self, view):
        return self.inner.flags(view)


def sample_target(n_parties: int, rng: random.Random) -> int:
    return rng.randint(1, n_parties)


def uniform_isolating_strategy() -> Strategy:
    return UniformIsolatingStrategy()


class SenderTargetingStrategy(Strategy):
    """Drops the target's round-1 onions at corrupted receivers, then in round 2
    every onion that may be one of them (anything sent by a party that got an
    onion from the target in round 1) heading to a corrupted party."""

    name = "sender_targeting"

    def __init__(self, target: int) -> None:
        self.target = target

    def protected(self):
        return {self.target}

    def setup(self, *args, **kw):
        self.suspects: Set[int] = set()
        self.dropped_by_round = {1: 0, 2: 0}
        return super().setup(*args, **kw)

    def decide(self, view, rnd, oracle=None):
        links = view.links[-1]
        if rnd == 1:
            drops = []
            for link in links:
                if link.sender != self.target:
                    continue
                if link.receiver in view.corrupted:
                    drops.append(link.handle)
                else:
                    self.suspects.add(link.receiver)
            self.dropped_by_round[1] = len(drops)
            return drops
        if rnd == 2:
            drops = [l.handle for l in links if l.sender in self.suspects and l.receiver in view.corrupted]
            self.dropped_by_round[2] = len(drops)
            return drops
        return ()

    def flags(self, view):
        return {"target": self.target, "round1_drops": self.dropped_by_round[1],
                "round2_drops": self.dropped_by_round[2], "suspects": sorted(self.suspects)}

    def describe(self):
        return {"name": self.name, "mode": self.mode, "target": self.target}


def sender_targeting_strategy(target: int) -> Strategy:
    return SenderTargetingStrategy(target)


class SingletonDroppingStrategy(Strategy):
    """Drops a random ``alpha[l]`` share of the singletons alive at the start of epoch ``l``.

    The epoch's quota is spent over the epoch's rounds, on whichever of the
    selected singletons currently touch a corrupted party; whatever cannot
    be reached by the end of the epoch is forgone. ``realized`` records the
    achieved fraction per epoch.
    """

    name = "singleton_dropping"
    mode = "oracle"

    def __init__(self, alpha_schedule: Sequence[float]) -> None:
        for a in alpha_schedule:
            if not 0 <= a <= 1:
                raise ConfigError(f"drop fractions must lie in [0, 1], got {a}")
        self.alpha = list(alpha_schedule)

    def setup(self, n_parties, kappa, corrupt_rng, rng, protocol=None):
        if protocol is not None and len(self.alpha) != protocol.n_epochs:
            raise ConfigError(f"schedule has {len(self.alpha)} entries, protocol runs {protocol.n_epochs} epochs")
        self.realized: List[float] = []
        self.snapshot: Set[int] = set()
        self.quota = 0
        self.dropped_tokens: Set[int] = set()
        self._spent = 0
        self._size: Optional[int] = None
        return super().setup(n_parties, kappa, corrupt_rng, rng, protocol)

    def decide(self, view, rnd, oracle=None):
        if oracle is None:
            raise ConfigError("singleton dropping needs the oracle view")
        d = self.protocol.d
        epoch = (rnd - 1) // d + 1
        if epoch > len(self.alpha):
            return ()
        if (rnd - 1) % d == 0:
            self._close_epoch()
            self.snapshot = {oracle.classify(h).token for h in oracle.singletons()}
            self._size = len(self.snapshot)
            self.quota = round(self.alpha[epoch - 1] * self._size)
            self._spent = 0
        if self._spent >= self.quota:
            return ()
        candidates = []
        for link in view.links[-1]:
            cls = oracle.classify(link.handle)
            if cls is not None and cls.token in self.snapshot and view.droppable(link):
                candidates.append((link.handle, cls.token))
        self.rng.shuffle(candidates)
        picked = candidates[: self.quota - self._spent]
        self._spent += len(picked)
        for _, token in picked:
            self.snapshot.discard(token)
            self.dropped_tokens.add(token)
        return [h for h, _ in picked]

    def _close_epoch(self) -> None:
        if self._size is not None:
            self.realized.append(self._spent / self._size if self._size else 0.0)
        self._size = None

    def flags(self, view):
        self._close_epoch()
        return {"realized_fractions": list(self.realized), "dropped_onions": len(self.dropped_tokens),
                "schedule": list(self.alpha)}

    def describe(self):
        return {"name": self.name, "mode": self.mode, "schedule": list(self.alpha)}


def singleton_dropping_strategy(alpha_schedule: Sequence[float]) -> Strategy:
    return SingletonDroppingStrategy(alpha_schedule)


class PairDroppingStrategy(Strategy):
    """Drops every mergeable pair whose members reach a corrupted party in the
    round they are due to merge (the first round of a merging epoch)."""

    name = "pair_dropping"
    mode = "oracle"

    def setup(self, *args, **kw):
        self.pairs_dropped = 0
        return super().setup(*args, **kw)

    def decide(self, view, rnd, oracle=None):
        if oracle is None:
            raise ConfigError("pair dropping needs the oracle view")
        receiver = {link.handle: link.receiver for link in view.links[-1]}
        drops = []
        for a, b in oracle.pairs():
            if oracle.classify(a).merge_round != rnd:
                continue
            if receiver[a] in view.corrupted and receiver[b] in view.corrupted:
                drops.extend((a, b))
                self.pairs_dropped += 1
        return drops

    def flags(self, view):
        return {"pairs_dropped": self.pairs_dropped}


def pair_dropping_strategy() -> Strategy:
    return PairDroppingStrategy()


class BudgetedSingletonStrategy(Strategy):
    """Comparison baseline for pair dropping: spends a fixed budget of drops on
    merging singletons (never on pair members), as early as they become reachable."""

    name = "budgeted_singleton"
    mode = "oracle"

    def __init__(self, budget: int) -> None:
        if budget < 0:
            raise ConfigError(f"budget must be >= 0, got {budget}")
        self.budget = budget

    def setup(self, *args, **kw):
        self.spent = 0
        return super().setup(*args, **kw)

    def decide(self, view, rnd, oracle=None):
        if oracle is None:
            raise ConfigError("budgeted singleton dropping needs the oracle view")
        if self.spent >= self.budget:
            return ()
        candidates = []
        for link in view.links[-1]:
            cls = oracle.classify(link.handle)
            if (cls is not None and cls.category == "singleton" and cls.kind == "merging"
                    and view.droppable(link)):
                candidates.append(link.handle)
        self.rng.shuffle(candidates)
        picked = candidates[: self.budget - self.spent]
        self.spent += len(picked)
        return picked

    def flags(self, view):
        return {"budget": self.budget, "spent": self.spent}

    def describe(self):
        return {"name": self.name, "mode": self.mode, "budget": self.budget}


def budgeted_singleton_strategy(budget: int) -> Strategy:
    return BudgetedSingletonStrategy(budget)


def make_strategy(name: str, **params: Any) -> Strategy:
    """Strategy lookup by name, for configuration files and the CLI."""
    name = name.lower()
    if name == "passive":
        return passive_strategy()
    if name == "isolating":
        return isolating_strategy(int(params["target"]))
    if name == "uniform_isolating":
        return uniform_isolating_strategy()
    if name == "sender_targeting":
        return sender_targeting_strategy(int(params["target"]))
    if name == "singleton_dropping":
        return singleton_dropping_strategy([float(a) for a in params["schedule"]])
    if name == "pair_dropping":
        return pair_dropping_strategy()
    if name == "budgeted_singleton":
        return budgeted_singleton_strategy(int(params["budget"]))
    raise ConfigError(f"unknown adversary {name!r}")

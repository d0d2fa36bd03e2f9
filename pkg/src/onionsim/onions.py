"""Ideal onion functionality.

An onion is never materialised as ciphertext. The registry keeps the full
routing plan of every onion and hands out opaque 128-bit handles, one fresh
handle per layer. Whoever holds a handle learns only what ``proc_onion``
returns for it, which is exactly what peeling a real layer would reveal.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Tuple, Union

from .errors import OnionError
from .keys import EMPTY_NONCE

__all__ = [
    "DUMMY",
    "ABORT",
    "RoutingPlan",
    "Relay",
    "Deliver",
    "NotIntended",
    "NOT_INTENDED",
    "OnionRecord",
    "Lineage",
    "OnionRegistry",
    "random_nonce",
]

DUMMY: Optional[str] = None
"""The empty message carried by checkpoint onions."""

ABORT = "\x00ABORT"
"""Reserved payload of abort messages."""


def random_nonce(rng: random.Random) -> int:
    """Uniform 64-bit nonce, never the reserved empty value."""
    while True:
        value = rng.getrandbits(64)
        if value != EMPTY_NONCE:
            return value


@dataclass(frozen=True)
class RoutingPlan:
    """Arguments of one onion formation.

    ``path`` lists intermediaries followed by the final recipient and
    ``nonces[k]`` is revealed by whoever peels layer ``k`` (the party at
    ``path[k]``), so ``len(nonces) == len(path) - 1``.
    """

    message: Optional[str]
    path: Tuple[int, ...]
    nonces: Tuple[int, ...]
    origin: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "path", tuple(self.path))
        object.__setattr__(self, "nonces", tuple(self.nonces))
        if not self.path:
            raise OnionError("routing path must not be empty")
        if len(self.nonces) != len(self.path) - 1:
            raise OnionError(f"plan has {len(self.path)} hops but {len(self.nonces)} nonces")

    @property
    def recipient(self) -> int:
        return self.path[-1]


class Relay(NamedTuple):
    next_party: int
    nonce: int
    handle: int


class Deliver(NamedTuple):
    message: Optional[str]


class NotIntended:
    __slots__ = ()

    def __repr__(self) -> str:
        return "NOT_INTENDED"


NOT_INTENDED = NotIntended()

PeelResult = Union[Relay, Deliver, NotIntended]


@dataclass(frozen=True)
class OnionRecord:
    lineage: int
    remaining_path: Tuple[int, ...]
    remaining_nonces: Tuple[int, ...]
    message: Optional[str]
    origin: int
    hop_index: int


@dataclass(frozen=True)
class Lineage:
    """Ground truth for one onion across all of its layers."""

    index: int
    plan: RoutingPlan
    kind: str
    info: Dict[str, Any] = field(default_factory=dict)


class OnionRegistry:
    def __init__(self, rng: random.Random) -> None:
        self._rng = rng
        self._live: Dict[int, Tuple[int, int]] = {}  # handle -> (lineage, hop)
        self._issued: set = set()
        self.lineages: List[Lineage] = []
        self.handle_lineage: Dict[int, int] = {}
        self.formed: Counter = Counter()

    def _fresh_handle(self) -> int:
        while True:
            handle = self._rng.getrandbits(128)
            if handle not in self._issued:
                self._issued.add(handle)
                return handle

    def form_onion(self, plan: RoutingPlan, kind: str = "plain", **info: Any) -> int:
        lineage = Lineage(len(self.lineages), plan, kind, info)
        self.lineages.append(lineage)
        handle = self._fresh_handle()
        self._live[handle] = (lineage.index, 0)
        self.handle_lineage[handle] = lineage.index
        self.formed[plan.origin] += 1
        return handle

    def proc_onion(self, holder: int, handle: int) -> PeelResult:
        try:
            lid, hop = self._live[handle]
        except KeyError:
            raise OnionError(f"handle {handle:#x} is unknown or already processed") from None
        plan = self.lineages[lid].plan
        if plan.path[hop] != holder:
            return NOT_INTENDED
        del self._live[handle]
        if hop == len(plan.path) - 1:
            return Deliver(plan.message)
        new = self._fresh_handle()
        self._live[new] = (lid, hop + 1)
        self.handle_lineage[new] = lid
        return Relay(plan.path[hop + 1], plan.nonces[hop], new)

    def is_live(self, handle: int) -> bool:
        return handle in self._live

    def record(self, handle: int) -> OnionRecord:
        lid, hop = self._live[handle]
        plan = self.lineages[lid].plan
        return OnionRecord(lid, plan.path[hop:], plan.nonces[hop:], plan.message, plan.origin, hop)

    def lineage_of(self, handle: int) -> Lineage:
        return self.lineages[self.handle_lineage[handle]]

    def live_handles(self) -> List[int]:
        return list(self._live)

"""Simple inputs: every party sends one message to one recipient.

The recipients form a permutation of ``1..N``, so every party also receives
exactly one message when nothing is lost.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .errors import ConfigError

__all__ = ["SimpleInput", "random_simple_input"]


@dataclass(frozen=True)
class SimpleInput:
    """``recipients[i-1]`` and ``messages[i-1]`` belong to party ``i``."""

    recipients: Tuple[int, ...]
    messages: Tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "recipients", tuple(int(r) for r in self.recipients))
        object.__setattr__(self, "messages", tuple(self.messages))
        n = len(self.recipients)
        if sorted(self.recipients) != list(range(1, n + 1)):
            raise ConfigError("recipients must be a permutation of 1..N")
        if len(self.messages) != n:
            raise ConfigError(f"{n} recipients but {len(self.messages)} messages")
        if len(set(self.messages)) != n:
            raise ConfigError("messages must be distinct")
        for m in self.messages:
            if not isinstance(m, str) or not m or m.startswith("\x00"):
                raise ConfigError(f"invalid message {m!r}")

    @classmethod
    def from_permutation(cls, recipients: Sequence[int], messages: Optional[Sequence[str]] = None) -> "SimpleInput":
        if messages is None:
            messages = [f"m{i}" for i in range(1, len(recipients) + 1)]
        return cls(tuple(recipients), tuple(messages))

    @property
    def n_parties(self) -> int:
        return len(self.recipients)

    def recipient(self, party: int) -> int:
        return self.recipients[party - 1]

    def message(self, party: int) -> str:
        return self.messages[party - 1]

    def sender_of(self, recipient: int) -> int:
        return self.recipients.index(recipient) + 1

    def as_dict(self):
        return {"recipients": list(self.recipients), "messages": list(self.messages)}


def random_simple_input(n_parties: int, rng: random.Random) -> SimpleInput:
    perm = list(range(1, n_parties + 1))
    rng.shuffle(perm)
    return SimpleInput.from_permutation(perm)
